import csv

import pytest

from tdroute.cli import main, parse_time


@pytest.fixture(scope="module")
def instance(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "inst.tdg"
    assert main(["generate", str(path), "--nodes", "600", "--seed", "3"]) == 0
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_time():
    assert parse_time("90") == 900
    assert parse_time("7:30") == 270000
    assert parse_time("0:00:01") == 10


def test_stats(capsys, instance):
    code, out, _ = run(capsys, "stats", instance)
    assert code == 0 and "nodes 600" in out


def test_same_node_query(capsys, instance):
    code, out, _ = run(capsys, "query", instance, "--s", 4, "--t", 4, "--tau", 0)
    assert code == 0
    assert "arrive 0:00:00.0" in out and "path (empty)" in out


@pytest.mark.parametrize("algo", ["exact", "freeflow", "tds", "tds-a"])
def test_query_with_check(capsys, instance, algo):
    code, out, _ = run(capsys, "query", instance, "--s", 1, "--t", 500, "--tau", "8:00", "--algo", algo, "--check")
    assert code == 0 and "abs_err" in out


def test_profile_reports_144_samples(capsys, instance, tmp_path):
    code, out, _ = run(capsys, "profile", instance, "--s", 1, "--t", 500, "--rate", 600, "--cache", tmp_path)
    assert code == 0
    assert "144 samples" in out
    assert sum(1 for ln in out.splitlines() if ln.startswith("  ")) == 144
    assert "distinct paths" in out and "error bound" in out


def test_bench_is_byte_identical(capsys, instance, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["bench", instance, "--algo", "freeflow,tds,tds-a", "--queries", 300, "--seed", 7, "--cache", tmp_path]
    assert run(capsys, *args, "-o", a)[0] == 0
    assert run(capsys, *args, "-o", b, "--workers", 2)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a_summary.csv").read_bytes() == (tmp_path / "b_summary.csv").read_bytes()
    rows = list(csv.reader(open(a)))
    assert rows[0] == "query_id,s,t,tau,algo,exact,approx,abs_err,rel_err,time_us".split(",")
    assert len(rows) == 1 + 900


def test_rank_bench(capsys, instance, tmp_path):
    out = tmp_path / "r.csv"
    code, text, _ = run(capsys, "bench", instance, "--rank", 2, "--algo", "tds", "-o", out)
    assert code == 0 and "rank queries" in text
    rows = list(csv.reader(open(tmp_path / "r_summary.csv")))
    assert rows[0][:2] == ["rank", "algo"] and len(rows) > 5


def test_exhaustive(capsys, instance, tmp_path):
    code, out, _ = run(capsys, "exhaustive", instance, "--node-stride", 100, "--time-stride", "2:00",
                       "-o", tmp_path / "o.csv")
    assert code == 0 and "outlier" in out
    code, _, err = run(capsys, "exhaustive", instance, "--node-stride", 1, "--budget", 10)
    assert code == 1 and "budget" in err


def test_preprocess_with_cache(capsys, instance, tmp_path):
    code, out, _ = run(capsys, "preprocess", instance, "--cache", tmp_path, "--windows", "7:00-9:00,17:00-19:00")
    assert code == 0 and out.count("window") == 2
    assert len(list(tmp_path.glob("ch-*.npz"))) == 3


def test_instance_is_not_modified(capsys, instance):
    before = instance.read_bytes()
    run(capsys, "query", instance, "--s", 1, "--t", 2, "--tau", 0)
    assert instance.read_bytes() == before


@pytest.mark.parametrize(
    "argv",
    [[], ["query"], ["query", "x.tdg", "--s", "1"], ["bench", "x.tdg", "--workers", "0"],
     ["query", "x.tdg", "--s", "1", "--t", "2", "--tau", "noon"], ["preprocess", "x.tdg", "--windows", "9:00-7:00"],
     ["query", "x.tdg", "--s", "1", "--t", "2", "--tau", "0", "--stretch", "0.5"]],
)
def test_usage_errors_exit_2(capsys, argv):
    assert main(argv) == 2


def test_validation_errors_exit_1(capsys, instance, tmp_path):
    assert run(capsys, "stats", tmp_path / "missing.tdg")[0] == 1
    bad = tmp_path / "bad.tdg"
    bad.write_text("tdgraph v1 2 1\n0 0 1 0 5\n")
    code, _, err = run(capsys, "stats", bad)
    assert code == 1 and "self-loop" in err
    assert run(capsys, "query", instance, "--s", 1, "--t", 9999, "--tau", 0)[0] == 1
    assert run(capsys, "bench", instance, "--algo", "dijkstra")[0] == 1
    assert run(capsys, "profile", instance, "--s", 1, "--t", 2, "--rate", 7)[0] == 1
