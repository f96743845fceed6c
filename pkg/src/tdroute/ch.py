"""Contraction hierarchies over one scalar weighting.

Preprocessing contracts nodes in order of ``edge difference + contracted
neighbours`` (lazy updates, ties by node id) with settle-bounded witness
searches. A missed witness only adds a redundant shortcut, so queries stay
exact. Every hierarchy edge keeps its two children (and middle node) or,
for input edges, the original edge id, so paths unpack to input edges.
"""

from __future__ import annotations

import hashlib
import heapq
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit, types
from numba.typed import List

CACHE_FORMAT = 1

# columns of the working edge table used during contraction
_TAIL, _HEAD, _W, _C1, _C2, _ORIG, _MID, _ALIVE, _ONEXT, _INEXT = range(10)
_NCOL = 10
_INF = np.iinfo(np.int64).max


@dataclass
class ScalarGraph:
    """Directed graph with positive integer weights and original-edge back-references."""

    node_count: int
    tail: np.ndarray
    head: np.ndarray
    weight: np.ndarray
    orig: Optional[np.ndarray] = None

    def __post_init__(self):
        self.tail = np.ascontiguousarray(self.tail, dtype=np.int64)
        self.head = np.ascontiguousarray(self.head, dtype=np.int64)
        self.weight = np.ascontiguousarray(self.weight, dtype=np.int64)
        if self.orig is None:
            self.orig = np.arange(self.tail.size, dtype=np.int64)
        self.orig = np.ascontiguousarray(self.orig, dtype=np.int64)
        m = self.tail.size
        if not (self.head.size == self.weight.size == self.orig.size == m):
            raise ValueError("edge arrays have inconsistent lengths")
        if m and (self.tail.min() < 0 or self.head.min() < 0
                  or max(self.tail.max(), self.head.max()) >= self.node_count):
            raise ValueError("edge endpoint out of range")
        if np.any(self.weight <= 0):
            raise ValueError("weights must be positive")
        if np.any(self.orig < 0):
            raise ValueError("original-edge ids must be non-negative")

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(f"ch{CACHE_FORMAT}:{self.node_count}:".encode())
        for arr in (self.tail, self.head, self.weight, self.orig):
            h.update(arr.tobytes())
        return h.hexdigest()


# ---------------------------------------------------------------- contraction kernels


@njit(cache=True)
def _add_edge(E, count, out_first, in_first, u, v, w, c1, c2, orig, mid):
    if count == E.shape[0]:
        bigger = np.empty((E.shape[0] * 2, _NCOL), dtype=np.int64)
        bigger[:count] = E[:count]
        E = bigger
    E[count, _TAIL] = u
    E[count, _HEAD] = v
    E[count, _W] = w
    E[count, _C1] = c1
    E[count, _C2] = c2
    E[count, _ORIG] = orig
    E[count, _MID] = mid
    E[count, _ALIVE] = 1
    E[count, _ONEXT] = out_first[u]
    E[count, _INEXT] = in_first[v]
    out_first[u] = count
    in_first[v] = count
    return E, count + 1


@njit(cache=True)
def _collect(E, first, nextcol, endcol, v, contracted, best, stamp, cur):
    k = 0
    e = first[v]
    while e != -1:
        if E[e, _ALIVE] == 1:
            x = E[e, endcol]
            if x != v and not contracted[x]:
                if stamp[x] != cur:
                    stamp[x] = cur
                    best[x] = e
                    k += 1
                elif E[e, _W] < E[best[x], _W]:
                    best[x] = e
        e = E[e, nextcol]
    nodes = np.empty(k, dtype=np.int64)
    edges = np.empty(k, dtype=np.int64)
    weights = np.empty(k, dtype=np.int64)
    i = 0
    e = first[v]
    while e != -1:
        if E[e, _ALIVE] == 1:
            x = E[e, endcol]
            if x != v and not contracted[x] and stamp[x] == cur:
                stamp[x] = cur - 1  # emit each neighbour once
                nodes[i] = x
                edges[i] = best[x]
                weights[i] = E[best[x], _W]
                i += 1
        e = E[e, nextcol]
    return nodes, edges, weights


@njit(cache=True)
def _witness(E, out_first, contracted, src, skip, limit, max_settled, dist, stamp, cur):
    dist[src] = 0
    stamp[src] = cur
    heap = [(np.int64(0), src)]
    settled = 0
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        if d > limit:
            break
        settled += 1
        if settled > max_settled:
            break
        e = out_first[u]
        while e != -1:
            if E[e, _ALIVE] == 1:
                x = E[e, _HEAD]
                if x != skip and not contracted[x]:
                    nd = d + E[e, _W]
                    if nd <= limit and (stamp[x] != cur or nd < dist[x]):
                        stamp[x] = cur
                        dist[x] = nd
                        heapq.heappush(heap, (nd, x))
            e = E[e, _ONEXT]


@njit(cache=True)
def _process(E, count, out_first, in_first, contracted, v, do_add, max_settled,
             dist, wstamp, counters, best, nstamp):
    # counters[0]: witness stamp, counters[1]: neighbour stamp
    counters[1] += 2
    in_n, in_e, in_w = _collect(E, in_first, _INEXT, _TAIL, v, contracted, best, nstamp, counters[1])
    counters[1] += 2
    out_n, out_e, out_w = _collect(E, out_first, _ONEXT, _HEAD, v, contracted, best, nstamp, counters[1])
    added = 0
    for i in range(in_n.size):
        u = in_n[i]
        limit = -1
        for j in range(out_n.size):
            if out_n[j] != u and in_w[i] + out_w[j] > limit:
                limit = in_w[i] + out_w[j]
        if limit < 0:
            continue
        counters[0] += 1
        cur = counters[0]
        _witness(E, out_first, contracted, u, v, limit, max_settled, dist, wstamp, cur)
        for j in range(out_n.size):
            x = out_n[j]
            if x == u:
                continue
            via = in_w[i] + out_w[j]
            if wstamp[x] == cur and dist[x] <= via:
                continue
            added += 1
            if do_add:
                e = out_first[u]
                dominated = False
                while e != -1:
                    if E[e, _ALIVE] == 1 and E[e, _HEAD] == x:
                        if E[e, _W] <= via:
                            dominated = True
                        else:
                            E[e, _ALIVE] = 0
                    e = E[e, _ONEXT]
                if not dominated:
                    E, count = _add_edge(E, count, out_first, in_first, u, x, via,
                                         in_e[i], out_e[j], -1, v)
    return E, count, added, in_n.size + out_n.size, in_n, out_n


@njit(cache=True)
def _contract_all(n, tail, head, weight, orig, sim_limit, contract_limit):
    m = tail.size
    E = np.empty((max(16, 2 * m + 16), _NCOL), dtype=np.int64)
    out_first = np.full(n, -1, dtype=np.int64)
    in_first = np.full(n, -1, dtype=np.int64)
    count = 0
    for i in range(m):
        E, count = _add_edge(E, count, out_first, in_first, tail[i], head[i], weight[i], -1, -1, orig[i], -1)
    contracted = np.zeros(n, dtype=np.bool_)
    dist = np.zeros(n, dtype=np.int64)
    wstamp = np.zeros(n, dtype=np.int64)
    best = np.zeros(n, dtype=np.int64)
    nstamp = np.zeros(n, dtype=np.int64)
    counters = np.zeros(2, dtype=np.int64)
    deleted = np.zeros(n, dtype=np.int64)
    prio = np.zeros(n, dtype=np.int64)
    rank = np.full(n, -1, dtype=np.int64)

    heap = [(np.int64(0), np.int64(0))]
    heap.pop()
    for v in range(n):
        E, count, added, deg, _, _ = _process(E, count, out_first, in_first, contracted, v, False,
                                              sim_limit, dist, wstamp, counters, best, nstamp)
        prio[v] = added - deg
        heap.append((prio[v], np.int64(v)))
    heapq.heapify(heap)

    level = 0
    while len(heap) > 0:
        p, v = heapq.heappop(heap)
        if contracted[v] or p != prio[v]:
            continue
        E, count, added, deg, _, _ = _process(E, count, out_first, in_first, contracted, v, False,
                                              sim_limit, dist, wstamp, counters, best, nstamp)
        newp = added - deg + deleted[v]
        if newp != p:
            prio[v] = newp
            if len(heap) > 0 and (newp, v) > heap[0]:
                heapq.heappush(heap, (newp, v))
                continue
        E, count, added, deg, in_n, out_n = _process(E, count, out_first, in_first, contracted, v, True,
                                                     contract_limit, dist, wstamp, counters, best, nstamp)
        contracted[v] = True
        rank[v] = level
        level += 1
        for nbrs in (in_n, out_n):
            for x in nbrs:
                if contracted[x]:
                    continue
                deleted[x] += 1
                E, count, added, deg, _, _ = _process(E, count, out_first, in_first, contracted, x, False,
                                                      sim_limit, dist, wstamp, counters, best, nstamp)
                np_ = added - deg + deleted[x]
                if np_ != prio[x]:
                    prio[x] = np_
                    heapq.heappush(heap, (np_, x))
    return E[:count].copy(), rank


# ---------------------------------------------------------------- query kernels


@njit(cache=True, nogil=True)
def _unpack_into(out, ch_c1, ch_c2, ch_orig, e, seen, ver):
    stack = [e]
    while len(stack) > 0:
        x = stack.pop()
        if seen[x] == ver:
            continue
        seen[x] = ver
        if ch_orig[x] >= 0:
            out.append(ch_orig[x])
        else:
            stack.append(ch_c2[x])
            stack.append(ch_c1[x])


@njit(cache=True, nogil=True)
def _search_pair(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
                 s, t, distf, distb, parf, parb, stf, stb, ver, exhaustive):
    distf[s] = 0
    stf[s] = ver
    parf[s] = -1
    distb[t] = 0
    stb[t] = ver
    parb[t] = -1
    hf = [(np.int64(0), s)]
    hb = [(np.int64(0), t)]
    best = _INF
    meet = -1
    while len(hf) > 0 or len(hb) > 0:
        minf = hf[0][0] if len(hf) > 0 else _INF
        minb = hb[0][0] if len(hb) > 0 else _INF
        if not exhaustive and minf >= best and minb >= best:
            break
        if minf <= minb:
            d, u = heapq.heappop(hf)
            if d > distf[u]:
                continue
            if stb[u] == ver and d + distb[u] < best:
                best = d + distb[u]
                meet = u
            for i in range(up_first[u], up_first[u + 1]):
                x = up_head[i]
                nd = d + up_w[i]
                if stf[x] != ver or nd < distf[x]:
                    stf[x] = ver
                    distf[x] = nd
                    parf[x] = up_e[i]
                    heapq.heappush(hf, (nd, x))
        else:
            d, u = heapq.heappop(hb)
            if d > distb[u]:
                continue
            if stf[u] == ver and d + distf[u] < best:
                best = d + distf[u]
                meet = u
            for i in range(dn_first[u], dn_first[u + 1]):
                x = dn_head[i]
                nd = d + dn_w[i]
                if stb[x] != ver or nd < distb[x]:
                    stb[x] = ver
                    distb[x] = nd
                    parb[x] = dn_e[i]
                    heapq.heappush(hb, (nd, x))
    return best, meet


@njit(cache=True, nogil=True)
def _via_path(out, meet, s, t, parf, parb, ch_tail, ch_head, ch_c1, ch_c2, ch_orig, seen, ver):
    fwd = List.empty_list(types.int64)
    u = meet
    while u != s:
        e = parf[u]
        fwd.append(e)
        u = ch_tail[e]
    for i in range(len(fwd) - 1, -1, -1):
        _unpack_into(out, ch_c1, ch_c2, ch_orig, fwd[i], seen, ver)
    u = meet
    while u != t:
        e = parb[u]
        _unpack_into(out, ch_c1, ch_c2, ch_orig, e, seen, ver)
        u = ch_head[e]


@njit(cache=True, nogil=True)
def _to_array(lst):
    arr = np.empty(len(lst), dtype=np.int64)
    for i in range(len(lst)):
        arr[i] = lst[i]
    return arr


@njit(cache=True, nogil=True)
def _query(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
           ch_tail, ch_head, ch_c1, ch_c2, ch_orig,
           s, t, distf, distb, parf, parb, stf, stb, ver, seen):
    best, meet = _search_pair(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
                              s, t, distf, distb, parf, parb, stf, stb, ver, False)
    out = List.empty_list(types.int64)
    if meet < 0:
        return -1, _to_array(out)
    _via_path(out, meet, s, t, parf, parb, ch_tail, ch_head, ch_c1, ch_c2, ch_orig, seen, ver)
    return best, _to_array(out)


@njit(cache=True, nogil=True)
def _unpack_path(meet, s, t, parf, parb, ch_tail, ch_head, ch_c1, ch_c2, ch_orig, seen, ver):
    out = List.empty_list(types.int64)
    _via_path(out, meet, s, t, parf, parb, ch_tail, ch_head, ch_c1, ch_c2, ch_orig, seen, ver)
    return _to_array(out)


@njit(cache=True, nogil=True)
def _alternatives(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
                  ch_tail, ch_head, ch_c1, ch_c2, ch_orig,
                  s, t, stretch, distf, distb, parf, parb, stf, stb, ver, seen):
    best, meet = _search_pair(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
                              s, t, distf, distb, parf, parb, stf, stb, ver, True)
    out = List.empty_list(types.int64)
    if meet < 0:
        return -1, 0, _to_array(out)
    bound = stretch * best
    vias = 0
    # every node in both complete upward spaces is a meeting node candidate
    n = stf.size
    for v in range(n):
        if stf[v] == ver and stb[v] == ver and distf[v] + distb[v] <= bound:
            vias += 1
            _via_path(out, v, s, t, parf, parb, ch_tail, ch_head, ch_c1, ch_c2, ch_orig, seen, ver)
    return best, vias, _to_array(out)


@njit(cache=True, nogil=True)
def _distance_table(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
                    sources, targets, distf, distb, parf, parb, stf, stb, ver):
    out = np.full((sources.size, targets.size), -1, dtype=np.int64)
    for i in range(sources.size):
        for j in range(targets.size):
            if sources[i] == targets[j]:
                out[i, j] = 0
                continue
            ver += 1
            best, meet = _search_pair(up_first, up_head, up_w, up_e, dn_first, dn_head, dn_w, dn_e,
                                      sources[i], targets[j], distf, distb, parf, parb, stf, stb, ver, False)
            if meet >= 0:
                out[i, j] = best
    return out, ver


# ---------------------------------------------------------------- index


@dataclass
class ChPath:
    distance: int
    edges: np.ndarray


class _Scratch:
    def __init__(self, n: int, m: int):
        self.distf = np.zeros(n, dtype=np.int64)
        self.distb = np.zeros(n, dtype=np.int64)
        self.parf = np.zeros(n, dtype=np.int64)
        self.parb = np.zeros(n, dtype=np.int64)
        self.stf = np.zeros(n, dtype=np.int64)
        self.stb = np.zeros(n, dtype=np.int64)
        self.seen = np.zeros(m, dtype=np.int64)
        self.version = 0
        self.last = (0, 0, -1)


class ChIndex:
    """A built hierarchy: node ranks, upward/downward CSR graphs, and the edge table.

    ``up_*`` holds edges from lower to higher rank, indexed by tail;
    ``dn_*`` holds edges from higher to lower rank, indexed by head and
    pointing to the tail, for the backward search. ``ch_*`` arrays describe
    every hierarchy edge: shortcuts have ``ch_orig == -1`` and children
    ``ch_c1``/``ch_c2`` around middle node ``ch_mid``.
    """

    _FIELDS = ("rank", "up_first", "up_head", "up_w", "up_e", "dn_first", "dn_head", "dn_w", "dn_e",
               "ch_tail", "ch_head", "ch_w", "ch_c1", "ch_c2", "ch_orig", "ch_mid")

    def __init__(self, node_count: int, key: str = "", **arrays):
        self.node_count = int(node_count)
        self.key = key
        for name in self._FIELDS:
            setattr(self, name, np.ascontiguousarray(arrays[name], dtype=np.int64))
        self._local = threading.local()

    @property
    def shortcut_count(self) -> int:
        return int(np.count_nonzero(self.ch_orig < 0))

    def _scratch(self) -> _Scratch:
        sc = getattr(self._local, "scratch", None)
        if sc is None:
            sc = self._local.scratch = _Scratch(self.node_count, self.ch_tail.size)
        sc.version += 1
        return sc

    def _args(self):
        return (self.up_first, self.up_head, self.up_w, self.up_e,
                self.dn_first, self.dn_head, self.dn_w, self.dn_e,
                self.ch_tail, self.ch_head, self.ch_c1, self.ch_c2, self.ch_orig)

    def _check(self, v):
        v = int(v)
        if not 0 <= v < self.node_count:
            raise IndexError(f"node {v} out of range")
        return v

    def query(self, s: int, t: int) -> Optional[ChPath]:
        """Shortest path as original-edge ids, or None if ``t`` is unreachable."""
        s, t = self._check(s), self._check(t)
        if s == t:
            return ChPath(0, np.zeros(0, dtype=np.int64))
        sc = self._scratch()
        dist, edges = _query(*self._args(), s, t, sc.distf, sc.distb, sc.parf, sc.parb,
                             sc.stf, sc.stb, sc.version, sc.seen)
        if dist < 0:
            return None
        return ChPath(int(dist), edges)

    def distance(self, s: int, t: int) -> Optional[int]:
        """Distance only; the search state is kept so :meth:`unpack_last` can follow."""
        s, t = self._check(s), self._check(t)
        sc = self._scratch()
        if s == t:
            sc.last = (s, t, s)
            return 0
        dist, meet = _search_pair(self.up_first, self.up_head, self.up_w, self.up_e,
                                  self.dn_first, self.dn_head, self.dn_w, self.dn_e,
                                  s, t, sc.distf, sc.distb, sc.parf, sc.parb,
                                  sc.stf, sc.stb, sc.version, False)
        sc.last = (s, t, meet)
        return None if meet < 0 else int(dist)

    def distance_table(self, sources, targets) -> np.ndarray:
        """Distances for every (source, target) pair; -1 where unreachable."""
        src = np.ascontiguousarray([self._check(v) for v in sources], dtype=np.int64)
        dst = np.ascontiguousarray([self._check(v) for v in targets], dtype=np.int64)
        sc = self._scratch()
        out, sc.version = _distance_table(self.up_first, self.up_head, self.up_w, self.up_e,
                                          self.dn_first, self.dn_head, self.dn_w, self.dn_e,
                                          src, dst, sc.distf, sc.distb, sc.parf, sc.parb,
                                          sc.stf, sc.stb, sc.version)
        sc.last = (0, 0, -1)
        return out

    def unpack_last(self) -> Optional[np.ndarray]:
        """Original edges of the path found by the preceding :meth:`distance` call in this thread."""
        sc = self._local.scratch
        s, t, meet = sc.last
        if meet < 0:
            return None
        if s == t:
            return np.zeros(0, dtype=np.int64)
        return _unpack_path(meet, s, t, sc.parf, sc.parb, self.ch_tail, self.ch_head,
                            self.ch_c1, self.ch_c2, self.ch_orig, sc.seen, sc.version)

    def alternatives(self, s: int, t: int, stretch: float = 1.2) -> Optional[np.ndarray]:
        """Union of the edges of every via-path within ``stretch`` times the shortest distance.

        Both upward searches run to exhaustion, so every meeting node is
        considered; no quality filter is applied. The shortest path returned
        by :meth:`query` is always included. Returns sorted original-edge
        ids, or None when ``t`` is unreachable.
        """
        if stretch < 1.0:
            raise ValueError("stretch must be >= 1")
        s, t = self._check(s), self._check(t)
        if s == t:
            return np.zeros(0, dtype=np.int64)
        sc = self._scratch()
        dist, _, edges = _alternatives(*self._args(), s, t, float(stretch), sc.distf, sc.distb,
                                       sc.parf, sc.parb, sc.stf, sc.stb, sc.version, sc.seen)
        if dist < 0:
            return None
        primary = self.query(s, t)
        return np.union1d(edges, primary.edges)

    def save(self, path) -> None:
        np.savez(path, format=np.array([CACHE_FORMAT]), node_count=np.array([self.node_count]),
                 key=np.array([self.key]), **{f: getattr(self, f) for f in self._FIELDS})

    @classmethod
    def load(cls, path, expected_key: Optional[str] = None) -> Optional["ChIndex"]:
        """Load a saved index; None if the format or key does not match."""
        with np.load(path, allow_pickle=False) as data:
            if int(data["format"][0]) != CACHE_FORMAT:
                return None
            key = str(data["key"][0])
            if expected_key is not None and key != expected_key:
                return None
            return cls(int(data["node_count"][0]), key, **{f: data[f] for f in cls._FIELDS})

    def __getstate__(self):
        state = self.__dict__.copy()
        del state["_local"]
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._local = threading.local()


def _csr(n, owner, other, w, e):
    order = np.lexsort((e, owner))
    first = np.searchsorted(owner[order], np.arange(n + 1)).astype(np.int64)
    return first, other[order], w[order], e[order]


def build(g: ScalarGraph, sim_limit: int = 50, contract_limit: int = 500,
          cache_dir=None) -> ChIndex:
    """Contract ``g`` into a ChIndex (deterministic for a fixed input).

    With ``cache_dir`` the index is stored under the graph's content hash
    and reused when the hash matches.
    """
    key = g.content_hash()
    cache_file = None
    if cache_dir is not None:
        cache_file = Path(cache_dir) / f"ch-{key[:32]}.npz"
        if cache_file.exists():
            idx = ChIndex.load(cache_file, expected_key=key)
            if idx is not None:
                return idx
    n = g.node_count
    E, rank = _contract_all(n, g.tail, g.head, g.weight, g.orig, sim_limit, contract_limit)
    alive = E[:, _ALIVE] == 1
    ids = np.arange(E.shape[0], dtype=np.int64)
    tails, heads, ws = E[:, _TAIL], E[:, _HEAD], E[:, _W]
    upward = alive & (rank[tails] < rank[heads])
    downward = alive & (rank[tails] > rank[heads])
    up = _csr(n, tails[upward], heads[upward], ws[upward], ids[upward])
    dn = _csr(n, heads[downward], tails[downward], ws[downward], ids[downward])
    idx = ChIndex(
        n, key, rank=rank,
        up_first=up[0], up_head=up[1], up_w=up[2], up_e=up[3],
        dn_first=dn[0], dn_head=dn[1], dn_w=dn[2], dn_e=dn[3],
        ch_tail=tails, ch_head=heads, ch_w=ws, ch_c1=E[:, _C1], ch_c2=E[:, _C2],
        ch_orig=E[:, _ORIG], ch_mid=E[:, _MID],
    )
    if cache_file is not None:
        cache_file.parent.mkdir(parents=True, exist_ok=True)
        idx.save(cache_file)
    return idx
