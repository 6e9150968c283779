"""Subdivisions of complete digraphs inside tournaments.

The embedder grows a subdivision one connecting path at a time.  While the
structure sits inside the out-neighbourhood of an anchor vertex z, a new
path u -> v is routed inside N+(z); failing that, through the last strong
component of N+(z) and back via some w' -> z -> v.  When both fail every
vertex of N-(z) dominates that last component, so any vertex q there has
d+(q) < d+(z): the structure is rebuilt inside N+(q) and the request is
retried.  Anchor out-degrees strictly decrease, which bounds the descent.

Loop paths are attached by the same machinery after the subdivision has
been made minimal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import HypothesisExhausted, VerificationError
from .tournament import Tournament, strong_components

MINIMIZE = ("minimize",)
DEFAULT_ROUTE_BUDGET = 200_000


# -- data types -----------------------------------------------------------------

Pair = tuple[int, int]


@dataclass
class PartialSubdivision:
    """Branch vertices plus one connecting path per embedded ordered pair."""

    branch: tuple[int, ...]
    paths: dict[Pair, tuple[int, ...]] = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.branch)

    @property
    def embedded_edges(self) -> set[Pair]:
        return set(self.paths)

    @property
    def m(self) -> int:
        return len(self.paths)

    @property
    def complete(self) -> bool:
        return self.m == self.k * (self.k - 1)

    def vertices(self) -> set[int]:
        out = set(self.branch)
        for p in self.paths.values():
            out.update(p)
        return out

    def long_path(self, u: int, v: int) -> tuple[Pair, tuple[int, ...]]:
        """The connecting path between u and v of length at least two."""
        for key in ((u, v), (v, u)):
            p = self.paths.get(key)
            if p is not None and len(p) >= 3:
                return key, p
        raise KeyError((u, v))

    def to_dict(self) -> dict:
        return {"branch": list(self.branch),
                "paths": {f"{u},{v}": list(p) for (u, v), p in sorted(self.paths.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "PartialSubdivision":
        paths = {}
        for key, p in d["paths"].items():
            u, v = (int(s) for s in key.split(","))
            paths[(u, v)] = tuple(int(x) for x in p)
        return cls(tuple(int(b) for b in d["branch"]), paths)


@dataclass
class KStar:
    """A minimal subdivision with an entry and an exit loop per long path.

    ``loops[(u, v)]`` belongs to the long path P_uv and holds
    (entry, exit): entry runs from the second vertex of P_uv back to u, exit
    from v to the penultimate vertex of P_uv.
    """

    base: PartialSubdivision
    loops: dict[Pair, tuple[tuple[int, ...], tuple[int, ...]]] = field(default_factory=dict)

    @property
    def branch(self) -> tuple[int, ...]:
        return self.base.branch

    def vertices(self) -> set[int]:
        out = self.base.vertices()
        for entry, exit_ in self.loops.values():
            out.update(entry)
            out.update(exit_)
        return out

    def to_dict(self) -> dict:
        d = self.base.to_dict()
        d["loops"] = {f"{u},{v}": {"entry": list(e), "exit": list(x)}
                      for (u, v), (e, x) in sorted(self.loops.items())}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KStar":
        base = PartialSubdivision.from_dict(d)
        loops = {}
        for key, pair in d.get("loops", {}).items():
            u, v = (int(s) for s in key.split(","))
            loops[(u, v)] = (tuple(int(x) for x in pair["entry"]),
                             tuple(int(x) for x in pair["exit"]))
        return cls(base, loops)


def dumps(obj: PartialSubdivision | KStar) -> str:
    return json.dumps(obj.to_dict(), sort_keys=True, separators=(",", ":"))


def loads_subdivision(text: str) -> PartialSubdivision:
    return PartialSubdivision.from_dict(json.loads(text))


def loads_kstar(text: str) -> KStar:
    return KStar.from_dict(json.loads(text))


@dataclass
class EmbedStats:
    routes: int = 0
    shortcuts: int = 0
    descents: int = 0
    rebuilds: int = 0
    anchor_degrees: list[list[int]] = field(default_factory=list)


# -- bounds ----------------------------------------------------------------------

_MAX_BOUND_BITS = 1 << 20


def _square_chain(start: int, steps: int) -> int:
    d = start
    for _ in range(steps):
        if d.bit_length() * 2 > _MAX_BOUND_BITS:
            raise OverflowError("bound exceeds the representable size; use the log2 variant")
        d = 7 * d * d
    return d


def bound_d(k: int, m: int | None = None) -> int:
    """Recursion value d(k, m): d(1,0)=1, d(k,0)=d(k-1, full), d(k,m+1)=7 d(k,m)^2."""
    if k < 1:
        raise ValueError("k must be positive")
    full = k * (k - 1)
    if m is None:
        m = full
    if not 0 <= m <= full:
        raise ValueError(f"m must lie in [0, {full}]")
    d = 1
    for j in range(2, k + 1):
        d = _square_chain(d, (j - 1) * (j - 2))
    return _square_chain(d, m)


def bound_dstar(k: int, m: int | None = None) -> int:
    """Loop-ladder recursion: d*(1,0)=1, d*(k,0)=d(k), d*(k,m+1)=7 d*(k,m)^2."""
    if k < 1:
        raise ValueError("k must be positive")
    full = k * (k - 1)
    if m is None:
        m = full
    if not 0 <= m <= full:
        raise ValueError(f"m must lie in [0, {full}]")
    if k == 1:
        return 1
    return _square_chain(bound_d(k), m)


def _log2_chain(lg: float, steps: int) -> float:
    c = math.log2(7)
    for _ in range(steps):
        lg = c + 2 * lg
    return lg


def log2_bound_d(k: int, m: int | None = None) -> float:
    full = k * (k - 1)
    m = full if m is None else m
    lg = 0.0
    for j in range(2, k + 1):
        lg = _log2_chain(lg, (j - 1) * (j - 2))
    return _log2_chain(lg, m)


def log2_bound_dstar(k: int, m: int | None = None) -> float:
    full = k * (k - 1)
    m = full if m is None else m
    return 0.0 if k == 1 else _log2_chain(log2_bound_d(k), m)


def degree_level(delta: int) -> int:
    """Largest d >= 1 with 7 d^2 <= delta (1 when delta < 7)."""
    return max(1, math.isqrt(max(delta, 0) // 7))


# -- core extraction -------------------------------------------------------------

def extract_min_outdeg_subtournament(t: Tournament, within, k: int) -> list[int]:
    """Vertex-minimal W inside ``within`` with induced minimum out-degree >= k.

    Greedy: repeatedly delete the smallest vertex whose removal keeps the
    minimum out-degree at least k.  A vertex is removable iff no in-neighbour
    of it has out-degree exactly k.  Once nothing is removable, the counting
    argument bounds |W| by k^2/2 + 3k/2 + 1 <= 3k^2, which is asserted.
    """
    if k < 1:
        raise ValueError("k must be positive")
    alive = t.mask(within)
    idx = np.flatnonzero(alive)
    if idx.size == 0:
        raise ValueError("within must be nonempty")
    adj = t.adj
    deg = (adj[np.ix_(idx, idx)]).sum(axis=1)
    degree = np.zeros(t.n, dtype=np.int64)
    degree[idx] = deg
    if deg.min() < k:
        raise ValueError(f"minimum out-degree {int(deg.min())} is below k={k}")
    while True:
        members = np.flatnonzero(alive)
        slack = int(degree[members].min()) - k
        if slack > 0:
            drop = members[:slack]
        else:
            tight = members[degree[members] == k]
            blocked = adj[tight].any(axis=0)
            free = members[~blocked[members]]
            if free.size == 0:
                break
            drop = free[:1]
        alive[drop] = False
        degree -= adj[:, drop].sum(axis=1)
    core = np.flatnonzero(alive)
    size = int(core.size)
    assert size <= 3 * k * k, f"core of size {size} exceeds 3k^2 for k={k}"
    assert 8 * size <= (2 * k + 3) ** 2 - 1, f"core of size {size} breaks the counting bound"
    return core.tolist()


# -- path helpers ----------------------------------------------------------------

def shortcut_path(t: Tournament, path: Iterable[int]) -> list[int]:
    """Remove forward chords: jump from each vertex to its farthest out-neighbour on the path."""
    path = list(path)
    if len(path) <= 2:
        return path
    adj = t.adj
    arr = np.asarray(path)
    out = [path[0]]
    i = 0
    last = len(path) - 1
    while i < last:
        hits = np.flatnonzero(adj[arr[i], arr[i + 1:]])
        i = i + 1 + int(hits[-1])
        out.append(path[i])
    return out


def forward_chords(t: Tournament, path) -> list[Pair]:
    """All pairs (x_i, x_j) with j >= i + 2 and x_i -> x_j."""
    path = list(path)
    out = []
    for i in range(len(path)):
        for j in range(i + 2, len(path)):
            if t.adj[path[i], path[j]]:
                out.append((path[i], path[j]))
    return out


def bfs_path(t: Tournament, a: int, b: int, allowed: np.ndarray) -> list[int] | None:
    """Shortest a -> b path with every vertex except a inside ``allowed``.

    Ties go to the smallest vertex id at each step.
    """
    adj = t.adj
    if adj[a, b]:
        return [a, b]
    mid = np.flatnonzero(adj[a] & adj[:, b] & allowed)
    if mid.size:
        return [a, int(mid[0]), b]
    n = t.n
    seen = ~allowed.copy()
    seen[a] = True
    parent = np.full(n, -1, dtype=np.int64)
    front = np.array([a])
    while front.size:
        rows = adj[front]
        reach = rows.any(axis=0) & ~seen
        cand = np.flatnonzero(reach)
        if cand.size == 0:
            return None
        parent[cand] = front[rows[:, cand].argmax(axis=0)]
        seen[cand] = True
        if reach[b]:
            path = [b]
            while path[-1] != a:
                path.append(int(parent[path[-1]]))
            return path[::-1]
        front = cand
    return None


# -- the embedding engine ----------------------------------------------------------

class _State:
    """Working structure: branch vertices, paths, loops, occupancy and anchor."""

    __slots__ = ("branch", "paths", "loops", "occupied", "anchor", "done")

    def __init__(self, n: int, branch: list[int], anchor: int | None):
        self.branch = list(branch)
        self.paths: dict[Pair, list[int]] = {}
        self.loops: dict[tuple[Pair, str], list[int]] = {}
        self.occupied = np.zeros(n, dtype=bool)
        self.occupied[self.branch] = True
        self.anchor = anchor
        self.done = -1

    def add(self, key, path: list[int], kind: str) -> None:
        (self.paths if kind == "edge" else self.loops)[key] = path
        self.occupied[path] = True

    def recount(self) -> None:
        self.occupied[:] = False
        self.occupied[self.branch] = True
        for p in self.paths.values():
            self.occupied[p] = True
        for p in self.loops.values():
            self.occupied[p] = True


def edge_requests(k: int) -> list:
    return [("edge", i, j) for i in range(k) for j in range(k) if i != j]


def loop_requests(k: int) -> list:
    out = []
    for i in range(k):
        for j in range(i + 1, k):
            out.append(("loop", i, j, "entry"))
            out.append(("loop", i, j, "exit"))
    return out


class Embedder:
    """Satisfies a fixed list of requests inside a vertex universe.

    Requests are ("edge", i, j) for the path from branch i to branch j,
    MINIMIZE to shortcut every path, and ("loop", i, j, side) for the entry
    or exit loop of the long path between branches i and j.
    """

    def __init__(self, t: Tournament, k: int, requests: list, budget: int = DEFAULT_ROUTE_BUDGET):
        self.t = t
        self.k = k
        self.requests = requests
        self.budget = budget
        self.stats = EmbedStats()

    # endpoints of a request in the current structure
    def _endpoints(self, st: _State, req) -> tuple[int, int, object]:
        if req[0] == "edge":
            u, v = st.branch[req[1]], st.branch[req[2]]
            return u, v, (u, v)
        u, v = st.branch[req[1]], st.branch[req[2]]
        key, long = self._long(st, u, v)
        if req[3] == "entry":
            return long[1], long[0], (key, "entry")
        return long[-1], long[-2], (key, "exit")

    @staticmethod
    def _long(st: _State, u: int, v: int) -> tuple[Pair, list[int]]:
        for key in ((u, v), (v, u)):
            p = st.paths.get(key)
            if p is not None and len(p) >= 3:
                return key, p
        raise HypothesisExhausted("loop", f"no long path between {u} and {v}")

    def _tick(self) -> None:
        self.stats.routes += 1
        if self.stats.routes > self.budget:
            raise HypothesisExhausted("budget", f"more than {self.budget} routing attempts")

    def _insert(self, st: _State, key, path: list[int], req) -> None:
        path = shortcut_path(self.t, path)
        st.add(key, path, req[0])

    def _minimize(self, st: _State) -> None:
        for key in list(st.paths):
            st.paths[key] = shortcut_path(self.t, st.paths[key])
        for key in list(st.loops):
            st.loops[key] = shortcut_path(self.t, st.loops[key])
        st.recount()

    def seed(self, universe: np.ndarray) -> _State:
        """Branch vertices for the empty structure, inside an anchor's out-neighbourhood.

        The anchor is the smallest-out-degree vertex z whose out-neighbourhood
        has minimum out-degree at least the current degree level; the branch
        vertices are the k highest-scoring vertices of a minimal core there.
        """
        t, k = self.t, self.k
        adj = t.adj
        idx = np.flatnonzero(universe)
        if idx.size < k:
            raise HypothesisExhausted("seed", f"universe of size {idx.size} is smaller than k={k}")
        sub = adj[np.ix_(idx, idx)]
        deg = sub.sum(axis=1)
        level = degree_level(int(deg.min()))
        anchor = None
        host = universe
        for pos in np.lexsort((idx, deg)):
            z = int(idx[pos])
            nz = adj[z] & universe
            members = np.flatnonzero(nz)
            if members.size < max(k, level + 1):
                continue
            if adj[np.ix_(members, members)].sum(axis=1).min() >= level:
                anchor, host = z, nz
                break
        members = np.flatnonzero(host)
        hdeg = adj[np.ix_(members, members)].sum(axis=1)
        lvl = min(level, int(hdeg.min()))
        core = extract_min_outdeg_subtournament(t, host, lvl) if lvl >= 1 else []
        if len(core) >= k:
            pool = np.asarray(core)
        else:
            pool = members
        pdeg = adj[np.ix_(pool, pool)].sum(axis=1)
        order = np.lexsort((pool, -pdeg))
        branch = [int(v) for v in pool[order[:k]]]
        if len(branch) < k:
            extra = [int(v) for v in members[np.lexsort((members, -hdeg))] if v not in branch]
            branch += extra[: k - len(branch)]
        return _State(t.n, branch, anchor)

    def build(self, universe: np.ndarray, count: int) -> _State:
        """A structure inside ``universe`` satisfying the first ``count`` requests."""
        self.stats.rebuilds += 1
        st = self.seed(universe)
        i = 0
        while i < count:
            st = self.satisfy(st, universe, i)
            i += 1
        return st

    def satisfy(self, st: _State, universe: np.ndarray, i: int) -> _State:
        req = self.requests[i]
        if req == MINIMIZE:
            self._minimize(st)
            return st
        degrees: list[int] = []
        while True:
            a, b, key = self._endpoints(st, req)
            path, consumed = self.route(st, universe, a, b)
            if path is not None:
                self._insert(st, key, path, req)
                if consumed:
                    st.anchor = None
                if degrees:
                    self.stats.anchor_degrees.append(degrees)
                return st
            self.stats.descents += 1
            if st.anchor is not None:
                z = st.anchor
                dz = int((self.t.adj[z] & universe).sum())
                if not degrees:
                    degrees.append(dz)
                st = self._descend_anchored(st, universe, i, a, b)
                if st.done == i:
                    st.done = -1
                    self.stats.anchor_degrees.append(degrees)
                    return st
                dq = int((self.t.adj[st.anchor] & universe).sum())
                assert dq < degrees[-1], (
                    f"anchor out-degree did not decrease: {dq} >= {degrees[-1]}")
                degrees.append(dq)
            else:
                st = self._descend_free(st, universe, i, a, b)
                degrees = [int((self.t.adj[st.anchor] & universe).sum())]

    def route(self, st: _State, universe: np.ndarray, a: int, b: int
              ) -> tuple[list[int] | None, bool]:
        """A path a -> b internally disjoint from the structure.

        Returns (path, anchor_consumed).
        """
        self._tick()
        t = self.t
        adj = t.adj
        blocked = st.occupied.copy()
        blocked[[a, b]] = False
        allowed = universe & ~blocked
        z = st.anchor
        if z is None:
            return bfs_path(t, a, b, allowed), False
        assert adj[z, st.occupied].all(), "structure left the anchor's out-neighbourhood"
        inside = allowed & adj[z]
        path = bfs_path(t, a, b, inside)
        if path is not None:
            return path, False
        order = strong_components(t, inside)
        if len(order) < 2:
            return None, False
        last = np.asarray(order.last)
        back = universe & adj[:, z] & ~blocked
        exits = last[adj[np.ix_(last, np.flatnonzero(back))].any(axis=1)] if back.any() else last[:0]
        if exits.size == 0:
            return None, False
        no_b = inside.copy()
        no_b[b] = False
        best = None
        for w in exits:
            w = int(w)
            head = [a] if w == a else bfs_path(t, a, w, no_b)
            if head is not None and (best is None or len(head) < len(best)):
                best = head
        assert best is not None, "the last strong component must be reachable from a"
        w = best[-1]
        w2 = int(np.flatnonzero(adj[w] & back)[0])
        self.stats.shortcuts += 1
        return best + [w2, z, b], True

    def _descend_anchored(self, st: _State, universe: np.ndarray, i: int, a: int, b: int) -> _State:
        adj = self.t.adj
        z = st.anchor
        blocked = st.occupied.copy()
        blocked[[a, b]] = False
        inside = universe & ~blocked & adj[z]
        order = strong_components(self.t, inside)
        if len(order) < 2:
            raise HypothesisExhausted("descent", "out-neighbourhood strongly connected but unroutable")
        sub = self.t.mask(order.last)
        new = self._relocate(sub, i)
        if new.done == i:
            new.anchor = z
        return new

    def _relocate(self, sub: np.ndarray, i: int) -> _State:
        """Rebuild the first i requests in a small core of ``sub`` and route request i.

        If request i cannot be routed inside ``sub``, the last strong
        component of sub minus the core lies in N+(y) for the target y, and
        the structure is rebuilt there with y as the new anchor.
        """
        t = self.t
        adj = t.adj
        members = np.flatnonzero(sub)
        delta = int(adj[np.ix_(members, members)].sum(axis=1).min())
        if delta < 1:
            raise HypothesisExhausted("descent", "component without out-degree to work with")
        core_mask = t.mask(extract_min_outdeg_subtournament(t, sub, degree_level(delta)))
        if core_mask.sum() < self.k:
            raise HypothesisExhausted("descent", "core too small for the branch set")
        inner = self.build(core_mask, i)
        a, b, key = self._endpoints(inner, self.requests[i])
        blocked = inner.occupied.copy()
        blocked[[a, b]] = False
        self._tick()
        path = bfs_path(t, a, b, sub & ~blocked)
        if path is not None:
            self._insert(inner, key, path, self.requests[i])
            inner.done = i
            return inner
        rest = sub & ~core_mask
        if not (adj[a] & rest).any():
            raise HypothesisExhausted("descent", f"vertex {a} has no out-neighbour outside the core")
        last = t.mask(strong_components(t, rest).last)
        assert not (adj[:, b] & last).any(), "last component should lie in N+(target)"
        relocated = self.build(last, i)
        relocated.anchor = b
        return relocated

    def _descend_free(self, st: _State, universe: np.ndarray, i: int, a: int, b: int) -> _State:
        t = self.t
        adj = t.adj
        rest = universe & ~st.occupied
        if not (adj[a] & rest).any():
            raise HypothesisExhausted("route", f"vertex {a} has no out-neighbour outside the structure")
        last = t.mask(strong_components(t, rest).last)
        assert not (adj[:, b] & last).any(), "last component should lie in N+(target)"
        relocated = self.build(last, i)
        relocated.anchor = b
        return relocated

    def run(self, universe: np.ndarray) -> _State:
        st = self.build(universe, len(self.requests))
        self._minimize(st)
        return st


def _to_subdivision(st: _State) -> PartialSubdivision:
    return PartialSubdivision(tuple(st.branch),
                              {key: tuple(p) for key, p in sorted(st.paths.items())})


def _to_kstar(st: _State) -> KStar:
    base = _to_subdivision(st)
    loops = {}
    for (key, side), p in st.loops.items():
        loops.setdefault(key, {})[side] = tuple(p)
    return KStar(base, {key: (d["entry"], d["exit"]) for key, d in sorted(loops.items())})


def embed_subdivision(t: Tournament, k: int, within=None,
                      budget: int = DEFAULT_ROUTE_BUDGET, stats: EmbedStats | None = None
                      ) -> PartialSubdivision:
    """A verified minimal subdivision of the complete digraph on k vertices.

    Raises HypothesisExhausted when the construction cannot complete.
    """
    if k < 1:
        raise ValueError("k must be positive")
    eng = Embedder(t, k, edge_requests(k) + [MINIMIZE], budget)
    try:
        st = eng.run(t.mask(within))
    finally:
        if stats is not None:
            stats.__dict__.update(eng.stats.__dict__)
    out = _to_subdivision(st)
    verify_subdivision(t, out, minimal=True)
    return out


def embed_kstar(t: Tournament, k: int, within=None,
                budget: int = DEFAULT_ROUTE_BUDGET, stats: EmbedStats | None = None) -> KStar:
    """A verified minimal subdivision with entry/exit loops on every long path."""
    if k < 1:
        raise ValueError("k must be positive")
    eng = Embedder(t, k, edge_requests(k) + [MINIMIZE] + loop_requests(k), budget)
    try:
        st = eng.run(t.mask(within))
    finally:
        if stats is not None:
            stats.__dict__.update(eng.stats.__dict__)
    out = _to_kstar(st)
    verify_kstar(t, out)
    return out


def minimize_subdivision(t: Tournament, ps: PartialSubdivision) -> PartialSubdivision:
    """Shortcut every connecting path until none has a forward chord."""
    return PartialSubdivision(ps.branch, {key: tuple(shortcut_path(t, p))
                                          for key, p in ps.paths.items()})


def augment_edge(t: Tournament, ps: PartialSubdivision, pair: Pair, anchor: int | None = None,
                 within=None, budget: int = DEFAULT_ROUTE_BUDGET,
                 stats: EmbedStats | None = None) -> PartialSubdivision:
    """Embed one more ordered branch pair.

    ``anchor``, when given, must dominate every vertex of ``ps``.  If the
    pair cannot be routed around the current structure, the descent may
    rebuild the earlier paths (in lexicographic pair order) elsewhere, so
    the result need not extend ``ps`` verbatim.
    """
    u, v = pair
    if u not in ps.branch or v not in ps.branch or u == v:
        raise ValueError("pair must join two distinct branch vertices")
    if pair in ps.paths:
        raise ValueError(f"pair {pair} is already embedded")
    pos = {b: i for i, b in enumerate(ps.branch)}
    prefix = sorted(ps.paths, key=lambda p: (pos[p[0]], pos[p[1]]))
    requests = [("edge", pos[a], pos[b]) for a, b in prefix] + [("edge", pos[u], pos[v])]
    universe = t.mask(within)
    if anchor is not None:
        verts = sorted(ps.vertices())
        if not t.adj[anchor, verts].all():
            raise ValueError("anchor must dominate the whole structure")
    eng = Embedder(t, ps.k, requests, budget)
    st = _State(t.n, list(ps.branch), anchor)
    for key, p in ps.paths.items():
        st.add(key, list(p), "edge")
    try:
        st = eng.satisfy(st, universe, len(requests) - 1)
    finally:
        if stats is not None:
            stats.__dict__.update(eng.stats.__dict__)
    out = _to_subdivision(st)
    verify_subdivision(t, out, minimal=False)
    return out


# -- independent verifiers -------------------------------------------------------

def _check_path(t: Tournament, p, label: str) -> None:
    p = list(p)
    if len(p) < 2:
        raise VerificationError("path-length", f"{label} has fewer than two vertices")
    if len(set(p)) != len(p):
        raise VerificationError("simple", f"{label} repeats a vertex")
    for a, b in zip(p, p[1:]):
        if not t.adj[a, b]:
            raise VerificationError("edge", f"{label} uses non-edge {a}->{b}")


def _check_chords(t: Tournament, p, label: str) -> None:
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 2, len(p)):
            if t.adj[p[i], p[j]]:
                raise VerificationError("minimality", f"{label} has forward chord {p[i]}->{p[j]}")


def verify_subdivision(t: Tournament, ps: PartialSubdivision, minimal: bool = True) -> None:
    """Re-check a (partial) subdivision against the raw tournament."""
    branch = list(ps.branch)
    if len(set(branch)) != len(branch):
        raise VerificationError("branch-distinct", "repeated branch vertex")
    for b in branch:
        if not 0 <= b < t.n:
            raise VerificationError("branch-range", f"branch vertex {b} out of range")
    bset = set(branch)
    owner: dict[int, Pair] = {}
    for (u, v), p in ps.paths.items():
        label = f"path {u}->{v}"
        if u not in bset or v not in bset or u == v:
            raise VerificationError("key", f"{label} does not join two branch vertices")
        if p[0] != u or p[-1] != v:
            raise VerificationError("endpoints", f"{label} runs {p[0]}->{p[-1]}")
        _check_path(t, p, label)
        for x in p[1:-1]:
            if x in bset:
                raise VerificationError("branch-interior", f"{label} passes through branch vertex {x}")
            if x in owner:
                raise VerificationError("disjoint", f"{label} shares {x} with path {owner[x]}")
            owner[x] = (u, v)
    if ps.m > len(branch) * (len(branch) - 1):
        raise VerificationError("count", "more paths than ordered pairs")
    if minimal:
        if not ps.complete:
            raise VerificationError("complete", f"{ps.m} of {len(branch) * (len(branch) - 1)} pairs embedded")
        for (u, v), p in ps.paths.items():
            _check_chords(t, p, f"path {u}->{v}")
        for i, u in enumerate(branch):
            for v in branch[i + 1:]:
                short = (len(ps.paths[(u, v)]) == 2) + (len(ps.paths[(v, u)]) == 2)
                if short != 1:
                    raise VerificationError("one-short", f"pair {u},{v} has {short} single-edge paths")


def verify_kstar(t: Tournament, ks: KStar) -> None:
    """Re-check a loop-augmented minimal subdivision against the raw tournament."""
    verify_subdivision(t, ks.base, minimal=True)
    base_vertices = ks.base.vertices()
    branch = list(ks.branch)
    expected = set()
    for i, u in enumerate(branch):
        for v in branch[i + 1:]:
            key = (u, v) if len(ks.base.paths[(u, v)]) >= 3 else (v, u)
            expected.add(key)
    if set(ks.loops) != expected:
        raise VerificationError("loop-keys", f"loops on {sorted(ks.loops)}, wanted {sorted(expected)}")
    owner: dict[int, str] = {}
    for (u, v), (entry, exit_) in ks.loops.items():
        long = ks.base.paths[(u, v)]
        for side, p, start, end in (("entry", entry, long[1], u), ("exit", exit_, v, long[-2])):
            label = f"{side} loop of {u}->{v}"
            if p[0] != start or p[-1] != end:
                raise VerificationError("loop-anchoring", f"{label} runs {p[0]}->{p[-1]}, wanted {start}->{end}")
            _check_path(t, p, label)
            _check_chords(t, p, label)
            for x in p[1:-1]:
                if x in base_vertices:
                    raise VerificationError("loop-interior", f"{label} passes through {x} of the subdivision")
                if x in owner:
                    raise VerificationError("loop-disjoint", f"{label} shares {x} with {owner[x]}")
                owner[x] = label
