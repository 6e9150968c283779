"""Vertex-disjoint path systems, strong connectivity and exact linkage checks.

Disjoint paths come from a unit vertex-capacity flow on the split network
(every vertex v becomes v_in -> v_out), augmented along breadth-first
residual paths.  Each BFS level is a handful of numpy row operations on the
orientation matrix, which keeps the dense n ~ 4000 case cheap.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, VerificationError
from .tournament import Tournament, as_mask, strong_components

DEFAULT_BUDGET = 10**8
MAX_EXACT_N = 24

_NONE = -1
_TERMINAL = -2  # fed by the super source / feeding the super sink
_SELF = -3      # arc between the two copies of the same vertex


@dataclass
class PathSystem:
    """Pairwise vertex-disjoint directed paths from ``sources`` to ``sinks``."""

    paths: list[list[int]]
    sources: frozenset[int]
    sinks: frozenset[int]
    avoid: frozenset[int] = frozenset()
    internal_exclusion: frozenset[int] = frozenset()
    requested: int | None = None

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def complete(self) -> bool:
        return self.requested is None or len(self.paths) >= self.requested

    @property
    def shortfall(self) -> int:
        if self.requested is None:
            return 0
        return max(0, self.requested - len(self.paths))

    def vertices(self) -> set[int]:
        return {v for p in self.paths for v in p}


@dataclass
class LinkageInstance:
    """Terminals x_1..x_k and y_1..y_k; path i must join x_i to y_i."""

    sources: tuple[int, ...]
    sinks: tuple[int, ...]

    def __post_init__(self):
        self.sources = tuple(int(x) for x in self.sources)
        self.sinks = tuple(int(y) for y in self.sinks)
        if len(self.sources) != len(self.sinks):
            raise ValueError("need as many sinks as sources")
        if not self.sources:
            raise ValueError("need at least one terminal pair")
        terms = self.sources + self.sinks
        if len(set(terms)) != len(terms):
            raise ValueError("the 2k terminals must be distinct")

    @property
    def k(self) -> int:
        return len(self.sources)


@dataclass
class LinkageResult:
    linked: bool
    paths: list[list[int]] | None = None
    nodes: int = 0

    def __bool__(self) -> bool:
        return self.linked


# -- unit vertex-capacity flow ------------------------------------------------

class _VertexFlow:
    """Vertex-capacitated flow from a source set to a sink set.

    ``nxt[v]`` is the vertex after v on its flow path (_TERMINAL when v feeds
    the super sink) and ``prv[v]`` the vertex before it (_TERMINAL when fed
    by the super source).  A vertex carries flow iff ``prv[v] != _NONE``.
    """

    def __init__(self, adj: np.ndarray, src: np.ndarray, snk: np.ndarray, allowed: np.ndarray):
        self.adj = adj
        self.n = adj.shape[0]
        self.allowed = allowed
        self.src = src & allowed
        self.snk = snk & allowed
        self.nxt = np.full(self.n, _NONE, dtype=np.int64)
        self.prv = np.full(self.n, _NONE, dtype=np.int64)
        self.value = 0

    def run(self, limit: int) -> int:
        while self.value < limit and self._augment():
            self.value += 1
        return self.value

    def _sink_hit(self, outs: np.ndarray) -> int | None:
        hit = outs[self.snk[outs] & (self.nxt[outs] != _TERMINAL)]
        return int(hit.min()) if hit.size else None

    def _augment(self) -> bool:
        n, adj, nxt, prv = self.n, self.adj, self.nxt, self.prv
        used = prv != _NONE
        seen_in = np.zeros(n, dtype=bool)
        seen_out = np.zeros(n, dtype=bool)
        par_in = np.full(n, _NONE, dtype=np.int64)
        par_out = np.full(n, _NONE, dtype=np.int64)

        front_in = np.flatnonzero(self.src & (prv != _TERMINAL))
        seen_in[front_in] = True
        par_in[front_in] = _TERMINAL
        end = None
        while front_in.size:
            # in-copies: cross to the out-copy, or walk a flow arc backwards
            free = front_in[~used[front_in] & ~seen_out[front_in]]
            seen_out[free] = True
            par_out[free] = _SELF
            busy = front_in[prv[front_in] >= 0]
            back = prv[busy]
            keep = ~seen_out[back]
            busy, back = busy[keep], back[keep]
            back, first = np.unique(back, return_index=True)
            seen_out[back] = True
            par_out[back] = busy[first]
            front_out = np.union1d(free, back)
            if not front_out.size:
                break
            end = self._sink_hit(front_out)
            if end is not None:
                break
            # out-copies: residual tournament arcs, or back across a used vertex
            rows = adj[front_out].copy()
            carry = nxt[front_out]
            on = carry >= 0
            rows[np.flatnonzero(on), carry[on]] = False
            reach = rows.any(axis=0) & self.allowed & ~seen_in
            cand = np.flatnonzero(reach)
            if cand.size:
                pick = rows[:, cand].argmax(axis=0)
                seen_in[cand] = True
                par_in[cand] = front_out[pick]
            again = front_out[used[front_out] & ~seen_in[front_out]]
            seen_in[again] = True
            par_in[again] = _SELF
            front_in = np.union1d(cand, again)
        if end is None:
            return False
        self._apply(par_in, par_out, end)
        return True

    def _link(self, a: int, b: int) -> None:
        if a >= 0:
            self.nxt[a] = b
        if b >= 0:
            self.prv[b] = a

    def _unlink(self, a: int, b: int) -> None:
        if self.nxt[a] == b:
            self.nxt[a] = _NONE
        if self.prv[b] == a:
            self.prv[b] = _NONE

    def _apply(self, par_in: np.ndarray, par_out: np.ndarray, end: int) -> None:
        self.nxt[end] = _TERMINAL
        v, side = end, "out"
        while True:
            if side == "out":
                p = int(par_out[v])
                if p == _SELF:
                    side = "in"
                else:
                    # reached v_out by cancelling the flow arc v -> p
                    self._unlink(v, p)
                    v, side = p, "in"
            else:
                p = int(par_in[v])
                if p == _TERMINAL:
                    self.prv[v] = _TERMINAL
                    return
                if p == _SELF:
                    side = "out"
                else:
                    self._link(p, v)
                    v, side = p, "out"

    def paths(self) -> list[list[int]]:
        out = []
        for s in np.flatnonzero(self.prv == _TERMINAL):
            path = [int(s)]
            v = int(s)
            while self.nxt[v] >= 0:
                v = int(self.nxt[v])
                path.append(v)
            out.append(path)
        return out


def _trim(path: list[int], src: np.ndarray, snk: np.ndarray) -> list[int]:
    """Cut a path to its first sink vertex and the last source before it."""
    stop = next(i for i, v in enumerate(path) if snk[v])
    head = path[: stop + 1]
    start = max(i for i, v in enumerate(head) if src[v])
    return head[start:]


def max_disjoint_paths(t: Tournament, sources, sinks, avoid=(), internal_exclusion=(),
                       limit: int | None = None) -> PathSystem:
    """Maximum family (at most ``limit``) of vertex-disjoint source->sink paths.

    No path touches ``avoid``.  Vertices of ``internal_exclusion`` are only
    usable as endpoints.  Every returned path meets the sources only in its
    first vertex and the sinks only in its last, so the paths are internally
    disjoint from both sets.  The count equals the max-flow value; callers
    compare ``len`` with what they asked for.
    """
    n = t.n
    src, snk = as_mask(n, sources), as_mask(n, sinks)
    av, ex = as_mask(n, avoid), as_mask(n, internal_exclusion)
    allowed = ~av & ~(ex & ~src & ~snk)
    if limit is None:
        limit = n
    flow = _VertexFlow(t.adj, src, snk, allowed)
    flow.run(limit)
    paths = sorted((_trim(p, src & allowed, snk & allowed) for p in flow.paths()),
                   key=lambda p: (p[0], p[-1]))
    return PathSystem(
        paths=paths,
        sources=frozenset(np.flatnonzero(src).tolist()),
        sinks=frozenset(np.flatnonzero(snk).tolist()),
        avoid=frozenset(np.flatnonzero(av).tolist()),
        internal_exclusion=frozenset(np.flatnonzero(ex).tolist()),
        requested=limit if limit < n else None,
    )


def verify_path_system(t: Tournament, ps: PathSystem) -> None:
    """Re-check every PathSystem invariant directly against the tournament."""
    seen: set[int] = set()
    for i, p in enumerate(ps.paths):
        if not p:
            raise VerificationError("nonempty", f"path {i} is empty")
        if len(set(p)) != len(p):
            raise VerificationError("simple", f"path {i} repeats a vertex")
        for a, b in zip(p, p[1:]):
            if not t.adj[a, b]:
                raise VerificationError("edge", f"path {i} uses non-edge {a}->{b}")
        if p[0] not in ps.sources:
            raise VerificationError("starts-in-sources", f"path {i} starts at {p[0]}")
        if p[-1] not in ps.sinks:
            raise VerificationError("ends-in-sinks", f"path {i} ends at {p[-1]}")
        bad = set(p) & ps.avoid
        if bad:
            raise VerificationError("avoid", f"path {i} meets {sorted(bad)}")
        bad = set(p[1:-1]) & ps.internal_exclusion
        if bad:
            raise VerificationError("internal-exclusion", f"path {i} passes through {sorted(bad)}")
        clash = seen & set(p)
        if clash:
            raise VerificationError("disjoint", f"path {i} shares {sorted(clash)}")
        seen |= set(p)


def verify_paths(t: Tournament, paths: Sequence[Sequence[int]],
                 pairs: Sequence[tuple[int, int]] | None = None) -> None:
    """Check simple, edge-valid, pairwise disjoint paths with given endpoints."""
    seen: set[int] = set()
    for i, p in enumerate(paths):
        p = list(p)
        if not p or len(set(p)) != len(p):
            raise VerificationError("simple", f"path {i} is empty or repeats a vertex")
        for a, b in zip(p, p[1:]):
            if not t.adj[a, b]:
                raise VerificationError("edge", f"path {i} uses non-edge {a}->{b}")
        if pairs is not None and (p[0], p[-1]) != tuple(pairs[i]):
            raise VerificationError("endpoints", f"path {i} joins {p[0]}->{p[-1]}, wanted {pairs[i]}")
        if seen & set(p):
            raise VerificationError("disjoint", f"path {i} shares {sorted(seen & set(p))}")
        seen |= set(p)


# -- connectivity ----------------------------------------------------------------

def local_connectivity(t: Tournament, s: int, target: int, limit: int | None = None) -> int:
    """Internally disjoint s -> target paths, for a pair with target -> s.

    Common vertices of N+(s) and N-(target) each give a path of length two;
    a maximum flow can always use all of them, so only the remainder needs
    the flow computation.
    """
    adj = t.adj
    if adj[s, target]:
        raise ValueError("local connectivity is only defined here for target -> s")
    if limit is None:
        limit = t.n
    common = adj[s] & adj[:, target]
    c = int(common.sum())
    if c >= limit:
        return limit
    out_s = adj[s] & ~common
    in_t = adj[:, target] & ~common
    avoid = common.copy()
    avoid[[s, target]] = True
    flow = _VertexFlow(adj, out_s, in_t, ~avoid)
    return c + flow.run(limit - c)


def vertex_connectivity(t: Tournament, at_most: int | None = None) -> int:
    """Largest kappa such that t is strongly kappa-connected (capped at ``at_most``).

    Any kappa+1 vertices include one outside a minimum separator S, and every
    vertex outside S either reaches nothing on the far side or is reached
    from nothing on the near side, so it suffices to take pairs through the
    first best+1 vertices.
    """
    n = t.n
    if n < 2:
        raise ValueError("connectivity needs n >= 2")
    if not (len(strong_components(t)) == 1):
        return 0
    best = int(min(t.out_degrees.min(), t.in_degrees.min()))
    if at_most is not None:
        best = min(best, int(at_most))
    adj = t.adj
    v = 0
    while v <= best and v < n:
        for w in np.flatnonzero(adj[:, v]):
            best = min(best, local_connectivity(t, v, int(w), best))
        for w in np.flatnonzero(adj[v]):
            best = min(best, local_connectivity(t, int(w), v, best))
        v += 1
    return best


def is_k_connected(t: Tournament, k: int) -> bool:
    if k <= 0:
        return True
    if t.n < k + 1:
        return False
    return vertex_connectivity(t, at_most=k) >= k


# -- exact linkage oracles -------------------------------------------------------

def _out_bits(t: Tournament) -> np.ndarray:
    weights = np.left_shift(np.int64(1), np.arange(t.n, dtype=np.int64))
    return (t.adj.astype(np.int64) * weights).sum(axis=1)


def _reach(out_bits: np.ndarray, masks: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Vertices reachable from ``starts`` inside ``masks``, elementwise, as bitmasks."""
    one = np.int64(1)
    reach = np.left_shift(one, starts) & masks
    n = out_bits.size
    while True:
        nb = np.zeros_like(reach)
        for v in range(n):
            nb |= np.where(np.right_shift(reach, v) & one, out_bits[v], 0)
        grown = reach | (nb & masks)
        if np.array_equal(grown, reach):
            return reach
        reach = grown


def _class_masks(free: Sequence[int], k: int, pinned: Sequence[int]) -> np.ndarray:
    """All ways to split ``free`` into k classes, as a (k, k^f) mask array.

    Class i always contains ``pinned[i]`` (the bitmask of its terminals).
    """
    f = len(free)
    codes = np.arange(k ** f, dtype=np.int64)
    masks = np.tile(np.asarray(pinned, dtype=np.int64)[:, None], (1, codes.size))
    for pos, v in enumerate(free):
        digit = (codes // (k ** pos)) % k
        for i in range(k):
            masks[i] |= np.where(digit == i, np.int64(1) << v, 0)
    return masks


def _bfs_path(t: Tournament, a: int, b: int, members: Iterable[int]) -> list[int] | None:
    allowed = set(members)
    parent = {a: None}
    frontier = [a]
    while frontier:
        nxt = []
        for u in frontier:
            for w in np.flatnonzero(t.adj[u]):
                w = int(w)
                if w in allowed and w not in parent:
                    parent[w] = u
                    if w == b:
                        path = [b]
                        while parent[path[-1]] is not None:
                            path.append(parent[path[-1]])
                        return path[::-1]
                    nxt.append(w)
        frontier = sorted(nxt)
    return [a] if a == b else None


def _bits(mask: int) -> list[int]:
    out, v = [], 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


def is_k_linked_exact(t: Tournament, inst: LinkageInstance,
                      budget: int = DEFAULT_BUDGET) -> LinkageResult:
    """Decide by exhaustion whether x_i -> y_i admit disjoint paths.

    Such paths exist iff the non-terminal vertices can be split into k
    classes so that y_i is reachable from x_i inside class i plus its two
    terminals; unused vertices may join any class without harm.
    """
    n, k = t.n, inst.k
    for v in inst.sources + inst.sinks:
        if not 0 <= v < n:
            raise ValueError(f"terminal {v} out of range")
    if n > MAX_EXACT_N:
        raise BudgetExceeded(f"n={n} is beyond the exhaustive oracle (max {MAX_EXACT_N})")
    terms = set(inst.sources + inst.sinks)
    free = [v for v in range(n) if v not in terms]
    nodes = k ** len(free)
    if nodes > budget:
        raise BudgetExceeded(f"{nodes} assignments exceed the budget {budget}")
    pinned = [(1 << x) | (1 << y) for x, y in zip(inst.sources, inst.sinks)]
    masks = _class_masks(free, k, pinned)
    ob = _out_bits(t)
    ok = np.ones(masks.shape[1], dtype=bool)
    for i, (x, y) in enumerate(zip(inst.sources, inst.sinks)):
        live = np.flatnonzero(ok)
        r = _reach(ob, masks[i, live], np.full(live.size, x, dtype=np.int64))
        ok[live] = (np.right_shift(r, y) & 1).astype(bool)
        if not ok.any():
            return LinkageResult(False, None, nodes)
    j = int(np.flatnonzero(ok)[0])
    paths = [_bfs_path(t, x, y, _bits(int(masks[i, j])))
             for i, (x, y) in enumerate(zip(inst.sources, inst.sinks))]
    verify_paths(t, paths, list(zip(inst.sources, inst.sinks)))
    return LinkageResult(True, paths, nodes)


def _reach_table(t: Tournament) -> np.ndarray:
    """R[x, mask] = vertices reachable from x inside mask (for x in mask)."""
    n = t.n
    masks = np.arange(1 << n, dtype=np.int64)
    ob = _out_bits(t)
    table = np.empty((n, masks.size), dtype=np.int64)
    for x in range(n):
        table[x] = _reach(ob, masks, np.full(masks.size, x, dtype=np.int64))
    return table


def _instances(n: int, k: int):
    for xs in itertools.combinations(range(n), k):
        rest = [v for v in range(n) if v not in xs]
        for ys in itertools.permutations(rest, k):
            yield xs, ys


def find_unlinked_instance(t: Tournament, k: int, budget: int = DEFAULT_BUDGET
                           ) -> LinkageInstance | None:
    """A terminal choice admitting no linkage, or None when t is k-linked.

    Sources are taken in increasing order since relabelling the pairs
    together does not change the question.
    """
    n = t.n
    if 2 * k > n:
        raise ValueError("not enough vertices for 2k distinct terminals")
    if n > MAX_EXACT_N:
        raise BudgetExceeded(f"n={n} is beyond the exhaustive oracle (max {MAX_EXACT_N})")
    f = n - 2 * k
    count = 1
    for i in range(k):
        count *= (n - i)
    for i in range(k, 2 * k):
        count *= (n - i)
    for i in range(1, k + 1):
        count //= i
    nodes = count * k ** f
    if nodes > budget:
        raise BudgetExceeded(f"{nodes} assignments exceed the budget {budget}")
    table = _reach_table(t)
    codes = np.arange(k ** f, dtype=np.int64)
    digits = [(codes // (k ** pos)) % k for pos in range(f)]
    for xs, ys in _instances(n, k):
        terms = set(xs) | set(ys)
        free = [v for v in range(n) if v not in terms]
        ok = np.ones(codes.size, dtype=bool)
        for i in range(k):
            mask = np.full(codes.size, (1 << xs[i]) | (1 << ys[i]), dtype=np.int64)
            for pos, v in enumerate(free):
                mask |= np.where(digits[pos] == i, np.int64(1) << v, 0)
            ok &= (np.right_shift(table[xs[i], mask], ys[i]) & 1).astype(bool)
            if not ok.any():
                break
        if not ok.any():
            return LinkageInstance(xs, ys)
    return None


def is_k_linked_all(t: Tournament, k: int, budget: int = DEFAULT_BUDGET) -> bool:
    """True iff every choice of 2k distinct terminals can be linked."""
    return find_unlinked_instance(t, k, budget) is None
