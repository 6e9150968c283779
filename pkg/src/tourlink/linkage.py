"""Linking terminal pairs through a loop-augmented subdivision.

Pipeline for terminals x_1..x_k, y_1..y_k:

1. embed a minimal subdivision with loops (branch set U) avoiding X and Y;
2. find disjoint paths X -> U and U -> Y (the reversing system);
3. drop branch vertices that are close to the U -> Y family, leaving a
   good set U';
4. rewrite both families until every intersection with the relevant
   subdivision paths is harmless;
5. splice x_i -> w_i -> u_i -> z_i -> y_i through a fresh branch vertex u_i.

All rewrites are checked against a strictly decreasing potential and every
output is verified independently of the code that built it.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .connectivity import LinkageInstance, PathSystem, max_disjoint_paths, verify_paths
from .errors import (ClaimViolation, CountViolation, HypothesisExhausted, PotentialError,
                     VerificationError)
from .subdivision import (DEFAULT_ROUTE_BUDGET, KStar, PartialSubdivision, bfs_path,
                          embed_kstar, shortcut_path)
from .tournament import Tournament, reverse

Pair = tuple[int, int]
TraceSink = Callable[[dict], None]


# -- restricted edge set -----------------------------------------------------------

@dataclass
class RestrictedEdgeSet:
    """Edges counted as belonging to the structure; distances use only these."""

    star: KStar
    edges: frozenset[Pair]
    vertices: frozenset[int]
    succ: dict[int, tuple[int, ...]]
    pred: dict[int, tuple[int, ...]]

    def __contains__(self, e) -> bool:
        return tuple(e) in self.edges

    def __len__(self) -> int:
        return len(self.edges)

    def off_edges(self, path: Sequence[int]) -> int:
        return sum((a, b) not in self.edges for a, b in zip(path, path[1:]))


def build_restricted_edges(star: KStar, t: Tournament) -> RestrictedEdgeSet:
    """Edges of the structure.

    * edges of connecting paths of length at least two;
    * edges of loop paths;
    * for each branch pair {u, v}, tournament edges between {u, v} and the
      vertices of both connecting paths, except the edge uv itself;
    * for each branch vertex u, tournament edges between u and the loops
      containing u.
    """
    adj = t.adj
    edges: set[Pair] = set()

    def between(u: int, verts) -> None:
        for x in verts:
            if x == u:
                continue
            edges.add((u, x) if adj[u, x] else (x, u))

    branch = list(star.branch)
    for p in star.base.paths.values():
        if len(p) >= 3:
            edges.update(zip(p, p[1:]))
    for entry, exit_ in star.loops.values():
        edges.update(zip(entry, entry[1:]))
        edges.update(zip(exit_, exit_[1:]))
    for i, u in enumerate(branch):
        for v in branch[i + 1:]:
            verts = set(star.base.paths[(u, v)]) | set(star.base.paths[(v, u)])
            verts -= {u, v}
            between(u, verts)
            between(v, verts)
    for (u, v), (entry, exit_) in star.loops.items():
        # entry loop ends at u, exit loop starts at v
        between(u, entry)
        between(v, exit_)
    succ: dict[int, list[int]] = {}
    pred: dict[int, list[int]] = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
        pred.setdefault(b, []).append(a)
    return RestrictedEdgeSet(
        star, frozenset(edges), frozenset(star.vertices()),
        {a: tuple(sorted(bs)) for a, bs in succ.items()},
        {b: tuple(sorted(as_)) for b, as_ in pred.items()},
    )


def _distances(nbrs: dict[int, tuple[int, ...]], src: int, radius: float = math.inf) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        a = queue.popleft()
        if dist[a] >= radius:
            continue
        for b in nbrs.get(a, ()):
            if b not in dist:
                dist[b] = dist[a] + 1
                queue.append(b)
    return dist


def restricted_in_distance(es: RestrictedEdgeSet, u: int, x: int) -> float:
    """Length of a shortest u -> x path over structure edges (inf if none)."""
    return _distances(es.succ, u).get(x, math.inf)


def restricted_out_distance(es: RestrictedEdgeSet, u: int, x: int) -> float:
    """Length of a shortest x -> u path over structure edges (inf if none)."""
    return _distances(es.pred, u).get(x, math.inf)


def in_balls(es: RestrictedEdgeSet, radius: int = 2) -> dict[int, dict[int, int]]:
    """For every branch vertex u, the vertices within in-distance ``radius``."""
    return {u: _distances(es.succ, u, radius) for u in es.star.branch}


def reverse_kstar(ks: KStar) -> KStar:
    """The same structure read in the reversed tournament.

    P_uv reversed runs v -> u; the entry loop of P_uv becomes the exit loop
    of the reversed path and vice versa.
    """
    paths = {(v, u): tuple(reversed(p)) for (u, v), p in ks.base.paths.items()}
    loops = {(v, u): (tuple(reversed(exit_)), tuple(reversed(entry)))
             for (u, v), (entry, exit_) in ks.loops.items()}
    return KStar(PartialSubdivision(ks.base.branch, paths), loops)


# -- reversing path systems ------------------------------------------------------------

@dataclass
class ReversingState:
    """State of the reversing-system engine (in the orientation it ran in)."""

    w_a: dict[int, int] = field(default_factory=dict)   # W_A vertex -> its partner in A
    w_b: dict[int, int] = field(default_factory=dict)   # W_B vertex -> its partner in B
    P: list[list[int]] = field(default_factory=list)    # L -> B'' paths
    Q: list[list[int]] = field(default_factory=list)    # A'' -> L paths
    flipped: bool = False
    trace: list[dict] = field(default_factory=list)
    restarts: int = 0


def _kuhn(left: list[int], options: dict[int, list[int]]) -> dict[int, int]:
    """Maximum bipartite matching; returns right vertex -> left vertex."""
    owner: dict[int, int] = {}

    def grow(a: int, seen: set[int]) -> bool:
        for w in options.get(a, ()):
            if w in seen:
                continue
            seen.add(w)
            if w not in owner or grow(owner[w], seen):
                owner[w] = a
                return True
        return False

    for a in left:
        grow(a, set())
    return owner


def _max_w_matching(t: Tournament, A, B, L, k: int) -> tuple[dict[int, int], dict[int, int]]:
    """Disjoint W_A, W_B of maximum total size with their matchings.

    W_A vertices have >= 2k out-neighbours in L and an in-neighbour in A;
    W_B vertices have >= 2k in-neighbours in L and an out-neighbour in B.
    One bipartite matching between A u B and the candidates settles both.
    """
    adj = t.adj
    lm = t.mask(L)
    taken = t.mask(list(A) + list(B) + list(L))
    out_l = adj[:, lm].sum(axis=1)
    in_l = adj[lm, :].sum(axis=0)
    cand_a = ~taken & (out_l >= 2 * k)
    cand_b = ~taken & (in_l >= 2 * k)
    options = {}
    for a in A:
        options[a] = np.flatnonzero(adj[a] & cand_a).tolist()
    for b in B:
        options[b] = np.flatnonzero(adj[:, b] & cand_b).tolist()
    owner = _kuhn(list(A) + list(B), options)
    aset = set(A)
    w_a = {w: a for w, a in owner.items() if a in aset}
    w_b = {w: b for w, b in owner.items() if b not in aset}
    return dict(sorted(w_a.items())), dict(sorted(w_b.items()))


class _Reverser:
    """Exchange engine: routes P (L -> B'') then Q (A'' -> L) and untangles them."""

    def __init__(self, t: Tournament, A, B, L, k: int, w_a: dict, w_b: dict,
                 trace: TraceSink | None, max_steps: int):
        self.t = t
        self.adj = t.adj
        self.A, self.B, self.L = list(A), list(B), list(L)
        self.Lset = set(L)
        self.k = k
        self.st = ReversingState(dict(w_a), dict(w_b))
        self.sink = trace
        self.max_steps = max_steps
        self.lm = t.mask(L)
        self.in_l = self.adj[self.lm, :].sum(axis=0)
        self.out_l = self.adj[:, self.lm].sum(axis=1)

    # -- bookkeeping
    def _p_prime(self, p: list[int]) -> bool:
        return len(p) >= 2 and self.in_l[p[1]] >= 2 * self.k

    def _y_set(self) -> set[int]:
        st = self.st
        y = set(st.w_a.values()) | set(st.w_a) | set(self.B) | set(st.w_b)
        for p in st.P:
            y.update(p[1:3] if self._p_prime(p) else p[0:2])
        return y

    def potential(self) -> tuple[int, int, int, int, int]:
        st = self.st
        pv = {v for p in st.P for v in p}
        qv = {v for q in st.Q for v in q}
        prime = sum(self._p_prime(p) for p in st.P)
        return (-(len(st.w_a) + len(st.w_b)), len(pv), -prime, len(qv), len(pv & qv))

    def _free(self) -> list[int]:
        used = {v for p in self.st.P for v in p} | {v for q in self.st.Q for v in q}
        return sorted(self.Lset - used)

    def _log(self, rule: str, before, after, **extra) -> None:
        rec = {"stage": "reversing", "rule": rule, "before": list(before), "after": list(after)}
        rec.update(extra)
        self.st.trace.append(rec)
        if self.sink is not None:
            self.sink(rec)
        if not after < before:
            raise PotentialError(f"rule {rule} did not decrease the potential: {before} -> {after}")

    # -- routing
    def route_p(self) -> None:
        st = self.st
        matched_b = set(st.w_b.values())
        b2 = [b for b in self.B if b not in matched_b]
        avoid = set(self.A) | set(st.w_a) | matched_b | set(st.w_b)
        need = self.k - len(st.w_b)
        ps = max_disjoint_paths(self.t, self.L, b2, avoid=avoid, internal_exclusion=self.L, limit=need)
        if len(ps) < need:
            raise HypothesisExhausted("reversing-into-B",
                                      f"only {len(ps)} of {need} disjoint paths from L to B")
        st.P = [shortcut_path(self.t, p) for p in ps.paths]

    def route_q(self) -> None:
        st = self.st
        matched_a = set(st.w_a.values())
        a2 = [a for a in self.A if a not in matched_a]
        need = self.k - len(st.w_a)
        y = self._y_set()
        ps = max_disjoint_paths(self.t, a2, self.L, avoid=y, internal_exclusion=self.L, limit=need)
        if len(ps) < need:
            raise HypothesisExhausted("reversing-from-A",
                                      f"only {len(ps)} of {need} disjoint paths from A to L")
        st.Q = [shortcut_path(self.t, q) for q in ps.paths]

    def _first_hit(self):
        where = {v: (pi, j) for pi, p in enumerate(self.st.P) for j, v in enumerate(p)}
        for qi, q in enumerate(self.st.Q):
            for i, v in enumerate(q):
                if v in where:
                    return qi, i, where[v][0], where[v][1]
        return None

    def _augment(self, y1: int, y2: int) -> None:
        before = self.potential()
        assert y1 in self.A and y2 not in self.Lset and y2 not in self.B and y2 not in self.A
        assert self.out_l[y2] >= 2 * self.k, "augmenting vertex lacks out-neighbours in L"
        self.st.w_a[y2] = y1
        self.st.restarts += 1
        self.route_p()
        self.route_q()
        self._log("augment-matching", before, self.potential(), vertex=y2)

    def run(self) -> ReversingState:
        st = self.st
        self.route_p()
        self.route_q()
        steps = 0
        while True:
            hit = self._first_hit()
            if hit is None:
                break
            steps += 1
            if steps > self.max_steps:
                raise HypothesisExhausted("reversing", "exchange step limit reached")
            self._resolve(*hit)
        return st

    def _resolve(self, qi: int, i: int, pi: int, j: int) -> None:
        adj = self.adj
        st = self.st
        q, p = st.Q[qi], st.P[pi]
        before = self.potential()
        free = self._free()
        prime = self._p_prime(p)
        assert i >= 1, "paths into B avoid A"
        if prime:
            assert j not in (1, 2), "paths from A avoid second and third vertices of primed paths"
            if j == 0:
                swap = [x for x in free if adj[x, p[1]]]
                assert swap, "second vertex has too few in-neighbours in L"
                st.P[pi] = [swap[0]] + p[1:]
                self._log("swap-start", before, self.potential(), path=pi)
                return
        else:
            assert j >= 2, "paths from A avoid the first two vertices of unprimed paths"
        if i == 1:
            jump = [z for z in free if adj[z, q[1]]]
            if jump:
                st.P[pi] = [jump[0]] + p[j:]
                self._finish_p_rewrite("shorten-into-B", before, pi)
                return
            self._augment(q[0], q[1])
            return
        prev = q[i - 1]
        outs = [z for z in free if adj[prev, z]]
        if outs:
            st.Q[qi] = q[:i] + [outs[0]]
            self._log("shorten-from-A", before, self.potential(), path=qi)
            return
        assert free, "no free vertex left in L"
        st.P[pi] = [free[0], prev] + p[j:]
        self._finish_p_rewrite("reroute-into-B" if prime else "upgrade-second-vertex", before, pi)

    def _finish_p_rewrite(self, rule: str, before, pi: int) -> None:
        st = self.st
        y = self._y_set()
        if any(v in y for q in st.Q for v in q):
            self.route_q()
        self._log(rule, before, self.potential(), path=pi)

    def finish(self) -> tuple[list[list[int]], list[list[int]]]:
        adj = self.adj
        st = self.st
        free = self._free()
        a_paths = [list(q) for q in st.Q]
        b_paths = [list(p) for p in st.P]
        for w, a in sorted(st.w_a.items()):
            pick = next((x for x in free if adj[w, x]), None)
            assert pick is not None, f"W_A vertex {w} has no free out-neighbour in L"
            free.remove(pick)
            a_paths.append([a, w, pick])
        for w, b in sorted(st.w_b.items()):
            pick = next((x for x in free if adj[x, w]), None)
            assert pick is not None, f"W_B vertex {w} has no free in-neighbour in L"
            free.remove(pick)
            b_paths.append([pick, w, b])
        return a_paths, b_paths


def verify_reversing_system(t: Tournament, A, B, L, a_paths, b_paths) -> None:
    """k paths A -> L and k paths L -> B, pairwise disjoint, internally avoiding L."""
    Aset, Bset, Lset = set(A), set(B), set(L)
    verify_paths(t, list(a_paths) + list(b_paths))
    if sorted(p[0] for p in a_paths) != sorted(Aset):
        raise VerificationError("sources", "paths from A do not start once at each vertex of A")
    if sorted(p[-1] for p in b_paths) != sorted(Bset):
        raise VerificationError("sinks", "paths into B do not end once at each vertex of B")
    for p in a_paths:
        if p[-1] not in Lset:
            raise VerificationError("ends-in-L", f"path {p} does not end in L")
    for p in b_paths:
        if p[0] not in Lset:
            raise VerificationError("starts-in-L", f"path {p} does not start in L")
    for p in list(a_paths) + list(b_paths):
        if Lset & set(p[1:-1]):
            raise VerificationError("internal-L", f"path {p} passes through L")


def find_reversing_system(t: Tournament, A, B, L, k: int | None = None, eager_matching: bool = True,
                          trace: TraceSink | None = None, max_steps: int = 100_000
                          ) -> tuple[PathSystem, PathSystem, ReversingState]:
    """k disjoint paths A -> L and k disjoint paths L -> B, internally avoiding L.

    With ``eager_matching`` the W-sets start from a maximum matching;
    otherwise they start empty and grow whenever a path from A could be
    absorbed into the matching.  Raises HypothesisExhausted when routing
    capacity runs out (expected below the connectivity the argument needs).
    """
    A, B, L = [int(a) for a in A], [int(b) for b in B], [int(x) for x in L]
    k = len(A) if k is None else k
    if len(A) != k or len(B) != k:
        raise ValueError("A and B must have exactly k vertices")
    if len(L) < 4 * k:
        raise ValueError("L needs at least 4k vertices")
    if len(set(A) | set(B) | set(L)) != len(A) + len(B) + len(L):
        raise ValueError("A, B and L must be pairwise disjoint")
    w_a, w_b = _max_w_matching(t, A, B, L, k) if eager_matching else ({}, {})
    if len(w_a) > len(w_b):
        # run on the reversed tournament where the roles of A and B swap
        eng = _Reverser(reverse(t), B, A, L, k, w_b, w_a, trace, max_steps)
        eng.run()
        b_rev, a_rev = eng.finish()
        a_paths = [p[::-1] for p in a_rev]
        b_paths = [p[::-1] for p in b_rev]
        eng.st.flipped = True
    else:
        eng = _Reverser(t, A, B, L, k, w_a, w_b, trace, max_steps)
        eng.run()
        a_paths, b_paths = eng.finish()
    verify_reversing_system(t, A, B, L, a_paths, b_paths)
    a_sys = PathSystem(sorted(a_paths), frozenset(A), frozenset(L), internal_exclusion=frozenset(L), requested=k)
    b_sys = PathSystem(sorted(b_paths, key=lambda p: p[-1]), frozenset(L), frozenset(B),
                       internal_exclusion=frozenset(L), requested=k)
    return a_sys, b_sys, eng.st


# -- goodness and the rerouting fixed point ---------------------------------------------

def close_branch_vertices(es: RestrictedEdgeSet, family: Sequence[Sequence[int]],
                          balls: dict[int, dict[int, int]] | None = None) -> list[int]:
    """Branch vertices off the family within in-distance 2 of a family vertex outside U."""
    balls = in_balls(es) if balls is None else balls
    U = set(es.star.branch)
    used = {p[0] for p in family} & U
    body = {v for p in family for v in p} - U
    return sorted(u for u in U - used if body & balls[u].keys())


def goodness_violations(es: RestrictedEdgeSet, family: Sequence[Sequence[int]], good: Sequence[int],
                        balls: dict[int, dict[int, int]] | None = None) -> list[Pair]:
    """Nontrivial pairs (u, x), u in ``good``, x on the family outside U, at in-distance <= 2.

    The pairs (p_0, p_1) and (p_0, p_2) of each path are trivial.
    """
    balls = in_balls(es) if balls is None else balls
    U = set(es.star.branch)
    trivial = set()
    for p in family:
        for x in p[1:3]:
            trivial.add((p[0], x))
    body = {v for p in family for v in p} - U
    out = []
    for u in good:
        for x in sorted(body & balls[u].keys()):
            if (u, x) not in trivial:
                out.append((u, x))
    return out


def select_good_set(es: RestrictedEdgeSet, family: Sequence[Sequence[int]], k: int,
                    balls: dict[int, dict[int, int]] | None = None) -> list[int]:
    """Branch vertices that are neither used by nor in-close to the family.

    Raises CountViolation when more than 8k^2 + 4k branch vertices are close,
    and HypothesisExhausted when fewer than 2k vertices remain.
    """
    balls = in_balls(es) if balls is None else balls
    U = set(es.star.branch)
    close = close_branch_vertices(es, family, balls)
    if len(close) > 8 * k * k + 4 * k:
        raise CountViolation(f"{len(close)} close branch vertices exceed 8k^2+4k = {8 * k * k + 4 * k}")
    used = {p[0] for p in family} & U
    good = sorted(U - used - set(close))
    if len(good) < 2 * k:
        raise HypothesisExhausted("good-set", f"only {len(good)} good branch vertices, need {2 * k}")
    return good


@dataclass
class LinkageContext:
    """Mutable state of the rerouting engine.

    ``P[i]`` runs from a branch vertex z_i to y_i, ``Q[i]`` from x_i to a
    branch vertex w_i.
    """

    t: Tournament
    star: KStar
    es: RestrictedEdgeSet
    inst: LinkageInstance
    P: list[list[int]]
    Q: list[list[int]]
    good: list[int]
    balls: dict[int, dict[int, int]]
    trace: list[dict] = field(default_factory=list)
    sink: TraceSink | None = None

    @property
    def k(self) -> int:
        return self.inst.k

    @property
    def U(self) -> set[int]:
        return set(self.star.branch)

    @property
    def z(self) -> list[int]:
        return [p[0] for p in self.P]

    @property
    def w(self) -> list[int]:
        return [q[-1] for q in self.Q]

    @property
    def fresh(self) -> list[int]:
        """u_1..u_k: the first k good vertices not used by either family."""
        used = set(self.z) | set(self.w)
        spare = [u for u in self.good if u not in used]
        if len(spare) < self.k:
            raise HypothesisExhausted("reroute", f"only {len(spare)} unused good branch vertices")
        return spare[: self.k]

    def potential(self) -> tuple[int, int]:
        off = sum(self.es.off_edges(p) for p in self.P) + sum(self.es.off_edges(q) for q in self.Q)
        size = len({v for p in self.P for v in p}) + len({v for q in self.Q for v in q})
        return off, size

    def path(self, u: int, v: int) -> tuple[int, ...]:
        return self.star.base.paths[(u, v)]

    def exit_loop(self, w: int, u: int) -> tuple[int, ...] | None:
        """Loop at u belonging to P_wu: runs from u to the penultimate vertex of P_wu."""
        pair = self.star.loops.get((w, u))
        return pair[1] if pair else None

    def entry_loop(self, u: int, z: int) -> tuple[int, ...] | None:
        """Loop at u belonging to P_uz: runs from the second vertex of P_uz to u."""
        pair = self.star.loops.get((u, z))
        return pair[0] if pair else None


@dataclass
class Violation:
    claim: str
    index: int
    detail: str
    rewrite: tuple[str, int, list[int]] | None  # (family, position, new path)


def _where(paths: Sequence[Sequence[int]]) -> dict[int, int]:
    return {v: i for i, p in enumerate(paths) for v in p}


def find_violations(ctx: LinkageContext, first_only: bool = True) -> list[Violation]:
    """Scan the four intersection properties in order; each failure carries its fix.

    * q-exit-loop: the first vertex of the exit loop at u_i (on P_{w_i u_i})
      met by a path from X is its second vertex, or its last vertex on Q_i.
    * p-avoids-w-path / q-last-on-own: no path into Y meets P_{w_i u_i};
      the last vertex of P_{w_i u_i} on a path from X lies on Q_i.
    * p-avoids-entry-loop: no path into Y meets the entry loop at u_i on
      P_{u_i z_i}.
    * q-avoids-z-path / p-first-on-own: no path from X meets P_{u_i z_i};
      the first vertex of P_{u_i z_i} on a path into Y lies on P_i.
    """
    out: list[Violation] = []
    adj = ctx.t.adj
    P, Q = ctx.P, ctx.Q
    onP, onQ = _where(P), _where(Q)
    fresh = ctx.fresh
    w, z = ctx.w, ctx.z

    def emit(v: Violation) -> bool:
        out.append(v)
        return first_only

    for i in range(ctx.k):
        u = fresh[i]
        loop = ctx.exit_loop(w[i], u)
        if loop is None:
            continue
        for qi, q in enumerate(Q):
            qs = set(q)
            pos = next((a for a in range(1, len(loop)) if loop[a] in qs), None)
            if pos is None or pos == 1 or (pos == len(loop) - 1 and qi == i):
                continue
            x = loop[pos]
            assert adj[x, u]
            cut = q.index(x)
            if emit(Violation("q-exit-loop", i, f"path {qi} from X meets the exit loop at {x}",
                              ("Q", qi, q[:cut + 1] + [u]))):
                return out

    for i in range(ctx.k):
        u = fresh[i]
        pw = ctx.path(w[i], u)
        if len(pw) >= 3:
            hits = [x for x in pw[1:-1] if x in onP]
            if hits:
                x = hits[0]
                if x != pw[-2]:
                    if emit(Violation("p-avoids-w-path", i, f"path into Y meets {x} inside P_wu; goodness broken", None)):
                        return out
                    continue
                loop = ctx.exit_loop(w[i], u)
                pos = next(a for a in range(1, len(loop)) if loop[a] in onP)
                head = list(loop[:pos + 1])
                qhit = [x2 for x2 in head[1:] if x2 in onQ]
                if not qhit:
                    pj = onP[loop[pos]]
                    pp = P[pj]
                    new = head + pp[pp.index(loop[pos]) + 1:]
                    if emit(Violation("p-avoids-w-path", i, f"path {pj} into Y meets the exit loop", ("P", pj, new))):
                        return out
                else:
                    r = qhit[0]
                    qj = onQ[r]
                    qq = Q[qj]
                    r1 = loop[2] if len(loop) > 2 else None
                    if r != loop[1] or r1 is None:
                        if emit(Violation("p-avoids-w-path", i, "exit loop met by X-path away from its second vertex", None)):
                            return out
                        continue
                    new = qq[:qq.index(r) + 1] + [r1, u] if r1 != u else qq[:qq.index(r) + 1] + [u]
                    if emit(Violation("p-avoids-w-path", i, f"path {qj} from X cuts through the exit loop", ("Q", qj, new))):
                        return out
                continue
        last = max((a for a in range(len(pw)) if pw[a] in onQ), default=None)
        if last is not None and onQ[pw[last]] != i:
            qj = onQ[pw[last]]
            qq = Q[qj]
            new = qq[:qq.index(pw[last]) + 1] + list(pw[last + 1:])
            if emit(Violation("q-last-on-own", i, f"last X-path vertex on P_wu lies on path {qj}", ("Q", qj, new))):
                return out

    for i in range(ctx.k):
        u = fresh[i]
        loop = ctx.entry_loop(u, z[i])
        if loop is None:
            continue
        hits = [x for x in loop[:-1] if x in onP]
        if hits:
            if emit(Violation("p-avoids-entry-loop", i, f"path into Y meets entry loop at {hits[0]}; goodness broken", None)):
                return out

    for i in range(ctx.k):
        u = fresh[i]
        pz = ctx.path(u, z[i])
        if len(pz) >= 3:
            hits = [a for a in range(1, len(pz) - 1) if pz[a] in onQ]
            if hits:
                later = [a for a in hits if a >= 2]
                if later:
                    x = pz[later[0]]
                    qj = onQ[x]
                    qq = Q[qj]
                    assert adj[x, u]
                    if emit(Violation("q-avoids-z-path", i, f"path {qj} from X meets P_uz at {x}",
                                      ("Q", qj, qq[:qq.index(x) + 1] + [u]))):
                        return out
                    continue
                loop = ctx.entry_loop(u, z[i])
                pos = max(a for a in range(len(loop) - 1) if loop[a] in onQ)
                x = loop[pos]
                qj = onQ[x]
                qq = Q[qj]
                new = qq[:qq.index(x) + 1] + list(loop[pos + 1:])
                if emit(Violation("q-avoids-z-path", i, f"path {qj} from X meets the second vertex of P_uz",
                                  ("Q", qj, new))):
                    return out
                continue
        first = min((a for a in range(1, len(pz)) if pz[a] in onP), default=None)
        if first is not None and onP[pz[first]] != i:
            pj = onP[pz[first]]
            pp = P[pj]
            new = list(pz[:first + 1]) + pp[pp.index(pz[first]) + 1:]
            if emit(Violation("p-first-on-own", i, f"first path vertex on P_uz lies on path {pj}", ("P", pj, new))):
                return out
    return out


def _check_families(ctx: LinkageContext, P: list[list[int]], Q: list[list[int]]) -> str | None:
    """Why (P, Q) is not an admissible state, or None."""
    U = ctx.U
    try:
        verify_paths(ctx.t, P + Q)
    except VerificationError as e:
        return str(e)
    for i, p in enumerate(P):
        if p[0] not in U or p[-1] != ctx.inst.sinks[i] or U & set(p[1:]):
            return f"path {i} into Y has wrong endpoints or re-enters U"
    for i, q in enumerate(Q):
        if q[0] != ctx.inst.sources[i] or q[-1] not in U or U & set(q[:-1]):
            return f"path {i} from X has wrong endpoints or re-enters U"
    return None


def reroute_fixed_point(ctx: LinkageContext, max_steps: int = 100_000) -> LinkageContext:
    """Apply improving rewrites until the intersection properties all hold."""
    for _ in range(max_steps):
        found = find_violations(ctx, first_only=True)
        if not found:
            return ctx
        v = found[0]
        if v.rewrite is None:
            raise ClaimViolation(v.claim, v.index, v.detail)
        fam, pos, new = v.rewrite
        P = [list(p) for p in ctx.P]
        Q = [list(q) for q in ctx.Q]
        (P if fam == "P" else Q)[pos] = shortcut_path(ctx.t, new)
        why = _check_families(ctx, P, Q)
        if why is None and fam == "P":
            bad = goodness_violations(ctx.es, P, ctx.good, ctx.balls)
            if bad:
                why = f"rewrite breaks goodness at {bad[0]}"
        before = ctx.potential()
        old = ctx.P, ctx.Q
        ctx.P, ctx.Q = P, Q
        after = ctx.potential()
        if why is None and not after < before:
            why = f"potential did not decrease: {before} -> {after}"
        if why is not None:
            ctx.P, ctx.Q = old
            raise ClaimViolation(v.claim, v.index, f"{v.detail}; rewrite rejected: {why}")
        rec = {"stage": "reroute", "rule": v.claim, "index": v.index,
               "before": list(before), "after": list(after)}
        ctx.trace.append(rec)
        if ctx.sink is not None:
            ctx.sink(rec)
    raise HypothesisExhausted("reroute", "rewrite step limit reached")


def check_claims(ctx: LinkageContext) -> None:
    """Assert every intersection property at the current state."""
    found = find_violations(ctx, first_only=True)
    if found:
        v = found[0]
        raise ClaimViolation(v.claim, v.index, v.detail)
    for i in range(ctx.k):
        u = ctx.fresh[i]
        pw = ctx.path(ctx.w[i], u)
        pz = ctx.path(u, ctx.z[i])
        onP, onQ = _where(ctx.P), _where(ctx.Q)
        if any(x in onP for x in pw):
            raise ClaimViolation("p-avoids-w-path", i, "path into Y meets P_wu")
        if any(x in onQ for x in pz):
            raise ClaimViolation("q-avoids-z-path", i, "path from X meets P_uz")
        q_last = max(a for a in range(len(pw)) if pw[a] in onQ)
        if onQ[pw[q_last]] != i:
            raise ClaimViolation("q-last-on-own", i, "last X-path vertex on P_wu is on another path")
        p_first = min(a for a in range(len(pz)) if pz[a] in onP)
        if onP[pz[p_first]] != i:
            raise ClaimViolation("p-first-on-own", i, "first path vertex on P_uz is on another path")


def splice(ctx: LinkageContext) -> list[list[int]]:
    """Q_i up to q_i, along P_{w_i u_i} to u_i, along P_{u_i z_i} to p_i, then P_i."""
    onP, onQ = _where(ctx.P), _where(ctx.Q)
    out = []
    for i in range(ctx.k):
        u = ctx.fresh[i]
        pw = ctx.path(ctx.w[i], u)
        pz = ctx.path(u, ctx.z[i])
        a = max(j for j in range(len(pw)) if pw[j] in onQ)
        b = min(j for j in range(1, len(pz)) if pz[j] in onP)
        q, p = ctx.Q[i], ctx.P[i]
        path = q[:q.index(pw[a]) + 1] + list(pw[a + 1:]) + list(pz[1:b + 1]) + p[p.index(pz[b]) + 1:]
        if u not in path:
            raise VerificationError("splice", f"path {i} misses its branch vertex {u}")
        out.append(path)
    return out


# -- the full pipeline --------------------------------------------------------------

@dataclass
class LinkResult:
    paths: list[list[int]]
    star: KStar | None = None
    context: LinkageContext | None = None
    reversing: ReversingState | None = None
    reflected: bool = False
    trace: list[dict] = field(default_factory=list)


def verify_linkage(t: Tournament, inst: LinkageInstance, paths: Sequence[Sequence[int]]) -> None:
    """k pairwise disjoint paths, path i from x_i to y_i."""
    if len(paths) != inst.k:
        raise VerificationError("count", f"{len(paths)} paths for {inst.k} terminal pairs")
    verify_paths(t, paths, list(zip(inst.sources, inst.sinks)))


def _oriented(t: Tournament, star: KStar, inst: LinkageInstance, a_paths, b_paths,
              sink: TraceSink | None) -> LinkageContext:
    es = build_restricted_edges(star, t)
    balls = in_balls(es)
    k = inst.k
    Q = [next(list(q) for q in a_paths if q[0] == x) for x in inst.sources]
    P = [next(list(p) for p in b_paths if p[-1] == y) for y in inst.sinks]
    good = select_good_set(es, P, k, balls)
    return LinkageContext(t, star, es, inst, P, Q, good, balls, sink=sink)


def link_terminals(t: Tournament, inst: LinkageInstance, r_override: int | None = None,
                   trace: TraceSink | None = None, embed_budget: int = DEFAULT_ROUTE_BUDGET,
                   eager_matching: bool = True) -> LinkResult:
    """Disjoint x_i -> y_i paths routed through a loop-augmented subdivision.

    Best effort: raises HypothesisExhausted naming the stage that gave up.
    Returned paths are always independently verified.
    """
    k = inst.k
    if k == 1:
        x, y = inst.sources[0], inst.sinks[0]
        path = bfs_path(t, x, y, np.ones(t.n, dtype=bool))
        if path is None:
            raise HypothesisExhausted("reachability", f"{y} is not reachable from {x}")
        verify_linkage(t, inst, [path])
        return LinkResult([path])
    r = 12 * k * k if r_override is None else int(r_override)
    terms = set(inst.sources) | set(inst.sinks)
    universe = np.ones(t.n, dtype=bool)
    universe[list(terms)] = False
    star = embed_kstar(t, r, within=universe, budget=embed_budget)
    recs: list[dict] = []

    def sink(rec: dict) -> None:
        recs.append(rec)
        if trace is not None:
            trace(rec)

    a_sys, b_sys, state = find_reversing_system(t, inst.sources, inst.sinks, star.branch, k,
                                                eager_matching=eager_matching, trace=sink)
    forward = (t, star, inst, a_sys.paths, b_sys.paths)
    backward = (reverse(t), reverse_kstar(star), LinkageInstance(inst.sinks, inst.sources),
                [p[::-1] for p in b_sys.paths], [q[::-1] for q in a_sys.paths])
    # the family routed first (into B, or into A when the engine flipped) is the one
    # with few close branch vertices; try that side first and the mirror second
    order = [backward, forward] if state.flipped else [forward, backward]
    errors = []
    for reflected, args in zip((state.flipped, not state.flipped), order):
        try:
            ctx = _oriented(*args, sink)
        except (CountViolation, HypothesisExhausted) as e:
            errors.append(e)
            continue
        reroute_fixed_point(ctx)
        check_claims(ctx)
        paths = splice(ctx)
        if reflected:
            paths = [p[::-1] for p in paths]
        verify_linkage(t, inst, paths)
        return LinkResult(paths, star, ctx, state, reflected, recs)
    if all(isinstance(e, CountViolation) for e in errors):
        raise errors[0]
    raise next(e for e in errors if isinstance(e, HypothesisExhausted))
