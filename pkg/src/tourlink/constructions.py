"""Deterministic generators for the extremal examples and standard fixtures.

Every generator returns a tournament together with its named parts.  Zones
whose orientation is free are filled from a seeded stream, or transitively
(lower id beats higher id) when ``transitive_inside`` is set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .connectivity import LinkageInstance
from .tournament import Tournament


@dataclass
class Construction:
    tournament: Tournament
    parts: dict[str, tuple[int, ...]]
    params: dict = field(default_factory=dict)

    def parts_json(self) -> str:
        return json.dumps({"params": self.params,
                           "parts": {k: list(v) for k, v in self.parts.items()}},
                          sort_keys=True)


@dataclass(frozen=True)
class BlowupSpec:
    k: int
    size_a: int
    size_b: int
    internal_seed: int = 0
    transitive_inside: bool = False

    def check(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.size_a < 2 * self.k or self.size_b < 2 * self.k:
            raise ValueError("parts A and B need at least 2k vertices each")


@dataclass(frozen=True)
class PopielarzSpec:
    k: int
    n: int
    internal_seed: int = 0
    transitive_inside: bool = False

    def check(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.n < 4 * self.k - 1 + 3:
            raise ValueError(f"n must be at least {4 * self.k + 2} for k={self.k}")


def transitive(n: int) -> Tournament:
    """i -> j iff i < j."""
    if n < 1:
        raise ValueError("n must be positive")
    return Tournament(np.triu(np.ones((n, n), dtype=bool), 1), check=False)


def _fill_arbitrary(adj: np.ndarray, zone_a: np.ndarray, zone_b: np.ndarray | None,
                    rng: np.random.Generator | None) -> None:
    """Orient all pairs inside zone_a (or between zone_a and zone_b) freely."""
    if zone_b is None:
        m = zone_a.size
        if m < 2:
            return
        if rng is None:
            bits = np.ones((m, m), dtype=bool)
        else:
            bits = rng.integers(0, 2, size=(m, m), dtype=np.uint8).astype(bool)
        upper = np.triu(bits, 1)
        block = upper | np.triu(~bits, 1).T
        adj[np.ix_(zone_a, zone_a)] = block
        return
    if rng is None:
        fwd = np.less.outer(zone_a, zone_b)
    else:
        fwd = rng.integers(0, 2, size=(zone_a.size, zone_b.size), dtype=np.uint8).astype(bool)
    adj[np.ix_(zone_a, zone_b)] = fwd
    adj[np.ix_(zone_b, zone_a)] = ~fwd.T


def _join(adj: np.ndarray, src: np.ndarray, dst: np.ndarray) -> None:
    adj[np.ix_(src, dst)] = True
    adj[np.ix_(dst, src)] = False


def directed_cycle_blowup(parts, seed: int = 0, transitive_inside: bool = True) -> Construction:
    """Blow-up of a rotational cycle on len(parts) parts.

    Part i beats part j iff 0 < (j - i) mod p <= p // 2; for even p the
    antipodal pairs are oriented from the lower index.  With three parts
    this is the blown-up directed triangle P0 -> P1 -> P2 -> P0.
    """
    parts = [int(s) for s in parts]
    if not parts or min(parts) < 1:
        raise ValueError("parts must be nonempty with positive sizes")
    p = len(parts)
    n = sum(parts)
    bounds = np.cumsum([0] + parts)
    groups = [np.arange(bounds[i], bounds[i + 1]) for i in range(p)]
    adj = np.zeros((n, n), dtype=bool)
    rng = None if transitive_inside else np.random.default_rng(seed)
    for i in range(p):
        _fill_arbitrary(adj, groups[i], None, rng)
        for j in range(i + 1, p):
            d = (j - i) % p
            if d <= p - d:
                _join(adj, groups[i], groups[j])
            else:
                _join(adj, groups[j], groups[i])
    names = {f"P{i}": tuple(int(v) for v in g) for i, g in enumerate(groups)}
    return Construction(Tournament(adj), names,
                        {"parts": parts, "seed": seed, "transitive_inside": transitive_inside})


def triangle_blowup(spec: BlowupSpec) -> Construction:
    """Directed-triangle blow-up A -> B -> C -> A with |C| = 2k - 2."""
    spec.check()
    c = 2 * spec.k - 2
    sizes = [spec.size_a, spec.size_b] + ([c] if c else [])
    # for k = 1, C is empty and the two remaining parts are joined A -> B
    base = directed_cycle_blowup(sizes, spec.internal_seed, spec.transitive_inside)
    a = base.parts["P0"]
    b = base.parts["P1"]
    cc = base.parts.get("P2", ())
    return Construction(base.tournament, {"A": a, "B": b, "C": cc},
                        {"construction": "triangle_blowup", "k": spec.k, "size_a": spec.size_a,
                         "size_b": spec.size_b, "internal_seed": spec.internal_seed,
                         "transitive_inside": spec.transitive_inside})


def blowup_unlinked_instance(con: Construction, k: int) -> LinkageInstance:
    """Terminals that cannot be linked in a triangle blow-up.

    Every B -> A path passes through C.  Putting x_1 in B, y_1 in A and the
    other k - 1 pairs on all 2k - 2 vertices of C leaves no way through.
    """
    a, b, c = con.parts["A"], con.parts["B"], con.parts["C"]
    if len(c) != 2 * k - 2:
        raise ValueError("construction does not match k")
    xs = (b[0],) + tuple(c[0::2])
    ys = (a[0],) + tuple(c[1::2])
    return LinkageInstance(xs, ys)


def popielarz(spec: PopielarzSpec) -> Construction:
    """Highly connected tournament without a disjoint A -> L, L -> B system.

    Parts: A and B of size k, S of size 2k - 1, and L = the rest, split into
    L1, L2, L3 as evenly as possible (extra vertices go to L1, then L2).
    Fixed orientations: L -> A, B -> L, A -> S, S -> B, A -> B,
    L1 -> L2 -> L3 -> L1, S -> L1 and L2 -> S.  Inside A, B, S and each Li,
    and between S and L3, the orientation is free.
    """
    spec.check()
    k, n = spec.k, spec.n
    a = np.arange(0, k)
    s = np.arange(k, 3 * k - 1)
    b = np.arange(3 * k - 1, 4 * k - 1)
    rest = n - (4 * k - 1)
    q, r = divmod(rest, 3)
    sizes = [q + (1 if r > 0 else 0), q + (1 if r > 1 else 0), q]
    start = 4 * k - 1
    ls = []
    for sz in sizes:
        ls.append(np.arange(start, start + sz))
        start += sz
    l1, l2, l3 = ls
    lall = np.concatenate(ls)
    adj = np.zeros((n, n), dtype=bool)
    rng = None if spec.transitive_inside else np.random.default_rng(spec.internal_seed)
    for zone in (a, s, b, l1, l2, l3):
        _fill_arbitrary(adj, zone, None, rng)
    _fill_arbitrary(adj, s, l3, rng)
    _join(adj, lall, a)
    _join(adj, b, lall)
    _join(adj, a, s)
    _join(adj, s, b)
    _join(adj, a, b)
    _join(adj, l1, l2)
    _join(adj, l2, l3)
    _join(adj, l3, l1)
    _join(adj, s, l1)
    _join(adj, l2, s)
    parts = {name: tuple(int(v) for v in zone)
             for name, zone in (("A", a), ("S", s), ("B", b), ("L", lall),
                                ("L1", l1), ("L2", l2), ("L3", l3))}
    return Construction(Tournament(adj), parts,
                        {"construction": "popielarz", "k": k, "n": n,
                         "internal_seed": spec.internal_seed,
                         "transitive_inside": spec.transitive_inside})
