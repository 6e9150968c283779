"""Tournament representation and the basic operations on it.

Vertices are the integers ``0 .. n-1``.  The orientation is a dense boolean
matrix ``adj`` with ``adj[u, v]`` true iff ``u -> v``; each row is the
out-neighbourhood bitset of a vertex and each column the in-neighbourhood.
Vertex subsets are passed around either as iterables of ids or as boolean
masks of length ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import InvalidTournament

MAX_N = 20000

# Name of the random stream used by random_tournament.  Bump it whenever the
# mapping from (n, seed) to a tournament changes.
RNG_NAME = "pcg64-raw64-lsb/v1"


class Tournament:
    """An immutable tournament on ``n`` labelled vertices."""

    __slots__ = ("adj", "_out_deg", "_in_deg")

    def __init__(self, adj, check: bool = True):
        adj = np.array(adj, dtype=bool, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("orientation matrix must be square")
        if adj.shape[0] < 1:
            raise ValueError("a tournament needs at least one vertex")
        if adj.shape[0] > MAX_N:
            raise ValueError(f"n={adj.shape[0]} exceeds the configured cap {MAX_N}")
        adj.setflags(write=False)
        self.adj = adj
        self._out_deg = None
        self._in_deg = None
        if check:
            validate(self)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, Tournament) and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())

    def __repr__(self) -> str:
        return f"Tournament(n={self.n})"

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.adj[u, v])

    @property
    def out_degrees(self) -> np.ndarray:
        if self._out_deg is None:
            self._out_deg = self.adj.sum(axis=1)
        return self._out_deg

    @property
    def in_degrees(self) -> np.ndarray:
        if self._in_deg is None:
            self._in_deg = self.adj.sum(axis=0)
        return self._in_deg

    def out_neighbours(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.adj[v])

    def in_neighbours(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.adj[:, v])

    def mask(self, vertices: Iterable[int] | np.ndarray | None) -> np.ndarray:
        """Boolean mask over V for ``vertices`` (all of V when None)."""
        return as_mask(self.n, vertices)


def as_mask(n: int, vertices) -> np.ndarray:
    if vertices is None:
        return np.ones(n, dtype=bool)
    if isinstance(vertices, np.ndarray) and vertices.dtype == bool:
        if vertices.shape != (n,):
            raise ValueError("mask has the wrong length")
        return vertices.copy()
    m = np.zeros(n, dtype=bool)
    idx = np.fromiter((int(v) for v in vertices), dtype=np.int64)
    if idx.size:
        if idx.min() < 0 or idx.max() >= n:
            raise ValueError("vertex id out of range")
        m[idx] = True
    return m


def validate(t: Tournament) -> None:
    """Raise InvalidTournament naming the first violated clause."""
    adj = t.adj
    diag = np.flatnonzero(np.diagonal(adj))
    if diag.size:
        v = int(diag[0])
        raise InvalidTournament("irreflexive", (v, v))
    both = np.argwhere(np.triu(adj & adj.T, 1))
    if both.size:
        u, v = map(int, both[0])
        raise InvalidTournament("antisymmetry", (u, v))
    neither = np.argwhere(np.triu(~(adj | adj.T), 1))
    if neither.size:
        u, v = map(int, neither[0])
        raise InvalidTournament("completeness", (u, v))


def min_out_degree(t: Tournament, within=None) -> int:
    """Minimum out-degree of the subtournament induced on ``within``."""
    if within is None:
        return int(t.out_degrees.min())
    m = t.mask(within)
    if not m.any():
        raise ValueError("empty vertex set")
    return int(t.adj[np.ix_(m, m)].sum(axis=1).min())


@dataclass(frozen=True)
class CondensationOrder:
    """Strong components S_1, ..., S_l of a (sub)tournament, in order.

    Every edge between S_i and S_j with i < j points from S_i to S_j.
    """

    components: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def first(self) -> tuple[int, ...]:
        return self.components[0]

    @property
    def last(self) -> tuple[int, ...]:
        return self.components[-1]

    def index_of(self, v: int) -> int:
        for i, comp in enumerate(self.components):
            if v in comp:
                return i
        raise KeyError(v)


def strong_components(t: Tournament, within=None) -> CondensationOrder:
    """Strong components of ``t[within]`` in dominance order.

    Components of a tournament are contiguous once vertices are sorted by
    decreasing induced out-degree, and a prefix of size i is a union of
    leading components exactly when its scores sum to C(i,2) + i*(m-i).  The
    total-order property is then checked over all cross edges.
    """
    m = t.mask(within)
    idx = np.flatnonzero(m)
    if idx.size == 0:
        raise ValueError("within must be nonempty")
    sub = t.adj[np.ix_(idx, idx)]
    scores = sub.sum(axis=1)
    order = np.lexsort((idx, -scores))
    size = idx.size
    prefix = np.cumsum(scores[order])
    i = np.arange(1, size + 1)
    cuts = np.flatnonzero(prefix == i * (i - 1) // 2 + i * (size - i)) + 1
    label = np.empty(size, dtype=np.int64)
    comps = []
    start = 0
    for ci, c in enumerate(cuts):
        members = order[start:c]
        label[members] = ci
        comps.append(tuple(sorted(int(v) for v in idx[members])))
        start = int(c)
    back = sub & (label[:, None] > label[None, :])
    if back.any():
        a, b = np.argwhere(back)[0]
        raise AssertionError(
            f"condensation is not a total order: edge {idx[a]}->{idx[b]} points backwards")
    return CondensationOrder(tuple(comps))


def is_strongly_connected(t: Tournament, within=None) -> bool:
    return len(strong_components(t, within)) == 1


def random_tournament(n: int, seed: int) -> Tournament:
    """Uniform random tournament, deterministic in (n, seed).

    The stream is PCG64 seeded with ``seed`` (through numpy's SeedSequence).
    Raw 64-bit outputs are unpacked least-significant bit first into an
    n-by-n bit block in row-major order; for i < j the bit at (i, j) set
    means i -> j, otherwise j -> i.  Bits on and below the diagonal are
    drawn but ignored.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if n > MAX_N:
        raise ValueError(f"n={n} exceeds the configured cap {MAX_N}")
    bg = np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF)
    words = bg.random_raw((n * n + 63) // 64).astype("<u8")
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[: n * n]
    block = bits.reshape(n, n).astype(bool)
    upper = np.triu(block, 1)
    lower = np.triu(~block, 1).T
    return Tournament(upper | lower, check=False)


def reverse(t: Tournament) -> Tournament:
    """The tournament with every edge reversed."""
    return Tournament(t.adj.T, check=False)


def induced(t: Tournament, vertices) -> tuple[Tournament, np.ndarray]:
    """Subtournament on ``vertices`` plus the map from new ids to old ids."""
    idx = np.flatnonzero(t.mask(vertices))
    return Tournament(t.adj[np.ix_(idx, idx)], check=False), idx


# -- TRN1 text format -------------------------------------------------------

def dumps_trn(t: Tournament) -> str:
    """Serialise to TRN1: the line ``n`` then n rows of 0/1 characters."""
    rows = np.where(t.adj, ord("1"), ord("0")).astype(np.uint8)
    lines = [str(t.n)] + [r.tobytes().decode("ascii") for r in rows]
    return "\n".join(lines) + "\n"


def loads_trn(text: str) -> Tournament:
    lines = [ln.strip() for ln in text.strip().splitlines()]
    if not lines:
        raise ValueError("empty TRN1 input")
    try:
        n = int(lines[0])
    except ValueError:
        raise ValueError(f"TRN1 header must be the vertex count, got {lines[0]!r}") from None
    if n < 1:
        raise ValueError("TRN1 vertex count must be positive")
    rows = lines[1:]
    if len(rows) != n:
        raise ValueError(f"TRN1 expects {n} rows, got {len(rows)}")
    for i, r in enumerate(rows):
        if len(r) != n or set(r) - {"0", "1"}:
            raise ValueError(f"TRN1 row {i} must be {n} characters over 0/1")
    adj = np.frombuffer("".join(rows).encode("ascii"), dtype=np.uint8).reshape(n, n) == ord("1")
    return Tournament(adj)


def save_trn(t: Tournament, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_trn(t))


def load_trn(path) -> Tournament:
    with open(path) as fh:
        return loads_trn(fh.read())
