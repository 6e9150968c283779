import itertools
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tourlink.constructions import transitive
from tourlink.errors import HypothesisExhausted, VerificationError
from tourlink.subdivision import (EmbedStats, KStar, PartialSubdivision, augment_edge, bfs_path,
                                  bound_d, bound_dstar, degree_level, dumps, embed_kstar,
                                  embed_subdivision, extract_min_outdeg_subtournament,
                                  forward_chords, loads_kstar, loads_subdivision, log2_bound_d,
                                  log2_bound_dstar, minimize_subdivision, shortcut_path,
                                  verify_kstar, verify_subdivision)
from tourlink.tournament import min_out_degree, random_tournament


# -- bounds ---------------------------------------------------------------------

def test_bound_values_by_hand():
    assert bound_d(1, 0) == 1
    assert [bound_d(2, m) for m in range(3)] == [1, 7, 343]
    assert bound_d(3, 0) == 343
    assert bound_d(3, 1) == 7 * 343 ** 2
    assert bound_dstar(1) == 1
    assert bound_dstar(2, 0) == bound_d(2) == 343
    assert bound_dstar(2, 1) == 7 * 343 ** 2


def test_bound_recursion_and_logs():
    for k in range(1, 4):
        for m in range(k * (k - 1)):
            assert bound_d(k, m + 1) == 7 * bound_d(k, m) ** 2
            assert log2_bound_d(k, m) == pytest.approx(np.log2(float(bound_d(k, m))))
    assert log2_bound_dstar(2, 2) == pytest.approx(np.log2(float(bound_dstar(2, 2))))
    with pytest.raises(OverflowError):
        bound_d(6)
    assert log2_bound_d(6) > 1e6
    with pytest.raises(ValueError):
        bound_d(2, 3)
    with pytest.raises(ValueError):
        bound_d(0)


def test_degree_level():
    assert degree_level(0) == 1
    assert degree_level(27) == 1
    assert degree_level(28) == 2
    for delta in range(7, 2000, 37):
        d = degree_level(delta)
        assert 7 * d * d <= delta < 7 * (d + 1) ** 2


# -- core extraction ------------------------------------------------------------

def _min_out(adj, core):
    return adj[np.ix_(core, core)].sum(axis=1).min()


@given(st.integers(8, 60), st.integers(0, 10**6), st.integers(1, 4))
@settings(max_examples=60, deadline=None)
def test_core_properties(n, seed, k):
    t = random_tournament(n, seed)
    if min_out_degree(t) < k:
        with pytest.raises(ValueError):
            extract_min_outdeg_subtournament(t, None, k)
        return
    core = extract_min_outdeg_subtournament(t, None, k)
    assert _min_out(t.adj, core) >= k
    assert len(core) <= 3 * k * k
    for v in core:
        rest = [u for u in core if u != v]
        assert _min_out(t.adj, rest) < k


def test_core_within():
    t = random_tournament(300, 4)
    within = np.arange(300) >= 100
    core = extract_min_outdeg_subtournament(t, within, 3)
    assert min(core) >= 100


def test_small_core_exhaustive_minimality():
    # on tiny inputs every proper subset can be checked, not only single deletions
    t = random_tournament(9, 12)
    k = min_out_degree(t)
    if k == 0:
        pytest.skip("fixture has a sink")
    core = extract_min_outdeg_subtournament(t, None, 1)
    for size in range(1, len(core)):
        for sub in itertools.combinations(core, size):
            if _min_out(t.adj, list(sub)) >= 1:
                pytest.fail("a proper subset keeps min out-degree 1")


# -- path helpers -----------------------------------------------------------------

def _bfs_dist(adj, a, b, allowed):
    dist = {a: 0}
    q = deque([a])
    while q:
        x = q.popleft()
        for y in np.flatnonzero(adj[x]):
            y = int(y)
            if allowed[y] and y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist.get(b)


@given(st.integers(4, 40), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_bfs_path_is_shortest(n, seed):
    t = random_tournament(n, seed)
    rng = np.random.default_rng(seed)
    allowed = rng.random(n) < 0.7
    a, b = 0, n - 1
    allowed[b] = True
    p = bfs_path(t, a, b, allowed)
    d = _bfs_dist(t.adj, a, b, allowed)
    if d is None:
        assert p is None
    else:
        assert len(p) - 1 == d
        assert p[0] == a and p[-1] == b
        assert all(allowed[x] for x in p[1:])
        assert all(t.adj[x, y] for x, y in zip(p, p[1:]))


@given(st.integers(3, 30), st.integers(0, 10**6))
@settings(max_examples=60, deadline=None)
def test_shortcut_removes_chords(n, seed):
    t = random_tournament(n, seed)
    # a Hamiltonian-ish walk: follow any path found greedily
    path = [0]
    used = {0}
    while True:
        nxt = [int(v) for v in np.flatnonzero(t.adj[path[-1]]) if v not in used]
        if not nxt:
            break
        path.append(nxt[-1])
        used.add(nxt[-1])
    s = shortcut_path(t, path)
    assert s[0] == path[0] and s[-1] == path[-1]
    assert not forward_chords(t, s)
    it = iter(path)
    assert all(v in it for v in s)


# -- embeddings -------------------------------------------------------------------

@pytest.fixture(scope="module")
def sub4():
    t = random_tournament(400, 21)
    return t, embed_subdivision(t, 4)


@pytest.fixture(scope="module")
def star3():
    t = random_tournament(500, 5)
    return t, embed_kstar(t, 3)


def test_embed_small_k():
    t = random_tournament(50, 1)
    one = embed_subdivision(t, 1)
    assert one.k == 1 and one.m == 0
    two = embed_subdivision(t, 2)
    verify_subdivision(t, two)
    assert two.complete


def test_embed_subdivision_verified(sub4):
    t, ps = sub4
    verify_subdivision(t, ps)
    assert ps.complete and ps.k == 4
    for (u, v), p in ps.paths.items():
        assert not forward_chords(t, p)


def test_embed_within_and_stats():
    t = random_tournament(600, 8)
    within = np.arange(600) % 3 != 0
    stats = EmbedStats()
    ps = embed_subdivision(t, 3, within=within, stats=stats)
    assert all(within[v] for v in ps.vertices())
    assert stats.routes > 0


def test_embed_exhausts_on_transitive():
    with pytest.raises(HypothesisExhausted):
        embed_subdivision(transitive(40), 2)


def test_serialization_roundtrip(sub4, star3):
    t, ps = sub4
    assert loads_subdivision(dumps(ps)) == ps
    t3, ks = star3
    assert loads_kstar(dumps(ks)) == ks


def test_kstar_verified(star3):
    t, ks = star3
    verify_kstar(t, ks)
    branch = ks.branch
    for i, u in enumerate(branch):
        for v in branch[i + 1:]:
            lens = sorted((len(ks.base.paths[(u, v)]), len(ks.base.paths[(v, u)])))
            assert lens[0] == 2 and lens[1] >= 3


def test_minimize_subdivision():
    t = random_tournament(60, 3)
    # hand-make a subdivision with a long, chorded path, then minimize it
    ps = embed_subdivision(t, 2)
    (key, long), = [(k, p) for k, p in ps.paths.items() if len(p) >= 3]
    u, v = key
    others = [x for x in range(60) if x not in ps.vertices()]
    detour = None
    for a in others:
        for b in others:
            if a != b and t.adj[u, a] and t.adj[a, b] and t.adj[b, v]:
                detour = (u, a, b, v)
                break
        if detour:
            break
    loose = PartialSubdivision(ps.branch, dict(ps.paths))
    loose.paths[key] = detour
    verify_subdivision(t, loose, minimal=False)
    tight = minimize_subdivision(t, loose)
    for p in tight.paths.values():
        assert not forward_chords(t, p)


def test_augment_edge():
    t = random_tournament(300, 6)
    full = embed_subdivision(t, 3)
    partial = PartialSubdivision(full.branch, {k: p for k, p in list(full.paths.items())[:3]})
    missing = sorted(set(full.paths) - set(partial.paths))[0]
    grown = augment_edge(t, partial, missing)
    assert missing in grown.paths and grown.m == 4
    with pytest.raises(ValueError):
        augment_edge(t, grown, missing)
    with pytest.raises(ValueError):
        augment_edge(t, grown, (full.branch[0], full.branch[0]))


# -- verifier mutations -------------------------------------------------------------

def _mutants(t, ps):
    """One broken copy of ``ps`` per verifier clause."""
    b = ps.branch
    long_key = next(k for k, p in ps.paths.items() if len(p) >= 3)
    other = next(k for k, p in ps.paths.items() if len(p) >= 3 and k != long_key)
    short_key = next(k for k, p in ps.paths.items() if len(p) == 2)
    lp, op = ps.paths[long_key], ps.paths[other]
    outsider = next(x for x in b if x not in long_key)
    non_out = next(x for x in range(t.n) if x not in ps.vertices() and not t.adj[short_key[0], x])

    def swap(key, path):
        return PartialSubdivision(b, {**ps.paths, key: tuple(path)})

    return {
        "branch-distinct": PartialSubdivision((b[0], b[0]) + b[2:], ps.paths),
        "endpoints": swap(long_key, lp[1:]),
        "complete": PartialSubdivision(b, {k: p for k, p in ps.paths.items() if k != short_key}),
        "branch-interior": swap(long_key, (lp[0], outsider, lp[-1])),
        "disjoint": swap(other, (op[0], lp[1], op[-1])),
        "edge": swap(short_key, (short_key[0], non_out, short_key[1])),
        "one-short": swap(long_key, long_key),
    }


def test_verify_subdivision_mutations(sub4):
    t, ps = sub4
    verify_subdivision(t, ps)
    for clause, bad in _mutants(t, ps).items():
        with pytest.raises(VerificationError):
            verify_subdivision(t, bad)


def test_verify_subdivision_minimality_clause():
    t = random_tournament(80, 2)
    ps = embed_subdivision(t, 2)
    key = next(k for k, p in ps.paths.items() if len(p) >= 3)
    u, v = key
    spare = [x for x in range(80) if x not in ps.vertices()]
    for a in spare:
        for b in spare:
            if a != b and t.adj[u, a] and t.adj[a, b] and t.adj[b, v] and t.adj[u, b]:
                bad = PartialSubdivision(ps.branch, {**ps.paths, key: (u, a, b, v)})
                with pytest.raises(VerificationError) as e:
                    verify_subdivision(t, bad)
                assert e.value.clause == "minimality"
                return
    pytest.fail("fixture has no chorded detour")


def test_verify_kstar_mutations(star3):
    t, ks = star3
    key = next(iter(ks.loops))
    entry, exit_ = ks.loops[key]
    dropped = KStar(ks.base, {k: v for k, v in ks.loops.items() if k != key})
    with pytest.raises(VerificationError) as e:
        verify_kstar(t, dropped)
    assert e.value.clause == "loop-keys"
    flipped = KStar(ks.base, {**ks.loops, key: (exit_, entry)})
    with pytest.raises(VerificationError) as e:
        verify_kstar(t, flipped)
    assert e.value.clause == "loop-anchoring"
    base_inner = next(x for p in ks.base.paths.values() for x in p[1:-1] if x not in entry)
    through = KStar(ks.base, {**ks.loops, key: (entry[:1] + (base_inner,) + entry[1:], exit_)})
    with pytest.raises(VerificationError):
        verify_kstar(t, through)
