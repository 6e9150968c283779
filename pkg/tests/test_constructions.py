import json

import numpy as np
import pytest

from tourlink.connectivity import (find_unlinked_instance, max_disjoint_paths, vertex_connectivity)
from tourlink.constructions import (BlowupSpec, PopielarzSpec, blowup_unlinked_instance,
                                    directed_cycle_blowup, popielarz, transitive, triangle_blowup)
from tourlink.tournament import min_out_degree

from oracles import connectivity_by_cuts, linkable


def _all_from(adj, xs, ys):
    return bool(adj[np.ix_(list(xs), list(ys))].all())


def test_transitive():
    t = transitive(3)
    assert min_out_degree(t) == 0
    assert t.adj[0, 1] and t.adj[1, 2] and t.adj[0, 2]
    with pytest.raises(ValueError):
        transitive(0)


def test_cycle_blowup_triangle():
    t = directed_cycle_blowup([1, 1, 1]).tournament
    assert t.adj[0, 1] and t.adj[1, 2] and t.adj[2, 0]
    with pytest.raises(ValueError):
        directed_cycle_blowup([])
    with pytest.raises(ValueError):
        directed_cycle_blowup([2, 0])


def test_cycle_blowup_matches_triangle_parts():
    spec = BlowupSpec(2, 4, 4, internal_seed=3)
    tri = triangle_blowup(spec)
    gen = directed_cycle_blowup([4, 4, 2], seed=9, transitive_inside=False)
    assert tri.parts["A"] == gen.parts["P0"]
    assert tri.parts["B"] == gen.parts["P1"]
    assert tri.parts["C"] == gen.parts["P2"]
    a, b, c = tri.parts["A"], tri.parts["B"], tri.parts["C"]
    for t in (tri.tournament, gen.tournament):
        assert _all_from(t.adj, a, b) and _all_from(t.adj, b, c) and _all_from(t.adj, c, a)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_blowup_cross_parts(seed):
    con = triangle_blowup(BlowupSpec(3, 6, 7, internal_seed=seed))
    adj = con.tournament.adj
    a, b, c = (con.parts[x] for x in "ABC")
    assert len(c) == 4 and len(a) == 6 and len(b) == 7
    assert _all_from(adj, a, b) and _all_from(adj, b, c) and _all_from(adj, c, a)


def test_blowup_spec_checks():
    with pytest.raises(ValueError):
        triangle_blowup(BlowupSpec(2, 3, 4))
    with pytest.raises(ValueError):
        triangle_blowup(BlowupSpec(0, 4, 4))


def test_blowup_reproducible():
    spec = BlowupSpec(2, 4, 4, internal_seed=11)
    assert triangle_blowup(spec).tournament == triangle_blowup(spec).tournament


@pytest.mark.parametrize("seed", [0, 1, 5])
def test_blowup_k2_connectivity_and_witness(seed):
    con = triangle_blowup(BlowupSpec(2, 4, 4, internal_seed=seed))
    t = con.tournament
    assert t.n == 10
    assert connectivity_by_cuts(t.adj) == 2
    assert vertex_connectivity(t) == 2
    inst = blowup_unlinked_instance(con, 2)
    assert not linkable(t.adj, list(zip(inst.sources, inst.sinks)))
    assert find_unlinked_instance(t, 2) is not None


def test_blowup_terminals_all_in_big_parts_are_linkable():
    # both sources in B and both sinks in A: the two C vertices carry both paths
    con = triangle_blowup(BlowupSpec(2, 4, 4))
    a, b = con.parts["A"], con.parts["B"]
    assert linkable(con.tournament.adj, [(b[0], a[0]), (b[1], a[1])])


def _popielarz_parts(con):
    return {k: list(v) for k, v in con.parts.items()}


@pytest.mark.parametrize("n", [60, 61, 62])
def test_popielarz_orientation(n):
    con = popielarz(PopielarzSpec(2, n, internal_seed=4))
    adj = con.tournament.adj
    p = _popielarz_parts(con)
    assert len(p["A"]) == len(p["B"]) == 2 and len(p["S"]) == 3
    assert sorted(p["L"]) == sorted(p["L1"] + p["L2"] + p["L3"])
    sizes = [len(p["L1"]), len(p["L2"]), len(p["L3"])]
    assert max(sizes) - min(sizes) <= 1 and sizes == sorted(sizes, reverse=True)
    for src, dst in (("L", "A"), ("B", "L"), ("A", "S"), ("S", "B"), ("A", "B"),
                     ("L1", "L2"), ("L2", "L3"), ("L3", "L1"), ("S", "L1"), ("L2", "S")):
        assert _all_from(adj, p[src], p[dst]), (src, dst)


def test_popielarz_seed_only_moves_free_zones():
    one = popielarz(PopielarzSpec(2, 60, internal_seed=1))
    two = popielarz(PopielarzSpec(2, 60, internal_seed=2))
    p = _popielarz_parts(one)
    free = np.zeros((60, 60), dtype=bool)
    for zone in ("A", "S", "B", "L1", "L2", "L3"):
        free[np.ix_(p[zone], p[zone])] = True
    free[np.ix_(p["S"], p["L3"])] = True
    free[np.ix_(p["L3"], p["S"])] = True
    diff = one.tournament.adj != two.tournament.adj
    assert diff.any()
    assert not (diff & ~free).any()


def test_popielarz_transitive_inside_and_checks():
    con = popielarz(PopielarzSpec(2, 60, transitive_inside=True))
    a = list(con.parts["A"])
    assert con.tournament.adj[a[0], a[1]]
    with pytest.raises(ValueError):
        popielarz(PopielarzSpec(2, 9))


def test_popielarz_blocks_paths_from_a():
    con = popielarz(PopielarzSpec(2, 60, internal_seed=0))
    p = con.parts
    ps = max_disjoint_paths(con.tournament, p["A"], p["L"], avoid=p["B"])
    assert len(ps) <= 3


def test_parts_json():
    con = popielarz(PopielarzSpec(2, 60))
    data = json.loads(con.parts_json())
    assert data["params"]["k"] == 2
    assert data["parts"]["S"] == list(con.parts["S"])
