import numpy as np
import pytest

from hlgt.cellcomplex import Box, OrientedCell, boundary, edge
from hlgt.clusters import (EXACT, LOWER_BOUND, EdgeGraphView, cluster, connected_sets_min, dist0, dist1,
                           dist1_all, dist1_to_boundary, e_set, edge_adjacency, eset_membership,
                           restriction_properties_check)
from hlgt.forms import Form, d

TWELVE = Box.from_extent(1, 1, 1)
CUBE1 = Box.cube(1)


def sparse(box, n, rng, density=0.15, k=1):
    return Form.random(box, k, n, rng, density=density)


def test_adjacency_symmetric_on_unit_cube():
    adj = edge_adjacency(CUBE1)
    assert (adj != adj.T).nnz == 0
    assert adj.diagonal().sum() == 0
    view = EdgeGraphView(Form.zeros(CUBE1, 1, 2))
    e = edge((0, 0, 0, 0), 0)
    assert view.adjacent(e, -e)
    assert not view.adjacent(e, edge((0, 0, 0, 0), 1))


def test_zero_forms_give_singletons():
    view = EdgeGraphView(Form.zeros(CUBE1, 1, 2))
    es = cluster(view, [edge((0, 0, 0, 0), 0)])
    assert es.positive_count == 1 and es.size == 2
    assert edge((0, 0, 0, 0), 0, -1) in es


def test_plaquette_edges_join_one_cluster():
    p = boundary(OrientedCell((0, 0, 0, 0), (0, 1)))
    e, f = [c for c, _ in p][:2]
    sigma = Form.from_cells(CUBE1, 1, 2, {e: 1, f: 1})
    view = EdgeGraphView(sigma)
    assert view.adjacent(e, f)
    assert view.cluster_mask([e])[CUBE1.index(f)]


def test_cluster_idempotent(rng):
    for _ in range(300):
        s, t = sparse(CUBE1, 3, rng), d(Form.random(CUBE1, 0, 3, rng))
        view = EdgeGraphView(s, t)
        seeds = rng.random(CUBE1.count(1)) < 0.02
        once = view.cluster_mask(seeds)
        assert np.array_equal(view.cluster_mask(once), once)
        assert not (seeds & ~once).any()


def test_eset_of_closed_forms(rng):
    for _ in range(50):
        s, t = d(Form.random(CUBE1, 0, 2, rng)), d(Form.random(CUBE1, 0, 2, rng))
        assert e_set([], s, t).positive_count == 0
        e0 = rng.random(CUBE1.count(1)) < 0.05
        assert e_set(e0, s, t) == EdgeGraphView(s, t).cluster(e0)


def test_membership_characterization(rng):
    for _ in range(150):
        s = sparse(TWELVE, 2, rng, 0.3)
        t = d(Form.random(TWELVE, 0, 2, rng))
        e0 = [int(rng.integers(TWELVE.count(1)))]
        es = e_set(e0, s, t)
        view = EdgeGraphView(s, t)
        for e in range(TWELVE.count(1)):
            assert es.mask[e] == eset_membership(e, e0, s, t, view)


def test_restriction_properties(rng):
    box = Box.cube(2)
    for _ in range(100):
        s, t = sparse(box, 3, rng, 0.05), sparse(box, 3, rng, 0.05)
        edges = rng.random(box.count(1)) < 0.01
        assert restriction_properties_check(s, t, edges)
    s = sparse(box, 3, rng)
    assert restriction_properties_check(s, Form.zeros(box, 1, 3), [0])
    assert restriction_properties_check(s, s, np.ones(box.count(1), dtype=bool))


def test_closedness_split(rng):
    for _ in range(300):
        s = sparse(CUBE1, 2, rng, 0.1)
        es = e_set([], s, Form.zeros(CUBE1, 1, 2))
        assert d(s.restrict(es.mask)) == d(s)
        assert d(s.restrict(~es.mask)).is_zero()


def test_dist1_small_cases():
    box = Box.cube(2)
    e = edge((0, 0, 0, 0), 0)
    assert dist1(e, [e], box) == 1
    assert dist1(edge((0, 0, 0, 0), 1), [e], box) == 2
    assert dist1(edge((0, 2, 0, 0), 0), [e], box) == 3
    with pytest.raises(ValueError):
        dist1_all([], box)


def test_dist1_matches_exhaustive_search(rng):
    box = Box.cube(3)
    adj = edge_adjacency(box)
    for _ in range(30):
        e = f = int(rng.integers(box.count(1)))
        for _ in range(int(rng.integers(0, 4))):  # short random walk keeps the oracle cheap
            nbrs = adj.indices[adj.indptr[f]:adj.indptr[f + 1]]
            f = int(rng.choice(nbrs))
        expected = connected_sets_min(e, [f], box, max_size=4)
        assert expected is not None
        assert dist1(e, [f], box) == expected


def test_dist0_lower_bound():
    box = Box.cube(2)
    e = edge((0, 0, 0, 0), 0)
    assert dist0(e, [e], box) == (1, EXACT)
    value, flag = dist0(edge((0, 0, 0, 0), 1), [e], box)
    assert flag == LOWER_BOUND and value == 8
    assert dist1_to_boundary(e, box) == dist1(e, [edge((2, 0, 0, 0), 1)], box)
