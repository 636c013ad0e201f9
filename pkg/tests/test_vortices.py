import numpy as np
import pytest

from hlgt.cellcomplex import Box, Chain, edge
from hlgt.forms import Form, TooLarge, d, evaluate
from hlgt.vortices import (PathDecoration, Vortex, corner_mask, disturbs_exact, find_vortices, gamma_c,
                           gamma_prime, is_minimal_vortex, is_witness, reduce_line, reduce_line_witness,
                           unit_vortex)

TWELVE = Box.from_extent(1, 1, 1)
CUBE2 = Box.cube(2)


def line(length=3, start=(-1, 0, 0, 0), axis=0):
    cells = {}
    for i in range(length):
        base = list(start)
        base[axis] += i
        cells[edge(base, axis)] = 1
    return Chain(1, cells)


def single(box, base, axis, g, n):
    return Form.from_cells(box, 1, n, {edge(base, axis): g})


def test_closed_has_no_vortices(rng):
    eta = Form.random(CUBE2, 0, 3, rng)
    assert find_vortices(d(eta)) == []


def test_single_interior_edge_is_minimal():
    sigma = single(CUBE2, (0, 0, 0, 0), 1, 2, 3)
    vs = find_vortices(sigma)
    assert len(vs) == 1
    v = vs[0]
    assert v.minimal and v.form.support_size() == 12
    assert v.center == edge((0, 0, 0, 0), 1) and v.value == 2


def test_two_far_excitations():
    sigma = single(CUBE2, (-1, -1, -1, -1), 0, 1, 2) + single(CUBE2, (1, 1, 1, 1), 0, 1, 2)
    vs = find_vortices(sigma)
    assert len(vs) == 2
    assert sum((v.form for v in vs), Form.zeros(CUBE2, 2, 2)) == d(sigma)


def test_is_minimal_vortex_rejections():
    e = CUBE2.index(edge((0, 0, 0, 0), 2))
    nu = unit_vortex(CUBE2, e, 1, 2)
    assert is_minimal_vortex(nu) == (edge((0, 0, 0, 0), 2), 1)
    bigger = nu.copy()
    extra = np.flatnonzero(nu.vec == 0)[0]
    bigger.vec[extra] = 1
    assert is_minimal_vortex(bigger) is None
    # a boundary edge has plaquettes on the box boundary
    edge_on_face = CUBE2.index(edge((2, 0, 0, 0), 1))
    assert is_minimal_vortex(unit_vortex(CUBE2, edge_on_face, 1, 2)) is None


def test_sparse_excitations_are_recognized(rng):
    box = Box.cube(3)
    sites = [(-2, -2, -2, -2), (-2, 2, 1, -1), (1, -2, 2, 1), (2, 1, -2, 2), (0, 0, 0, 0)]
    for _ in range(100):
        pick = rng.choice(len(sites), size=3, replace=False)
        values = {}
        for i in pick:
            axis = int(rng.integers(4))
            base = list(sites[i])
            base[axis] = min(base[axis], 1)
            values[edge(base, axis)] = int(rng.integers(1, 3))
        sigma = Form.from_cells(box, 1, 3, values)
        found = {(v.center, v.value) for v in find_vortices(sigma)}
        assert found == {(c, g) for c, g in values.items()}


def test_corner_edges():
    bent = Chain(1, {edge((0, 0, 0, 0), 0): 1, edge((1, 0, 0, 0), 1): 1})
    assert all(corner_mask(bent, TWELVE).values())
    straight = line()
    assert not any(corner_mask(straight, CUBE2).values())
    assert len(gamma_c(straight, CUBE2)) == 0


def test_gamma_prime_cases():
    gamma = line()
    assert len(gamma_prime(Form.zeros(CUBE2, 1, 2), gamma)) == 0
    vortex = single(CUBE2, (0, 0, 0, 0), 0, 1, 2)
    assert edge((0, 0, 0, 0), 0) not in {c for c, _ in gamma_prime(vortex, gamma)}
    neighbour = single(CUBE2, (0, 1, 0, 0), 0, 1, 2)
    assert edge((0, 0, 0, 0), 0) in {c for c, _ in gamma_prime(neighbour, gamma)}


@pytest.mark.parametrize("n,g", [(2, 1), (3, 1), (3, 2)])
def test_reduce_line_on_vortex(n, g):
    gamma = line()
    deco = PathDecoration.build(gamma, CUBE2)
    sigma = single(CUBE2, (0, 0, 0, 0), 0, g, n)
    assert reduce_line(sigma, deco) == evaluate(sigma, gamma) % n == g


def test_reduce_line_closed(rng):
    gamma = line()
    deco = PathDecoration.build(gamma, CUBE2)
    sigma = d(Form.random(CUBE2, 0, 3, rng))
    assert reduce_line(sigma, deco) == 0
    loop = line(2, (0, 0, 0, 0), 0) + line(2, (2, 0, 0, 0), 1) - line(2, (0, 2, 0, 0), 0) - line(2, (0, 0, 0, 0), 1)
    assert evaluate(sigma, loop) % 3 == 0


def test_path_decoration_validation():
    with pytest.raises(ValueError):
        PathDecoration.build(Chain(1, {edge((0, 0, 0, 0), 0): 2}), CUBE2)


def test_disturbs_simple_cases():
    gamma = Chain(1, {edge((0, 0, 0, 0), 0): 1})
    zero = Form.zeros(TWELVE, 1, 2)
    disturbs, (q, w) = disturbs_exact(zero, gamma, return_witness=True)
    assert not disturbs
    assert is_witness(zero, PathDecoration.build(gamma, TWELVE), q, w)
    # closed with a nonzero value on gamma: every admissible path carries the same value
    eta = Form.from_cells(TWELVE, 0, 2, {c: 1 for c in TWELVE.cells(0) if c.base[0] == 1})
    assert evaluate(d(eta), gamma) % 2 == 1
    assert disturbs_exact(d(eta), gamma)
    with pytest.raises(TooLarge):
        disturbs_exact(Form.zeros(CUBE2, 1, 2), line())


def test_witnessed_reduction_on_random_configs(rng):
    gamma = Chain(1, {edge((0, 0, 0, 0), 0): 1})
    deco = PathDecoration.build(gamma, TWELVE)
    checked = 0
    for _ in range(150):
        sigma = Form.random(TWELVE, 1, 2, rng, density=0.2)
        disturbs, wit = disturbs_exact(sigma, gamma, return_witness=True)
        if disturbs:
            continue
        checked += 1
        assert is_witness(sigma, deco, *wit)
        assert reduce_line_witness(sigma, deco, wit[1]) == evaluate(sigma, gamma) % 2
    assert checked > 20


def test_vortex_record():
    v = Vortex(Form.zeros(CUBE2, 2, 2))
    assert not v.minimal
