import math

import numpy as np
import pytest

from hlgt.cellcomplex import Box, Chain, OrientedCell, boundary, edge
from hlgt.forms import Form, d
from hlgt.gibbs import INFINITY, LineObservable, RunConfig
from hlgt.spinmodel import (SigmaOfSpins, SpinChain, cluster_update, edge_correlation, edge_observable,
                            estimate_spin_many, exact_spin_expectation, h_kappa, load_spin_checkpoint,
                            save_spin_checkpoint, spin_sweep, theta_product, theta_product_observable,
                            two_point, _endpoints)
from hlgt.theory import theta

TWELVE = Box.from_extent(1, 1, 1)
SMALL = RunConfig(sweeps=1024, chains=2, seed=3, batches=16)


def corner():
    return Chain(1, {edge((0, 0, 0, 0), 0): 1, edge((1, 0, 0, 0), 1): 1})


def test_spin_sweep_uniform_at_zero_kappa(rng):
    eta = Form.zeros(TWELVE, 0, 3)
    counts = np.zeros(3)
    for _ in range(3000):
        eta = spin_sweep(eta, 0.0, rng)
        counts += np.bincount(eta.vec, minlength=3)
    total = counts.sum()
    assert np.all(abs(counts / total - 1 / 3) < 3 * math.sqrt(2 / 9 / total))


def test_frozen_magnetization():
    chain = SpinChain(Box.cube(2), 2, 2.0, 1, 0)
    for s in range(50):
        chain.step(s)
    m = np.cos(np.pi * chain.state().eta_vec).mean()
    assert abs(m) > 0.99


def test_spin_sweep_rejects_edge_forms():
    with pytest.raises(ValueError):
        spin_sweep(Form.zeros(TWELVE, 1, 2), 1.0, np.random.default_rng(0))


@pytest.mark.parametrize("method", ["heatbath", "cluster"])
def test_two_point_against_enumeration(method):
    kappa = 0.3
    obs = two_point(TWELVE, 2, _endpoints(corner()))
    exact = exact_spin_expectation(obs, TWELVE, 2, kappa)
    est = estimate_spin_many({"h": obs}, TWELVE, 2, kappa, SMALL, method)["h"]
    assert est.within(exact, k=3)


def test_h_kappa_loop_is_one():
    loop = boundary(OrientedCell((0, 0, 0, 0), (0, 1)))
    h = h_kappa(loop, 0.2, 2, N=2)
    assert h.mean == 1.0 and h.stderr == 0.0


def test_h_kappa_adjacent_and_free():
    gamma = Chain(1, {edge((0, 0, 0, 0), 2): 1})
    exact = exact_spin_expectation(two_point(TWELVE, 2, _endpoints(gamma)), TWELVE, 2, 0.25)
    assert h_kappa(gamma, 0.25, 2, cfg=SMALL, box=TWELVE).within(exact, k=3)
    free = h_kappa(corner(), 0.0, 2, cfg=SMALL, box=TWELVE)
    assert free.within(0.0, k=3)


def test_theta_product_limits():
    gamma = Chain(1, {edge((0, 0, 0, 0), 0): 1})
    big = theta_product(gamma, 3.0, 0.5, 2, cfg=SMALL, box=TWELVE)
    assert big.mean == pytest.approx(1.0, abs=1e-12)
    obs = theta_product_observable(gamma, TWELVE, 2, 0.1, 0.0)
    exact = exact_spin_expectation(SigmaOfSpins(obs, TWELVE), TWELVE, 2, 0.0)
    assert exact == pytest.approx((theta(0, 0.1, 0.0, 2) + theta(1, 0.1, 0.0, 2)) / 2, abs=1e-12)
    with pytest.raises(ValueError):
        theta_product(gamma, INFINITY, 0.5, 2, box=TWELVE)


def test_theta_product_mc_vs_exact():
    obs = theta_product_observable(corner(), TWELVE, 2, 0.05, 0.4)
    exact = exact_spin_expectation(SigmaOfSpins(obs, TWELVE), TWELVE, 2, 0.4)
    est = theta_product(corner(), 0.05, 0.4, 2, cfg=SMALL, box=TWELVE)
    assert est.within(exact, k=3)


def test_theta_product_on_forms_and_spins_agree(rng):
    obs = theta_product_observable(corner(), TWELVE, 3, 0.1, 0.3)
    eta = Form.random(TWELVE, 0, 3, rng)
    chain = SpinChain(TWELVE, 3, 0.3, 0, 0)
    chain.eta = eta.vec.copy()
    assert obs(chain.state()) == pytest.approx(obs(d(eta)))


def test_edge_correlation():
    assert edge_correlation(0.0, 2, cfg=SMALL, box=TWELVE).within(0.0, k=3)
    e = edge((0, 0, 0, 0), 1)
    exact = exact_spin_expectation(edge_observable(TWELVE, 2, e), TWELVE, 2, 0.2)
    assert edge_correlation(0.2, 2, cfg=SMALL, box=TWELVE, e=e).within(exact, k=3)


def test_sigma_of_spins_is_closed(rng):
    chain = SpinChain(TWELVE, 3, 0.5, 7, 0, start="random")
    sig = chain.state().sigma()
    assert sig == d(chain.state().eta())
    assert d(sig).is_zero()
    line = LineObservable(corner(), TWELVE, 3)
    adapter = SigmaOfSpins(line, TWELVE)
    assert adapter.batch(chain.state().eta_vec[None, :])[0] == pytest.approx(line(sig).real)


def test_cluster_update_needs_z2(rng):
    with pytest.raises(ValueError):
        cluster_update(Form.zeros(TWELVE, 0, 3), 1.0, rng, rng)
    with pytest.raises(ValueError):
        SpinChain(TWELVE, 3, 1.0, 0, 0, method="cluster")


def test_spin_checkpoint_round_trip(tmp_path):
    chain = SpinChain(Box.cube(1), 3, 0.4, 11, 0, start="random")
    for s in range(2):
        chain.step(s)
    eta = chain.state().eta()
    path = tmp_path / "spins.hspn"
    save_spin_checkpoint(path, eta, 0.4, 11, 2)
    assert path.read_bytes()[:4] == b"HSPN"
    back, kappa, seed, sweeps = load_spin_checkpoint(path)
    assert back == eta and (kappa, seed, sweeps) == (0.4, 11, 2)


def test_chain_determinism():
    a = estimate_spin_many({"e": edge_observable(Box.cube(1), 2)}, Box.cube(1), 2, 0.3, SMALL)
    b = estimate_spin_many({"e": edge_observable(Box.cube(1), 2)}, Box.cube(1), 2, 0.3, SMALL)
    assert a == b
