import math

import numpy as np
import pytest

from hlgt.cellcomplex import Box, Chain, boundary, edge, OrientedCell
from hlgt.forms import Form, d, re_rho
from hlgt.gibbs import (INFINITY, GaugeChain, LineObservable, Params, decode_checkpoint, edge_conditional,
                        estimate, estimate_many, exact_expectation, gauge_transform, heatbath_sweep,
                        line_observable_full, load_checkpoint, log_weight, save_checkpoint, sample_closed,
                        threads, wilson_line)
from hlgt.spinmodel import exact_spin_expectation, two_point, _endpoints

TWELVE = Box.from_extent(1, 1, 1)
PLAQUETTE_BOX = Box.from_extent(1, 1)


def corner():
    return Chain(1, {edge((0, 0, 0, 0), 0): 1, edge((1, 0, 0, 0), 1): 1})


def unit_loop(base=(0, 0, 0, 0)):
    return boundary(OrientedCell(base, (0, 1)))


def test_params_validation():
    with pytest.raises(ValueError):
        Params(1, 2, 0.1, 0.1)
    with pytest.raises(ValueError):
        Params(2, 2, -0.1, 0.1)
    with pytest.raises(ValueError):
        Params(2, 2, 0.1, INFINITY)
    with pytest.raises(ValueError):
        Params(2, None, 0.1, 0.1)
    assert Params(2, None, INFINITY, 1.0, TWELVE).beta_infinite


def test_log_weight_zero_config():
    p = Params(2, 1, 0.3, 0.7)
    box = p.box
    zero = Form.zeros(box, 1, 2)
    assert log_weight(zero, p) == pytest.approx(2 * 0.7 * box.count(1) + 2 * 0.3 * box.count(2))


def test_flip_interior_edge():
    # one edge term and six plaquette terms go from +1 to -1, each counted twice
    p = Params(2, 1, 0.3, 0.7)
    zero = Form.zeros(p.box, 1, 2)
    flipped = Form.from_cells(p.box, 1, 2, {edge((0, 0, 0, 0), 0): 1})
    assert log_weight(flipped, p) - log_weight(zero, p) == pytest.approx(-4 * 0.7 - 24 * 0.3, abs=1e-12)


def test_weight_ratios(rng):
    p = Params(3, None, 0.4, 0.9, TWELVE)
    zero = Form.zeros(TWELVE, 1, 3)
    w0 = log_weight(zero, p)
    for _ in range(50):
        a, b = Form.random(TWELVE, 1, 3, rng), Form.random(TWELVE, 1, 3, rng)
        la, lb = log_weight(a, p), log_weight(b, p)
        # independent recomputation of the Boltzmann factor
        def direct(s):
            return math.exp(2 * 0.9 * re_rho(s.vec, 3).sum() + 2 * 0.4 * re_rho(d(s).vec, 3).sum())
        assert direct(a) / direct(b) == pytest.approx(math.exp(la - lb), rel=1e-12)
    assert math.isfinite(w0)


def test_log_weight_rejects_infinite_beta():
    with pytest.raises(ValueError):
        log_weight(Form.zeros(TWELVE, 1, 2), Params(2, None, INFINITY, 1.0, TWELVE))


def test_single_plaquette_tanh():
    assert PLAQUETTE_BOX.count(1) == 4 and PLAQUETTE_BOX.count(2) == 1
    for beta in (0.1, 0.5, 1.3):
        p = Params(2, None, beta, 0.0, PLAQUETTE_BOX)
        value = exact_expectation(lambda s: re_rho(d(s).vec[0], 2), p)
        assert value == pytest.approx(math.tanh(2 * beta), abs=1e-12)


def test_free_wilson_line_vanishes():
    p = Params(3, None, 0.0, 0.0, TWELVE)
    assert abs(exact_expectation(LineObservable(corner(), TWELVE, 3), p)) < 1e-12


def test_infinite_beta_matches_spin_correlation():
    p = Params(2, None, INFINITY, 1.0, TWELVE)
    gauge = exact_expectation(LineObservable(corner(), TWELVE, 2), p)
    spin = exact_spin_expectation(two_point(TWELVE, 2, _endpoints(corner())), TWELVE, 2, 1.0)
    assert gauge == pytest.approx(spin, abs=1e-12)


def test_heatbath_freezes_at_huge_kappa(rng):
    p = Params(2, 1, 0.5, 1e3)
    sigma = Form.random(p.box, 1, 2, rng)
    for _ in range(10):
        sigma = heatbath_sweep(sigma, p, rng)
    assert (sigma.vec != 0).mean() < 1e-6


def test_heatbath_independent_edges_at_zero_beta(rng):
    kappa = 0.3
    p = Params(2, None, 0.0, kappa, TWELVE)
    sigma = Form.zeros(TWELVE, 1, 2)
    hits = 0
    sweeps = 4000
    for _ in range(sweeps):
        sigma = heatbath_sweep(sigma, p, rng)
        hits += int((sigma.vec != 0).sum())
    total = sweeps * TWELVE.count(1)
    q = math.exp(-4 * kappa) / (1 + math.exp(-4 * kappa))
    assert abs(hits / total - q) < 3 * math.sqrt(q * (1 - q) / total)


def test_scan_kernel_stationary_vector():
    n, box = 3, PLAQUETTE_BOX
    p = Params(n, None, 0.4, 0.3, box)
    m = box.count(1)
    states = np.array(np.unravel_index(np.arange(n ** m), (n,) * m)).T
    code = lambda v: int(np.ravel_multi_index(tuple(v), (n,) * m))
    kernel = np.eye(n ** m)
    for e in range(m):
        step = np.zeros((n ** m, n ** m))
        for i, v in enumerate(states):
            cond = edge_conditional(Form(box, 1, n, v.copy()), e, p)
            for g in range(n):
                w = v.copy()
                w[e] = g
                step[i, code(w)] += cond[g]
        kernel = kernel @ step
    vals, vecs = np.linalg.eig(kernel.T)
    stat = np.real(vecs[:, np.argmin(abs(vals - 1))])
    stat /= stat.sum()
    gibbs = np.array([math.exp(log_weight(Form(box, 1, n, v), p)) for v in states])
    gibbs /= gibbs.sum()
    assert np.max(abs(stat - gibbs)) < 1e-10


def test_sample_closed_is_closed_and_uniform_at_zero_kappa(rng):
    p = Params(2, None, INFINITY, 0.0, TWELVE)
    counts = {}
    draws = 12800
    for _ in range(draws):
        s = sample_closed(p, rng, sweeps=1)
        assert d(s).is_zero()
        key = s.vec.tobytes()
        counts[key] = counts.get(key, 0) + 1
    # closed 1-forms on a connected 8-vertex box: 2^8 / 2 = 128 classes
    assert len(counts) == 128
    expected = draws / 128
    assert max(abs(c - expected) for c in counts.values()) < 5 * math.sqrt(expected)


def test_sample_closed_zero_frequency():
    kappa = 1.0
    p = Params(2, None, INFINITY, kappa, TWELVE)
    exact = exact_expectation(lambda s: float(s.is_zero()), p)
    assert exact > 0.9
    rng = np.random.default_rng(3)
    draws = 400
    hits = sum(sample_closed(p, rng, sweeps=50).is_zero() for _ in range(draws))
    assert abs(hits / draws - exact) < 4 * math.sqrt(exact * (1 - exact) / draws)


def test_wilson_line_basics(rng):
    gamma = corner()
    zero = Form.zeros(TWELVE, 1, 2)
    assert wilson_line(zero, gamma) == 1
    one = Form.from_cells(TWELVE, 1, 2, {edge((1, 0, 0, 0), 1): 1})
    assert wilson_line(one, gamma) == pytest.approx(-1)
    obs = LineObservable(gamma, TWELVE, 5)
    for _ in range(200):
        s = Form.random(TWELVE, 1, 5, rng)
        g = (s(edge((0, 0, 0, 0), 0)) + s(edge((1, 0, 0, 0), 1))) % 5
        assert wilson_line(s, gamma) == pytest.approx(np.exp(2j * np.pi * g / 5))
        assert obs(s) == pytest.approx(wilson_line(s, gamma))
    with pytest.raises(ValueError):
        wilson_line(zero, Chain(1, {edge((0, 0, 0, 0), 0): 2}))


def test_estimate_constant_and_deterministic():
    p = Params(2, 1, 0.2, 0.4)
    const = estimate(lambda s: 1.0, p, sweeps=256, chains=1, batches=16)
    assert const.mean == 1.0 and const.stderr == 0.0
    obs = LineObservable(corner(), p.box, 2)
    a = estimate(obs, p, sweeps=256, chains=2, seed=5, batches=16)
    b = estimate(obs, p, sweeps=256, chains=2, seed=5, batches=16)
    assert a == b
    with pytest.raises(ValueError):
        estimate(obs, p, sweeps=100, chains=1, batches=16)


def test_estimate_free_loop():
    kappa = 0.4
    p = Params(2, 2, 0.0, kappa)
    est = estimate(LineObservable(unit_loop(), p.box, 2), p, sweeps=1024, chains=2, seed=1, batches=16)
    assert est.within(math.tanh(2 * kappa) ** 4, k=3)


@pytest.mark.parametrize("beta", [0.1, 0.4, 0.8])
@pytest.mark.parametrize("kappa", [0.2, 0.6, 1.2])
def test_sampler_matches_oracle(beta, kappa):
    p = Params(2, None, beta, kappa, TWELVE)
    obs = LineObservable(corner(), TWELVE, 2)
    exact = exact_expectation(obs, p)
    est = estimate_many({"L": obs}, p, sweeps=1024, chains=2, seed=2, batches=16)["L"]
    # frozen chains at large kappa have zero batch spread, hence the small floor
    assert abs(est.mean - exact) <= 4 * est.stderr + 1e-3


def test_metropolis_agrees_with_heatbath():
    p = Params(3, None, 0.3, 0.5, TWELVE)
    obs = LineObservable(corner(), TWELVE, 3)
    exact = exact_expectation(obs, p)
    est = estimate(obs, p, sweeps=2048, chains=2, seed=4, batches=16, method="metropolis")
    assert abs(est.mean - exact) <= 4 * est.stderr + 1e-9


def test_gauge_transform(rng):
    box, n = TWELVE, 3
    gamma = corner()
    for _ in range(200):
        sigma = Form.random(box, 1, n, rng)
        phi = Form.random(box, 0, n, rng)
        eta = Form.random(box, 0, n, rng)
        s2, p2 = gauge_transform(sigma, phi, eta)
        assert line_observable_full(s2, p2, gamma) == pytest.approx(line_observable_full(sigma, phi, gamma))
    same = gauge_transform(sigma, phi, Form.zeros(box, 0, n))
    assert same == (sigma, phi)
    assert gauge_transform(sigma, phi, -phi)[1].is_zero()


def test_checkpoint_round_trip(tmp_path):
    p = Params(3, 1, 0.25, 0.75)
    chain = GaugeChain(p, 9, 0, start="random")
    for s in range(3):
        chain.step(s)
    sigma = chain.state()
    path = tmp_path / "state.hlgt"
    save_checkpoint(path, sigma, p, 9, 3)
    blob = path.read_bytes()
    assert blob[:4] == b"HLGT"
    back, p2, seed, sweeps = load_checkpoint(path)
    assert back == sigma and p2 == p and (seed, sweeps) == (9, 3)
    save_checkpoint(tmp_path / "again.hlgt", back, p2, seed, sweeps)
    assert (tmp_path / "again.hlgt").read_bytes() == blob
    with pytest.raises(ValueError):
        decode_checkpoint(blob, b"HSPN")
    with pytest.raises(ValueError):
        decode_checkpoint(blob[:-1], b"HLGT")


def test_resumed_chain_is_bit_identical():
    p = Params(2, 1, 0.3, 0.6)
    full = GaugeChain(p, 4, 0)
    for s in range(6):
        full.step(s)
    half = GaugeChain(p, 4, 0)
    for s in range(3):
        half.step(s)
    resumed = GaugeChain(p, 4, 0, initial=half.state())
    for s in range(3, 6):
        resumed.step(s)
    assert resumed.state() == full.state()


def test_threads_env(monkeypatch):
    monkeypatch.setenv("HLGT_THREADS", "3")
    assert threads() == 3
    monkeypatch.setenv("HLGT_THREADS", "0")
    with pytest.raises(ValueError):
        threads()
    monkeypatch.delenv("HLGT_THREADS")
    assert threads() >= 1
