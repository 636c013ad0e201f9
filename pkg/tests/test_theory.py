import math

import numpy as np
import pytest

from hlgt.theory import (alpha0, alpha1, alpha2, alpha5, assumption_A, assumption_A_threshold, constants,
                         main_bound, phi, predict, theta, theta_prime)

GRID = [(b, k) for b in (0.1, 0.3, 0.5, 0.8, 1.2) for k in (0.2, 0.6, 1.0, 1.5, 2.0)]


@pytest.mark.parametrize("beta,kappa", GRID)
def test_z2_theta_closed_forms(beta, kappa):
    t0 = (1 - math.exp(-24 * beta - 4 * kappa)) / (1 + math.exp(-24 * beta - 4 * kappa))
    t1 = (1 - math.exp(-24 * beta + 4 * kappa)) / (1 + math.exp(-24 * beta + 4 * kappa))
    assert theta(0, beta, kappa, 2) == pytest.approx(t0, abs=1e-12)
    assert theta(1, beta, kappa, 2) == pytest.approx(t1, abs=1e-12)


@pytest.mark.parametrize("beta,kappa", GRID)
def test_z2_alpha_identities(beta, kappa):
    for r in (beta, kappa):
        assert alpha0(r, 2) == pytest.approx(math.exp(-4 * r), abs=1e-12)
        assert alpha1(r, 2) == pytest.approx(math.exp(-4 * r), abs=1e-12)
    assert alpha2(beta, kappa, 2) == pytest.approx(math.exp(-4 * (beta + kappa / 6)), rel=1e-12)
    x = math.exp(-24 * beta - 4 * kappa)
    assert alpha5(beta, kappa, 2) == pytest.approx(2 * x / (1 + x), abs=1e-12)
    assert alpha5(beta, kappa, 2) == pytest.approx(1 - theta(0, beta, kappa, 2), abs=1e-12)


def test_alpha5_exhaustive_at_half_one():
    x = math.exp(-24 * 0.5 - 4)
    assert alpha5(0.5, 1.0, 2) == pytest.approx(2 * x / (1 + x), abs=1e-12)


def test_alpha5_range_and_limits():
    for b, k in [(0.1, 0.1), (0.4, 1.0), (1.0, 0.3)]:
        assert 0 <= alpha5(b, k, 3) <= 1
    assert alpha5(20.0, 1.0, 2) < 1e-12
    with pytest.raises(ValueError):
        alpha5(0.5, 0.5, 9)


def test_theta_bounds_and_trivial_point():
    for n in (2, 3, 4, 5):
        assert abs(theta(0, 0.0, 0.0, n)) < 1e-12
        for b, k in [(0.2, 0.3), (0.05, 1.5)]:
            t0 = theta(0, b, k, n)
            assert 0 <= t0 <= 1
            for g in range(n):
                assert abs(theta(g, b, k, n)) <= 1 + 1e-12
    with pytest.raises(ValueError):
        theta(0, math.inf, 1.0, 2)


def test_phi_infinite_is_indicator():
    assert phi(math.inf, 0, 3) == 1.0
    assert phi(math.inf, 2, 3) == 0.0
    assert phi(0.7, 1, 2) == pytest.approx(math.exp(-1.4))


def test_threshold_solves_equation():
    ks = assumption_A_threshold(2)
    x = math.sqrt(1 + 1 / 324) - 1
    assert ks == pytest.approx(-math.log(x) / 4, abs=1e-9)
    assert ks == pytest.approx(1.6187, abs=1e-3)
    assert 324 * math.exp(-4 * ks) * (2 + math.exp(-4 * ks)) == pytest.approx(1, abs=1e-7)
    assert assumption_A(ks + 1e-6) and not assumption_A(ks - 1e-6)
    lhs = [324 * alpha0(k, 2) * (2 + alpha0(k, 2)) for k in np.linspace(0.5, 3, 20)]
    assert all(a > b for a, b in zip(lhs, lhs[1:]))


def test_theta_prime_examples():
    assert theta_prime(32, 1.0, 1.7, 0.0) == pytest.approx(math.exp(-64 * math.exp(-30.8)), rel=1e-14)
    assert theta_prime(1, 10.0, 1.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    base = -math.log(theta_prime(24, 0.2, 0.5, 0.0))
    full = -math.log(theta_prime(24, 0.2, 0.5, 1.0))
    assert full == pytest.approx(base * math.exp(8 * 0.5), rel=1e-12)
    sizes = [theta_prime(s, 0.1, 0.4, 0.3) for s in (24, 32, 48)]
    assert sizes[0] > sizes[1] > sizes[2]
    with pytest.raises(ValueError):
        theta_prime(24, 1.0, 1.0, 0.0, n=3)
    with pytest.raises(ValueError):
        theta_prime(24, 1.0, 1.0, 1.5)


def test_main_bound_envelope():
    out = main_bound(32, 8, 8, 1.0, 1.7)
    a0 = math.exp(-4 * 1.7)
    rate = (math.exp(-4 * (1 + 1.7 / 6)) + 32 ** -0.5) ** 0.25
    expected = (2 * 18 ** 3 + math.sqrt(32) * (324 * a0 * (2 + a0)) ** 8) * rate
    assert out["bound"] == pytest.approx(expected, rel=1e-12)
    assert out["bound"] >= 2 * 18 ** 3 * rate
    assert out["vacuous"] and out["assumption_A"]
    assert "o_kappa(1)" in out["note"]
    long = main_bound(32, 200, 200, 1.0, 1.7)
    assert long["K_envelope"] == pytest.approx(2 * 18 ** 3, rel=1e-12)
    with pytest.raises(ValueError):
        main_bound(4, 8, 8, 1.0, 1.7)
    with pytest.raises(ValueError):
        main_bound(32, 7, 8, 1.0, 1.7)


def test_constants_nonnegative_and_flags():
    c = constants(0.5, 1.8)
    for k, v in c.to_dict().items():
        if isinstance(v, float):
            assert v >= 0, k
    assert c.assumption_A
    assert not constants(0.5, 1.0).assumption_A
    assert constants(0.5, 1.0).to_dict()["K"] is None  # infinite under a failing [A]


def test_predict_record():
    rec = predict(1.0, 1.7, 32, 8, 8, 0.0, h_value=0.5)
    assert rec["schema"] == "hlgt.predict/1"
    assert rec["prediction"] == pytest.approx(0.5 * rec["theta_prime"])
    assert "bound" in rec and "constants" in rec
    assert "error" in predict(1.0, 1.7, 4, 8, 8, 0.0)["bound"]
