"""Closed-form constants and predictions: phi_r, theta, the alphas, the
subcritical assumption, the K-family, the Z_2 prediction Theta' and the error
envelope of the main Z_2 estimate.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

ENVELOPE_NOTE = "envelope excludes o_kappa(1)"
BULK_PLAQUETTES = 6


def _rho_re(n: int) -> np.ndarray:
    return np.cos(2 * np.pi * np.arange(n) / n)


def phi(r: float, g: int, n: int) -> float:
    """phi_r(g) = exp(r (Re rho(g) - 1)); at r = inf the indicator of g = 0."""
    g %= n
    if math.isinf(r):
        return 1.0 if g == 0 else 0.0
    return math.exp(r * (math.cos(2 * math.pi * g / n) - 1.0))


def phi_table(r: float, n: int) -> np.ndarray:
    return np.array([phi(r, g, n) for g in range(n)])


def theta(g_hat: int, beta: float, kappa: float, n: int, plaquettes: int = BULK_PLAQUETTES) -> Union[float, complex]:
    """theta_{beta,kappa}(g_hat) for an edge lying in ``plaquettes`` plaquettes.

    The bulk value uses 6 plaquettes (phi_beta to the power 12).  Edges near
    the box boundary lie in fewer plaquettes; passing that count gives the
    matching single-edge resampling ratio.
    """
    if math.isinf(beta):
        raise ValueError("theta needs finite beta")
    chars = np.exp(2j * np.pi * np.arange(n) / n)
    pb = phi_table(beta, n) ** (2 * plaquettes)
    pk = phi_table(kappa, n)
    w = pb * pk[(np.arange(n) + g_hat) % n] ** 2
    value = (chars * w).sum() / w.sum()
    # real for n = 2 and for g_hat = 0 (symmetry g -> -g); complex otherwise
    if g_hat % n == 0 or n == 2 or abs(value.imag) < 1e-15:
        return float(value.real)
    return complex(value)


def alpha0(r: float, n: int) -> float:
    return float(sum(phi(r, g, n) ** 2 for g in range(1, n)))


def alpha1(r: float, n: int) -> float:
    return float(max(phi(r, g, n) ** 2 for g in range(1, n)))


def alpha2(beta: float, kappa: float, n: int) -> float:
    return alpha0(beta, n) * alpha0(kappa, n) ** (1 / 6)


def alpha3(beta: float, kappa: float, n: int) -> float:
    return abs(1 - theta(0, beta, kappa, n))


def alpha4(beta: float, kappa: float, n: int) -> float:
    t0 = theta(0, beta, kappa, n)
    return max(abs(theta(g, beta, kappa, n) - t0) for g in range(n))


def alpha5(beta: float, kappa: float, n: int, plaquettes: int = BULK_PLAQUETTES) -> float:
    """Minimum over (g_1..g_m) in G^m of 1 - |resampled character ratio|, by exhaustion."""
    if n > 8:
        raise ValueError("exhaustive alpha5 supports n <= 8")
    pb2 = phi_table(beta, n) ** 2
    pk2 = phi_table(kappa, n) ** 2
    chars = np.exp(2j * np.pi * np.arange(n) / n)
    gs = np.arange(n)
    best = math.inf
    for shifts in itertools.product(range(n), repeat=plaquettes):
        w = pk2.copy()
        for s in shifts:
            w = w * pb2[(gs + s) % n]
        total = w.sum()
        if total == 0:
            continue
        best = min(best, 1 - abs((chars * w).sum() / total))
    return float(best)


def alpha6(beta: float, kappa: float, n: int) -> float:
    return max(abs(1 - theta(g, beta, kappa, n)) for g in range(n))


def assumption_A(kappa: float, n: int = 2) -> bool:
    a = alpha0(kappa, n)
    return 18 ** 2 * a * (2 + a) < 1


def assumption_A_threshold(n: int = 2, tol: float = 1e-10) -> float:
    """kappa solving 18^2 alpha0(kappa)(2 + alpha0(kappa)) = 1."""
    f = lambda k: 18 ** 2 * alpha0(k, n) * (2 + alpha0(k, n)) - 1
    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        hi *= 2
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _inv(x: float) -> float:
    return 1 / x if x > 0 else math.inf


@dataclass(frozen=True)
class ConstantSet:
    beta: float
    kappa: float
    n: int
    alpha0: float
    alpha1: float
    alpha2: float
    alpha3: float
    alpha4: float
    alpha5: float
    alpha6: float
    alpha0_beta: float
    alpha1_kappa: float
    K: float
    Kprime: float
    Khat: float
    Kdprime: float
    Ktprime: float
    K3: float
    K4: float
    K5: float
    K5prime: float
    K6: float
    K7: float
    assumption_A: bool

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in asdict(self).items()}


def constants(beta: float, kappa: float, n: int = 2) -> ConstantSet:
    """Every alpha and K constant at (beta, kappa).

    ``alpha0`` is alpha0(kappa) and ``alpha1`` is alpha1(beta), the arguments
    they carry inside the K-family; the other pairings are kept as well.

    Constants whose defining denominator is nonpositive (assumption [A]
    failing) are reported as +inf.
    """
    a0k, a0b = alpha0(kappa, n), alpha0(beta, n)
    a1b = alpha1(beta, n)
    K = 18.0 ** -3 * _inv(1 - 18 ** 2 * (2 + a0k) * a0k)
    Kp = 18.0 ** 2 * (2 + a0k)
    Khat = 18.0 ** -3 * _inv(1 - 18 ** 2 * (2 * a0k + a0k * a0k))
    ratio = (a1b / a0b) ** 6 if a0b > 0 else 1.0
    Kdp = 4 * (18 ** 2 + 18 * a0k * _inv(1 - 18 ** 2 * a0k)) * ratio
    Ktp = (18.0 ** -3 + 18.0 ** -1) * _inv(1 - 18 ** 2 * a0k)
    growth = 2 ** 8 * ((1 + a0k / 2) ** 8 - 1) / a0k if a0k > 0 else 2 ** 8 * 4.0
    K4 = K * 18.0 ** 10 * (growth + 2 ** 8 * Kp)
    K5 = K * 2 * 18.0 ** 8 * (18 ** 2 + 1) * (2 + a0k) ** 7
    K5p = K * (1 + _inv((2 + a0k) * a0k))
    K6 = 18.0 ** 13 * _inv(1 - 18 ** 2 * a0k)
    finite_beta = not math.isinf(beta)
    return ConstantSet(
        beta=beta, kappa=kappa, n=n,
        alpha0=a0k, alpha1=a1b, alpha2=alpha2(beta, kappa, n),
        alpha3=alpha3(beta, kappa, n) if finite_beta else 0.0,
        alpha4=alpha4(beta, kappa, n) if finite_beta else 0.0,
        alpha5=alpha5(beta, kappa, n) if finite_beta and n <= 8 else math.nan,
        alpha6=alpha6(beta, kappa, n) if finite_beta else 0.0,
        alpha0_beta=a0b, alpha1_kappa=alpha1(kappa, n),
        K=K, Kprime=Kp, Khat=Khat, Kdprime=Kdp, Ktprime=Ktp, K3=18.0 ** 4 * Ktp, K4=K4, K5=K5,
        K5prime=K5p, K6=K6, K7=6 * Kdp, assumption_A=assumption_A(kappa, n),
    )


def alphas(beta: float, kappa: float, n: int = 2) -> ConstantSet:
    return constants(beta, kappa, n)


# Z_2 prediction ---------------------------------------------------------------
def _support_size(gamma) -> int:
    if isinstance(gamma, int):
        return gamma
    return len(gamma)


def theta_prime(gamma, beta: float, kappa: float, edge_corr: float, n: int = 2) -> float:
    """exp(-2 |supp gamma| e^{-24 beta - 4 kappa} (1 + (e^{8 kappa} - 1) edge_corr)).

    ``gamma`` is a 1-chain or its support size.
    """
    if n != 2:
        raise ValueError("Theta' is stated for Z_2 only")
    if not -1 <= edge_corr <= 1:
        raise ValueError("edge correlation must lie in [-1, 1]")
    size = _support_size(gamma)
    return math.exp(-2 * size * math.exp(-24 * beta - 4 * kappa) * (1 + math.expm1(8 * kappa) * edge_corr))


def main_bound(gamma, l1: int, l2: int, beta: float, kappa: float) -> dict:
    """Right-hand side of the main Z_2 estimate with the envelope for K''.

    Returns the value plus metadata; the unquantified o_kappa(1) part of K''
    is left out and flagged.
    """
    size = _support_size(gamma)
    if size < 24:
        raise ValueError("|supp gamma| must be at least 24")
    if min(l1, l2) < 8:
        raise ValueError("side lengths must be at least 8")
    a0 = math.exp(-4 * kappa)
    geometric = 18 ** 2 * a0 * (2 + a0)
    k_envelope = 2 * 18 ** 3 + math.sqrt(size) * geometric ** min(l1, l2)
    small = (math.exp(-4 * (beta + kappa / 6)) + size ** -0.5) ** 0.25
    value = k_envelope * small
    return {
        "bound": value,
        "K_envelope": k_envelope,
        "rate": small,
        "note": ENVELOPE_NOTE,
        "vacuous": value > 2,
        "assumption_A": geometric < 1,
        "beta_above_kappa_over_6": 6 * beta > kappa,
    }


def exact_main_constant(size: int, corner_size: int, l1: int, l2: int, beta: float, kappa: float,
                        open_path: bool = True) -> dict:
    """The fully written-out constant of the Z_2 estimate (bold K-hat and K'')."""
    c = constants(beta, kappa, 2)
    K, Kp, a0 = c.K, c.Kprime, c.alpha0
    a2 = c.alpha2
    q = Kp * a0
    k4p = 4 * (1 + c.Khat * Kp ** 8 * a0 ** 4)
    tail = 4 * K * Kp ** 4 * a2 ** 6
    k5p = (4 + 4 * c.Khat * Kp ** 8 * a0 ** 4 + tail * size * q ** (min(l1, l2) - 4)
           + tail * 32 * q ** 4 + tail * 4 * q ** 5 * _inv(1 - q))
    khat_bold = (open_path * (32 * K * Kp + 4 * K * Kp ** 9 * a0 ** 8 * _inv(1 - q)
                              + K * Kp * math.sqrt(size) * q ** min(l1, l2))
                 + 8 * c.Kdprime + K * Kp ** 2 + c.K3 / 2 + math.sqrt(c.K5) + math.sqrt(c.K4)
                 + math.sqrt(2 * c.K7) + k4p / 2 + math.sqrt(8 * c.K6) + math.sqrt(8) + k5p ** (1 / 3))
    return {"K4prime": k4p, "K5prime_wlln": k5p, "Khat_bold": khat_bold,
            "Kdprime_main": 2 ** 0.75 * khat_bold ** (1 / 3), "corner_size": corner_size}


def predict(beta: float, kappa: float, size: int, l1: int, l2: int, edge_corr: float,
            h_value: Optional[float] = None) -> dict:
    """JSON-ready record: constants, Theta', the bound and (optionally) the prediction."""
    record = {"schema": "hlgt.predict/1", "inputs": {
        "beta": beta, "kappa": kappa, "support": size, "l1": l1, "l2": l2, "edge_corr": edge_corr}}
    record["constants"] = constants(beta, kappa, 2).to_dict()
    record["kappa_threshold"] = assumption_A_threshold(2)
    tp = theta_prime(size, beta, kappa, edge_corr)
    record["theta_prime"] = tp
    try:
        record["bound"] = main_bound(size, l1, l2, beta, kappa)
    except ValueError as exc:
        record["bound"] = {"error": str(exc)}
    if h_value is not None:
        record["prediction"] = tp * h_value
    return record


def predict_json(**kw) -> str:
    return json.dumps(predict(**kw), indent=2, sort_keys=True)
