"""Vertex spin model dual to infinite beta (Ising for n = 2, clock otherwise).

Weight of a spin configuration: exp(2 kappa sum over positive edges of
Re rho(d eta(e))).  Closed edge configurations at beta = INFINITY are exactly
the images sigma = d eta, each hit by n spin configurations.
"""
from __future__ import annotations

import math
from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .cellcomplex import Box, Chain, OrientedCell, boundary_chain, edge, incidence
from .forms import Form, TooLarge, d, evaluate, iter_vectors
from .gibbs import (_CLUSTER, _FLIP, _START, ENUMERATION_LIMIT, INFINITY, Checkpoint, Estimate,
                    LineObservable, RunConfig, cos_table, decode_checkpoint, encode_checkpoint,
                    run_chains, stream)
from .theory import theta


def spin_sweep(eta: Form, kappa: float, rng: np.random.Generator) -> Form:
    """Single-site heat bath over all vertices in canonical order."""
    if eta.k != 0:
        raise ValueError("spin configurations are 0-forms")
    s = eta.vec.copy()
    u = rng.random(s.size)
    _kernels.sweep_spins(s, u, np.array(eta.box.shape, dtype=np.int64), eta.n, 2 * kappa,
                         cos_table(eta.n))
    return Form(eta.box, 0, eta.n, s)


def _bond_graph(spins: np.ndarray, shape, p_bond: float, rng: np.random.Generator):
    arr = spins.reshape(shape)
    ids = np.arange(spins.size).reshape(shape)
    rows, cols = [], []
    for mu in range(4):
        lo = [slice(None)] * 4
        hi = [slice(None)] * 4
        lo[mu] = slice(0, shape[mu] - 1)
        hi[mu] = slice(1, None)
        a, b = arr[tuple(lo)], arr[tuple(hi)]
        bonded = (a == b) & (rng.random(a.shape) < p_bond)
        rows.append(ids[tuple(lo)][bonded])
        cols.append(ids[tuple(hi)][bonded])
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    return sp.csr_matrix((np.ones(r.size, dtype=np.int8), (r, c)), shape=(spins.size, spins.size))


def cluster_update(eta: Form, kappa: float, rng_bonds: np.random.Generator,
                   rng_flips: np.random.Generator) -> Form:
    """Swendsen-Wang update for n = 2 with bond probability 1 - exp(-4 kappa)."""
    if eta.n != 2:
        raise ValueError("the cluster update is implemented for n = 2 only")
    graph = _bond_graph(eta.vec, eta.box.shape, 1.0 - math.exp(-4 * kappa), rng_bonds)
    count, labels = connected_components(graph, directed=False)
    flips = rng_flips.integers(0, 2, size=count)
    return Form(eta.box, 0, 2, eta.vec ^ flips[labels])


class SpinState:
    def __init__(self, eta: np.ndarray, box: Box, n: int):
        self.eta_vec, self.box, self.n = eta, box, n

    def eta(self) -> Form:
        return Form(self.box, 0, self.n, self.eta_vec)

    def sigma(self) -> Form:
        grad = np.empty(self.eta_vec.size * 4, dtype=np.int64)
        _kernels.spin_gradient(self.eta_vec, np.array(self.box.shape, dtype=np.int64), grad)
        return Form.from_dense(self.box, 1, self.n, grad.reshape(self.box.shape + (4,)))


class SpinChain:
    """One Markov chain of the spin model; ``method`` is heatbath or cluster."""

    def __init__(self, box: Box, n: int, kappa: float, seed: int, chain_id: int,
                 method: str = "heatbath", start: str = "cold"):
        if method not in ("heatbath", "cluster"):
            raise ValueError(f"unknown method {method!r}")
        if method == "cluster" and n != 2:
            raise ValueError("the cluster update is implemented for n = 2 only")
        self.box, self.n, self.kappa = box, n, kappa
        self.seed, self.chain_id, self.method = seed, chain_id, method
        self.shape = np.array(box.shape, dtype=np.int64)
        self.tab = cos_table(n)
        if start == "random":
            self.eta = stream(seed, chain_id, 0, _START).integers(0, n, size=box.count(0)).astype(np.int64)
        else:
            self.eta = np.zeros(box.count(0), dtype=np.int64)

    def step(self, sweep: int) -> None:
        u = stream(self.seed, self.chain_id, sweep).random(self.eta.size)
        _kernels.sweep_spins(self.eta, u, self.shape, self.n, 2 * self.kappa, self.tab)
        if self.method == "cluster":
            f = cluster_update(Form(self.box, 0, 2, self.eta), self.kappa,
                               stream(self.seed, self.chain_id, sweep, _CLUSTER),
                               stream(self.seed, self.chain_id, sweep, _FLIP))
            self.eta = f.vec.copy()

    def state(self) -> SpinState:
        return SpinState(self.eta, self.box, self.n)


def estimate_spin_many(observables: Mapping[str, Callable[[SpinState], complex]], box: Box, n: int,
                       kappa: float, cfg: Optional[RunConfig] = None, method: str = "heatbath",
                       start: str = "cold") -> Dict[str, Estimate]:
    cfg = cfg or RunConfig()
    return run_chains(lambda c: SpinChain(box, n, kappa, cfg.seed, c, method, start), observables, cfg)


# observables ------------------------------------------------------------------
def _endpoints(gamma: Chain):
    bd = boundary_chain(gamma)
    return [(c.base, v) for c, v in bd]


def two_point(box: Box, n: int, pairs) -> Callable[[SpinState], float]:
    """Re rho(sum_i v_i eta(x_i)) for [(x_i, v_i)] (e.g. the boundary of a path)."""
    idx = np.array([box.index(OrientedCell(tuple(x), ())) for x, _ in pairs], dtype=np.int64)
    coef = np.array([v for _, v in pairs], dtype=np.int64)

    def obs(st) -> float:
        vec = st.eta_vec if isinstance(st, SpinState) else st.vec
        return math.cos(2 * math.pi * int((vec[idx] * coef).sum() % n) / n)

    obs.batch = lambda vecs: np.cos(2 * np.pi * ((vecs[:, idx] * coef).sum(axis=1) % n) / n)
    return obs


def h_kappa(gamma: Chain, kappa: float, n: int, N: Optional[int] = None, cfg: Optional[RunConfig] = None,
            box: Optional[Box] = None, method: str = "heatbath") -> Estimate:
    """Spin-spin correlation between the endpoints of gamma; exactly 1 for loops."""
    box = box if box is not None else Box.cube(N)
    pts = _endpoints(gamma)
    if not pts:
        return Estimate.exact(1.0)
    return estimate_spin_many({"h": two_point(box, n, pts)}, box, n, kappa, cfg, method)["h"]


def theta_product_observable(gamma: Chain, box: Box, n: int, beta: float, kappa: float,
                             plaquettes: Optional[Sequence[int]] = None) -> Callable:
    """Product of theta(sigma(e)) along gamma, acting on a SpinState or an edge Form.

    ``plaquettes`` gives the number of plaquettes through each edge of gamma
    (6 in the bulk); theta is evaluated with that count.
    """
    items = list(gamma)
    idx = np.array([box.index(c) for c, _ in items], dtype=np.int64)
    coef = np.array([v for _, v in items], dtype=np.int64)
    counts = [6] * len(items) if plaquettes is None else list(plaquettes)
    tables = np.array([[theta(g, beta, kappa, n, m) for g in range(n)] for m in counts])
    rows = np.arange(len(items))

    def values(vecs: np.ndarray) -> np.ndarray:
        g = (vecs[:, idx] * coef) % n
        return np.prod(tables[rows[None, :], g], axis=1)

    def obs(st) -> float:
        sig = st.sigma() if isinstance(st, SpinState) else st
        return float(values(sig.vec[None, :])[0].real)

    # the expectation is real (sigma -> -sigma conjugates theta); keep Re per sample
    obs.batch = lambda vecs: values(vecs).real
    return obs


def theta_product(gamma: Chain, beta: float, kappa: float, n: int, N: Optional[int] = None,
                  cfg: Optional[RunConfig] = None, box: Optional[Box] = None,
                  method: str = "heatbath") -> Estimate:
    if math.isinf(beta):
        raise ValueError("theta_product needs finite beta")
    box = box if box is not None else Box.cube(N)
    obs = theta_product_observable(gamma, box, n, beta, kappa)
    return estimate_spin_many({"theta": obs}, box, n, kappa, cfg, method)["theta"]


def center_edge(box: Box, axis: int = 0) -> OrientedCell:
    mid = tuple((l + h) // 2 for l, h in zip(box.lo, box.hi))
    base = list(mid)
    if base[axis] + 1 > box.hi[axis]:
        base[axis] -= 1
    return edge(base, axis)


def edge_observable(box: Box, n: int, e: Optional[OrientedCell] = None) -> Callable:
    e = e if e is not None else center_edge(box)
    return two_point(box, n, [(tuple(e.base), -1), (tuple(b + (i == e.axes[0]) for i, b in enumerate(e.base)), 1)])


def edge_correlation(kappa: float, n: int, N: Optional[int] = None, cfg: Optional[RunConfig] = None,
                     box: Optional[Box] = None, e: Optional[OrientedCell] = None,
                     method: str = "heatbath") -> Estimate:
    """<Re rho(d eta(e))> for a centred edge e."""
    box = box if box is not None else Box.cube(N)
    return estimate_spin_many({"edge": edge_observable(box, n, e)}, box, n, kappa, cfg, method)["edge"]


# exact enumeration -------------------------------------------------------------
def exact_spin_expectations(observables: Mapping[str, Callable], box: Box, n: int, kappa: float,
                            limit: int = ENUMERATION_LIMIT) -> Dict[str, float]:
    """Exact spin-model expectations; observables need a ``batch`` over spin vectors."""
    nv = box.count(0)
    if n ** nv > limit:
        raise TooLarge(f"{n}^{nv} spin configurations exceed {limit}")
    grad = incidence(box, 0)
    tab = cos_table(n)
    shift = 2 * kappa * box.count(1)
    total = 0.0
    acc = {k: 0.0 for k in observables}
    for vecs in iter_vectors(nv, n, limit):
        dv = np.asarray(grad @ vecs.T).T % n
        w = np.exp(2 * kappa * tab[dv].sum(axis=1) - shift)
        total += w.sum()
        for k, f in observables.items():
            acc[k] += float((w * f.batch(vecs)).sum())
    return {k: v / total for k, v in acc.items()}


def exact_spin_expectation(obs: Callable, box: Box, n: int, kappa: float, limit: int = ENUMERATION_LIMIT) -> float:
    return exact_spin_expectations({"obs": obs}, box, n, kappa, limit)["obs"]


class SigmaOfSpins:
    """Adapt an edge observable with ``batch`` to spin vectors via sigma = d eta."""

    def __init__(self, edge_obs, box: Box):
        self.edge_obs, self.grad = edge_obs, incidence(box, 0)

    def batch(self, vecs: np.ndarray) -> np.ndarray:
        return self.edge_obs.batch(np.asarray(self.grad @ vecs.T).T)


# checkpoints -----------------------------------------------------------------
def save_spin_checkpoint(path, eta: Form, kappa: float, seed: int, sweeps: int, beta: float = INFINITY) -> None:
    if eta.box.N is None:
        raise ValueError("checkpoints cover symmetric cubes only")
    ck = Checkpoint(b"HSPN", eta.n, eta.box.N, beta, kappa, seed, sweeps, eta.vec)
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(ck))


def load_spin_checkpoint(path):
    """Returns (eta, kappa, seed, sweeps)."""
    with open(path, "rb") as fh:
        ck = decode_checkpoint(fh.read(), b"HSPN")
    return Form(Box.cube(ck.N), 0, ck.n, ck.values), ck.kappa, ck.seed, ck.sweeps
