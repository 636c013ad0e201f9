"""The fixed-length abelian Higgs model in unitary gauge.

Weights use the all-oriented-cells convention: every sum over cells is twice
the sum over positive cells, since Re rho is even under orientation flips.
"""
from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .cellcomplex import Box, Chain, boundary_chain, cell_layout, incidence
from .forms import Form, TooLarge, d, evaluate, iter_vectors

INFINITY = math.inf
ENUMERATION_LIMIT = 2 ** 26

# RNG stream purposes
_SWEEP, _START, _CLUSTER, _FLIP = 0, 1, 2, 3


@dataclass(frozen=True)
class Params:
    n: int
    N: Optional[int]
    beta: float
    kappa: float
    box_override: Optional[Box] = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.beta < 0 or self.kappa < 0 or math.isnan(self.beta) or math.isnan(self.kappa):
            raise ValueError("beta and kappa must be nonnegative")
        if math.isinf(self.kappa):
            raise ValueError("kappa must be finite")
        if self.box_override is None and (self.N is None or self.N < 1):
            raise ValueError("need N >= 1 or an explicit box")

    @property
    def box(self) -> Box:
        return self.box_override if self.box_override is not None else Box.cube(self.N)

    @property
    def beta_infinite(self) -> bool:
        return math.isinf(self.beta)

    def with_box(self, box: Box) -> "Params":
        return Params(self.n, box.N, self.beta, self.kappa, box)


def cos_table(n: int) -> np.ndarray:
    return np.cos(2 * np.pi * np.arange(n) / n)


def threads() -> int:
    """Worker cap from HLGT_THREADS, defaulting to the CPU count."""
    raw = os.environ.get("HLGT_THREADS", "").strip()
    if raw:
        value = int(raw)
        if value < 1:
            raise ValueError("HLGT_THREADS must be a positive integer")
        return value
    return os.cpu_count() or 1


def stream(seed: int, chain: int, sweep: int, purpose: int = _SWEEP) -> np.random.Generator:
    """Counter-based stream for one (seed, chain, sweep, purpose) cell.

    Inside a sweep the uniform at array position e belongs to edge e, so the
    draws do not depend on thread scheduling.
    """
    key = (seed % 2 ** 64) | (chain % 2 ** 64) << 64
    counter = (purpose % 2 ** 64) << 192 | (sweep % 2 ** 64) << 128
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


# weights --------------------------------------------------------------------
def log_weight(sigma: Form, p: Params) -> float:
    if p.beta_infinite:
        raise ValueError("log_weight is undefined at beta = INFINITY")
    tab = cos_table(p.n)
    edge_term = tab[sigma.vec].sum()
    plaq_term = tab[d(sigma).vec].sum()
    return float(2 * p.kappa * edge_term + 2 * p.beta * plaq_term)


def log_weights_batch(vecs: np.ndarray, box: Box, p: Params) -> np.ndarray:
    """Log weights of many edge vectors at once (rows of ``vecs``)."""
    tab = cos_table(p.n)
    plaq = np.asarray(incidence(box, 1) @ vecs.T).T % p.n
    out = 2 * p.kappa * tab[vecs].sum(axis=1)
    if p.beta_infinite:
        closed = ~(plaq != 0).any(axis=1)
        return np.where(closed, out, -np.inf)
    return out + 2 * p.beta * tab[plaq].sum(axis=1)


# observables ----------------------------------------------------------------
class LineObservable:
    """rho(sigma(gamma)) for a fixed 1-chain, evaluated on forms or on batches."""

    def __init__(self, gamma: Chain, box: Box, n: int):
        if gamma.k != 1:
            raise ValueError("line observables need a 1-chain")
        self.gamma, self.box, self.n = gamma, box, n
        items = [(box.index(c), v) for c, v in gamma]
        self.idx = np.array([i for i, _ in items], dtype=np.int64)
        self.coef = np.array([v for _, v in items], dtype=np.int64)

    def phase(self, sigma: Form) -> int:
        return int((sigma.vec[self.idx] * self.coef).sum() % self.n)

    def __call__(self, sigma: Form) -> complex:
        return complex(np.exp(2j * np.pi * self.phase(sigma) / self.n))

    def batch(self, vecs: np.ndarray) -> np.ndarray:
        ph = (vecs[:, self.idx] * self.coef).sum(axis=1) % self.n
        return np.cos(2 * np.pi * ph / self.n)


def wilson_line(sigma: Form, gamma: Chain) -> complex:
    if any(abs(v) > 1 for _, v in gamma):
        raise ValueError("path coefficients must lie in {-1, 0, 1}")
    g = evaluate(sigma, gamma)
    return complex(np.exp(2j * np.pi * g / sigma.n))


def line_observable_full(sigma: Form, phi: Form, gamma: Chain) -> complex:
    """rho(sigma(gamma) - phi(boundary gamma)) for the full (sigma, phi) model."""
    g = evaluate(sigma, gamma) - evaluate(phi, boundary_chain(gamma))
    return complex(np.exp(2j * np.pi * (g % sigma.n) / sigma.n))


def gauge_transform(sigma: Form, phi: Form, eta: Form) -> Tuple[Form, Form]:
    if sigma.box != phi.box or phi.box != eta.box:
        raise ValueError("forms live on different boxes")
    return sigma + d(eta), phi + eta


# estimates ------------------------------------------------------------------
@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    sweeps: int
    chains: int
    seed: int
    batch_means: Tuple[float, ...] = field(default=(), repr=False)

    @classmethod
    def exact(cls, value: float) -> "Estimate":
        return cls(float(value), 0.0, 0, 0, 0, ())

    @classmethod
    def from_batches(cls, batch_means: Sequence[float], sweeps: int, chains: int, seed: int) -> "Estimate":
        bm = np.asarray(batch_means, dtype=float)
        if bm.size < 2:
            raise ValueError("need at least two batches")
        mean = float(bm.mean())
        spread = float(bm.std(ddof=1))
        # identical batches (e.g. constant observables) give exactly zero
        if np.all(bm == bm[0]):
            mean, spread = float(bm[0]), 0.0
        return cls(mean, spread / math.sqrt(bm.size), sweeps, chains, seed, tuple(bm.tolist()))

    def merge(self, other: "Estimate") -> "Estimate":
        """Pool two runs of the same observable; order does not matter."""
        pooled = tuple(sorted(self.batch_means + other.batch_means))
        return Estimate.from_batches(pooled, self.sweeps + other.sweeps, self.chains + other.chains,
                                     min(self.seed, other.seed))

    def within(self, value: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr + floor


@dataclass
class RunConfig:
    sweeps: int = 2000
    burnin: Optional[int] = None
    chains: int = 4
    seed: int = 0
    batches: int = 32
    thinning: int = 1

    def resolved_burnin(self) -> int:
        return int(round(0.2 * self.sweeps)) if self.burnin is None else int(self.burnin)

    def validate(self) -> None:
        if self.batches < 16:
            raise ValueError("batch means need at least 16 batches per chain")
        if self.chains < 1 or self.thinning < 1:
            raise ValueError("chains and thinning must be positive")
        if self.sweeps < 16 * self.batches:
            raise ValueError(f"sweeps must be at least 16 * batches = {16 * self.batches}")
        burn = self.resolved_burnin()
        if not 0 <= burn < self.sweeps:
            raise ValueError("burn-in must lie in [0, sweeps)")
        if (self.sweeps - burn) // self.thinning < self.batches:
            raise ValueError("fewer measurements than batches")


def run_chains(make_chain: Callable[[int], "object"], observables: Mapping[str, Callable],
               cfg: RunConfig) -> Dict[str, Estimate]:
    """Run independent chains and reduce every observable by batch means.

    ``make_chain(chain_id)`` returns an object with ``step(sweep)`` and
    ``state()``; each observable receives ``state()``.
    """
    cfg.validate()
    burn = cfg.resolved_burnin()
    names = list(observables)

    def one(chain_id: int) -> np.ndarray:
        chain = make_chain(chain_id)
        rows = []
        for sweep in range(cfg.sweeps):
            chain.step(sweep)
            if sweep >= burn and (sweep - burn) % cfg.thinning == 0:
                st = chain.state()
                rows.append([complex(observables[k](st)).real for k in names])
        data = np.asarray(rows, dtype=float)
        size = data.shape[0] // cfg.batches
        data = data[data.shape[0] - size * cfg.batches:]
        return data.reshape(cfg.batches, size, len(names)).mean(axis=1)

    workers = min(threads(), cfg.chains)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_chain = list(pool.map(one, range(cfg.chains)))
    else:
        per_chain = [one(c) for c in range(cfg.chains)]
    allb = np.concatenate(per_chain, axis=0)
    return {k: Estimate.from_batches(allb[:, i], cfg.sweeps, cfg.chains, cfg.seed) for i, k in enumerate(names)}


class GaugeChain:
    """One Markov chain over edge configurations at finite beta."""

    def __init__(self, p: Params, seed: int, chain_id: int, method: str = "heatbath",
                 start: str = "cold", initial: Optional[Form] = None):
        if p.beta_infinite:
            raise ValueError("use the spin chain at beta = INFINITY")
        if method not in ("heatbath", "metropolis"):
            raise ValueError(f"unknown method {method!r}")
        self.p, self.seed, self.chain_id = p, seed, chain_id
        self.box = p.box
        self.shape = np.array(self.box.shape, dtype=np.int64)
        self.metropolis = method == "metropolis"
        self.tab = cos_table(p.n)
        if initial is not None:
            sigma = initial
        elif start == "random":
            sigma = Form.random(self.box, 1, p.n, stream(seed, chain_id, 0, _START))
        elif start == "cold":
            sigma = Form.zeros(self.box, 1, p.n)
        else:
            raise ValueError(f"unknown start {start!r}")
        self.s = sigma.dense().reshape(-1).copy()
        self.sweeps_done = 0

    def step(self, sweep: int) -> None:
        u = stream(self.seed, self.chain_id, sweep).random(2 * self.s.size)
        _kernels.sweep_edges(self.s, u, self.shape, self.p.n, 2 * self.p.beta, 2 * self.p.kappa,
                             self.tab, self.metropolis)
        self.sweeps_done += 1

    def state(self) -> Form:
        return Form.from_dense(self.box, 1, self.p.n, self.s.reshape(self.box.shape + (4,)))


def heatbath_sweep(sigma: Form, p: Params, rng: np.random.Generator, method: str = "heatbath") -> Form:
    """One sweep over all positive edges in canonical order; returns a new form."""
    if p.beta_infinite:
        raise ValueError("heat bath needs finite beta")
    s = sigma.dense().reshape(-1).copy()
    u = rng.random(2 * s.size)
    _kernels.sweep_edges(s, u, np.array(sigma.box.shape, dtype=np.int64), p.n, 2 * p.beta, 2 * p.kappa,
                         cos_table(p.n), method == "metropolis")
    return Form.from_dense(sigma.box, 1, p.n, s.reshape(sigma.box.shape + (4,)))


def edge_conditional(sigma: Form, edge_index: int, p: Params) -> np.ndarray:
    """Exact conditional distribution of one edge given all others."""
    box = sigma.box
    s = sigma.dense().reshape(-1)
    pos = int(cell_layout(box, 1).flat[edge_index])
    logw = np.empty(p.n)
    _kernels.edge_conditional(s, np.array(box.shape, dtype=np.int64), pos // 4, pos % 4, p.n,
                              2 * p.beta, 2 * p.kappa, cos_table(p.n), logw)
    w = np.exp(logw - logw.max())
    return w / w.sum()


def sample_closed(p: Params, rng: np.random.Generator, sweeps: int = 200) -> Form:
    """sigma = d eta with eta drawn from the dual spin model."""
    from .spinmodel import spin_sweep
    if not p.beta_infinite:
        raise ValueError("sample_closed needs beta = INFINITY")
    eta = Form.random(p.box, 0, p.n, rng)
    for _ in range(max(1, sweeps)):
        eta = spin_sweep(eta, p.kappa, rng)
    return d(eta)


def estimate_many(observables: Mapping[str, Callable[[Form], complex]], p: Params, sweeps: int = 2000,
                  burnin: Optional[int] = None, chains: int = 4, seed: int = 0, batches: int = 32,
                  thinning: int = 1, method: str = "heatbath", start: str = "cold") -> Dict[str, Estimate]:
    """Estimates of several edge observables from the same chains.

    At beta = INFINITY the chains run on the spin model and observables see
    sigma = d eta.
    """
    cfg = RunConfig(sweeps, burnin, chains, seed, batches, thinning)
    if p.beta_infinite:
        from .spinmodel import SpinChain
        wrapped = {k: (lambda st, f=f: f(st.sigma())) for k, f in observables.items()}
        return run_chains(lambda c: SpinChain(p.box, p.n, p.kappa, seed, c, method=_spin_method(method)),
                          wrapped, cfg)
    return run_chains(lambda c: GaugeChain(p, seed, c, method, start), observables, cfg)


def _spin_method(method: str) -> str:
    return method if method in ("heatbath", "cluster") else "heatbath"


def estimate(obs: Callable[[Form], complex], p: Params, sweeps: int = 2000, burnin: Optional[int] = None,
             chains: int = 4, seed: int = 0, **kw) -> Estimate:
    return estimate_many({"obs": obs}, p, sweeps, burnin, chains, seed, **kw)["obs"]


# exact enumeration ------------------------------------------------------------
def _apply(obs, vecs: np.ndarray, box: Box, n: int, k: int = 1) -> np.ndarray:
    if hasattr(obs, "batch"):
        return np.asarray(obs.batch(vecs), dtype=complex).real
    return np.array([complex(obs(Form(box, k, n, v))).real for v in vecs])


def exact_expectations(observables: Mapping[str, Callable], p: Params, box: Optional[Box] = None,
                       limit: int = ENUMERATION_LIMIT) -> Dict[str, float]:
    """Exact expectations by summing over every edge configuration.

    At beta = INFINITY only closed configurations carry weight.
    """
    box = box if box is not None else p.box
    size = box.count(1)
    if p.n ** size > limit:
        raise TooLarge(f"{p.n}^{size} edge configurations exceed {limit}")
    names = list(observables)
    shift = None
    total = 0.0
    acc = np.zeros(len(names))
    for vecs in iter_vectors(size, p.n, limit):
        lw = log_weights_batch(vecs, box, p)
        keep = np.isfinite(lw)
        if not keep.any():
            continue
        vecs, lw = vecs[keep], lw[keep]
        m = lw.max()
        if shift is None or m > shift:
            if shift is not None:
                scale = math.exp(shift - m)
                total *= scale
                acc *= scale
            shift = m
        w = np.exp(lw - shift)
        total += w.sum()
        for i, k in enumerate(names):
            acc[i] += (w * _apply(observables[k], vecs, box, p.n)).sum()
    return {k: float(acc[i] / total) for i, k in enumerate(names)}


def exact_expectation(obs: Callable, p: Params, box: Optional[Box] = None,
                      limit: int = ENUMERATION_LIMIT) -> float:
    return exact_expectations({"obs": obs}, p, box, limit)["obs"]


def exact_distribution(p: Params, box: Optional[Box] = None, limit: int = ENUMERATION_LIMIT
                       ) -> Tuple[np.ndarray, np.ndarray]:
    """All configurations with nonzero weight and their probabilities."""
    box = box if box is not None else p.box
    size = box.count(1)
    if p.n ** size > limit:
        raise TooLarge(f"{p.n}^{size} edge configurations exceed {limit}")
    blocks, logs = [], []
    for vecs in iter_vectors(size, p.n, limit):
        lw = log_weights_batch(vecs, box, p)
        keep = np.isfinite(lw)
        blocks.append(vecs[keep])
        logs.append(lw[keep])
    vecs = np.concatenate(blocks)
    lw = np.concatenate(logs)
    w = np.exp(lw - lw.max())
    return vecs, w / w.sum()


def full_model_expectation(obs, p: Params, box: Optional[Box] = None,
                           limit: int = ENUMERATION_LIMIT) -> float:
    """Exact expectation under the (sigma, phi) model with the Higgs field kept.

    Weight: exp(beta sum rho(d sigma) + kappa sum rho(sigma(e) - d phi(e))).
    ``obs`` is called as obs(sigma, phi), or batched via ``obs.batch_full``.
    """
    box = box if box is not None else p.box
    ne, nv = box.count(1), box.count(0)
    if p.n ** (ne + nv) > limit:
        raise TooLarge("too many (sigma, phi) pairs")
    tab = cos_table(p.n)
    grad = incidence(box, 0)
    svecs = np.concatenate(list(iter_vectors(ne, p.n, limit)))
    plaq_lw = log_weights_batch(svecs, box, Params(p.n, p.N, p.beta, 0.0, box))
    keep = np.isfinite(plaq_lw)
    svecs, plaq_lw = svecs[keep], plaq_lw[keep]
    # upper bound on every log weight keeps exp() in range
    shift = plaq_lw.max() + 2 * p.kappa * ne
    num = den = 0.0
    for phis in iter_vectors(nv, p.n, limit, chunk=1):
        phi = Form(box, 0, p.n, phis[0])
        dphi = np.asarray(grad @ phi.vec)
        w = np.exp(plaq_lw + 2 * p.kappa * tab[(svecs - dphi[None, :]) % p.n].sum(axis=1) - shift)
        if hasattr(obs, "batch_full"):
            vals = obs.batch_full(svecs, phi)
        else:
            vals = np.array([complex(obs(Form(box, 1, p.n, s), phi)).real for s in svecs])
        num += float((w * vals).sum())
        den += float(w.sum())
    return num / den


class FullLineObservable:
    """L_gamma(sigma, phi) with a batched form used by full-model enumeration."""

    def __init__(self, gamma: Chain, box: Box, n: int):
        self.line = LineObservable(gamma, box, n)
        self.bd = boundary_chain(gamma)
        self.n = n

    def __call__(self, sigma: Form, phi: Form) -> complex:
        return line_observable_full(sigma, phi, self.line.gamma)

    def batch_full(self, svecs: np.ndarray, phi: Form) -> np.ndarray:
        shift = evaluate(phi, self.bd)
        ph = ((svecs[:, self.line.idx] * self.line.coef).sum(axis=1) - shift) % self.n
        return np.cos(2 * np.pi * ph / self.n)


# checkpoints ----------------------------------------------------------------
_HEADER = struct.Struct("<4sIIIddQQ")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    magic: bytes
    n: int
    N: int
    beta: float
    kappa: float
    seed: int
    sweeps: int
    values: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        same_beta = (math.isinf(self.beta) and math.isinf(other.beta)) or self.beta == other.beta
        return (self.magic, self.n, self.N, self.kappa, self.seed, self.sweeps) == \
            (other.magic, other.n, other.N, other.kappa, other.seed, other.sweeps) and same_beta and \
            np.array_equal(self.values, other.values)


def encode_checkpoint(ck: Checkpoint) -> bytes:
    if ck.n > 256:
        raise ValueError("one byte per cell holds at most 256 group values")
    beta = math.nan if math.isinf(ck.beta) else ck.beta
    head = _HEADER.pack(ck.magic, CHECKPOINT_VERSION, ck.n, ck.N, beta, ck.kappa, ck.seed % 2 ** 64, ck.sweeps)
    return head + np.asarray(ck.values, dtype=np.uint8).tobytes()


def decode_checkpoint(blob: bytes, magic: bytes) -> Checkpoint:
    if len(blob) < _HEADER.size:
        raise ValueError("truncated checkpoint")
    mg, version, n, N, beta, kappa, seed, sweeps = _HEADER.unpack_from(blob)
    if mg != magic:
        raise ValueError(f"bad magic {mg!r}, expected {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    beta = INFINITY if math.isnan(beta) else beta
    values = np.frombuffer(blob, dtype=np.uint8, offset=_HEADER.size).astype(np.int64)
    k = 1 if magic == b"HLGT" else 0
    expected = Box.cube(N).count(k)
    if values.size != expected:
        raise ValueError(f"checkpoint holds {values.size} cells, box needs {expected}")
    if values.size and values.max() >= n:
        raise ValueError("cell value out of range")
    return Checkpoint(mg, n, N, beta, kappa, seed, sweeps, values)


def save_checkpoint(path, sigma: Form, p: Params, seed: int, sweeps: int) -> None:
    if sigma.box.N is None:
        raise ValueError("checkpoints cover symmetric cubes only")
    ck = Checkpoint(b"HLGT", p.n, sigma.box.N, p.beta, p.kappa, seed, sweeps, sigma.vec)
    with open(path, "wb") as fh:
        fh.write(encode_checkpoint(ck))


def load_checkpoint(path) -> Tuple[Form, Params, int, int]:
    with open(path, "rb") as fh:
        ck = decode_checkpoint(fh.read(), b"HLGT")
    p = Params(ck.n, ck.N, ck.beta, ck.kappa)
    return Form(p.box, 1, ck.n, ck.values), p, ck.seed, ck.sweeps
