"""Disagreement couplings: the Z_n-Z_n coupling with forced agreement off the
cluster of E0, and the coupling of the gauge-Higgs model to the Z_n model.

Both merge two parent configurations by keeping the first parent on the
E-set and the second parent elsewhere.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .cellcomplex import Box, Chain, OrientedCell, boundary_chain, incidence
from .clusters import ESet, EdgeGraphView, e_set, edge_adjacency
from .forms import Form, NotClosed, as_mask, d, decompose, iter_vectors, leq
from .gibbs import GaugeChain, Params, log_weights_batch, stream
from .theory import alpha0, alpha1, constants
from .spinmodel import SpinChain

ZZ = "ZZ"
LGTZ = "LGTZ"
# oriented cluster size below which the E1 superset cannot occur
E1_MIN_CLUSTER = 16


@dataclass
class CouplingSample:
    sigma: Form
    sigma_prime: Form
    eset: ESet
    kind: str
    parent: Form
    e0: Optional[np.ndarray] = None
    provenance: Tuple[int, int, int] = (0, 0, 0)  # seed, sweep of each parent chain


def _merge(hat: Form, hat_prime: Form, eset: ESet) -> Form:
    return hat.restrict(eset.mask) + hat_prime.restrict(~eset.mask)


def merge_zz(hat: Form, hat_prime: Form, e0) -> CouplingSample:
    """Both parents closed; the E-set is the cluster of E0 (general formula)."""
    if not d(hat).is_zero() or not d(hat_prime).is_zero():
        raise NotClosed("both parents of the Z_n-Z_n coupling must be closed")
    mask = as_mask(hat.box, 1, e0).copy()
    es = e_set(mask, hat, hat_prime)
    return CouplingSample(_merge(hat, hat_prime, es), hat_prime, es, ZZ, hat, mask)


def merge_lgt_z(hat: Form, hat_prime: Form) -> CouplingSample:
    """First parent from the gauge-Higgs model, second one closed."""
    if not d(hat_prime).is_zero():
        raise NotClosed("the second parent must be closed")
    es = e_set([], hat, hat_prime)
    return CouplingSample(_merge(hat, hat_prime, es), hat_prime, es, LGTZ, hat)


def _closed_chain(p: Params, seed: int, chain_id: int, method: str = "heatbath"):
    return SpinChain(p.box, p.n, p.kappa, seed, chain_id, method)


def coupling_stream(p: Params, kind: str, sweeps: int, seed: int = 0, e0=None, thinning: int = 10,
                    burnin: Optional[int] = None, chain_id: int = 0) -> Iterator[CouplingSample]:
    """Lockstep parent chains; yields a fresh merge every ``thinning`` sweeps after burn-in.

    The closed parent comes from the spin model at (infinity, kappa); for ZZ
    both parents do.  The general parent runs the gauge heat bath at p.
    """
    burn = int(round(0.2 * sweeps)) if burnin is None else burnin
    prime_chain = _closed_chain(p, seed, 2 * chain_id + 1)
    if kind == ZZ:
        hat_chain = _closed_chain(p, seed, 2 * chain_id)
    elif kind == LGTZ:
        hat_chain = GaugeChain(p, seed, 2 * chain_id)
    else:
        raise ValueError(f"unknown coupling kind {kind!r}")
    for sweep in range(sweeps):
        hat_chain.step(sweep)
        prime_chain.step(sweep)
        if sweep >= burn and (sweep - burn) % thinning == 0:
            hat = hat_chain.state()
            hat = hat.sigma() if kind == ZZ else hat
            prime = prime_chain.state().sigma()
            sample = merge_zz(hat, prime, e0) if kind == ZZ else merge_lgt_z(hat, prime)
            sample.provenance = (seed, sweep, sweep)
            yield sample


def sample_coupling(p: Params, kind: str, seed: int = 0, sweeps: int = 100, e0=None) -> CouplingSample:
    """One merged sample after ``sweeps`` sweeps of both parent chains."""
    last = None
    for last in coupling_stream(p, kind, sweeps, seed, e0, thinning=1, burnin=sweeps - 1):
        pass
    return last


def decompose_merged(sample: CouplingSample, parent_pieces: Optional[Sequence[Form]] = None,
                     prime_pieces: Optional[Sequence[Form]] = None) -> Tuple[List[Form], List[Form]]:
    """Pieces of the first parent inside the E-set and of the second parent outside it."""
    if parent_pieces is None:
        parent_pieces = [] if sample.parent.is_zero() else decompose(sample.parent)
    if prime_pieces is None:
        prime_pieces = [] if sample.sigma_prime.is_zero() else decompose(sample.sigma_prime)
    inside = sample.eset.mask
    keep = [w for w in parent_pieces if np.all(inside[w.vec != 0])]
    keep_prime = [w for w in prime_pieces if not np.any(inside[w.vec != 0])]
    return keep, keep_prime


def is_decomposition(omega: Form, pieces: Sequence[Form], check_irreducible: bool = False) -> bool:
    """Nontrivial pieces below omega with disjoint supports and disjoint d-supports summing to omega."""
    from .forms import is_irreducible_exact
    total = Form.zeros(omega.box, omega.k, omega.n)
    used = np.zeros(omega.vec.size, dtype=bool)
    dused = np.zeros(d(omega).vec.size, dtype=bool)
    for w in pieces:
        if w.is_zero() or not leq(w, omega):
            return False
        s, ds = w.vec != 0, d(w).vec != 0
        if (used & s).any() or (dused & ds).any():
            return False
        used |= s
        dused |= ds
        if check_irreducible and not is_irreducible_exact(w):
            return False
        total = total + w
    return total == omega


# events ----------------------------------------------------------------------
@dataclass
class EventRecord:
    e4: bool
    e5: bool
    e6: bool
    e7: bool
    e1_superset: bool
    e2_superset: bool
    e3: bool
    cluster_size: int
    eset_size: int


@lru_cache(maxsize=16)
def _coboundary_table(box: Box):
    """For each positive edge: indices of its plaquettes and the coefficient of
    the edge in their boundaries (so that sign * d sigma(p) is d sigma on the
    plaquette oriented to contain the edge positively)."""
    b = incidence(box, 1).tocsc()
    out = []
    for e in range(box.count(1)):
        lo, hi = b.indptr[e], b.indptr[e + 1]
        out.append((b.indices[lo:hi].copy(), b.data[lo:hi].copy()))
    return out


def oriented_plaquette_values(sigma: Form, e: int, dsigma: Optional[Form] = None) -> np.ndarray:
    """d sigma on each plaquette of the coboundary of edge e, oriented to contain e."""
    dsigma = d(sigma) if dsigma is None else dsigma
    idx, sgn = _coboundary_table(sigma.box)[e]
    return (sgn * dsigma.vec[idx]) % sigma.n


def e3_indicator(sigma: Form, gamma: Chain, pieces: Optional[Sequence[Form]] = None) -> bool:
    """Two distinct pieces of sigma both with nonzero d on the coboundary of one gamma edge.

    Only pieces meeting the plaquettes around gamma matter, so sigma is first
    cut down to the clusters of its edge graph that reach those plaquettes.
    """
    box = sigma.box
    table = _coboundary_table(box)
    if pieces is None:
        if sigma.is_zero():
            return False
        near = np.zeros(box.count(1), dtype=bool)
        adj = edge_adjacency(box)
        for c, _ in gamma:
            j = box.index(c)
            near[j] = True
            near[adj[j].indices] = True
        local = sigma.restrict(EdgeGraphView(sigma).cluster_mask(near & (sigma.vec != 0)))
        pieces = decompose(local) if not local.is_zero() else []
    dp = [d(w).vec != 0 for w in pieces]
    for c, _ in gamma:
        idx, _ = table[box.index(c)]
        if sum(1 for m in dp if m[idx].any()) >= 2:
            return True
    return False


def event_indicators(sample: CouplingSample, gamma: Chain, e) -> EventRecord:
    sigma, prime, es = sample.sigma, sample.sigma_prime, sample.eset
    box = sigma.box
    ei = box.index(e) if isinstance(e, OrientedCell) else int(e)
    ds = d(sigma)
    vals = oriented_plaquette_values(sigma, ei, ds)
    e4 = bool(es.mask[ei] and prime.vec[ei] != 0)
    near = edge_adjacency(box)[ei].indices
    touches = bool(es.mask[ei] or es.mask[near].any())
    diffs = (sigma.vec[ei] - vals) % sigma.n
    e5 = touches and len(diffs) > 0 and bool(np.all(diffs == diffs[0])) and diffs[0] != 0
    e6 = bool(prime.vec[ei] != 0)
    e7 = bool(len(vals) > 0 and np.any(vals != vals[0]))
    view = EdgeGraphView(sample.parent, prime)
    is_open = len(boundary_chain(gamma)) > 0
    e1 = e2 = False
    for c, _ in gamma:
        j = box.index(c)
        cl = view.cluster_mask([j])
        if d(sample.parent.restrict(cl)).is_zero():
            continue
        e1 |= bool(is_open and prime.vec[j] != 0 and 2 * cl.sum() >= E1_MIN_CLUSTER)
        e2 |= bool(sample.parent.vec[j] != 0)
    return EventRecord(e4, e5, e6, e7, e1, e2, e3_indicator(sigma, gamma),
                       view.cluster_size([ei]), es.size)


CSV_COLUMNS = ("seed", "sweep", "e1_superset", "e2_superset", "e3", "e4", "e5", "e6", "e7",
               "cluster_size", "eset_size")


def write_event_log(rows: Sequence[Tuple[int, int, EventRecord]], fh) -> None:
    """CSV event log with a header row; one row per coupling sample."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for seed, sweep, rec in rows:
        r = asdict(rec)
        w.writerow([seed, sweep] + [int(r[k]) for k in CSV_COLUMNS[2:]])


# exhaustive enumeration on tiny boxes -------------------------------------------
def closed_vectors(box: Box, n: int) -> np.ndarray:
    """All closed 1-forms on the box as rows (lexicographic order)."""
    b = incidence(box, 1)
    rows = [v[~(np.asarray(b @ v.T).T % n != 0).any(axis=1)] for v in iter_vectors(box.count(1), n)]
    return np.concatenate(rows)


def _bits(mask_rows: np.ndarray) -> np.ndarray:
    weights = np.left_shift(np.int64(1), np.arange(mask_rows.shape[1], dtype=np.int64))
    return (mask_rows.astype(np.int64) * weights).sum(axis=1)


def _edge_bits_tables(box: Box):
    adj_bits = _bits(edge_adjacency(box).toarray() != 0)
    b = incidence(box, 1)
    return adj_bits, b, _bits(abs(b).toarray() != 0)


def flood_bits(box: Box, seeds: np.ndarray, supp: np.ndarray) -> np.ndarray:
    """Grow seed edge sets through support edges of the saturated edge graph.

    A seed outside the support stays a singleton, as in the edge graph.
    """
    adj_bits = _edge_bits_tables(box)[0]
    reach = np.asarray(seeds, dtype=np.int64).copy()
    while True:
        grow = np.zeros_like(reach)
        inner = reach & supp
        for j in range(box.count(1)):
            grow |= np.where((inner >> j) & 1, adj_bits[j], 0)
        new = reach | (grow & supp)
        if np.array_equal(new, reach):
            return reach
        reach = new


def eset_bits_batch(box: Box, n: int, hat: np.ndarray, prime: np.ndarray, e0=None,
                    hat_index: Optional[np.ndarray] = None,
                    prime_index: Optional[np.ndarray] = None) -> np.ndarray:
    """E-sets of many configuration pairs as edge bitmasks.

    Row ``i`` pairs ``hat[hat_index[i]]`` with ``prime[prime_index[i]]``
    (identity indexing when the index arrays are omitted).
    """
    hat_index = np.arange(len(hat)) if hat_index is None else hat_index
    prime_index = np.arange(len(prime)) if prime_index is None else prime_index
    e0bits = int(_bits(as_mask(box, 1, e0 if e0 is not None else [])[None, :])[0])
    _, b, plaq_bits = _edge_bits_tables(box)

    def generators(vecs):
        nz = np.asarray(b @ vecs.T).T % n != 0
        touch = np.zeros(len(vecs), dtype=np.int64)
        for p in range(nz.shape[1]):
            touch |= np.where(nz[:, p], plaq_bits[p], 0)
        return _bits(vecs != 0), touch

    hat_supp, hat_touch = generators(hat)
    prime_supp, prime_touch = generators(prime)
    supp = hat_supp[hat_index] | prime_supp[prime_index]
    seeds = (e0bits | (hat_supp & hat_touch)[hat_index] | (prime_supp & prime_touch)[prime_index])
    return flood_bits(box, seeds, supp)


def bits_to_mask(bits: np.ndarray, size: int) -> np.ndarray:
    return ((np.asarray(bits)[:, None] >> np.arange(size)) & 1).astype(bool)


def restricted_d_support(box: Box, n: int, vecs: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """|supp d(v restricted to the edge set)|^+ for each row."""
    b = incidence(box, 1)
    kept = np.where(bits_to_mask(bits, box.count(1)), vecs, 0)
    return (np.asarray(b @ kept.T).T % n != 0).sum(axis=1)


class ExhaustivePairs:
    """Every (parent, closed parent) pair on a tiny box with its merge.

    Merges do not depend on (beta, kappa), so they are computed once and the
    pair weights are supplied per parameter point.
    """

    def __init__(self, box: Box, n: int, kind: str, e0=None):
        size = box.count(1)
        if size > 62:
            raise ValueError("bitmask enumeration supports at most 62 edges")
        self.box, self.n, self.kind = box, n, kind
        self.prime = closed_vectors(box, n)
        if kind == ZZ:
            self.hat = self.prime
        elif kind == LGTZ:
            self.hat = np.concatenate(list(iter_vectors(size, n)))
        else:
            raise ValueError(kind)
        self.hat_index = np.repeat(np.arange(len(self.hat)), len(self.prime))
        self.prime_index = np.tile(np.arange(len(self.prime)), len(self.hat))
        reach = eset_bits_batch(box, n, self.hat, self.prime, e0, self.hat_index, self.prime_index)
        self.eset_bits = reach
        inside = bits_to_mask(reach, size)
        self.merged = np.where(inside, self.hat[self.hat_index], self.prime[self.prime_index])
        self.e0 = e0
        self.powers = n ** np.arange(size - 1, -1, -1, dtype=np.int64)

    def stability_violations(self) -> int:
        """Pairs whose E-set changes when recomputed from (merged, closed parent)."""
        again = eset_bits_batch(self.box, self.n, self.merged, self.prime, self.e0,
                                prime_index=self.prime_index)
        return int((again != self.eset_bits).sum())

    def agreement_violations(self) -> int:
        """Pairs where the merge differs from the closed parent off the E-set."""
        outside = ~bits_to_mask(self.eset_bits, self.box.count(1))
        return int((outside & (self.merged != self.prime[self.prime_index])).any(axis=1).sum())

    def __len__(self) -> int:
        return len(self.hat_index)

    def pair_weights(self, p_hat: Params, p_prime: Params) -> np.ndarray:
        def probs(vecs, p):
            lw = log_weights_batch(vecs, self.box, p)
            w = np.exp(lw - lw[np.isfinite(lw)].max())
            return w / w.sum()
        return probs(self.hat, p_hat)[self.hat_index] * probs(self.prime, p_prime)[self.prime_index]

    def codes(self, vecs: np.ndarray) -> np.ndarray:
        return vecs @ self.powers

    def merged_law(self, weights: np.ndarray) -> np.ndarray:
        """Law of the merged configuration indexed by configuration code."""
        law = np.zeros(self.n ** self.box.count(1))
        np.add.at(law, self.codes(self.merged), weights)
        return law

    def prime_law(self, weights: np.ndarray) -> np.ndarray:
        law = np.zeros(self.n ** self.box.count(1))
        np.add.at(law, self.codes(self.prime[self.prime_index]), weights)
        return law

    def in_eset(self, e: int) -> np.ndarray:
        return ((self.eset_bits >> e) & 1).astype(bool)


def target_law(box: Box, p: Params) -> np.ndarray:
    """Gibbs probabilities of every configuration code."""
    size = box.count(1)
    law = np.full(p.n ** size, -np.inf)
    powers = p.n ** np.arange(size - 1, -1, -1, dtype=np.int64)
    for vecs in iter_vectors(size, p.n):
        lw = log_weights_batch(vecs, box, p)
        law[vecs @ powers] = lw
    out = np.where(np.isfinite(law), np.exp(law - law[np.isfinite(law)].max()), 0.0)
    return out / out.sum()


def exhaustive_event_probabilities(pairs: ExhaustivePairs, weights: np.ndarray, e: int) -> Dict[str, float]:
    """Exact probabilities of the single-edge events at edge index e."""
    box, n = pairs.box, pairs.n
    b = incidence(box, 1)
    idx, sgn = _coboundary_table(box)[e]
    merged = pairs.merged
    vals = (np.asarray(b[idx] @ merged.T).T * sgn) % n
    prime_e = pairs.prime[pairs.prime_index, e] != 0
    inside = pairs.in_eset(e)
    adj = edge_adjacency(box)
    nbhd = (1 << e) | int(_bits((adj[e].toarray() != 0))[0])
    diffs = (merged[:, [e]] - vals) % n
    flags = {
        "e4": inside & prime_e,
        "e5": ((pairs.eset_bits & nbhd) != 0) & (diffs == diffs[:, :1]).all(axis=1) & (diffs[:, 0] != 0),
        "e6": prime_e,
        "e7": (vals != vals[:, :1]).any(axis=1),
        "in_eset": inside,
    }
    return {k: float(weights[v].sum()) for k, v in flags.items()}


def covariance_check(box: Box, kappa: float, e0: int, e1: int, n: int = 2) -> Tuple[float, float]:
    """(|Cov(f0, f1)|, 2 P(e1 in E_{E0})) exactly, with f_i = Re rho(sigma(e_i)).

    Both functions are bounded by 1, so the sup norms drop out.
    """
    p = Params(n, None, float("inf"), kappa, box_override=box)
    law = target_law(box, p)
    size = box.count(1)
    vecs = np.concatenate(list(iter_vectors(size, n)))
    # joint law of (sigma(e0), sigma(e1)); shifting f_i by f_i(0) keeps the
    # covariance and avoids cancelling two numbers close to 1
    joint = np.zeros((n, n))
    np.add.at(joint, (vecs[:, e0], vecs[:, e1]), law)
    f = np.cos(2 * np.pi * np.arange(n) / n) - 1.0
    indep = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    cov = float(f @ (joint - indep)[:, :] @ f)
    pairs = ExhaustivePairs(box, n, ZZ, e0=[e0])
    w = pairs.pair_weights(p, p)
    return abs(cov), 2 * float(w[pairs.in_eset(e1)].sum())


# bound formulas ----------------------------------------------------------------
def _x(kappa1: float, kappa2: float, n: int) -> float:
    a, b = alpha0(kappa1, n), alpha0(kappa2, n)
    return 18 ** 2 * (a + b + a * b)


def zlgt_cluster_bound(beta: float, kappa1: float, kappa2: float, M: int, Mp: int,
                       dist1_boundary: int, n: int = 2) -> float:
    """Bound on P(|C(e)| >= 2M and |supp d(sigma-hat on C(e))| >= 2M')."""
    if M < 1 or Mp < 0:
        raise ValueError("need M >= 1 and M' >= 0")
    x = _x(kappa1, kappa2, n)
    khat = 18.0 ** -3 * (1 / (1 - x) if x < 1 else math.inf)
    a1 = alpha1(beta, n)
    total = 0.0
    if Mp > 0:
        total += (M == 1) * x * a1 ** max(6, Mp) + khat * x ** max(M, 2) * a1 ** max(6, Mp)
    if 1 <= Mp <= 5:
        total += khat * x ** dist1_boundary * a1
    if Mp == 0:
        total += khat * x ** max(M, 8)
    return total


def zz_bound(kappa: float, dist0_value: int, n: int = 2) -> float:
    c = constants(math.inf, kappa, n)
    return c.K * (c.Kprime * c.alpha0) ** dist0_value


def before_e3_bound(beta: float, kappa: float, M: int, Mp: int, n: int = 2) -> float:
    c = constants(beta, kappa, n)
    return c.Ktprime * (18 ** 2 * c.alpha0) ** M * c.alpha1 ** Mp


def plaquette_bound(beta: float, kappa: float, n: int = 2) -> float:
    c = constants(beta, kappa, n)
    return c.Kdprime * c.alpha2


def e3_bound(beta: float, kappa: float, support: int, n: int = 2) -> float:
    c = constants(beta, kappa, n)
    return c.K3 * support * c.alpha0 ** 2 * c.alpha1 ** 12


def e4_bound(beta: float, kappa: float, dist1_boundary: int, n: int = 2) -> float:
    c = constants(beta, kappa, n)
    return c.K4 * c.alpha0 ** 9 * c.alpha1 ** 6 + c.K * (c.Kprime * c.alpha0) ** dist1_boundary


def e5_bound(beta: float, kappa: float, dist1_boundary: int, n: int = 2) -> float:
    c = constants(beta, kappa, n)
    return (c.K5 * c.alpha1 ** 6 * c.alpha0 ** 6 * max(c.alpha0, c.alpha1 ** 6)
            + c.K5prime * (c.Kprime * c.alpha0) ** dist1_boundary)


def e6_bound(kappa: float, n: int = 2) -> float:
    return constants(math.inf, kappa, n).K6 * alpha0(kappa, n) ** 8


def e7_bound(beta: float, kappa: float, n: int = 2) -> float:
    c = constants(beta, kappa, n)
    return c.K7 * c.alpha2 ** 6


def cluster_event_mask(pairs: ExhaustivePairs, e: int, M: int, Mp: int) -> np.ndarray:
    """|C(e)| >= 2M and |supp d(first parent on C(e))| >= 2M' for each pair.

    Both sizes count oriented cells, i.e. twice the positive counts.
    """
    box, n = pairs.box, pairs.n
    hat = pairs.hat[pairs.hat_index]
    supp = _bits(hat != 0) | _bits(pairs.prime[pairs.prime_index] != 0)
    # the edge graph lives on the support: off it, C(e) is empty
    cl = flood_bits(box, np.full(len(pairs), 1 << e, dtype=np.int64) & supp, supp)
    positive = bits_to_mask(cl, box.count(1)).sum(axis=1)
    return (positive >= M) & (restricted_d_support(box, n, hat, cl) >= Mp)


def plaquette_neighbours(box: Box, e: int) -> np.ndarray:
    """Edges sharing a plaquette with e, including e."""
    mask = np.zeros(box.count(1), dtype=bool)
    mask[e] = True
    mask[edge_adjacency(box)[e].indices] = True
    return mask


def single_cluster_event(box: Box, n: int, vecs: np.ndarray, seeds: np.ndarray, M: int, Mp: int) -> np.ndarray:
    """|C_{G(sigma)}(seeds)| >= 2M and |supp d(sigma on it)| >= 2M' per configuration row."""
    seed_bits = int(_bits(seeds[None, :])[0])
    supp = _bits(vecs != 0)
    cl = flood_bits(box, np.full(len(vecs), seed_bits, dtype=np.int64) & supp, supp)
    positive = bits_to_mask(cl, box.count(1)).sum(axis=1)
    return (positive >= M) & (restricted_d_support(box, n, vecs, cl) >= Mp)
