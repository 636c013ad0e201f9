"""Edge clusters of a configuration pair, the merge region (E-set) and the
cluster distances.

Sets of edges are symmetric under orientation reversal, so they are stored
as boolean masks over positive edges.  Cluster sizes as used by the bounds
count oriented edges and are twice the positive counts.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .cellcomplex import Box, OrientedCell, incidence, is_boundary_cell
from .forms import Form, as_mask, d, leq

LOWER_BOUND = "LOWER_BOUND"
EXACT = "EXACT"


@lru_cache(maxsize=16)
def edge_adjacency(box: Box) -> sp.csr_matrix:
    """Positive edges sharing a plaquette (the saturated edge graph)."""
    b = abs(incidence(box, 1)).astype(np.int64)
    a = (b.T @ b).tocsr()
    a.setdiag(0)
    a.eliminate_zeros()
    a.data[:] = 1
    return a


@lru_cache(maxsize=16)
def boundary_edges(box: Box) -> np.ndarray:
    return np.array([is_boundary_cell(c, box) for c in box.cells(1)], dtype=bool)


def _touches_nonzero_plaquette(sigma: Form) -> np.ndarray:
    """Edges e with d sigma nonzero somewhere on the coboundary of e."""
    plaq = d(sigma).vec != 0
    b = abs(incidence(sigma.box, 1))
    return np.asarray(b.T @ plaq.astype(np.int64)).ravel() > 0


@dataclass(frozen=True)
class ESet:
    """A symmetric edge set: ``mask`` marks the positive edges it contains."""

    box: Box
    mask: np.ndarray

    def __contains__(self, e: OrientedCell) -> bool:
        return bool(self.mask[self.box.index(e)])

    @property
    def positive_count(self) -> int:
        return int(self.mask.sum())

    @property
    def size(self) -> int:
        return 2 * self.positive_count

    def __eq__(self, other) -> bool:
        return isinstance(other, ESet) and self.box == other.box and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.box, self.mask.tobytes()))


class EdgeGraphView:
    """The edge graph of (sigma, sigma'): e ~ -e always; two support edges are
    adjacent when their coboundaries share a plaquette."""

    def __init__(self, sigma: Form, sigma_prime: Optional[Form] = None):
        if sigma.k != 1:
            raise ValueError("edge graphs are built from 1-forms")
        self.sigma = sigma
        self.sigma_prime = sigma_prime if sigma_prime is not None else Form.zeros(sigma.box, 1, sigma.n)
        self.box = sigma.box
        self.support = (self.sigma.vec != 0) | (self.sigma_prime.vec != 0)
        idx = np.flatnonzero(self.support)
        size = self.support.size
        labels = np.arange(size) + size  # singletons get private labels
        if idx.size:
            sub = edge_adjacency(self.box)[idx][:, idx]
            _, lab = connected_components(sub, directed=False)
            labels[idx] = lab
        _, self.labels = np.unique(labels, return_inverse=True)

    def adjacent(self, e: OrientedCell, f: OrientedCell) -> bool:
        i, j = self.box.index(e), self.box.index(f)
        if i == j:
            return e.sign != f.sign
        return bool(self.support[i] and self.support[j] and edge_adjacency(self.box)[i, j])

    def cluster_mask(self, edges) -> np.ndarray:
        seeds = as_mask(self.box, 1, edges)
        return np.isin(self.labels, np.unique(self.labels[seeds]))

    def cluster(self, edges) -> ESet:
        return ESet(self.box, self.cluster_mask(edges))

    def cluster_size(self, e) -> int:
        """|C(e)| counting oriented edges."""
        return 2 * int(self.cluster_mask([e] if isinstance(e, OrientedCell) else e).sum())


def cluster(view: EdgeGraphView, edges) -> ESet:
    return view.cluster(edges)


def eset_generators(e0, sigma: Form, sigma_prime: Form) -> np.ndarray:
    box = sigma.box
    gen = as_mask(box, 1, e0).copy()
    gen |= (sigma.vec != 0) & _touches_nonzero_plaquette(sigma)
    gen |= (sigma_prime.vec != 0) & _touches_nonzero_plaquette(sigma_prime)
    return gen


def e_set(e0, sigma: Form, sigma_prime: Form, view: Optional[EdgeGraphView] = None) -> ESet:
    view = view if view is not None else EdgeGraphView(sigma, sigma_prime)
    return view.cluster(eset_generators(e0, sigma, sigma_prime))


def eset_membership(e: int, e0, sigma: Form, sigma_prime: Form, view: Optional[EdgeGraphView] = None) -> bool:
    """Membership of edge index e via the three-way characterization: the
    restriction of sigma or sigma' to the cluster of e is not closed, or that
    cluster meets E0."""
    view = view if view is not None else EdgeGraphView(sigma, sigma_prime)
    cl = view.cluster_mask([e])
    if not d(sigma.restrict(cl)).is_zero():
        return True
    if not d(sigma_prime.restrict(cl)).is_zero():
        return True
    return bool((cl & as_mask(sigma.box, 1, e0)).any())


def restriction_properties_check(sigma: Form, sigma_prime: Form, edges) -> bool:
    """The restrictions of sigma and sigma' to a cluster set and to its
    complement are all <= the unrestricted forms."""
    view = EdgeGraphView(sigma, sigma_prime)
    inside = view.cluster_mask(edges)
    return (leq(sigma.restrict(inside), sigma) and leq(sigma.restrict(~inside), sigma)
            and leq(sigma_prime.restrict(inside), sigma_prime)
            and leq(sigma_prime.restrict(~inside), sigma_prime))


# distances ---------------------------------------------------------------------
def _bfs_distances(box: Box, sources: np.ndarray) -> np.ndarray:
    """Hop distances in the saturated edge graph from a set of positive edges."""
    adj = edge_adjacency(box)
    dist = np.full(box.count(1), -1, dtype=np.int64)
    queue = deque(np.flatnonzero(sources).tolist())
    dist[sources] = 0
    indptr, indices = adj.indptr, adj.indices
    while queue:
        i = queue.popleft()
        for j in indices[indptr[i]:indptr[i + 1]]:
            if dist[j] < 0:
                dist[j] = dist[i] + 1
                queue.append(j)
    return dist


def dist1_all(e0, box: Box) -> np.ndarray:
    """dist1(e, E0) for every positive edge e: vertices on a shortest path to E0."""
    src = as_mask(box, 1, e0)
    if not src.any():
        raise ValueError("E0 must be nonempty")
    hops = _bfs_distances(box, src)
    return np.where(hops >= 0, hops + 1, np.iinfo(np.int64).max)


def dist1(e, e0, box: Box) -> int:
    i = box.index(e) if isinstance(e, OrientedCell) else int(e)
    return int(dist1_all(e0, box)[i])


def dist0(e, e0, box: Box) -> Tuple[int, str]:
    """Certified lower bound on dist0: exact (= 1) on E0, max(dist1, 8) elsewhere."""
    i = box.index(e) if isinstance(e, OrientedCell) else int(e)
    if as_mask(box, 1, e0)[i]:
        return 1, EXACT
    return max(dist1(i, e0, box), 8), LOWER_BOUND


def dist1_to_boundary(e, box: Box) -> int:
    return dist1(e, boundary_edges(box), box)


def connected_sets_min(e: int, e0, box: Box, max_size: int = 6) -> Optional[int]:
    """Smallest connected set (saturated graph) containing e and meeting E0,
    by exhaustive growth up to ``max_size`` edges; None if larger."""
    target = as_mask(box, 1, e0)
    adj = edge_adjacency(box)
    nbrs = [set(adj.indices[adj.indptr[i]:adj.indptr[i + 1]].tolist()) for i in range(box.count(1))]
    frontier = {frozenset([e])}
    for size in range(1, max_size + 1):
        if any(target[list(s)].any() for s in frontier):
            return size
        grown = set()
        for s in frontier:
            border = set().union(*(nbrs[i] for i in s)) - s
            for j in border:
                grown.add(s | {j})
        frontier = grown
    return None
