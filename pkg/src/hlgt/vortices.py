"""Vortices of an edge configuration, corner edges of a path and the Wilson
line reduction for configurations that do not disturb the path.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .cellcomplex import Box, Chain, OrientedCell, boundary_chain, incidence, is_boundary_cell
from .forms import Form, TooLarge, d, decompose, evaluate, iter_vectors, leq

TINY_EDGE_LIMIT = 16


@dataclass(frozen=True)
class Vortex:
    form: Form
    center: Optional[OrientedCell] = None
    value: Optional[int] = None

    @property
    def minimal(self) -> bool:
        return self.center is not None


@lru_cache(maxsize=16)
def _edge_plaquettes(box: Box) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Per positive edge: plaquette indices around it and the edge's coefficient in each."""
    b = incidence(box, 1).tocsc()
    return [(b.indices[b.indptr[e]:b.indptr[e + 1]].copy(), b.data[b.indptr[e]:b.indptr[e + 1]].copy())
            for e in range(box.count(1))]


def unit_vortex(box: Box, e: int, g: int, n: int) -> Form:
    """d(g dx) for the edge with index e."""
    one = Form.zeros(box, 1, n)
    one.vec[e] = g % n
    return d(one)


def is_minimal_vortex(nu: Form) -> Optional[Tuple[OrientedCell, int]]:
    """(center edge, g) when nu = d(g dx_e0) for an edge whose plaquettes are
    all off the box boundary and |supp nu|^+ = 6; otherwise None."""
    box = nu.box
    idx = nu.support_indices()
    if idx.size != 6:
        return None
    b = incidence(box, 1)[idx]
    counts = np.asarray(abs(b).sum(axis=0)).ravel()
    for e in np.flatnonzero(counts == 6):
        plaq, coef = _edge_plaquettes(box)[e]
        if plaq.size != 6:
            continue
        if any(is_boundary_cell(box.cell(2, int(p)), box) for p in plaq):
            continue
        g = int(coef[0] * nu.vec[plaq[0]]) % nu.n
        if g and unit_vortex(box, int(e), g, nu.n) == nu:
            return box.cell(1, int(e)), g
    return None


def find_vortices(sigma: Form) -> List[Vortex]:
    """The pieces of a decomposition of d sigma, with centers for minimal ones."""
    ds = d(sigma)
    if ds.is_zero():
        return []
    out = []
    for piece in decompose(ds):
        hit = is_minimal_vortex(piece)
        out.append(Vortex(piece, *(hit if hit else (None, None))))
    return out


# path bookkeeping ----------------------------------------------------------------
def corner_mask(gamma: Chain, box: Box) -> Dict[OrientedCell, bool]:
    """Corner edges: gamma edges sharing a plaquette with another gamma edge."""
    idx = {c: box.index(c) for c, _ in gamma}
    plaq = _edge_plaquettes(box)
    owner: Dict[int, List[OrientedCell]] = {}
    for c, i in idx.items():
        for p in plaq[i][0]:
            owner.setdefault(int(p), []).append(c)
    corner = {c: False for c in idx}
    for edges in owner.values():
        if len(edges) > 1:
            for c in edges:
                corner[c] = True
    return corner


def gamma_c(gamma: Chain, box: Box) -> Chain:
    corner = corner_mask(gamma, box)
    return Chain(1, {c: v for c, v in gamma if corner[c]})


@dataclass
class PathDecoration:
    """A path, its corner edges and a fixed plaquette p_e around each edge.

    ``p_e[c]`` is (plaquette index, sign) where sign * d sigma(plaquette) is
    d sigma on p_e oriented so that the oriented gamma edge appears with +1.
    """

    gamma: Chain
    box: Box
    gamma_c: Chain
    p_e: Dict[OrientedCell, Tuple[int, int]]

    @classmethod
    def build(cls, gamma: Chain, box: Box) -> "PathDecoration":
        for _, v in gamma:
            if v not in (-1, 1):
                raise ValueError("path coefficients must be -1, 0 or 1")
        plaq = _edge_plaquettes(box)
        choice = {}
        for c, v in gamma:
            ps, cs = plaq[box.index(c)]
            if ps.size == 0:
                raise ValueError(f"edge {c} lies in no plaquette of the box")
            j = int(np.argmin(ps))  # lowest-indexed plaquette
            choice[c] = (int(ps[j]), int(cs[j]) * v)
        return cls(gamma, box, gamma_c(gamma, box), choice)

    @property
    def non_corner(self) -> Chain:
        return self.gamma - self.gamma_c


def _plaquettes_disagree(ds: Form, e: int) -> bool:
    ps, cs = _edge_plaquettes(ds.box)[e]
    vals = (cs * ds.vec[ps]) % ds.n
    return bool(vals.size and np.any(vals != vals[0]))


def gamma_prime(sigma: Form, gamma: Chain, box: Optional[Box] = None) -> Chain:
    """Non-corner gamma edges whose surrounding plaquettes carry different d sigma."""
    box = box or sigma.box
    ds = d(sigma)
    rest = gamma - gamma_c(gamma, box)
    return Chain(1, {c: v for c, v in rest if _plaquettes_disagree(ds, box.index(c))})


def reduce_line(sigma: Form, deco: PathDecoration) -> int:
    """Sum of d sigma(p_e) over non-corner gamma edges outside gamma'."""
    ds = d(sigma)
    total = 0
    for c, _ in deco.non_corner:
        e = deco.box.index(c)
        if _plaquettes_disagree(ds, e):
            continue
        p, s = deco.p_e[c]
        total += s * int(ds.vec[p])
    return total % sigma.n


def reduce_line_witness(sigma: Form, deco: PathDecoration, witness: Form) -> int:
    """Sum of d sigma(p_e) over the gamma edges that center a minimal vortex of
    d(sigma - witness): the sum the reduction argument actually produces."""
    ds = d(sigma)
    centers = {v.center for v in find_vortices(sigma - witness) if v.minimal}
    total = 0
    for c, _ in deco.non_corner:
        if c in centers:
            p, s = deco.p_e[c]
            total += s * int(ds.vec[p])
    return total % sigma.n


# disturbing --------------------------------------------------------------------
def _can_center(box: Box, e: int) -> bool:
    plaq, _ = _edge_plaquettes(box)[e]
    return plaq.size == 6 and not any(is_boundary_cell(box.cell(2, int(p)), box) for p in plaq)


def _condition_iv(sigma: Form, witness: Form, deco: PathDecoration) -> bool:
    allowed = {c for c, _ in deco.non_corner}
    for v in find_vortices(sigma - witness):
        if not v.minimal or v.center not in allowed:
            return False
    return True


def is_witness(sigma: Form, deco: PathDecoration, gamma_hat: Chain, witness: Form) -> bool:
    """Conditions (i)-(iv) of the non-disturbing witness (gamma_hat, witness)."""
    if boundary_chain(gamma_hat) != -boundary_chain(deco.gamma):
        return False
    return (leq(d(witness), d(sigma))
            and evaluate(sigma, gamma_hat) == 0
            and evaluate(witness, deco.gamma + gamma_hat) == 0
            and _condition_iv(sigma, witness, deco))


def simple_paths(box: Box, start: Tuple[int, ...], end: Tuple[int, ...], max_length: int) -> List[Chain]:
    """All self-avoiding lattice paths from start to end inside the box (as 1-chains)."""
    if start == end:
        return [Chain(1)]
    out: List[Chain] = []
    dim = len(start)

    def step(point, visited, edges):
        if len(edges) > max_length:
            return
        if point == end:
            out.append(Chain(1, dict(edges)))
            return
        for j in range(dim):
            for s in (1, -1):
                nxt = list(point)
                nxt[j] += s
                nxt = tuple(nxt)
                if nxt in visited or not box.contains_point(nxt):
                    continue
                base = point if s == 1 else nxt
                edges.append((OrientedCell(base, (j,)), s))
                visited.add(nxt)
                step(nxt, visited, edges)
                visited.discard(nxt)
                edges.pop()

    step(tuple(start), {tuple(start)}, [])
    return out


def candidate_paths(gamma: Chain, box: Box, max_length: int) -> List[Chain]:
    """Paths gamma_hat with boundary -boundary(gamma); the empty chain for loops."""
    bd = boundary_chain(gamma)
    if not bd:
        return [Chain(1)]
    pts = {c.base: v for c, v in bd}
    if sorted(pts.values()) != [-1, 1]:
        raise ValueError("gamma must be a path with two endpoints or a loop")
    head = next(p for p, v in pts.items() if v == 1)
    tail = next(p for p, v in pts.items() if v == -1)
    # boundary(gamma_hat) = tail - head: walk from head to tail
    return simple_paths(box, head, tail, max_length)


def disturbs_exact(sigma: Form, gamma: Chain, box: Optional[Box] = None, max_length: Optional[int] = None,
                   return_witness: bool = False):
    """Exhaustive decision on tiny boxes: True iff no witness exists.

    Every 1-form is a candidate for the second witness component (no
    pruning), and gamma_hat ranges over self-avoiding paths.
    """
    box = box or sigma.box
    size = box.count(1)
    if size > TINY_EDGE_LIMIT:
        raise TooLarge(f"{size} edges exceed the tiny-box limit {TINY_EDGE_LIMIT}")
    n = sigma.n
    deco = PathDecoration.build(gamma, box)
    max_length = size if max_length is None else max_length
    paths = [q for q in candidate_paths(gamma, box, max_length) if evaluate(sigma, q) == 0]
    if not paths:
        return (True, None) if return_witness else True
    loops = np.array([(deco.gamma + q).vector(box) for q in paths])
    b = incidence(box, 1)
    ds = d(sigma).vec
    # with no possible minimal-vortex center on gamma, (iv) forces d(sigma - witness) = 0
    centers_possible = any(_can_center(box, box.index(c)) for c, _ in deco.non_corner)
    for vecs in iter_vectors(size, n):
        dv = np.asarray(b @ vecs.T).T % n
        ok = ((dv == 0) | (dv == ds)).all(axis=1)  # (i): d witness <= d sigma
        ok &= ((vecs @ loops.T) % n == 0).any(axis=1)  # (iii) for some admissible path
        if not centers_possible:
            ok &= (dv == ds).all(axis=1)
        for row in np.flatnonzero(ok):
            w = Form(box, 1, n, vecs[row].copy())
            if not centers_possible or _condition_iv(sigma, w, deco):
                if return_witness:
                    q = paths[int(np.flatnonzero((vecs[row] @ loops.T) % n == 0)[0])]
                    return False, (q, w)
                return False
    return (True, None) if return_witness else True
