"""Z_n-valued cochains ("forms") on a box: exterior derivative, the partial
order, irreducible decomposition, antiderivatives and filling surfaces.

A k-form stores one value in 0..n-1 per positive k-cell (canonical order);
the value on the negatively oriented cell is the additive inverse.
"""
from __future__ import annotations

from typing import Dict, Iterable, Iterator, List, Mapping, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .cellcomplex import (
    AXIS_COMBOS,
    DIM,
    Box,
    Chain,
    OrientedCell,
    boundary,
    boundary_chain,
    cell_layout,
    incidence,
)

IRREDUCIBLE_LIMIT = 18


class TooLarge(ValueError):
    """An exhaustive routine was asked to handle an instance above its size limit."""


class NotClosed(ValueError):
    pass


class NotALoop(ValueError):
    pass


def rho(g, n: int):
    """The character j -> exp(2 pi i j / n), vectorized."""
    return np.exp(2j * np.pi * np.asarray(g) / n)


def re_rho(g, n: int):
    return np.cos(2 * np.pi * np.asarray(g) / n)


class Form:
    """A k-form with values in Z_n on the positive k-cells of ``box``."""

    __slots__ = ("k", "n", "box", "vec")

    def __init__(self, box: Box, k: int, n: int, vec: Optional[np.ndarray] = None):
        if n < 2:
            raise ValueError("group order must be at least 2")
        self.box, self.k, self.n = box, k, n
        size = box.count(k)
        if vec is None:
            self.vec = np.zeros(size, dtype=np.int64)
        else:
            vec = np.asarray(vec, dtype=np.int64)
            if vec.shape != (size,):
                raise ValueError(f"expected {size} values, got shape {vec.shape}")
            self.vec = np.mod(vec, n)

    # construction ----------------------------------------------------------
    @classmethod
    def zeros(cls, box: Box, k: int, n: int) -> "Form":
        return cls(box, k, n)

    @classmethod
    def from_cells(cls, box: Box, k: int, n: int, values: Mapping[OrientedCell, int]) -> "Form":
        """Form from {oriented cell: value}; a value on -c is stored as -value on c."""
        f = cls(box, k, n)
        for c, v in values.items():
            if c.k != k:
                raise ValueError("dimension mismatch")
            f.vec[box.index(c)] = (c.sign * int(v)) % n
        return f

    @classmethod
    def random(cls, box: Box, k: int, n: int, rng: np.random.Generator, density: float = 1.0) -> "Form":
        vals = rng.integers(0, n, size=box.count(k))
        if density < 1.0:
            vals = vals * (rng.random(vals.size) < density)
        return cls(box, k, n, vals)

    def copy(self) -> "Form":
        return Form(self.box, self.k, self.n, self.vec.copy())

    def _like(self, vec: np.ndarray) -> "Form":
        return Form(self.box, self.k, self.n, vec)

    # evaluation ------------------------------------------------------------
    def __call__(self, c: OrientedCell) -> int:
        return (c.sign * int(self.vec[self.box.index(c)])) % self.n

    def _compatible(self, other: "Form") -> None:
        if (self.k, self.n, self.box) != (other.k, other.n, other.box):
            raise ValueError("forms live on different spaces")

    def __add__(self, other: "Form") -> "Form":
        self._compatible(other)
        return self._like(self.vec + other.vec)

    def __sub__(self, other: "Form") -> "Form":
        self._compatible(other)
        return self._like(self.vec - other.vec)

    def __neg__(self) -> "Form":
        return self._like(-self.vec)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Form)
            and (self.k, self.n, self.box) == (other.k, other.n, other.box)
            and np.array_equal(self.vec, other.vec)
        )

    def __hash__(self):
        return hash((self.k, self.n, self.box, self.vec.tobytes()))

    def __repr__(self) -> str:
        return f"Form(k={self.k}, n={self.n}, |supp+|={self.support_size_positive()})"

    # support -----------------------------------------------------------------
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.vec)

    def support(self) -> List[OrientedCell]:
        """Positive cells of the support (the full support also has their negatives)."""
        return [self.box.cell(self.k, int(i)) for i in self.support_indices()]

    def support_size_positive(self) -> int:
        return int(np.count_nonzero(self.vec))

    def support_size(self) -> int:
        """Number of oriented cells with nonzero value (always even)."""
        return 2 * self.support_size_positive()

    def is_zero(self) -> bool:
        return not self.vec.any()

    def restrict(self, keep) -> "Form":
        """Zero the form outside ``keep`` (boolean mask, index array or cell iterable)."""
        mask = as_mask(self.box, self.k, keep)
        return self._like(np.where(mask, self.vec, 0))

    # dense 4D view -----------------------------------------------------------
    def dense(self, dtype=np.int64) -> np.ndarray:
        lay = cell_layout(self.box, self.k)
        out = np.zeros(lay.dense_shape, dtype=dtype)
        out.reshape(-1)[lay.flat] = self.vec
        return out

    @classmethod
    def from_dense(cls, box: Box, k: int, n: int, arr: np.ndarray) -> "Form":
        lay = cell_layout(box, k)
        return cls(box, k, n, np.asarray(arr).reshape(-1)[lay.flat])

    # text serialization ------------------------------------------------------
    def to_text(self) -> str:
        """One line "k base axes sign value" per positive support cell, canonical order."""
        lines = []
        for i in self.support_indices():
            c = self.box.cell(self.k, int(i))
            base = ",".join(str(b) for b in c.base)
            axes = ",".join(str(a) for a in c.axes) or "-"
            lines.append(f"{self.k} {base} {axes} +1 {int(self.vec[i])}")
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_text(cls, text: str, box: Box, n: int, k: Optional[int] = None) -> "Form":
        values: Dict[OrientedCell, int] = {}
        for raw in text.splitlines():
            if not raw.strip():
                continue
            kk, base, axes, sign, value = raw.split()
            kk = int(kk)
            if k is None:
                k = kk
            elif kk != k:
                raise ValueError("mixed dimensions in form text")
            ax = () if axes == "-" else tuple(int(a) for a in axes.split(","))
            c = OrientedCell(tuple(int(b) for b in base.split(",")), ax, int(sign))
            values[c] = int(value)
        if k is None:
            raise ValueError("empty form text needs an explicit k")
        return cls.from_cells(box, k, n, values)


def as_mask(box: Box, k: int, keep) -> np.ndarray:
    size = box.count(k)
    if isinstance(keep, np.ndarray) and keep.dtype == bool:
        if keep.shape != (size,):
            raise ValueError("mask has the wrong length")
        return keep
    mask = np.zeros(size, dtype=bool)
    if isinstance(keep, np.ndarray):
        mask[keep] = True
        return mask
    for c in keep:
        if isinstance(c, OrientedCell):
            mask[box.index(c)] = True
        else:
            mask[int(c)] = True
    return mask


# exterior calculus -------------------------------------------------------------

def d(omega: Form) -> Form:
    """Exterior derivative: d(omega)(c) = omega(boundary(c))."""
    if omega.k >= DIM:
        raise ValueError("d of a 4-form is not defined on a 4D box")
    mat = incidence(omega.box, omega.k)
    return Form(omega.box, omega.k + 1, omega.n, mat @ omega.vec)


def evaluate(omega: Form, q: Chain) -> int:
    """omega(q) = sum of coefficients times values, in Z_n."""
    if q.k != omega.k:
        raise ValueError(f"dimension mismatch: {omega.k}-form on {q.k}-chain")
    total = 0
    for c, v in q.coeffs.items():
        total += v * int(omega.vec[omega.box.index(c)])
    return total % omega.n


def leq(small: Form, big: Form) -> bool:
    """The partial order: small agrees with big on its support, and so does d(small)."""
    small._compatible(big)
    s = small.vec != 0
    if not np.array_equal(small.vec[s], big.vec[s]):
        return False
    if small.k >= DIM:
        return True
    ds, db = d(small).vec, d(big).vec
    t = ds != 0
    return bool(np.array_equal(ds[t], db[t]))


def _components(omega: Form, idx: np.ndarray) -> List[np.ndarray]:
    """Connected components of ``idx`` (support cells) linked through shared (k+1)-cells."""
    if idx.size == 0:
        return []
    if omega.k >= DIM:
        return [idx[i:i + 1] for i in range(idx.size)]
    inc = abs(incidence(omega.box, omega.k)[:, idx]).tocsc()
    inc.data[:] = 1
    adj = (inc.T @ inc).tocsr()
    ncomp, labels = connected_components(adj, directed=False)
    order = np.argsort(labels, kind="stable")
    groups = np.split(idx[order], np.cumsum(np.bincount(labels, minlength=ncomp))[:-1])
    return sorted(groups, key=lambda g: int(g[0]))


def _find_split(omega: Form, limit: int = IRREDUCIBLE_LIMIT) -> Optional[np.ndarray]:
    """A nonempty proper subset S of the support with d(omega|S), d(omega|S^c)
    disjointly supported, or None.  Exhaustive over 2^(m-1) subsets."""
    idx = omega.support_indices()
    m = idx.size
    if m > limit:
        raise TooLarge(f"|supp+| = {m} exceeds the limit {limit}")
    if m <= 1 or omega.k >= DIM:
        return None if m <= 1 else idx[:1]
    mat = incidence(omega.box, omega.k)[:, idx].tocoo()
    rows_used, inv = np.unique(mat.row, return_inverse=True)
    contrib = np.zeros((m, rows_used.size), dtype=np.int64)
    np.add.at(contrib, (mat.col, inv), mat.data * omega.vec[idx][mat.col])
    contrib %= omega.n
    total = contrib.sum(axis=0) % omega.n
    # element 0 always sits in S^c; S ranges over nonempty subsets of the rest
    rest = m - 1
    chunk = 1 << 15
    for start in range(1, 1 << rest, chunk):
        codes = np.arange(start, min(start + chunk, 1 << rest), dtype=np.int64)
        bits = ((codes[:, None] >> np.arange(rest)) & 1).astype(np.int64)
        part = (bits @ contrib[1:]) % omega.n
        other = (total - part) % omega.n
        ok = ~np.any((part != 0) & (other != 0), axis=1)
        if ok.any():
            b = bits[int(np.argmax(ok))].astype(bool)
            return idx[1:][b]
    return None


def is_irreducible_exact(omega: Form, limit: int = IRREDUCIBLE_LIMIT) -> bool:
    """Exhaustive irreducibility test (no nontrivial omega' < omega)."""
    if omega.is_zero():
        raise ValueError("irreducibility is defined for nontrivial forms")
    return _find_split(omega, limit) is None


def decompose(omega: Form, limit: int = IRREDUCIBLE_LIMIT) -> List[Form]:
    """Split a nontrivial form into pieces with disjoint supports and disjoint
    d-supports that sum to it, each piece <= omega.

    Pieces start as connected components of the support (cells linked by a
    shared (k+1)-cell).  A component with at most ``limit`` positive cells is
    further split until it is irreducible; larger components are returned
    as they are (still valid pieces, but irreducibility is not certified).
    """
    if omega.is_zero():
        raise ValueError("cannot decompose the zero form")
    pieces: List[Form] = []
    stack = [omega.restrict(g) for g in _components(omega, omega.support_indices())]
    while stack:
        piece = stack.pop()
        if piece.support_size_positive() <= limit:
            split = _find_split(piece, limit)
            if split is not None:
                left = piece.restrict(split)
                stack.extend([left, piece - left])
                continue
        pieces.append(piece)
    pieces.sort(key=lambda f: int(f.support_indices()[0]))
    return pieces


# Poincare lemma ----------------------------------------------------------------

def poincare_antiderivative(omega: Form) -> Form:
    """A (k-1)-form tau with d(tau) = omega, for closed omega (1 <= k <= 4).

    Axis sweep: tau vanishes on every cell that contains the lowest active
    axis; along that axis tau is integrated from the low face, whose data come
    from the same construction one dimension down.  For k = 1 this is path
    integration from the lowest corner, so a closed 1-form vanishing on the
    boundary has an antiderivative vanishing on the boundary.
    """
    k = omega.k
    if not 1 <= k <= DIM:
        raise ValueError("k must be in 1..4")
    if k < DIM and not d(omega).is_zero():
        raise NotClosed("omega is not closed")
    box, n = omega.box, omega.n
    w = omega.dense()
    tau = np.zeros(cell_layout(box, k - 1).dense_shape, dtype=np.int64)
    lo_combos = {axes: i for i, axes in enumerate(AXIS_COMBOS[k - 1])}
    hi_combos = {axes: i for i, axes in enumerate(AXIS_COMBOS[k])}
    for m in range(DIM - 1, -1, -1):
        for rest, ci in lo_combos.items():
            if any(a <= m for a in rest):
                continue
            wi = hi_combos[(m,) + rest]
            lead = (0,) * m
            for t in range(box.shape[m] - 1):
                src = lead + (t,)
                dst = lead + (t + 1,)
                tau[dst + (Ellipsis, ci)] = tau[src + (Ellipsis, ci)] + w[src + (Ellipsis, wi)]
    result = Form.from_dense(box, k - 1, n, tau)
    if not d(result) == omega:
        raise AssertionError("antiderivative check failed")
    return result


# surfaces ----------------------------------------------------------------------

def build_surface(gamma: Chain, box: Box) -> Chain:
    """A 2-chain q with boundary(q) = gamma, inside the bounding box of gamma.

    Edges are pushed down along axis 0 to the lowest slice of the bounding
    box, emitting the swept plaquettes, then the same along axis 1 inside that
    slice, and so on.  The leftover of a cycle after the last axis is empty.
    """
    if gamma.k != 1:
        raise ValueError("gamma must be a 1-chain")
    if boundary_chain(gamma):
        raise NotALoop("gamma has nonzero boundary")
    q = Chain(2)
    if not gamma:
        return q
    for c in gamma.coeffs:
        if not box.contains(c):
            raise ValueError(f"{c} lies outside the box")
    pts = [p for c in gamma.coeffs for p in c.corners()]
    low = [min(p[i] for p in pts) for i in range(DIM)]
    rem = Chain(1, gamma.coeffs)
    for axis in range(DIM):
        while True:
            movable = [(c.base[axis], c) for c in rem.coeffs if c.axes[0] != axis and c.base[axis] > low[axis]]
            if not movable:
                break
            _, c = max(movable)
            v = rem.coeffs[c]
            j = c.axes[0]
            base = list(c.base)
            base[axis] -= 1
            p = OrientedCell.make(base, (axis, j))
            s = boundary(p)[c]
            coef = v * s
            q = q + Chain(2, {p: coef})
            rem = rem - boundary(p) * coef
    if rem:
        raise AssertionError(f"surface sweep left a residue: {rem}")
    if boundary_chain(q) != gamma:
        raise AssertionError("surface boundary check failed")
    return q


def iter_vectors(size: int, n: int, limit: int = 2 ** 26, chunk: int = 2 ** 16) -> Iterator[np.ndarray]:
    """Yield all of Z_n^size as (m, size) blocks, first coordinate most significant."""
    total = n ** size
    if total > limit:
        raise TooLarge(f"{n}^{size} configurations exceed the limit {limit}")
    powers = n ** np.arange(size - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (idx[:, None] // powers[None, :]) % n
