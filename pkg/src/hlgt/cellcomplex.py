"""Oriented cells of a 4D lattice box, boundary/coboundary maps and integer chains.

A box is the product of integer intervals [lo_i, hi_i], i = 0..3.  The usual
symmetric box B_N = [-N, N]^4 is ``Box.cube(N)``; degenerate intervals
(lo_i == hi_i) give lower-dimensional slabs, handy for exhaustive tests.

Positive k-cells are pairs (base point, increasing axis tuple).  Inside a box
they are numbered in *canonical order*: lexicographic by base point, then by
axis tuple (the order of ``itertools.combinations``).  Every dense array in
the package uses this order.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

DIM = 4
AXIS_COMBOS: Tuple[Tuple[Tuple[int, ...], ...], ...] = tuple(
    tuple(itertools.combinations(range(DIM), k)) for k in range(DIM + 1)
)
_COMBO_INDEX = tuple({axes: i for i, axes in enumerate(AXIS_COMBOS[k])} for k in range(DIM + 1))


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq`` (entries must be distinct)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True, order=True)
class OrientedCell:
    """A k-cell: base point, strictly increasing axes (0-based) and a sign."""

    base: Tuple[int, ...]
    axes: Tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        if len(self.base) != DIM:
            raise ValueError(f"base must have {DIM} coordinates")
        if any(b >= a for a, b in zip(self.axes[1:], self.axes)) or any(not 0 <= a < DIM for a in self.axes):
            raise ValueError(f"axes must be strictly increasing in 0..{DIM - 1}: {self.axes}")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    @classmethod
    def make(cls, base: Iterable[int], axes: Iterable[int], sign: int = 1) -> "OrientedCell":
        """Build a cell from any axis ordering; the permutation sign goes into ``sign``."""
        axes = tuple(int(a) for a in axes)
        if len(set(axes)) != len(axes):
            raise ValueError(f"repeated axis in {axes}")
        return cls(tuple(int(b) for b in base), tuple(sorted(axes)), sign * permutation_sign(axes))

    @property
    def k(self) -> int:
        return len(self.axes)

    @property
    def positive(self) -> "OrientedCell":
        return OrientedCell(self.base, self.axes, 1)

    def negate(self) -> "OrientedCell":
        return OrientedCell(self.base, self.axes, -self.sign)

    def __neg__(self) -> "OrientedCell":
        return self.negate()

    def corners(self) -> List[Tuple[int, ...]]:
        out = []
        for bits in itertools.product((0, 1), repeat=self.k):
            p = list(self.base)
            for a, b in zip(self.axes, bits):
                p[a] += b
            out.append(tuple(p))
        return out


def edge(base: Iterable[int], axis: int, sign: int = 1) -> OrientedCell:
    return OrientedCell(tuple(base), (axis,), sign)


def vertex(base: Iterable[int], sign: int = 1) -> OrientedCell:
    return OrientedCell(tuple(base), (), sign)


@dataclass(frozen=True)
class Box:
    """Product of integer intervals [lo_i, hi_i] with free boundary."""

    lo: Tuple[int, int, int, int]
    hi: Tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.lo) != DIM or len(self.hi) != DIM:
            raise ValueError("box bounds must have 4 entries")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("empty box")

    @classmethod
    def cube(cls, N: int) -> "Box":
        if N < 1:
            raise ValueError("N must be a positive integer")
        return cls((-N,) * DIM, (N,) * DIM)

    @classmethod
    def from_extent(cls, *extent: int) -> "Box":
        """Box [0, e0] x ... x [0, e3]; missing trailing extents are 0."""
        ext = tuple(extent) + (0,) * (DIM - len(extent))
        return cls((0,) * DIM, tuple(int(e) for e in ext))

    @property
    def N(self) -> Optional[int]:
        """Half-width when this is a symmetric cube, else None."""
        if len(set(self.hi)) == 1 and all(l == -h for l, h in zip(self.lo, self.hi)):
            return self.hi[0]
        return None

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    def contains_point(self, p: Sequence[int]) -> bool:
        return all(l <= x <= h for l, x, h in zip(self.lo, p, self.hi))

    def contains(self, c: OrientedCell) -> bool:
        for i in range(DIM):
            top = self.hi[i] - 1 if i in c.axes else self.hi[i]
            if not self.lo[i] <= c.base[i] <= top:
                return False
        return True

    def count(self, k: int) -> int:
        return int(_layout(self, k).flat.size)

    def index(self, c: OrientedCell) -> int:
        """Canonical index of the positive cell underlying ``c``."""
        if not self.contains(c):
            raise KeyError(f"{c} is not a cell of {self}")
        lay = _layout(self, c.k)
        local = tuple(b - l for b, l in zip(c.base, self.lo))
        pos = np.ravel_multi_index(local + (_COMBO_INDEX[c.k][c.axes],), lay.dense_shape)
        return int(lay.inverse[pos])

    def cell(self, k: int, index: int, sign: int = 1) -> OrientedCell:
        lay = _layout(self, k)
        coords = np.unravel_index(int(lay.flat[index]), lay.dense_shape)
        base = tuple(int(c) + l for c, l in zip(coords[:DIM], self.lo))
        return OrientedCell(base, AXIS_COMBOS[k][int(coords[DIM])], sign)

    def cells(self, k: int) -> List[OrientedCell]:
        return enumerate_cells(self, k)


class _Layout:
    """Dense (shape + combos) layout of k-cells and its canonical numbering."""

    def __init__(self, box: Box, k: int):
        combos = AXIS_COMBOS[k]
        self.k = k
        self.dense_shape = box.shape + (len(combos),)
        mask = np.zeros(self.dense_shape, dtype=bool)
        for ci, axes in enumerate(combos):
            sl = tuple(slice(0, box.shape[i] - 1) if i in axes else slice(None) for i in range(DIM))
            mask[sl + (ci,)] = True
        self.mask = mask
        self.flat = np.flatnonzero(mask.ravel())
        self.inverse = np.full(mask.size, -1, dtype=np.int64)
        self.inverse[self.flat] = np.arange(self.flat.size)
        # base coordinates (box-local) and combo of each canonical cell
        coords = np.unravel_index(self.flat, self.dense_shape)
        self.local_base = np.stack(coords[:DIM], axis=1)
        self.combo = coords[DIM]


@lru_cache(maxsize=64)
def _layout(box: Box, k: int) -> _Layout:
    if not 0 <= k <= DIM:
        raise ValueError(f"dimension must be in 0..{DIM}")
    return _Layout(box, k)


def cell_layout(box: Box, k: int) -> _Layout:
    return _layout(box, k)


def enumerate_cells(box: Box, k: int) -> List[OrientedCell]:
    """All positive k-cells of ``box`` in canonical order."""
    lay = _layout(box, k)
    lo = np.asarray(box.lo)
    combos = AXIS_COMBOS[k]
    return [OrientedCell(tuple(int(v) for v in b + lo), combos[c]) for b, c in zip(lay.local_base, lay.combo)]


def expected_count(N: int, k: int) -> int:
    from math import comb

    return comb(DIM, k) * (2 * N) ** k * (2 * N + 1) ** (DIM - k)


class Chain:
    """Integer combination of positively oriented k-cells (sparse)."""

    __slots__ = ("k", "coeffs")

    def __init__(self, k: int, coeffs: Optional[Mapping[OrientedCell, int]] = None):
        self.k = k
        self.coeffs: Dict[OrientedCell, int] = {}
        if coeffs:
            for c, v in coeffs.items():
                self._add(c, v)

    def _add(self, c: OrientedCell, v: int) -> None:
        if c.k != self.k:
            raise ValueError(f"dimension mismatch: {c.k}-cell in {self.k}-chain")
        key = c.positive
        new = self.coeffs.get(key, 0) + c.sign * int(v)
        if new:
            self.coeffs[key] = new
        else:
            self.coeffs.pop(key, None)

    @classmethod
    def from_cells(cls, k: int, cells: Iterable[OrientedCell]) -> "Chain":
        ch = cls(k)
        for c in cells:
            ch._add(c, 1)
        return ch

    def __getitem__(self, c: OrientedCell) -> int:
        return c.sign * self.coeffs.get(c.positive, 0)

    def support(self) -> List[OrientedCell]:
        return sorted(self.coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __bool__(self) -> bool:
        return bool(self.coeffs)

    def __iter__(self) -> Iterator[Tuple[OrientedCell, int]]:
        return iter(sorted(self.coeffs.items()))

    def __add__(self, other: "Chain") -> "Chain":
        return chain_add(self, other)

    def __sub__(self, other: "Chain") -> "Chain":
        return chain_add(self, chain_negate(other))

    def __neg__(self) -> "Chain":
        return chain_negate(self)

    def __mul__(self, a: int) -> "Chain":
        return Chain(self.k, {c: a * v for c, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Chain) and self.k == other.k and self.coeffs == other.coeffs

    def __repr__(self) -> str:
        terms = ", ".join(f"{v:+d}*{c.base}{c.axes}" for c, v in self)
        return f"Chain(k={self.k}, [{terms}])"

    def vector(self, box: Box) -> np.ndarray:
        """Dense coefficient vector in canonical order."""
        out = np.zeros(box.count(self.k), dtype=np.int64)
        for c, v in self.coeffs.items():
            out[box.index(c)] = v
        return out

    @classmethod
    def from_vector(cls, box: Box, k: int, vec: np.ndarray) -> "Chain":
        ch = cls(k)
        for i in np.flatnonzero(vec):
            ch.coeffs[box.cell(k, int(i))] = int(vec[i])
        return ch


def _check_dims(a: Chain, b: Chain) -> None:
    if a.k != b.k:
        raise ValueError(f"dimension mismatch: {a.k} vs {b.k}")


def chain_add(a: Chain, b: Chain) -> Chain:
    _check_dims(a, b)
    out = Chain(a.k, a.coeffs)
    for c, v in b.coeffs.items():
        out._add(c, v)
    return out


def chain_negate(a: Chain) -> Chain:
    return Chain(a.k, {c: -v for c, v in a.coeffs.items()})


def chain_restrict(a: Chain, cells: Iterable[OrientedCell]) -> Chain:
    """Keep only the coefficients of cells in ``cells`` (orientation ignored)."""
    keep = {c.positive for c in cells}
    for c in keep:
        if c.k != a.k:
            raise ValueError("dimension mismatch in restriction set")
    return Chain(a.k, {c: v for c, v in a.coeffs.items() if c in keep})


def boundary(c: OrientedCell) -> Chain:
    """Alternating-sign boundary; for an edge a->a+e_j this is (a+e_j) - a."""
    if c.k == 0:
        raise ValueError("a 0-cell has no boundary")
    out = Chain(c.k - 1)
    for t, j in enumerate(c.axes):
        rest = c.axes[:t] + c.axes[t + 1:]
        shifted = list(c.base)
        shifted[j] += 1
        s = 1 if t % 2 == 0 else -1  # (-1)^t with 1-based t' = t+1 gives (-1)^(t'+1)
        out._add(OrientedCell(c.base, rest), -s * c.sign)
        out._add(OrientedCell(tuple(shifted), rest), s * c.sign)
    return out


def boundary_chain(q: Chain) -> Chain:
    out = Chain(q.k - 1)
    for c, v in q.coeffs.items():
        for f, w in boundary(c).coeffs.items():
            out._add(f, v * w)
    return out


def coboundary(c: OrientedCell, box: Box) -> Chain:
    """Chain of (k+1)-cells c' in the box with coefficient boundary(c')[c]."""
    if c.k >= DIM:
        raise ValueError("a 4-cell has no coboundary")
    out = Chain(c.k + 1)
    for j in range(DIM):
        if j in c.axes:
            continue
        axes = tuple(sorted(c.axes + (j,)))
        for shift in (0, -1):
            base = list(c.base)
            base[j] += shift
            cand = OrientedCell(tuple(base), axes)
            if box.contains(cand):
                coef = boundary(cand)[c]
                if coef:
                    out._add(cand, coef)
    return out


def is_boundary_cell(c: OrientedCell, box: Box) -> bool:
    """True iff the closed cell sits inside the topological boundary of the box."""
    for i in range(DIM):
        if i in c.axes:
            continue
        if c.base[i] == box.lo[i] or c.base[i] == box.hi[i]:
            return True
    return False


@lru_cache(maxsize=64)
def incidence(box: Box, k: int) -> sp.csr_matrix:
    """Sparse matrix D with D[c', c] = boundary(c')[c] for k-cells c and (k+1)-cells c'.

    As a map on canonical coefficient vectors this is the exterior derivative on
    k-forms, and its transpose is the boundary map on (k+1)-chains.
    """
    if not 0 <= k < DIM:
        raise ValueError("k must be in 0..3")
    hi_lay = _layout(box, k + 1)
    lo_lay = _layout(box, k)
    rows, cols, vals = [], [], []
    shape = box.shape
    for ci, axes in enumerate(AXIS_COMBOS[k + 1]):
        sel = np.flatnonzero(hi_lay.combo == ci)
        base = hi_lay.local_base[sel]
        for t, j in enumerate(axes):
            rest = axes[:t] + axes[t + 1:]
            fi = _COMBO_INDEX[k][rest]
            s = 1 if t % 2 == 0 else -1
            shifted = base.copy()
            shifted[:, j] += 1
            for b, sgn in ((base, -s), (shifted, s)):
                pos = np.ravel_multi_index(tuple(b.T) + (np.full(len(b), fi),), shape + (len(AXIS_COMBOS[k]),))
                rows.append(sel)
                cols.append(lo_lay.inverse[pos])
                vals.append(np.full(len(sel), sgn, dtype=np.int64))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    if np.any(cols < 0):
        raise AssertionError("face outside the box")
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(hi_lay.flat.size, lo_lay.flat.size), dtype=np.int64)
    mat.sum_duplicates()
    return mat


@lru_cache(maxsize=64)
def boundary_mask(box: Box, k: int) -> np.ndarray:
    """Boolean mask over positive k-cells: True for boundary cells."""
    lay = _layout(box, k)
    lb = lay.local_base
    out = np.zeros(lay.flat.size, dtype=bool)
    for i in range(DIM):
        along = np.array([i in AXIS_COMBOS[k][c] for c in range(len(AXIS_COMBOS[k]))])[lay.combo]
        at_edge = (lb[:, i] == 0) | (lb[:, i] == box.shape[i] - 1)
        out |= at_edge & ~along
    return out
