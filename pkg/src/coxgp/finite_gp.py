"""Knot grids, hat basis functions and the piecewise-(multi)linear intensity.

The intensity is represented by one coefficient per knot of an equispaced
grid; evaluation interpolates multilinearly between knots, and integration
over the box domain is exact via trapezoid-type weights. Coefficient vectors
are flat numpy arrays in row-major tensor order (last dimension fastest),
which is part of the public contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import DomainError, ParameterError, ShapeError


@dataclass(frozen=True)
class KnotGrid:
    """Equispaced knots over a box domain, one axis per dimension."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.shape)):
            raise ShapeError("domain bounds and knot counts must have equal length")
        for a, b, m in zip(self.lower, self.upper, self.shape):
            if m < 2:
                raise ParameterError(f"need at least 2 knots per dimension, got {m}")
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ParameterError(f"degenerate interval [{a}, {b}]")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def deltas(self) -> tuple[float, ...]:
        return tuple((b - a) / (m - 1) for a, b, m in zip(self.lower, self.upper, self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(a, b, m) for a, b, m in zip(self.lower, self.upper, self.shape))

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in zip(self.lower, self.upper)]))

    def flat_knots(self) -> np.ndarray:
        """All knot coordinates, shape (size, ndim), row-major order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def as_points(self, x) -> np.ndarray:
        """Coerce input to an (n, ndim) float array, validating the domain."""
        x = np.asarray(x, dtype=float)
        if self.ndim == 1 and (x.ndim <= 1 or x.shape[-1] != 1):
            x = x.reshape(-1, 1)
        elif x.ndim == 1:
            x = x.reshape(1, -1)
        if x.ndim != 2 or x.shape[1] != self.ndim:
            raise ShapeError(f"expected points of dimension {self.ndim}, got array of shape {x.shape}")
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        if np.any(x < lo) or np.any(x > hi):
            raise DomainError("point(s) outside the grid domain")
        return x


def make_grid(domain, m) -> KnotGrid:
    """Build a grid from per-dimension intervals and knot counts.

    ``domain`` is (a, b) for 1D or a sequence of (a, b) pairs; ``m`` is an int
    (shared by all dimensions) or one count per dimension.
    """
    dom = np.asarray(domain, dtype=float)
    if dom.ndim == 1:
        dom = dom.reshape(1, 2)
    if dom.ndim != 2 or dom.shape[1] != 2:
        raise ShapeError(f"domain must be an (a, b) pair or a list of pairs, got shape {dom.shape}")
    counts = np.atleast_1d(np.asarray(m, dtype=int))
    if counts.size == 1:
        counts = np.full(len(dom), int(counts[0]))
    if len(counts) != len(dom):
        raise ShapeError("number of knot counts must match the domain dimension")
    return KnotGrid(tuple(dom[:, 0]), tuple(dom[:, 1]), tuple(int(c) for c in counts))


def hat_basis(x: float, j: int, grid: KnotGrid, dim: int = 0) -> float:
    """Piecewise-linear tent function of knot ``j`` along dimension ``dim``."""
    if not 0 <= dim < grid.ndim:
        raise ShapeError(f"dimension index {dim} out of range for a {grid.ndim}-d grid")
    m = grid.shape[dim]
    if not 0 <= j < m:
        raise ShapeError(f"knot index {j} out of range for {m} knots")
    a, b = grid.lower[dim], grid.upper[dim]
    if x < a or x > b:
        raise DomainError(f"x={x} outside [{a}, {b}]")
    r = abs(x - grid.axes[dim][j]) / grid.deltas[dim]
    return 1.0 - r if r <= 1.0 else 0.0


def basis_matrix(points, grid: KnotGrid) -> sparse.csr_matrix:
    """Sparse matrix of tensor basis values, one row per point.

    Row i holds the 2^d multilinear weights of point i against the flattened
    knots, so ``basis_matrix(p, g) @ coeffs`` interpolates the intensity.
    """
    pts = grid.as_points(points)
    n, d = pts.shape
    cell = np.empty((n, d), dtype=np.int64)
    frac = np.empty((n, d), dtype=float)
    for i in range(d):
        delta = grid.deltas[i]
        t = (pts[:, i] - grid.lower[i]) / delta
        k = np.clip(np.floor(t).astype(np.int64), 0, grid.shape[i] - 2)
        cell[:, i] = k
        frac[:, i] = t - k
    strides = np.ones(d, dtype=np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * grid.shape[i + 1]

    ncorners = 1 << d
    cols = np.empty((n, ncorners), dtype=np.int64)
    vals = np.empty((n, ncorners), dtype=float)
    for corner in range(ncorners):
        offs = np.array([(corner >> (d - 1 - i)) & 1 for i in range(d)], dtype=np.int64)
        cols[:, corner] = (cell + offs) @ strides
        w = np.where(offs[None, :] == 1, frac, 1.0 - frac)
        vals[:, corner] = np.prod(w, axis=1)
    indptr = np.arange(0, (n + 1) * ncorners, ncorners)
    return sparse.csr_matrix((vals.ravel(), cols.ravel(), indptr), shape=(n, grid.size))


def evaluate_intensity(coeffs, grid: KnotGrid, x):
    """Interpolated intensity at ``x`` (a point or an array of points).

    Exact at knots; multilinear in between. Returns a float for a single
    point, else a 1-d array.
    """
    coeffs = _check_coeffs(coeffs, grid)
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 if grid.ndim == 1 else (arr.ndim == 1 and arr.shape[0] == grid.ndim)
    out = basis_matrix(grid.as_points(arr), grid) @ coeffs
    return float(out[0]) if single else out


def integration_weights(grid: KnotGrid) -> np.ndarray:
    """Exact integration weights of the hat basis, flattened tensor order.

    Per dimension the weights are (delta/2, delta, ..., delta, delta/2); the
    d-dimensional weight is their product, and the total equals the domain
    volume.
    """
    per_dim = []
    for m, delta in zip(grid.shape, grid.deltas):
        w = np.full(m, delta)
        w[0] = w[-1] = delta / 2.0
        per_dim.append(w)
    w = per_dim[0]
    for nxt in per_dim[1:]:
        w = np.multiply.outer(w, nxt)
    return w.ravel()


def intensity_measure(coeffs, weights) -> float:
    """Integral of the interpolated intensity over the domain (dot product)."""
    coeffs = np.asarray(coeffs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if coeffs.shape != weights.shape:
        raise ShapeError(f"coefficients {coeffs.shape} and weights {weights.shape} differ in length")
    return float(coeffs @ weights)


def _check_coeffs(coeffs, grid: KnotGrid) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (grid.size,):
        raise ShapeError(f"expected {grid.size} coefficients, got shape {coeffs.shape}")
    return coeffs
