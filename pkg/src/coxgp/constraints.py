"""Linear inequality constraint systems on the coefficient vector.

Every constraint is stored as a halfspace f . x + g >= 0. Named constraint
kinds (non-negativity, monotonicity, convexity, bounds) are compiled against
a knot grid; arbitrary halfspace systems can be built directly through
``ConstraintSystem.from_halfspaces``.

When the composed region is recognisably a box in some full-row-rank linear
map of the coefficients (e.g. plain non-negativity, bounds, or 1-d
monotonicity), the system records that map so that region probabilities can
be estimated by sequential conditioning instead of sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibilityError, ParameterError, ShapeError
from .finite_gp import KnotGrid

KINDS = ("nonnegative", "nonincreasing", "nondecreasing", "convex", "concave", "bounded")
_MONOTONE = {"nonincreasing": -1, "nondecreasing": +1}
_CURVATURE = {"convex": +1, "concave": -1}


@dataclass(frozen=True)
class ConstraintSpec:
    """One named constraint family, optionally restricted to given dimensions."""

    kind: str
    dims: tuple[int, ...] | None = None
    lower: float = 0.0
    upper: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown constraint kind {self.kind!r}; expected one of {KINDS}")
        if self.dims is not None:
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.kind == "bounded":
            if math.isnan(self.lower) or math.isnan(self.upper) or self.lower > self.upper:
                raise ParameterError(f"bounded requires lower <= upper, got [{self.lower}, {self.upper}]")
            if math.isinf(self.lower) and math.isinf(self.upper):
                raise ParameterError("bounded requires at least one finite bound")

    @classmethod
    def nonnegative(cls) -> "ConstraintSpec":
        return cls("nonnegative")

    @classmethod
    def nonincreasing(cls, dims=None) -> "ConstraintSpec":
        return cls("nonincreasing", dims=tuple(dims) if dims is not None else None)

    @classmethod
    def nondecreasing(cls, dims=None) -> "ConstraintSpec":
        return cls("nondecreasing", dims=tuple(dims) if dims is not None else None)

    @classmethod
    def convex(cls, dims=None) -> "ConstraintSpec":
        return cls("convex", dims=tuple(dims) if dims is not None else None)

    @classmethod
    def concave(cls, dims=None) -> "ConstraintSpec":
        return cls("concave", dims=tuple(dims) if dims is not None else None)

    @classmethod
    def bounded(cls, lower: float, upper: float) -> "ConstraintSpec":
        return cls("bounded", lower=float(lower), upper=float(upper))

    @classmethod
    def parse(cls, text: str) -> "ConstraintSpec":
        """Parse CLI syntax: ``kind``, ``kind:dim``, or ``bounded:lo:hi``."""
        parts = text.strip().split(":")
        kind = parts[0]
        if kind == "bounded":
            if len(parts) != 3:
                raise ParameterError("bounded constraint syntax is bounded:LOWER:UPPER")
            return cls.bounded(float(parts[1]), float(parts[2]))
        if kind == "nonnegative":
            if len(parts) != 1:
                raise ParameterError("nonnegative takes no arguments")
            return cls.nonnegative()
        if kind in _MONOTONE or kind in _CURVATURE:
            dims = tuple(int(p) for p in parts[1:]) or None
            return cls(kind, dims=dims)
        raise ParameterError(f"unknown constraint kind {kind!r}")


@dataclass(frozen=True)
class BoxForm:
    """Region expressed as lower <= B x <= upper with B of full row rank."""

    matrix: np.ndarray
    lower: np.ndarray
    upper: np.ndarray


@dataclass(frozen=True)
class ConstraintSystem:
    """Halfspaces F x + g >= 0 with a stored strictly feasible point."""

    normals: np.ndarray
    offsets: np.ndarray
    feasible_point: np.ndarray
    specs: tuple[ConstraintSpec, ...] = ()
    tags: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=int))
    box_form: BoxForm | None = None

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if normals.shape[0] != offsets.shape[0]:
            raise ShapeError("one offset per halfspace is required")
        if np.any(np.all(normals == 0.0, axis=1)):
            raise ParameterError("constraint normals must be non-zero")
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "feasible_point", np.asarray(self.feasible_point, dtype=float))
        if np.min(self.margins(self.feasible_point)) <= 0:
            raise InfeasibilityError("stored feasible point is not strictly interior")

    @classmethod
    def from_halfspaces(cls, normals, offsets, feasible_point) -> "ConstraintSystem":
        return cls(np.asarray(normals, float), np.asarray(offsets, float), np.asarray(feasible_point, float))

    @property
    def n_halfspaces(self) -> int:
        return self.normals.shape[0]

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def margins(self, coeffs) -> np.ndarray:
        """Per-halfspace slack F x + g (negative means violated)."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] != self.dim:
            raise ShapeError(f"expected vectors of length {self.dim}, got shape {coeffs.shape}")
        return coeffs @ self.normals.T + self.offsets


def check_satisfied(system: ConstraintSystem, coeffs, tol: float = 0.0) -> bool:
    """True iff every halfspace satisfies f . x + g >= -tol."""
    if tol < 0:
        raise ParameterError("tol must be non-negative")
    return bool(np.min(system.margins(coeffs)) >= -tol)


def build_constraint_system(specs, grid: KnotGrid, scale: float = 1.0) -> ConstraintSystem:
    """Compile named constraint kinds into a halfspace system on the grid.

    Composition is by intersection (halfspaces concatenate). The returned
    system stores a deterministic strictly feasible point; contradictory
    specs (opposite monotonicity or curvature on one dimension, empty bound
    interval) raise InfeasibilityError.
    """
    specs = tuple(specs)
    if not specs:
        raise ParameterError("at least one constraint spec is required")
    mono, curv, lo_bound, up_bound, has_nonneg = _resolve_specs(specs, grid)

    rows, offs, tags = [], [], []
    for si, spec in enumerate(specs):
        f, g = _halfspaces_for(spec, grid)
        rows.append(f)
        offs.append(g)
        tags.append(np.full(len(g), si, dtype=int))
    normals = np.concatenate(rows, axis=0)
    offsets = np.concatenate(offs)
    tags = np.concatenate(tags)

    feasible = _feasible_point(grid, mono, curv, lo_bound, up_bound, has_nonneg, scale)
    margins = feasible @ normals.T + offsets
    if np.min(margins) <= 0:
        raise InfeasibilityError("could not construct a strictly feasible point for the composed constraints")

    box = _box_form(grid, mono, curv, lo_bound, up_bound, has_nonneg)
    return ConstraintSystem(normals, offsets, feasible, specs, tags, box)


def _resolve_specs(specs, grid: KnotGrid):
    """Reduce specs to per-dimension monotonicity/curvature and global bounds."""
    mono = np.zeros(grid.ndim, dtype=int)
    curv = np.zeros(grid.ndim, dtype=int)
    lo_bound, up_bound = -math.inf, math.inf
    has_nonneg = False
    for spec in specs:
        if spec.kind == "nonnegative":
            has_nonneg = True
        elif spec.kind == "bounded":
            lo_bound = max(lo_bound, spec.lower)
            up_bound = min(up_bound, spec.upper)
        else:
            table = _MONOTONE if spec.kind in _MONOTONE else _CURVATURE
            acc = mono if spec.kind in _MONOTONE else curv
            sign = table[spec.kind]
            for d in spec.dims if spec.dims is not None else range(grid.ndim):
                if not 0 <= d < grid.ndim:
                    raise ShapeError(f"constraint dimension {d} out of range for a {grid.ndim}-d grid")
                if acc[d] == -sign:
                    raise InfeasibilityError(
                        f"contradictory {spec.kind!r}-type constraints along dimension {d}"
                    )
                acc[d] = sign
    if lo_bound > up_bound or (lo_bound == up_bound and math.isfinite(lo_bound)):
        raise InfeasibilityError(f"bound interval [{lo_bound}, {up_bound}] has no interior")
    if has_nonneg and up_bound <= 0:
        raise InfeasibilityError("non-negativity contradicts a non-positive upper bound")
    return mono, curv, lo_bound, up_bound, has_nonneg


def _pairs_along(grid: KnotGrid, dim: int):
    idx = np.arange(grid.size).reshape(grid.shape)
    prev = np.take(idx, range(grid.shape[dim] - 1), axis=dim).ravel()
    nxt = np.take(idx, range(1, grid.shape[dim]), axis=dim).ravel()
    return prev, nxt


def _triples_along(grid: KnotGrid, dim: int):
    m = grid.shape[dim]
    if m < 3:
        raise ParameterError(f"curvature constraints need at least 3 knots along dimension {dim}")
    idx = np.arange(grid.size).reshape(grid.shape)
    left = np.take(idx, range(m - 2), axis=dim).ravel()
    mid = np.take(idx, range(1, m - 1), axis=dim).ravel()
    right = np.take(idx, range(2, m), axis=dim).ravel()
    return left, mid, right


def _halfspaces_for(spec: ConstraintSpec, grid: KnotGrid):
    n = grid.size
    if spec.kind == "nonnegative":
        return np.eye(n), np.zeros(n)
    if spec.kind == "bounded":
        rows, offs = [], []
        if math.isfinite(spec.lower):
            rows.append(np.eye(n))
            offs.append(np.full(n, -spec.lower))
        if math.isfinite(spec.upper):
            rows.append(-np.eye(n))
            offs.append(np.full(n, spec.upper))
        return np.concatenate(rows, axis=0), np.concatenate(offs)

    dims = spec.dims if spec.dims is not None else tuple(range(grid.ndim))
    rows, offs = [], []
    for d in dims:
        if spec.kind in _MONOTONE:
            prev, nxt = _pairs_along(grid, d)
            f = np.zeros((len(prev), n))
            sign = _MONOTONE[spec.kind]
            f[np.arange(len(prev)), prev] = -sign
            f[np.arange(len(prev)), nxt] = sign
            rows.append(f)
            offs.append(np.zeros(len(prev)))
        else:
            left, mid, right = _triples_along(grid, d)
            f = np.zeros((len(mid), n))
            sign = _CURVATURE[spec.kind]
            f[np.arange(len(mid)), left] = sign
            f[np.arange(len(mid)), mid] = -2.0 * sign
            f[np.arange(len(mid)), right] = sign
            rows.append(f)
            offs.append(np.zeros(len(mid)))
    return np.concatenate(rows, axis=0), np.concatenate(offs)


def _profile(s: np.ndarray, mono: int, curv: int) -> np.ndarray:
    """Strictly monotone/curved ramp on [0, 1] matching the requested signs."""
    if mono == 0 and curv == 0:
        return np.zeros_like(s)
    if curv == 0:
        return s if mono > 0 else 1.0 - s
    if mono == 0:
        q = (s - 0.5) ** 2
        return q if curv > 0 else 0.25 - q
    # mixing a strict ramp with a quadratic keeps both properties strict;
    # second differences are invariant under the reflection s -> 1-s
    u = s if mono > 0 else 1.0 - s
    if curv > 0:
        return 0.5 * u + 0.5 * u * u
    return 0.5 * u + 0.5 * (2.0 * u - u * u)


def _feasible_point(grid, mono, curv, lo_bound, up_bound, has_nonneg, scale):
    base = 0.1 * scale
    z = np.full(grid.size, base)
    for d in range(grid.ndim):
        if mono[d] == 0 and curv[d] == 0:
            continue
        m = grid.shape[d]
        s = np.arange(m) / (m - 1)
        prof = _profile(s, mono[d], curv[d])
        shape = [1] * grid.ndim
        shape[d] = m
        z = z + base * np.broadcast_to(prof.reshape(shape), grid.shape).ravel()

    lo_ok = math.isfinite(lo_bound) or has_nonneg
    lo_eff = max(lo_bound, 0.0) if has_nonneg else lo_bound
    if math.isfinite(up_bound) and lo_ok:
        w = up_bound - lo_eff
        zmin, zmax = z.min(), z.max()
        if zmax > zmin:
            z = lo_eff + 0.2 * w + (z - zmin) / (zmax - zmin) * 0.6 * w
        else:
            z = np.full_like(z, lo_eff + 0.5 * w)
    elif math.isfinite(up_bound):
        z = z + (up_bound - z.max() - 0.1 * abs(scale) - 0.1 * abs(up_bound))
    elif math.isfinite(lo_bound) and lo_bound > 0:
        z = z + lo_bound
    return z


def _box_form(grid, mono, curv, lo_bound, up_bound, has_nonneg) -> BoxForm | None:
    """Recognise box-representable regions; None means no such form is known.

    The region must equal {lower <= B x <= upper} for a full-row-rank B, so
    the sequential-conditioning estimator can work on the transformed
    Gaussian. Covered: pure sign/bound boxes in any dimension, and the 1-d
    monotone and curvature compositions whose logically non-redundant
    constraints number at most the grid size.
    """
    n = grid.size
    if np.all(mono == 0) and np.all(curv == 0):
        lo = np.full(n, max(lo_bound, 0.0) if has_nonneg else lo_bound)
        up = np.full(n, up_bound)
        return BoxForm(np.eye(n), lo, up)
    if grid.ndim != 1 or math.isfinite(lo_bound) or math.isfinite(up_bound):
        return None
    ms, cs = int(mono[0]), int(curv[0])

    def unit(i):
        row = np.zeros(n)
        row[i] = 1.0
        return row

    def fwd_diff(i):  # x_{i+1} - x_i
        return unit(i + 1) - unit(i)

    rows: list[np.ndarray] = []
    if cs == 0:
        # monotone, optionally non-negative: anchor at the minimal end
        if has_nonneg:
            rows.append(unit(0) if ms > 0 else unit(n - 1))
        rows.extend(ms * fwd_diff(i) for i in range(n - 1))
    else:
        # curvature makes forward differences monotone, so one extremal
        # difference plus one extremal value pin down the rest
        if ms != 0:
            if has_nonneg:
                rows.append(unit(0) if ms > 0 else unit(n - 1))
            extremal = 0 if ms == cs else n - 2
            rows.append(ms * fwd_diff(extremal))
        elif has_nonneg:
            if cs > 0:  # a convex sequence attains its minimum anywhere
                return None
            rows.append(unit(0))
            rows.append(unit(n - 1))
        rows.extend(cs * (fwd_diff(i + 1) - fwd_diff(i)) for i in range(n - 2))
    mat = np.asarray(rows)
    return BoxForm(mat, np.zeros(len(mat)), np.full(len(mat), math.inf))
