"""Squared-exponential covariance functions for the Gaussian coefficient vector.

Only the SE family (and its tensor product across dimensions) ships; the
covariance-matrix builder accepts any callable with the ``tensor_kernel``
signature for experimentation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalConditioningError, ParameterError, ShapeError

DEFAULT_JITTER_FACTOR = 1e-8
MAX_JITTER_FACTOR = 1e-4


@dataclass(frozen=True)
class KernelParams:
    """Amplitude and per-dimension lengthscales of the (product) SE kernel.

    ``variance`` is the marginal variance of the coefficient vector; it is
    applied once globally, not per dimension.
    """

    variance: float
    lengthscales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengthscales", tuple(float(l) for l in np.atleast_1d(self.lengthscales)))
        object.__setattr__(self, "variance", float(self.variance))
        if not np.isfinite(self.variance) or self.variance <= 0:
            raise ParameterError(f"variance must be positive, got {self.variance}")
        if len(self.lengthscales) == 0:
            raise ParameterError("at least one lengthscale is required")
        for l in self.lengthscales:
            if not np.isfinite(l) or l <= 0:
                raise ParameterError(f"lengthscales must be positive, got {self.lengthscales}")

    @property
    def ndim(self) -> int:
        return len(self.lengthscales)


def se_kernel(t, t2, variance: float, lengthscale: float):
    """Squared-exponential covariance sigma^2 * exp(-(t - t2)^2 / (2 l^2)).

    Accepts scalars or broadcastable arrays in ``t``, ``t2``.
    """
    if lengthscale <= 0 or variance <= 0:
        raise ParameterError("variance and lengthscale must be positive")
    t = np.asarray(t, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    r = (t - t2) / lengthscale
    out = variance * np.exp(-0.5 * r * r)
    return out if out.ndim else float(out)


def tensor_kernel(x, x2, params: KernelParams):
    """Product of per-dimension SE factors with the variance applied once.

    ``x`` and ``x2`` are d-dimensional points (or arrays of points with the
    coordinate axis last). Reduces to ``se_kernel`` for d = 1.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    d = params.ndim
    if x.shape[-1] != d or x2.shape[-1] != d:
        raise ShapeError(f"points must have {d} coordinates, got shapes {x.shape} and {x2.shape}")
    ell = np.asarray(params.lengthscales)
    r = (x - x2) / ell
    out = params.variance * np.exp(-0.5 * np.sum(r * r, axis=-1))
    return out if out.ndim else float(out)


def covariance_matrix(grid, params: KernelParams, jitter: float | None = None) -> np.ndarray:
    """Dense covariance of the coefficient vector over the flattened knots.

    With ``jitter=None`` the diagonal regulariser starts at 1e-8 * variance and
    escalates tenfold (up to 1e-4 * variance) until a Cholesky factorisation
    succeeds; an explicit ``jitter`` is used as given and never escalated.
    SE matrices on dense knot grids are near-singular, so a nonzero default
    is required in practice.
    """
    if params.ndim != grid.ndim:
        raise ShapeError(f"kernel has {params.ndim} lengthscales but grid is {grid.ndim}-dimensional")
    knots = grid.flat_knots()
    ell = np.asarray(params.lengthscales)
    scaled = knots / ell
    sq = np.sum((scaled[:, None, :] - scaled[None, :, :]) ** 2, axis=-1)
    base = params.variance * np.exp(-0.5 * sq)
    base = 0.5 * (base + base.T)

    if jitter is not None:
        if jitter < 0:
            raise ParameterError("jitter must be non-negative")
        mat = base + jitter * np.eye(len(base))
        if len(mat) > 1:  # a 1x1 positive matrix never needs checking
            _cholesky_or_raise(mat)
        return mat

    factor = DEFAULT_JITTER_FACTOR
    while True:
        mat = base + factor * params.variance * np.eye(len(base))
        try:
            np.linalg.cholesky(mat)
        except np.linalg.LinAlgError:
            factor *= 10.0
            if factor > MAX_JITTER_FACTOR * (1 + 1e-12):
                raise NumericalConditioningError(
                    f"covariance not positive definite at maximum jitter {MAX_JITTER_FACTOR} * variance"
                ) from None
            continue
        return mat


def jittered_cholesky(matrix: np.ndarray, scale: float | None = None) -> np.ndarray:
    """Lower Cholesky factor, escalating a diagonal jitter on failure.

    ``scale`` sets the jitter unit (defaults to the mean diagonal); raises
    NumericalConditioningError past 1e-4 * scale, mirroring the policy of
    covariance_matrix.
    """
    matrix = np.asarray(matrix, dtype=float)
    if scale is None:
        scale = float(np.mean(np.diag(matrix)))
        if scale <= 0:
            scale = 1.0
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        pass
    factor = DEFAULT_JITTER_FACTOR
    eye = np.eye(len(matrix))
    while factor <= MAX_JITTER_FACTOR * (1 + 1e-12):
        try:
            return np.linalg.cholesky(matrix + factor * scale * eye)
        except np.linalg.LinAlgError:
            factor *= 10.0
    raise NumericalConditioningError("matrix not positive definite even after jitter escalation")


def _cholesky_or_raise(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise NumericalConditioningError("covariance matrix is not positive definite") from None
