"""Ground-truth intensities, hazard curves and Poisson pattern simulation.

The three 1-d toy intensities, the Weibull and Gamma hazard rates used as
renewal-style intensities, and a Lewis-Shedler thinning simulator for
generating synthetic point patterns on box domains.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .cox_inference import PointPattern
from .errors import DomainError, DominatingBoundError, ParameterError, ShapeError
from .rng import as_generator

TOY_DOMAINS = {1: (0.0, 50.0), 2: (0.0, 5.0), 3: (0.0, 100.0)}
# dominating bounds for thinning; each at least the dense-grid supremum
TOY_LAMBDA_MAX = {1: 3.1, 2: 11.0, 3: 3.0}
_TOY3_X = np.array([0.0, 25.0, 50.0, 75.0, 100.0])
_TOY3_Y = np.array([2.0, 3.0, 1.0, 2.5, 3.0])

SINGULARITY_EPS = 1e-6


def toy_intensity(which: int, x):
    """Evaluate toy intensity 1, 2 or 3 at ``x`` (scalar or array)."""
    if which not in TOY_DOMAINS:
        raise ParameterError(f"toy intensity id must be 1, 2 or 3, got {which}")
    a, b = TOY_DOMAINS[which]
    arr = np.asarray(x, dtype=float)
    if np.any(arr < a) or np.any(arr > b):
        raise DomainError(f"x outside the domain [{a}, {b}] of toy intensity {which}")
    if which == 1:
        out = 2.0 * np.exp(-arr / 15.0) + np.exp(-(((arr - 25.0) / 10.0) ** 2))
    elif which == 2:
        out = 5.0 * np.sin(arr**2) + 6.0
    else:
        out = np.interp(arr, _TOY3_X, _TOY3_Y)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def weibull_hazard(x, alpha: float, beta: float):
    """Weibull hazard alpha * beta * x^(beta-1); +inf at x=0 when beta < 1."""
    if alpha <= 0 or beta <= 0:
        raise ParameterError("alpha and beta must be positive")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("weibull hazard requires x >= 0")
    with np.errstate(divide="ignore"):
        out = alpha * beta * np.power(arr, beta - 1.0)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def gamma_hazard(x, alpha: float, beta: float):
    """Gamma-renewal hazard alpha x^(beta-1) e^(-x) / (Gamma(beta) - gamma_x(beta)).

    The denominator is the upper incomplete gamma function, evaluated through
    its regularised form; the hazard approaches alpha from below as x grows.
    """
    if alpha <= 0 or beta <= 0:
        raise ParameterError("alpha and beta must be positive")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("gamma hazard requires x >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.power(arr, beta - 1.0) * np.exp(-arr)
        denom = special.gamma(beta) * special.gammaincc(beta, arr)
        out = alpha * num / denom
    if beta > 1:
        out = np.where(arr == 0, 0.0, out)
    elif beta < 1:
        out = np.where(arr == 0, np.inf, out)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass(frozen=True)
class IntensitySpec:
    """A named ground-truth intensity with its domain.

    Families: ``toy1``/``toy2``/``toy3`` (fixed domains), ``weibull`` and
    ``gamma`` hazards with parameters (alpha, beta), and ``table`` for linear
    interpolation through user-supplied (x, value) pairs.
    """

    family: str
    alpha: float = 1.0
    beta: float = 1.0
    domain: tuple[tuple[float, float], ...] | None = None
    table_x: tuple[float, ...] = field(default=())
    table_y: tuple[float, ...] = field(default=())

    def __post_init__(self):
        known = ("toy1", "toy2", "toy3", "weibull", "gamma", "table")
        if self.family not in known:
            raise ParameterError(f"unknown intensity family {self.family!r}; expected one of {known}")
        if self.family == "table":
            if len(self.table_x) < 2 or len(self.table_x) != len(self.table_y):
                raise ParameterError("table intensity needs matching x/value sequences of length >= 2")
            if any(v < 0 for v in self.table_y):
                raise ParameterError("table intensity values must be non-negative")
        if self.family in ("weibull", "gamma") and (self.alpha <= 0 or self.beta <= 0):
            raise ParameterError("alpha and beta must be positive")
        if self.domain is not None:
            dom = tuple(tuple(map(float, pair)) for pair in np.atleast_2d(np.asarray(self.domain, float)))
            object.__setattr__(self, "domain", dom)

    @property
    def default_domain(self) -> tuple[tuple[float, float], ...]:
        if self.domain is not None:
            return self.domain
        if self.family.startswith("toy"):
            return (TOY_DOMAINS[int(self.family[-1])],)
        if self.family == "weibull":
            return ((0.0, 100.0),)
        if self.family == "gamma":
            return ((0.0, 5.0),)
        return ((float(self.table_x[0]), float(self.table_x[-1])),)

    def evaluate(self, x):
        if self.family.startswith("toy"):
            return toy_intensity(int(self.family[-1]), x)
        if self.family == "weibull":
            return weibull_hazard(x, self.alpha, self.beta)
        if self.family == "gamma":
            return gamma_hazard(x, self.alpha, self.beta)
        return np.interp(np.asarray(x, dtype=float), self.table_x, self.table_y)

    __call__ = evaluate

    def default_lambda_max(self) -> float:
        """A dominating bound for thinning on the default domain."""
        if self.family.startswith("toy"):
            return TOY_LAMBDA_MAX[int(self.family[-1])]
        if self.family == "table":
            return float(max(self.table_y))
        (a, b), = self.default_domain
        if self.beta < 1:
            # singular at 0: bound the capped version evaluated past the clip point
            x0 = max(SINGULARITY_EPS, 1e-4 * (b - a), a)
            return 1.05 * float(self.evaluate(x0))
        xs = np.linspace(max(a, SINGULARITY_EPS), b, 2001)
        return 1.05 * float(np.max(self.evaluate(xs)))

    def simulation_intensity(self, lambda_max: float):
        """Evaluator used during thinning.

        Hazards with a pole at the origin are clipped there and capped at
        ``lambda_max``; other families are returned as-is so that a violated
        dominating bound is detected.
        """
        if self.family in ("weibull", "gamma") and self.beta < 1:
            def capped(x):
                vals = self.evaluate(np.maximum(np.asarray(x, dtype=float), SINGULARITY_EPS))
                return np.minimum(vals, lambda_max)

            return capped
        return self.evaluate


def simulate_poisson(intensity, domain, lambda_max: float, n_observations: int, rng_seed) -> PointPattern:
    """Simulate independent inhomogeneous-Poisson observations by thinning.

    ``intensity`` is an IntensitySpec or a plain callable on points of the
    box ``domain``. Candidates arrive homogeneously at rate ``lambda_max``
    and are retained with probability intensity/lambda_max; an intensity
    value above ``lambda_max`` raises DominatingBoundError.
    """
    if n_observations < 1:
        raise ParameterError("n_observations must be at least 1")
    if lambda_max < 0 or not np.isfinite(lambda_max):
        raise ParameterError("lambda_max must be finite and non-negative")
    dom = np.atleast_2d(np.asarray(domain, dtype=float))
    if dom.shape[1] != 2 or np.any(dom[:, 0] >= dom[:, 1]):
        raise ShapeError("domain must be a list of (a, b) pairs with a < b")
    d = dom.shape[0]
    volume = float(np.prod(dom[:, 1] - dom[:, 0]))
    fn = intensity.simulation_intensity(lambda_max) if isinstance(intensity, IntensitySpec) else intensity

    rng = as_generator(rng_seed)
    observations = []
    for _ in range(n_observations):
        count = rng.poisson(lambda_max * volume)
        pts = dom[:, 0] + rng.random((count, d)) * (dom[:, 1] - dom[:, 0])
        if count == 0:
            observations.append(pts)
            continue
        vals = np.asarray(fn(pts[:, 0] if d == 1 else pts), dtype=float)
        if np.any(vals > lambda_max * (1.0 + 1e-9)):
            raise DominatingBoundError(
                f"intensity exceeds lambda_max={lambda_max} (max seen {float(np.max(vals))})"
            )
        keep = rng.random(count) < vals / lambda_max if lambda_max > 0 else np.zeros(count, bool)
        observations.append(pts[keep])
    return PointPattern(tuple(observations), ndim=d)
