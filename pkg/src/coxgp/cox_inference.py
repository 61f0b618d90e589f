"""Cox-process likelihood, posterior and the constrained Metropolis-Hastings sampler.

The posterior over knot coefficients combines a (truncated) Gaussian prior
with the closed-form Poisson likelihood of the piecewise-linear intensity.
Proposals are mean-shifted truncated Gaussians drawn by exact HMC, and the
acceptance ratio carries the region-mass correction estimated by the tools
in :mod:`coxgp.tmvn`.  Note that all likelihood values omit the constant
-log(n!) term, which cancels from every ratio used here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.ndimage import uniform_filter
from scipy.optimize import minimize
from scipy.special import logsumexp

from .constraints import ConstraintSystem, check_satisfied
from .errors import (
    ChainStateError,
    EstimationFailureError,
    FeasibilityError,
    ParameterError,
    ShapeError,
)
from .finite_gp import KnotGrid, basis_matrix, integration_weights
from .kernel import KernelParams, covariance_matrix, jittered_cholesky
from .rng import as_generator
from .tmvn import SequentialBoxEstimate, TruncatedGaussianSampler, region_log_ratio, strictly_interior


@dataclass(frozen=True)
class PointPattern:
    """One or more independent observations of event coordinates."""

    observations: tuple[np.ndarray, ...]
    ndim: int | None = None

    def __post_init__(self):
        if len(self.observations) < 1:
            raise ParameterError("a point pattern needs at least one observation (it may be empty)")
        d = self.ndim
        coerced = []
        for obs in self.observations:
            arr = np.asarray(obs, dtype=float)
            if arr.size == 0:
                arr = arr.reshape(0, d if d else 1)
            elif arr.ndim == 1:
                arr = arr.reshape(-1, 1)
            if arr.ndim != 2:
                raise ShapeError("each observation must be an (n_events, d) array")
            if d is None and arr.shape[0] > 0:
                d = arr.shape[1]
            coerced.append(arr)
        d = d or 1
        coerced = [a.reshape(0, d) if a.size == 0 else a for a in coerced]
        for arr in coerced:
            if arr.shape[1] != d:
                raise ShapeError("observations disagree on the event dimension")
            if not np.all(np.isfinite(arr)):
                raise ParameterError("event coordinates must be finite")
        object.__setattr__(self, "observations", tuple(coerced))
        object.__setattr__(self, "ndim", d)

    @classmethod
    def single(cls, events, ndim: int | None = None) -> "PointPattern":
        return cls((np.asarray(events, dtype=float),), ndim=ndim)

    @property
    def n_observations(self) -> int:
        return len(self.observations)

    @property
    def total_events(self) -> int:
        return int(sum(len(o) for o in self.observations))

    def events_concatenated(self) -> np.ndarray:
        return np.concatenate(self.observations, axis=0)


@dataclass(frozen=True)
class MhConfig:
    """Settings of the Metropolis-Hastings run."""

    eta: float = 1e-3
    n_samples: int = 10_000
    burn_in: int = 1_000
    orthant_mc: int = 200
    rng_seed: int = 0
    init: np.ndarray | None = None
    proposal_steps: int = 5

    def __post_init__(self):
        if self.eta <= 0:
            raise ParameterError("eta must be positive")
        if self.n_samples < 1 or self.burn_in < 0:
            raise ParameterError("need n_samples >= 1 and burn_in >= 0")
        if self.orthant_mc < 2:
            raise ParameterError("orthant_mc must be at least 2")
        if self.proposal_steps < 1:
            raise ParameterError("proposal_steps must be at least 1")


@dataclass(frozen=True)
class PosteriorChain:
    """Retained MH samples plus the full acceptance log."""

    samples: np.ndarray
    accepted: np.ndarray
    config: MhConfig
    grid: KnotGrid
    system: ConstraintSystem
    params: KernelParams

    @property
    def n_retained(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class IntensitySummary:
    """Pointwise posterior mean and quantiles of the intensity."""

    points: np.ndarray
    mean: np.ndarray
    quantiles: dict[float, np.ndarray]


class PrecisionForm:
    """Evaluates chi^T Gamma^-1 chi through a Cholesky factor of Gamma."""

    def __init__(self, gamma=None, chol=None):
        self.chol = np.asarray(chol, float) if chol is not None else jittered_cholesky(np.asarray(gamma, float))

    def quad(self, x) -> float:
        z = solve_triangular(self.chol, np.asarray(x, dtype=float), lower=True)
        return float(z @ z)


def log_likelihood(coeffs, events, grid: KnotGrid, weights) -> float:
    """Poisson log likelihood of one observation (without the -log n! term).

    Returns -mu + sum_i log Lambda(x_i); -inf whenever the interpolated
    intensity vanishes (or is negative) at an event.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if coeffs.shape != (grid.size,) or weights.shape != (grid.size,):
        raise ShapeError("coefficients and weights must match the grid size")
    mu = float(weights @ coeffs)
    events = np.asarray(events, dtype=float)
    if events.size == 0:
        return -mu
    values = basis_matrix(grid.as_points(events), grid) @ coeffs
    if np.min(values) <= 0.0:
        return -math.inf
    return -mu + float(np.sum(np.log(values)))


def log_unnormalized_posterior(coeffs, pattern: PointPattern, grid: KnotGrid, weights, gamma_inverse_form) -> float:
    """Log posterior kernel: Gaussian prior exponent plus all observation likelihoods.

    ``gamma_inverse_form`` is either a precision matrix or an object with a
    ``quad(x)`` method (see PrecisionForm). The truncated-prior normaliser is
    constant in the coefficients and omitted; coefficients with negative
    entries are outside the prior support and give -inf.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if isinstance(gamma_inverse_form, np.ndarray):
        quad = float(coeffs @ gamma_inverse_form @ coeffs)
    else:
        quad = gamma_inverse_form.quad(coeffs)
    if np.any(coeffs < 0):
        return -math.inf
    total = -0.5 * quad
    for obs in pattern.observations:
        ll = log_likelihood(coeffs, obs, grid, weights)
        if ll == -math.inf:
            return -math.inf
        total += ll
    return total


def default_knot_counts(domain, lengthscales, cap: int = 200) -> tuple[int, ...]:
    """Rule-of-thumb knot counts: 10 * range / lengthscale per dimension."""
    dom = np.atleast_2d(np.asarray(domain, dtype=float))
    ells = np.atleast_1d(np.asarray(lengthscales, dtype=float))
    if len(ells) != len(dom):
        raise ShapeError("one lengthscale per dimension is required")
    counts = np.round(10.0 * (dom[:, 1] - dom[:, 0]) / ells).astype(int)
    return tuple(int(np.clip(c, 2, cap)) for c in counts)


def initial_coefficients(
    pattern: PointPattern,
    grid: KnotGrid,
    system: ConstraintSystem,
    params: KernelParams | None = None,
    ridge: float = 0.02,
) -> np.ndarray:
    """Data-driven strictly feasible starting point.

    Basis-weighted event counts scaled by the integration weights estimate
    the local rate. When kernel parameters are given the raw estimate is
    smoothed by the prior covariance (a ridge smoother Gamma (Gamma + tau I)^-1),
    which keeps the start inside the smooth manifold the prior supports;
    a rough start has an enormous prior penalty that a small-step chain takes
    very long to shed. The estimate is then floored away from zero, pushed
    through any monotone projections and blended toward the system's feasible
    point until strictly interior.
    """
    weights = integration_weights(grid)
    events = pattern.events_concatenated()
    if len(events) == 0:
        return system.feasible_point.copy()
    counts = np.asarray(basis_matrix(grid.as_points(events), grid).sum(axis=0)).ravel()
    rate = counts / (pattern.n_observations * weights)

    positive_mean = rate[rate > 0].mean() if np.any(rate > 0) else 1.0
    smoother = None
    if params is not None:
        # floor ABOVE the truncated-prior equilibrium rather than below it:
        # proposals conditioned on the region drift away from the boundary, so
        # the region-mass ratio blocks ascent from a too-low start while
        # descent from a too-high one is favoured
        floor = max(0.01 * positive_mean, 0.25 * math.sqrt(params.variance))
        gamma = covariance_matrix(grid, params)
        tau = ridge * params.variance
        solve = np.linalg.inv(gamma + tau * np.eye(grid.size))
        smoother = lambda v: gamma @ (solve @ v)
        # clip first, smooth last: the smoother output lies in the prior's
        # smooth span, so its quadratic penalty stays bounded, whereas any
        # clipping after smoothing leaves kinks costing 1e5+ under a dense
        # SE covariance
        rate = smoother(np.maximum(rate, floor))
    else:
        rate = uniform_filter(rate.reshape(grid.shape), size=3, mode="nearest").ravel()
        rate = np.maximum(rate, 0.01 * positive_mean)

    projected = False
    for spec in system.specs:
        if spec.kind not in ("nonincreasing", "nondecreasing"):
            continue
        shaped = rate.reshape(grid.shape)
        for d in spec.dims if spec.dims is not None else range(grid.ndim):
            increasing = spec.kind == "nondecreasing"
            shaped = np.apply_along_axis(lambda v: _isotonic(v, increasing), d, shaped)
        rate = shaped.ravel()
        projected = True
    if projected and smoother is not None:
        rate = smoother(rate)
    return strictly_interior(rate, system)


def _isotonic(values: np.ndarray, increasing: bool) -> np.ndarray:
    """Pool-adjacent-violators projection onto monotone sequences."""
    y = np.asarray(values, dtype=float)
    if not increasing:
        return _isotonic(y[::-1], True)[::-1]
    level = list(y)
    weight = [1.0] * len(y)
    i = 0
    while i < len(level) - 1:
        if level[i] <= level[i + 1] + 1e-15:
            i += 1
            continue
        merged = (level[i] * weight[i] + level[i + 1] * weight[i + 1]) / (weight[i] + weight[i + 1])
        weight[i] += weight[i + 1]
        level[i] = merged
        del level[i + 1], weight[i + 1]
        if i > 0:
            i -= 1
    return np.repeat(level, np.asarray(weight, dtype=int))


def mh_infer(
    pattern: PointPattern,
    grid: KnotGrid,
    system: ConstraintSystem,
    params: KernelParams,
    config: MhConfig,
) -> PosteriorChain:
    """Metropolis-Hastings with truncated Gaussian proposals N(chi, eta * Gamma).

    Each step draws the proposal by exact HMC restricted to the constraint
    region, then accepts with probability min(1, posterior ratio times the
    region-mass ratio of the two proposal centres). Every retained sample
    satisfies the constraint system.
    """
    if pattern.ndim != grid.ndim:
        raise ShapeError("pattern and grid dimensions differ")
    if system.dim != grid.size:
        raise ShapeError("constraint system does not match the grid size")
    gamma = covariance_matrix(grid, params)
    chol = np.linalg.cholesky(gamma)
    weights = integration_weights(grid)
    n_obs = pattern.n_observations
    events = pattern.events_concatenated()
    event_basis = basis_matrix(grid.as_points(events), grid) if len(events) else None

    def log_post(chi: np.ndarray) -> float:
        z = solve_triangular(chol, chi, lower=True)
        value = -0.5 * float(z @ z) - n_obs * float(weights @ chi)
        if event_basis is not None:
            vals = event_basis @ chi
            if np.min(vals) <= 0.0:
                return -math.inf
            value += float(np.sum(np.log(vals)))
        return value

    chi = np.asarray(config.init, dtype=float) if config.init is not None else system.feasible_point.copy()
    if chi.shape != (grid.size,):
        raise ShapeError("init must have one coefficient per knot")
    if np.min(system.margins(chi)) <= 0:
        raise FeasibilityError("initial coefficients must strictly satisfy the constraints")
    current_lp = log_post(chi)
    if current_lp == -math.inf:
        raise FeasibilityError("initial coefficients have zero posterior density (an event lies at zero intensity)")

    sigma = config.eta * gamma
    sampler = TruncatedGaussianSampler(sigma, system, chol=math.sqrt(config.eta) * chol)
    box = system.box_form
    box_cache = (
        SequentialBoxEstimate(box.matrix @ sigma @ box.matrix.T, box.lower, box.upper, mean=box.matrix @ chi)
        if box is not None
        else None
    )

    rng = as_generator(config.rng_seed)
    total = config.burn_in + config.n_samples
    samples = np.empty((config.n_samples, grid.size))
    accepted = np.zeros(total, dtype=bool)
    for k in range(total):
        start = strictly_interior(chi, system)
        proposal = sampler.sample(chi, start, 1, rng, initial_skip=config.proposal_steps - 1)[0]
        lp_prop = log_post(proposal)
        if lp_prop > -math.inf:
            log_beta = region_log_ratio(
                sigma,
                system,
                chi,
                proposal,
                config.orthant_mc,
                rng,
                sampler=sampler,
                box_cache=box_cache,
            )
            log_alpha = lp_prop - current_lp + log_beta
            if log_alpha >= 0 or math.log(rng.random()) < log_alpha:
                chi = proposal
                current_lp = lp_prop
                accepted[k] = True
        if k >= config.burn_in:
            samples[k - config.burn_in] = chi
    return PosteriorChain(samples, accepted, config, grid, system, params)


def posterior_intensity(chain: PosteriorChain, query, quantiles=(0.05, 0.5, 0.95)) -> IntensitySummary:
    """Pointwise mean and empirical quantiles of the intensity over the chain."""
    if chain.samples.size == 0:
        raise ChainStateError("cannot summarise an empty chain")
    pts = chain.grid.as_points(query)
    basis = basis_matrix(pts, chain.grid)
    values = basis.dot(chain.samples.T).T
    mean = values.mean(axis=0)
    qs = np.quantile(values, quantiles, axis=0)
    return IntensitySummary(pts, mean, {float(q): qs[i] for i, q in enumerate(quantiles)})


def sample_prior_coefficients(
    grid: KnotGrid,
    system: ConstraintSystem,
    params: KernelParams,
    n: int,
    rng_seed,
    initial_skip: int = 8,
) -> np.ndarray:
    """Draws from the zero-mean constrained Gaussian prior over coefficients."""
    gamma = covariance_matrix(grid, params)
    sampler = TruncatedGaussianSampler(gamma, system)
    init = strictly_interior(math.sqrt(params.variance) * system.feasible_point, system)
    return sampler.sample(np.zeros(grid.size), init, n, rng_seed, initial_skip=initial_skip)


def estimate_hyperparams(
    pattern: PointPattern,
    grid: KnotGrid,
    system: ConstraintSystem,
    search,
    budget: int,
    rng_seed,
    n_prior_samples: int = 64,
) -> KernelParams:
    """Maximise a Monte Carlo estimate of the marginal likelihood over (variance, lengthscales).

    ``search`` gives (low, high) bounds for the variance followed by one pair
    per lengthscale. Candidates are scored by averaging the likelihood over
    prior-constrained coefficient draws generated with common random numbers,
    so the objective is deterministic and comparable across candidates; a
    coarse log-space lattice is followed by Nelder-Mead refinement from the
    best starts until the evaluation budget is spent.
    """
    bounds = np.atleast_2d(np.asarray(search, dtype=float))
    if bounds.shape != (grid.ndim + 1, 2):
        raise ShapeError(f"search must give bounds for variance and {grid.ndim} lengthscales")
    if np.any(bounds <= 0) or np.any(bounds[:, 0] > bounds[:, 1]):
        raise ParameterError("search bounds must be positive with low <= high")
    if budget < 1:
        raise ParameterError("budget must be at least 1")

    weights = integration_weights(grid)
    n_obs = pattern.n_observations
    events = pattern.events_concatenated()
    event_basis = basis_matrix(grid.as_points(events), grid) if len(events) else None
    crn_seed = np.random.SeedSequence(rng_seed if not isinstance(rng_seed, np.random.Generator) else rng_seed.integers(2**63))

    def objective(theta: np.ndarray) -> float:
        params = KernelParams(theta[0], tuple(theta[1:]))
        draws = sample_prior_coefficients(grid, system, params, n_prior_samples, np.random.default_rng(crn_seed))
        mus = draws @ weights
        lls = -n_obs * mus
        if event_basis is not None:
            vals = event_basis.dot(draws.T)
            with np.errstate(divide="ignore", invalid="ignore"):
                logs = np.where(vals > 0, np.log(np.maximum(vals, 1e-300)), -math.inf)
            lls = lls + logs.sum(axis=0)
        finite = np.isfinite(lls)
        if not np.any(finite):
            return -math.inf
        return float(logsumexp(lls[finite]) - math.log(len(lls)))

    log_lo, log_hi = np.log(bounds[:, 0]), np.log(bounds[:, 1])
    free = log_hi > log_lo
    n_free = int(np.sum(free))
    n_per = int(np.clip(math.floor(budget ** (1.0 / n_free)), 1, 5)) if n_free else 1
    axes = [
        np.linspace(lo, hi, n_per) if (is_free and n_per > 1) else np.array([0.5 * (lo + hi)])
        for lo, hi, is_free in zip(log_lo, log_hi, free)
    ]
    candidates = list(itertools.product(*axes))[:budget]

    evals = 0
    best_theta, best_value = None, -math.inf
    scored = []
    for cand in candidates:
        theta = np.exp(np.asarray(cand))
        value = objective(theta)
        evals += 1
        scored.append((value, np.asarray(cand)))
        if value > best_value:
            best_theta, best_value = theta, value

    scored.sort(key=lambda t: -t[0] if np.isfinite(t[0]) else math.inf)
    remaining = budget - evals
    starts = [c for v, c in scored[:3] if np.isfinite(v)]
    if remaining > 0 and n_free and starts:
        per_start = max(remaining // len(starts), n_free + 2)
        for start in starts:
            if evals >= budget:
                break

            def neg(log_theta_free):
                log_theta = start.copy()
                log_theta[free] = log_theta_free
                return -objective(np.exp(log_theta))

            res = minimize(
                neg,
                start[free],
                method="Nelder-Mead",
                bounds=list(zip(log_lo[free], log_hi[free])),
                options={"maxfev": per_start, "xatol": 1e-3, "fatol": 1e-3},
            )
            evals += res.nfev
            if -res.fun > best_value:
                full = start.copy()
                full[free] = res.x
                best_theta, best_value = np.exp(full), -res.fun

    if best_theta is None or best_value == -math.inf:
        raise EstimationFailureError("all hyper-parameter candidates had zero marginal likelihood")
    return KernelParams(float(best_theta[0]), tuple(float(v) for v in best_theta[1:]))


def verify_chain_constraints(chain: PosteriorChain, tol_scale: float = 1e-9) -> bool:
    """True iff every retained sample satisfies the system at tol_scale * sigma."""
    tol = tol_scale * math.sqrt(chain.params.variance)
    return all(check_satisfied(chain.system, s, tol) for s in chain.samples)
