"""Fit-quality metrics and MCMC chain diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ChainStateError, DegenerateReferenceError, ParameterError, ShapeError


@dataclass(frozen=True)
class MetricReport:
    """Per-run quality and sampler diagnostics; q2 is always 1 - smse."""

    q2: float
    smse: float
    acceptance_rate: float = math.nan
    ess_min: float = math.nan

    def __post_init__(self):
        if np.isfinite(self.q2) and abs((1.0 - self.smse) - self.q2) > 1e-9 * max(1.0, abs(self.smse)):
            raise ParameterError("q2 must equal 1 - smse")


def smse(true_values, estimated_values) -> float:
    """Mean squared error standardised by the population variance of the truth."""
    t = np.asarray(true_values, dtype=float)
    e = np.asarray(estimated_values, dtype=float)
    if t.shape != e.shape:
        raise ShapeError(f"length mismatch: {t.shape} vs {e.shape}")
    if t.size < 2:
        raise ParameterError("at least two evaluation points are required")
    var = float(np.var(t))
    if var == 0.0:
        raise DegenerateReferenceError("true values are constant; SMSE is undefined")
    return float(np.mean((t - e) ** 2) / var)


def q_squared(true_values, estimated_values) -> float:
    """1 - SMSE: 1 for a perfect estimate, 0 for the mean-intensity baseline."""
    return 1.0 - smse(true_values, estimated_values)


def acceptance_rate(chain, window: str = "post_burn_in") -> float:
    """Fraction of accepted proposals over all steps or post burn-in only."""
    if window not in ("all", "post_burn_in"):
        raise ParameterError(f"window must be 'all' or 'post_burn_in', got {window!r}")
    accepted = np.asarray(chain.accepted, dtype=bool)
    if accepted.size == 0:
        raise ChainStateError("chain has an empty acceptance log")
    if window == "post_burn_in":
        accepted = accepted[chain.config.burn_in :]
        if accepted.size == 0:
            raise ChainStateError("no post-burn-in steps in the acceptance log")
    return float(np.mean(accepted))


def ess_univariate(series) -> float:
    """Effective sample size N / (1 + 2 sum rho_k) of a scalar MCMC trace.

    Autocorrelations are summed over Geyer's initial positive sequence
    (consecutive lag pairs while their sum stays positive); the result is
    clipped to [0, N]. A constant series returns 0 by convention.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ShapeError("series must be one-dimensional")
    n = x.size
    if n < 10:
        raise ParameterError("need at least 10 samples for an ESS estimate")
    centred = x - x.mean()
    if np.all(centred == 0):
        return 0.0
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centred, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    rho = acov / acov[0]

    tau = -1.0
    for t in range(0, n // 2):
        pair = rho[2 * t] + (rho[2 * t + 1] if 2 * t + 1 < n else 0.0)
        if pair <= 0:
            break
        tau += 2.0 * pair
    tau = max(tau, 1e-12)
    return float(np.clip(n / tau, 0.0, n))
