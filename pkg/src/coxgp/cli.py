"""Command-line interface: simulate patterns, fit intensities, evaluate fits.

Configuration comes from an optional flat key=value file plus command-line
overrides; every numeric output is serialised with 17 significant digits so
files read back exactly. Exit codes: 0 success, 2 configuration or parse
error, 3 numerical failure, 4 infeasible constraints.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from . import cox_inference, eval_metrics, point_process
from .constraints import ConstraintSpec, build_constraint_system
from .errors import (
    CoxGpError,
    DivergenceError,
    DominatingBoundError,
    EstimationFailureError,
    EventsParseError,
    FeasibilityError,
    InfeasibilityError,
    NumericalConditioningError,
    ParameterError,
)
from .finite_gp import make_grid
from .kernel import KernelParams
from .rng import spawn_seeds

_FMT = "%.17g"

_CONFIG_ERRORS = (ParameterError, EventsParseError, ValueError, OSError, KeyError)
_NUMERICAL_ERRORS = (NumericalConditioningError, DivergenceError, DominatingBoundError, EstimationFailureError)
_INFEASIBLE_ERRORS = (InfeasibilityError, FeasibilityError)


@dataclass
class ExperimentConfig:
    """Flat experiment settings shared by the subcommands."""

    domain: str | None = None
    m: str | None = None
    constraints: str = "nonnegative"
    variance: float | None = None
    lengthscales: str | None = None
    estimate: bool = False
    variance_bounds: str | None = None
    lengthscale_bounds: str | None = None
    budget: int = 12
    n_prior_samples: int = 64
    eta: float | None = None
    samples: int = 10_000
    burnin: int = 1_000
    orthant_mc: int = 200
    proposal_steps: int = 5
    seed: int = 0
    events: str | None = None
    out_dir: str = "."
    eval_grid: str | None = None
    replicates: int = 1
    chain_out: bool = False
    intensity: str | None = None
    alpha: float = 1.0
    beta: float = 1.0
    table_path: str | None = None
    n_observations: int = 1
    lambda_max: float | None = None
    out: str | None = None
    summary: str | None = None
    summary_dir: str | None = None

    def parsed_domain(self):
        if self.domain is None:
            return None
        return tuple(tuple(float(v) for v in part.split(":")) for part in self.domain.split(","))

    def parsed_constraints(self) -> tuple[ConstraintSpec, ...]:
        return tuple(ConstraintSpec.parse(p) for p in self.constraints.split(",") if p.strip())

    def parsed_lengthscales(self):
        if self.lengthscales is None:
            return None
        return tuple(float(v) for v in str(self.lengthscales).split(","))

    def parsed_bounds(self, text: str | None):
        if text is None:
            return None
        lo, hi = (float(v) for v in text.split(":"))
        return lo, hi


def _coerce(value: str, target_type):
    if target_type is bool:
        return value.strip().lower() in ("1", "true", "yes", "on")
    return target_type(value)


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    """Merge defaults, a key=value file and CLI overrides (highest priority)."""
    values: dict = {}
    field_types = {f.name: f.type for f in fields(ExperimentConfig)}
    base_types = {"variance": float, "eta": float, "lambda_max": float, "estimate": bool, "chain_out": bool,
                  "budget": int, "n_prior_samples": int, "samples": int, "burnin": int, "orthant_mc": int,
                  "proposal_steps": int, "seed": int, "replicates": int, "n_observations": int,
                  "alpha": float, "beta": float}
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ParameterError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
                key, _, val = line.partition("=")
                key, val = key.strip(), val.strip()
                if key not in field_types:
                    raise ParameterError(f"{path}:{lineno}: unknown configuration key {key!r}")
                if val == "":
                    continue
                values[key] = _coerce(val, base_types.get(key, str))
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    return ExperimentConfig(**values)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def write_events_csv(pattern: cox_inference.PointPattern, path: str) -> None:
    d = pattern.ndim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["obs"] + [f"x{i + 1}" for i in range(d)])
        for idx, obs in enumerate(pattern.observations, start=1):
            for row in obs:
                writer.writerow([idx] + [_FMT % v for v in row])


def read_events_csv(path: str) -> cox_inference.PointPattern:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EventsParseError("empty events file", line_number=1) from None
        if len(header) < 2 or header[0].strip() != "obs":
            raise EventsParseError("header must be obs,x1[,x2...]", line_number=1)
        d = len(header) - 1
        buckets: dict[int, list] = {}
        max_obs = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise EventsParseError(f"expected {d + 1} fields, got {len(row)}", line_number=lineno)
            try:
                idx = int(row[0])
                coords = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise EventsParseError(str(exc), line_number=lineno) from None
            if idx < 1:
                raise EventsParseError("observation index must be >= 1", line_number=lineno)
            buckets.setdefault(idx, []).append(coords)
            max_obs = max(max_obs, idx)
        max_obs = max(max_obs, 1)
        observations = tuple(
            np.asarray(buckets.get(i, []), dtype=float).reshape(-1, d) for i in range(1, max_obs + 1)
        )
    return cox_inference.PointPattern(observations, ndim=d)


def write_summary_csv(summary: cox_inference.IntensitySummary, path: str) -> None:
    d = summary.points.shape[1]
    qkeys = sorted(summary.quantiles)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i + 1}" for i in range(d)] + ["mean"] + [f"q{int(round(q * 100)):02d}" for q in qkeys])
        for i in range(len(summary.mean)):
            row = [_FMT % v for v in summary.points[i]]
            row.append(_FMT % summary.mean[i])
            row.extend(_FMT % summary.quantiles[q][i] for q in qkeys)
            writer.writerow(row)


def read_summary_csv(path: str):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        try:
            mean_col = header.index("mean")
        except ValueError:
            raise EventsParseError("summary file lacks a 'mean' column", line_number=1) from None
        pts, means = [], []
        for row in reader:
            if not row:
                continue
            pts.append([float(v) for v in row[:mean_col]])
            means.append(float(row[mean_col]))
    return np.asarray(pts), np.asarray(means)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _intensity_spec(cfg: ExperimentConfig) -> point_process.IntensitySpec:
    if cfg.intensity is None:
        raise ParameterError("an intensity family is required (key 'intensity')")
    family = cfg.intensity.strip()
    kwargs = {"domain": cfg.parsed_domain()}
    if family == "table":
        if cfg.table_path is None:
            raise ParameterError("table intensity requires table_path")
        xs, ys = [], []
        with open(cfg.table_path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header[:2]] != ["x", "value"]:
                raise EventsParseError("table file header must be x,value", line_number=1)
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    xs.append(float(row[0]))
                    ys.append(float(row[1]))
                except (ValueError, IndexError) as exc:
                    raise EventsParseError(str(exc), line_number=lineno) from None
        return point_process.IntensitySpec("table", table_x=tuple(xs), table_y=tuple(ys), **kwargs)
    return point_process.IntensitySpec(family, alpha=cfg.alpha, beta=cfg.beta, **kwargs)


def cmd_simulate(cfg: ExperimentConfig) -> int:
    spec = _intensity_spec(cfg)
    domain = cfg.parsed_domain() or spec.default_domain
    lambda_max = cfg.lambda_max if cfg.lambda_max is not None else spec.default_lambda_max()
    pattern = point_process.simulate_poisson(spec, domain, lambda_max, cfg.n_observations, cfg.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    out = cfg.out or os.path.join(cfg.out_dir, "events.csv")
    write_events_csv(pattern, out)
    for idx, obs in enumerate(pattern.observations, start=1):
        print(f"observation {idx}: {len(obs)} events")
    print(f"wrote {pattern.total_events} events to {out}")
    return 0


def _resolve_grid_and_params(cfg: ExperimentConfig, pattern, system_specs):
    domain = cfg.parsed_domain()
    if domain is None:
        raise ParameterError("fit requires a domain (key 'domain', e.g. 0:5 or 0:1,0:1)")
    ndim = len(domain)

    ells = cfg.parsed_lengthscales()
    bounds_var = cfg.parsed_bounds(cfg.variance_bounds)
    bounds_ell = cfg.parsed_bounds(cfg.lengthscale_bounds)
    if cfg.m is None or str(cfg.m).strip() == "auto":
        if ells is not None:
            rule_ells = ells if len(ells) == ndim else ells * ndim
        elif bounds_ell is not None:
            rule_ells = (math.sqrt(bounds_ell[0] * bounds_ell[1]),) * ndim
        else:
            raise ParameterError("m=auto needs lengthscales or lengthscale_bounds")
        m = cox_inference.default_knot_counts(domain, rule_ells)
    else:
        m = tuple(int(v) for v in str(cfg.m).split(","))
    grid = make_grid(domain, m)
    system = build_constraint_system(system_specs, grid)

    if cfg.estimate:
        if bounds_var is None or bounds_ell is None:
            raise ParameterError("estimate=true needs variance_bounds and lengthscale_bounds")
        search = [bounds_var] + [bounds_ell] * ndim
        params = cox_inference.estimate_hyperparams(
            pattern, grid, system, search, cfg.budget, cfg.seed, n_prior_samples=cfg.n_prior_samples
        )
        print(f"estimated variance={params.variance:.6g} lengthscales={params.lengthscales}")
    else:
        if cfg.variance is None or ells is None:
            raise ParameterError("fixed-kernel fits need variance and lengthscales (or estimate=true)")
        params = KernelParams(cfg.variance, ells if len(ells) == ndim else ells * ndim)
    return grid, system, params


def _evaluation_points(cfg: ExperimentConfig, grid):
    if cfg.eval_grid is not None:
        counts = tuple(int(v) for v in str(cfg.eval_grid).split(","))
        if len(counts) == 1:
            counts = counts * grid.ndim
    else:
        counts = (1000,) if grid.ndim == 1 else (32,) * grid.ndim
    axes = [np.linspace(a, b, c) for a, b, c in zip(grid.lower, grid.upper, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _fit_single(payload) -> dict:
    (pattern, grid, system, params, mh_config, points, out_dir, chain_out, label) = payload
    started = time.perf_counter()
    chain = cox_inference.mh_infer(pattern, grid, system, params, mh_config)
    wall = time.perf_counter() - started
    summary = cox_inference.posterior_intensity(chain, points)
    os.makedirs(out_dir, exist_ok=True)
    summary_path = os.path.join(out_dir, "summary.csv")
    write_summary_csv(summary, summary_path)
    if chain_out:
        np.savetxt(
            os.path.join(out_dir, "chain.csv"),
            chain.samples,
            delimiter=",",
            fmt=_FMT,
            header=",".join(f"xi{i}" for i in range(grid.size)),
            comments="",
        )
    ess = min(
        eval_metrics.ess_univariate(chain.samples[:, j])
        for j in range(0, grid.size, max(1, grid.size // 25))
    )
    diag = {
        "acceptance_rate_all": eval_metrics.acceptance_rate(chain, "all"),
        "acceptance_rate_post": eval_metrics.acceptance_rate(chain, "post_burn_in"),
        "ess_min": ess,
        "n_retained": chain.n_retained,
        "wall_time_s": wall,
        "ms_per_sample": 1000.0 * wall / max(1, mh_config.burn_in + mh_config.n_samples),
    }
    with open(os.path.join(out_dir, "diagnostics.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(diag.keys())
        writer.writerow(_FMT % v for v in diag.values())
    print(f"{label}: acceptance {diag['acceptance_rate_post']:.3f}, min ESS {ess:.1f}, {wall:.1f}s")
    return diag


def cmd_fit(cfg: ExperimentConfig) -> int:
    if cfg.events is None:
        raise ParameterError("fit requires an events file (key 'events')")
    pattern = read_events_csv(cfg.events)
    specs = cfg.parsed_constraints()
    grid, system, params = _resolve_grid_and_params(cfg, pattern, specs)
    eta = cfg.eta if cfg.eta is not None else (1e-3 if grid.ndim == 1 else 1e-4)
    init = cox_inference.initial_coefficients(pattern, grid, system)
    points = _evaluation_points(cfg, grid)

    payloads = []
    seeds = spawn_seeds(cfg.seed, cfg.replicates)
    for r in range(cfg.replicates):
        mh_config = cox_inference.MhConfig(
            eta=eta,
            n_samples=cfg.samples,
            burn_in=cfg.burnin,
            orthant_mc=cfg.orthant_mc,
            rng_seed=seeds[r],
            init=init,
            proposal_steps=cfg.proposal_steps,
        )
        out_dir = cfg.out_dir if cfg.replicates == 1 else os.path.join(cfg.out_dir, f"rep{r:02d}")
        payloads.append((pattern, grid, system, params, mh_config, points, out_dir, cfg.chain_out, f"replicate {r}"))

    if len(payloads) == 1:
        _fit_single(payloads[0])
    else:
        workers = min(len(payloads), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_fit_single, payloads))
    return 0


def cmd_evaluate(cfg: ExperimentConfig) -> int:
    spec = _intensity_spec(cfg)
    paths = []
    if cfg.summary is not None:
        paths.append(cfg.summary)
    if cfg.summary_dir is not None:
        for root, _, names in sorted(os.walk(cfg.summary_dir)):
            paths.extend(os.path.join(root, n) for n in sorted(names) if n == "summary.csv")
    if not paths:
        raise ParameterError("evaluate needs summary=FILE or summary_dir=DIR")

    rows = []
    for path in paths:
        pts, means = read_summary_csv(path)
        truth = np.asarray(spec.evaluate(pts[:, 0] if pts.shape[1] == 1 else pts), dtype=float)
        q2 = eval_metrics.q_squared(truth, means)
        acc, ess = math.nan, math.nan
        diag_path = os.path.join(os.path.dirname(path) or ".", "diagnostics.csv")
        if os.path.exists(diag_path):
            with open(diag_path, newline="") as fh:
                reader = csv.DictReader(fh)
                diag = next(reader, {})
                acc = float(diag.get("acceptance_rate_post", "nan"))
                ess = float(diag.get("ess_min", "nan"))
        rows.append((path, eval_metrics.MetricReport(q2=q2, smse=1.0 - q2, acceptance_rate=acc, ess_min=ess)))

    os.makedirs(cfg.out_dir, exist_ok=True)
    out = cfg.out or os.path.join(cfg.out_dir, "metrics.csv")
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "q2", "smse", "acceptance_rate", "ess_min"])
        for path, rep in rows:
            writer.writerow([path] + [_FMT % v for v in (rep.q2, rep.smse, rep.acceptance_rate, rep.ess_min)])
        if len(rows) > 1:
            q2s = np.array([rep.q2 for _, rep in rows])
            writer.writerow(["aggregate_mean", _FMT % q2s.mean(), _FMT % (1.0 - q2s.mean()), "", ""])
            writer.writerow(["aggregate_std", _FMT % q2s.std(ddof=1), "", "", ""])
    for path, rep in rows:
        print(f"{path}: Q^2 = {rep.q2:.4f}")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value configuration file")
    parser.add_argument("--domain", help="per-dimension bounds, e.g. 0:5 or 0:1,0:1")
    parser.add_argument("--m", help="knot counts per dimension, or 'auto'")
    parser.add_argument("--constraints", help="comma-separated kinds, e.g. nonnegative,nonincreasing")
    parser.add_argument("--variance", type=float)
    parser.add_argument("--lengthscales", help="comma-separated lengthscales")
    parser.add_argument("--eta", type=float, help="proposal scale factor")
    parser.add_argument("--samples", type=int, help="retained MH samples")
    parser.add_argument("--burnin", type=int)
    parser.add_argument("--orthant-mc", dest="orthant_mc", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out-dir", dest="out_dir")
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--intensity", help="toy1|toy2|toy3|weibull|gamma|table")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--table-path", dest="table_path")
    parser.add_argument("--lambda-max", dest="lambda_max", type=float)
    parser.add_argument("--n-observations", dest="n_observations", type=int)
    parser.add_argument("--events", help="events CSV path")
    parser.add_argument("--estimate", action="store_const", const=True, default=None)
    parser.add_argument("--variance-bounds", dest="variance_bounds", help="LO:HI")
    parser.add_argument("--lengthscale-bounds", dest="lengthscale_bounds", help="LO:HI")
    parser.add_argument("--budget", type=int)
    parser.add_argument("--eval-grid", dest="eval_grid")
    parser.add_argument("--chain-out", dest="chain_out", action="store_const", const=True, default=None)
    parser.add_argument("--out", help="output file path")
    parser.add_argument("--summary", help="summary CSV to evaluate")
    parser.add_argument("--summary-dir", dest="summary_dir", help="directory of replicate summaries")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coxgp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("simulate", cmd_simulate), ("fit", cmd_fit), ("evaluate", cmd_evaluate)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        k: v for k, v in vars(args).items() if k not in ("config", "command", "func") and v is not None
    }
    try:
        cfg = load_config(args.config, overrides)
        return args.func(cfg)
    except _INFEASIBLE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (CoxGpError,) + _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
