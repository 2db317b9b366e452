"""Monte-Carlo experiments: MSE over an epsilon grid, rate fits, Gronwall bounds.

Replicate ``r`` always uses seed ``base_seed + r`` and one fBm draw is shared
by every epsilon, so the epsilon dependence is measured on common random
numbers. Per-replicate errors are stored by index and reduced with
``math.fsum``; results do not depend on the thread count.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from .ddesolve import (
    DelaySpec,
    TrendField,
    crossing_time,
    delay_lag,
    euler_from_noise,
    solve_delay_ode,
)
from .errors import ConfigurationError, DomainError, FbmDelayError
from .estimator import (
    RESOLUTION_FACTOR,
    EstimatorConfig,
    estimate_trend_at_level,
    parse_bandwidth_rule,
)
from .fbm import HurstLike, TimeGrid, as_hurst, path_supremum, sample_fbm
from .kernels import KernelSpec, make_standard_kernel

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "PathwiseBoundReport",
    "theoretical_slope",
    "aligned_dt",
    "run_mse_experiment",
    "fit_rate",
    "check_lemma31",
    "export_report",
    "import_report",
    "read_report_csv",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ["epsilon", "level", "mse", "bias2", "variance", "n_clipped", "n_fallback"]
TRUTH_REFINEMENT = 10


def theoretical_slope(rule: str, H: float, smoothness=None) -> Optional[float]:
    """Exponent of epsilon in the MSE bound for the given bandwidth rule."""
    if rule == "theorem31":
        return 4.0 / (3.0 - H)
    if rule == "smooth":
        k, beta = smoothness
        return 2.0 * (k + beta) / (k - H + beta + 1.0)
    return None


def aligned_dt(target: float, tau: float, T: float) -> float:
    """Largest ``dt <= target`` that divides both ``tau`` and ``T``."""
    unit = Fraction(T).limit_denominator(10**6)
    if tau > 0:
        ft = Fraction(tau).limit_denominator(10**6)
        unit = Fraction(math.gcd(unit.numerator * ft.denominator, ft.numerator * unit.denominator),
                        unit.denominator * ft.denominator)
    steps = math.ceil(float(unit) / target * (1 - 1e-12))
    return float(unit) / steps


@dataclass(frozen=True)
class ExperimentConfig:
    trend: TrendField
    spec: DelaySpec
    H: float
    epsilons: tuple
    replications: int
    levels: tuple
    kernel: KernelSpec = field(default_factory=lambda: make_standard_kernel("epanechnikov"))
    bandwidth_rule: str = "theorem31"
    smoothness: Optional[tuple] = None
    bandwidth: Optional[float] = None
    dt: Optional[float] = None
    base_seed: int = 0
    fbm_method: str = "davies_harte"

    def __post_init__(self):
        h = as_hurst(self.H).value
        object.__setattr__(self, "H", h)
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        if self.smoothness is not None:
            object.__setattr__(self, "smoothness",
                               (int(self.smoothness[0]), float(self.smoothness[1])))
        if len(eps) < 4:
            raise ConfigurationError("need at least 4 epsilons for the rate regression")
        if any(not 0 < e < 1 for e in eps):
            raise ConfigurationError("every epsilon must lie in (0, 1)")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise ConfigurationError("epsilons must be strictly decreasing")
        if int(self.replications) != self.replications or self.replications < 100:
            raise ConfigurationError("replications must be an integer >= 100")
        if not self.levels:
            raise ConfigurationError("need at least one level")
        lo, hi = self.spec.admissible_levels(self.trend.alpha)
        for x in self.levels:
            if not lo < x < hi:
                raise ConfigurationError(f"level {x} outside the admissible window ({lo}, {hi})")
        for e in eps:
            self.estimator_config(e).check_horizon(self.spec.T)

    def estimator_config(self, epsilon: float) -> EstimatorConfig:
        return EstimatorConfig.from_rule(epsilon, self.H, self.spec.tau, self.bandwidth_rule,
                                         self.smoothness, self.bandwidth)

    def resolved_dt(self) -> float:
        if self.dt is not None:
            delay_lag(self.spec.tau, self.dt)
            TimeGrid.over(self.spec.T, self.dt)
            return float(self.dt)
        bw = self.estimator_config(min(self.epsilons)).bandwidth
        return aligned_dt(bw / RESOLUTION_FACTOR, self.spec.tau, self.spec.T)

    @property
    def theoretical_slope(self) -> Optional[float]:
        return theoretical_slope(self.bandwidth_rule, self.H, self.smoothness)

    def to_json(self) -> dict:
        if self.bandwidth_rule == "smooth":
            rule = {"smooth": {"k": self.smoothness[0], "beta": self.smoothness[1]}}
        elif self.bandwidth_rule == "manual":
            rule = {"manual": self.bandwidth}
        else:
            rule = self.bandwidth_rule
        return {
            "schema": 1,
            "trend": self.trend.to_json(),
            "spec": self.spec.to_json(),
            "H": self.H,
            "epsilons": list(self.epsilons),
            "replications": self.replications,
            "levels": list(self.levels),
            "kernel": self.kernel.to_json(),
            "bandwidth_rule": rule,
            "dt_rule": "auto" if self.dt is None else self.dt,
            "base_seed": self.base_seed,
            "fbm_method": self.fbm_method,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        missing = [k for k in ("trend", "spec", "H", "epsilons", "replications", "levels")
                   if k not in obj]
        if missing:
            raise ConfigurationError(f"experiment config is missing field(s): {', '.join(missing)}")
        if obj.get("schema", 1) != 1:
            raise ConfigurationError(f"unsupported schema {obj.get('schema')!r}")
        rule, smoothness, bandwidth = parse_bandwidth_rule(obj.get("bandwidth_rule", "theorem31"))
        dt_rule = obj.get("dt_rule", "auto")
        dt = None if dt_rule in (None, "auto") else float(dt_rule)
        return cls(
            trend=TrendField.from_json(obj["trend"]),
            spec=DelaySpec.from_json(obj["spec"]),
            H=obj["H"],
            epsilons=tuple(obj["epsilons"]),
            replications=obj["replications"],
            levels=tuple(obj["levels"]),
            kernel=KernelSpec.from_json(obj.get("kernel", {"name": "epanechnikov"})),
            bandwidth_rule=rule,
            smoothness=smoothness,
            bandwidth=bandwidth,
            dt=dt,
            base_seed=int(obj.get("base_seed", 0)),
            fbm_method=obj.get("fbm_method", "davies_harte"),
        )


@dataclass
class ExperimentReport:
    """MSE table over ``(epsilon, level)`` cells plus log-log rate fits."""

    config: dict
    dt: float
    cells: list
    fit: dict
    level_fits: list
    theoretical_slope: Optional[float]

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "dt": self.dt,
            "theoretical_slope": self.theoretical_slope,
            "cells": self.cells,
            "regression": self.fit,
            "level_regressions": self.level_fits,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentReport":
        return cls(obj["config"], obj["dt"], obj["cells"], obj["regression"],
                   obj["level_regressions"], obj["theoretical_slope"])

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return json.dumps(self.to_json(), sort_keys=True) == json.dumps(other.to_json(), sort_keys=True)

    def cell(self, epsilon: float, level: float) -> dict:
        for c in self.cells:
            if c["epsilon"] == epsilon and c["level"] == level:
                return c
        raise KeyError((epsilon, level))


def fit_rate(points) -> tuple:
    """Least squares of ``log(mse)`` on ``log(eps)``: ``(slope, intercept, max_residual)``."""
    pts = [(float(e), float(m)) for e, m in points]
    if len(pts) < 3:
        raise ConfigurationError("fit_rate needs at least 3 points")
    if any(not (e > 0 and m > 0) for e, m in pts):
        raise DomainError("fit_rate needs positive epsilon and mse values")
    x = np.log([e for e, _ in pts])
    y = np.log([m for _, m in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


def _fit_block(eps, mse) -> dict:
    pts = [(e, m) for e, m in zip(eps, mse) if math.isfinite(m) and m > 0]
    if len(pts) < 3:
        return {"slope": None, "intercept": None, "max_residual": None, "residuals": []}
    slope, intercept, maxres = fit_rate(pts)
    res = [math.log(m) - (slope * math.log(e) + intercept) for e, m in pts]
    return {"slope": slope, "intercept": intercept, "max_residual": maxres, "residuals": res}


def _map_replicates(fn, n: int, threads: int):
    if threads <= 1:
        for r in range(n):
            fn(r)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for _ in pool.map(fn, range(n)):
            pass


def run_mse_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Empirical MSE of the level estimator for every ``(epsilon, level)`` cell.

    Replicates whose hitting time is edge-clipped or fell back to ``T - tau``
    are excluded from the moments and counted separately.
    """
    S, spec = config.trend, config.spec
    dt = config.resolved_dt()
    grid = TimeGrid.over(spec.T, dt)
    x_fine = solve_delay_ode(S, spec, dt / TRUTH_REFINEMENT)
    t_x = [crossing_time(x_fine, lvl, spec.tau) for lvl in config.levels]
    truth = [S(t, lvl) for t, lvl in zip(t_x, config.levels)]

    est_cfgs = [config.estimator_config(e) for e in config.epsilons]
    for e, ec in zip(config.epsilons, est_cfgs):
        if ec.bandwidth < RESOLUTION_FACTOR * dt * (1 - 1e-12):
            raise ConfigurationError(
                f"epsilon={e}: bandwidth {ec.bandwidth!r} needs dt <= "
                f"{ec.bandwidth / RESOLUTION_FACTOR!r}, got dt={dt!r}"
            )

    R = config.replications
    ne, nl = len(config.epsilons), len(config.levels)
    errs = np.zeros((ne, nl, R))
    clipped = np.zeros((ne, nl, R), dtype=bool)
    fallback = np.zeros((ne, nl, R), dtype=bool)

    def one(r):
        W = sample_fbm(grid, config.H, config.base_seed + r, config.fbm_method)
        for i, (eps, ec) in enumerate(zip(config.epsilons, est_cfgs)):
            X = euler_from_noise(S, spec, eps, W)
            for j, lvl in enumerate(config.levels):
                try:
                    est = estimate_trend_at_level(X, lvl, ec, config.kernel,
                                                  alpha=S.alpha, x0=spec.x0)
                except FbmDelayError as exc:
                    raise type(exc)(f"epsilon={eps}, level={lvl}: {exc}") from exc
                errs[i, j, r] = est.value - truth[j]
                clipped[i, j, r] = est.edge_clipped
                fallback[i, j, r] = est.fallback_used

    _map_replicates(one, R, threads)

    cells = []
    for i, eps in enumerate(config.epsilons):
        for j, lvl in enumerate(config.levels):
            keep = ~(clipped[i, j] | fallback[i, j])
            e = errs[i, j][keep]
            n = int(e.size)
            if n:
                bias = math.fsum(e) / n
                sq = e * e
                mse = math.fsum(sq) / n
                var = math.fsum((e - bias) ** 2) / n
                mse_var = math.fsum((sq - mse) ** 2) / n
                se = math.sqrt(mse_var / n)
            else:
                bias = mse = var = se = math.nan
            cells.append({
                "epsilon": eps,
                "level": lvl,
                "mse": mse,
                "bias2": bias * bias,
                "variance": var,
                "n_clipped": int(np.count_nonzero(clipped[i, j])),
                "n_fallback": int(np.count_nonzero(fallback[i, j])),
                "n_used": n,
                "mse_se": se,
                "bias": bias,
                "bandwidth": est_cfgs[i].bandwidth,
                "t_x": t_x[j],
                "truth": truth[j],
            })

    level_fits = []
    for j, lvl in enumerate(config.levels):
        mse = [cells[i * nl + j]["mse"] for i in range(ne)]
        level_fits.append({"level": lvl, **_fit_block(config.epsilons, mse)})
    pooled = [math.fsum(cells[i * nl + j]["mse"] for j in range(nl)) / nl for i in range(ne)]
    return ExperimentReport(
        config=config.to_json(),
        dt=dt,
        cells=cells,
        fit=_fit_block(config.epsilons, pooled),
        level_fits=level_fits,
        theoretical_slope=config.theoretical_slope,
    )


@dataclass
class PathwiseBoundReport:
    """Pathwise and mean-square checks of ``sup|X - x| <= e^{LT} eps sup|W|``."""

    epsilon: float
    replications: int
    dt: float
    gronwall_constant: float
    slack: float
    violations: list
    sup_dev: np.ndarray
    sup_w: np.ndarray
    H: float
    T: float

    @property
    def pathwise_ok(self) -> bool:
        return not self.violations

    @property
    def mean_sup_dev_sq(self) -> float:
        return math.fsum(self.sup_dev**2) / self.replications

    @property
    def normalized_mean(self) -> float:
        """``E sup|X - x|^2 / eps^2``; stays bounded as ``eps -> 0``."""
        return self.mean_sup_dev_sq / self.epsilon**2 if self.epsilon > 0 else math.nan

    @property
    def sup_moment_constant(self) -> float:
        """Empirical ``E sup|W|^2 / T^{2H}``."""
        return math.fsum(self.sup_w**2) / self.replications / self.T ** (2 * self.H)

    @property
    def mean_bound(self) -> float:
        """``e^{2LT} * sup_moment_constant * eps^2 * T^{2H}``."""
        return (self.gronwall_constant**2 * self.sup_moment_constant
                * self.epsilon**2 * self.T ** (2 * self.H))

    @property
    def mean_ok(self) -> bool:
        return math.sqrt(self.mean_sup_dev_sq) <= math.sqrt(self.mean_bound) + self.slack

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "replications": self.replications,
            "dt": self.dt,
            "gronwall_constant": self.gronwall_constant,
            "slack": self.slack,
            "n_violations": len(self.violations),
            "violations": self.violations,
            "mean_sup_dev_sq": self.mean_sup_dev_sq,
            "normalized_mean": self.normalized_mean,
            "mean_bound": self.mean_bound,
            "pathwise_ok": self.pathwise_ok,
            "mean_ok": self.mean_ok,
        }


def check_lemma31(
    trend: TrendField,
    spec: DelaySpec,
    H: HurstLike,
    epsilon: float,
    replications: int,
    seed: int,
    dt: float = 5e-4,
    threads: int = 1,
    method: str = "davies_harte",
) -> PathwiseBoundReport:
    """Compare Euler paths with the RK4 noiseless solution on the same grid.

    A violation is a replicate with ``sup|X - x|`` above
    ``e^{LT} eps sup|W| + 10 dt sup|S|``; the slack absorbs the
    first-order Euler error.
    """
    h = as_hurst(H)
    x = solve_delay_ode(trend, spec, dt)
    grid = x.grid
    C = math.exp(trend.lip_x * spec.T)
    slack = 10.0 * dt * trend.sup_bound
    sup_dev = np.zeros(replications)
    sup_w = np.zeros(replications)

    def one(r):
        W = sample_fbm(grid, h, seed + r, method)
        X = euler_from_noise(trend, spec, epsilon, W)
        sup_dev[r] = float(np.max(np.abs(X.values - x.values)))
        sup_w[r] = path_supremum(W)

    _map_replicates(one, replications, threads)
    bound = C * epsilon * sup_w + slack
    bad = np.flatnonzero(sup_dev > bound)
    violations = [{"replicate": int(r), "seed": int(seed + r),
                   "excess": float(sup_dev[r] - bound[r])} for r in bad]
    return PathwiseBoundReport(float(epsilon), int(replications), float(dt), C, slack,
                         violations, sup_dev, sup_w, h.value, spec.T)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def export_report(report: ExperimentReport, path, fmt: str | None = None) -> None:
    """Write the report as CSV (one row per cell) or JSON (everything)."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                wr = csv.writer(fh, lineterminator="\n")
                wr.writerow(CSV_COLUMNS)
                for c in report.cells:
                    wr.writerow([_fmt(c[k]) for k in CSV_COLUMNS])
        elif fmt == "json":
            path.write_text(json.dumps(report.to_json(), indent=2) + "\n")
        else:
            raise ConfigurationError(f"unknown report format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def import_report(path) -> ExperimentReport:
    """Read a JSON report written by :func:`export_report`."""
    return ExperimentReport.from_json(json.loads(Path(path).read_text()))


def read_report_csv(path) -> list:
    """Rows of a CSV report as dicts with float/int values."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({k: (int(r[k]) if k.startswith("n_") else float(r[k])) for k in CSV_COLUMNS})
    return out
