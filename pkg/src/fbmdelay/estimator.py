"""Kernel-type trend estimators built on Riemann-Stieltjes sums of the path.

``S_eps(x)`` centres the kernel at the hitting time of level ``x`` by the
delayed path; ``f_eps(t)`` centres it at a fixed time and needs no delay.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError, EdgeError, OutOfRangeError
from .fbm import HurstLike, SamplePath, as_hurst
from .kernels import KernelSpec, eval_kernel

__all__ = [
    "RESOLUTION_FACTOR",
    "EstimatorConfig",
    "TrendEstimate",
    "bandwidth_theorem31",
    "bandwidth_smooth",
    "parse_bandwidth_rule",
    "hitting_time",
    "stieltjes_convolution",
    "estimate_trend_at_level",
    "estimate_trend_at_time",
]

RESOLUTION_FACTOR = 50


def bandwidth_theorem31(epsilon: float, H: HurstLike) -> float:
    """Rate-optimal bandwidth ``eps^(1/(3-H))`` for order-1 kernels."""
    h = float(H)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if epsilon >= 1:
        warnings.warn(
            f"epsilon={epsilon} >= 1 is outside the small-noise regime", RuntimeWarning,
            stacklevel=2,
        )
    return epsilon ** (1.0 / (3.0 - h))


def bandwidth_smooth(epsilon: float, H: HurstLike, k: int, beta: float) -> float:
    """Bandwidth ``eps^(1/(k - H + beta + 1))`` for a trend of smoothness ``(k, beta)``."""
    h = float(H)
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if int(k) != k or k < 1:
        raise DomainError(f"k must be an integer >= 1, got {k!r}")
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta!r}")
    return epsilon ** (1.0 / (k - h + beta + 1.0))


def parse_bandwidth_rule(rule) -> tuple:
    """JSON bandwidth rule to ``(rule, smoothness, bandwidth)``.

    Accepts ``"theorem31"``, ``{"smooth": {"k": 3, "beta": 1}}`` or
    ``{"manual": 0.2}``.
    """
    if rule == "theorem31":
        return "theorem31", None, None
    if isinstance(rule, dict) and len(rule) == 1:
        if "smooth" in rule:
            sm = rule["smooth"]
            try:
                return "smooth", (int(sm["k"]), float(sm.get("beta", 1.0))), None
            except (KeyError, TypeError, ValueError):
                raise ConfigurationError("smooth rule needs {k, beta}") from None
        if "manual" in rule:
            return "manual", None, float(rule["manual"])
    raise ConfigurationError(f"unknown bandwidth_rule {rule!r}")


@dataclass(frozen=True)
class EstimatorConfig:
    """Noise level, Hurst index, delay and bandwidth for one estimator run.

    Use :meth:`from_rule` to derive the bandwidth from ``epsilon``.
    ``bandwidth_rule`` is ``"theorem31"``, ``"smooth"`` (with
    ``smoothness = (k, beta)``) or ``"manual"``. ``epsilon = 0`` is accepted
    with a manual bandwidth for noiseless diagnostics.
    """

    epsilon: float
    H: float
    tau: float
    bandwidth: float
    bandwidth_rule: str = "manual"
    smoothness: Optional[tuple] = None

    def __post_init__(self):
        h = as_hurst(self.H)
        object.__setattr__(self, "H", h.value)
        if not h.wiener_integral_regime:
            warnings.warn(
                f"H={h.value} < 1/2: the estimator's variance bound is only proven for H >= 1/2",
                RuntimeWarning, stacklevel=3,
            )
        # a noiseless path (epsilon = 0) only makes sense with a manual bandwidth
        if not (self.epsilon > 0 or (self.epsilon == 0 and self.bandwidth_rule == "manual")):
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if not self.tau >= 0:
            raise ConfigurationError(f"tau must be >= 0, got {self.tau}")
        if not self.bandwidth > 0:
            raise ConfigurationError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.bandwidth_rule == "theorem31":
            expected = bandwidth_theorem31(self.epsilon, self.H)
        elif self.bandwidth_rule == "smooth":
            if self.smoothness is None:
                raise ConfigurationError("bandwidth_rule 'smooth' needs smoothness=(k, beta)")
            k, beta = self.smoothness
            expected = bandwidth_smooth(self.epsilon, self.H, k, beta)
        elif self.bandwidth_rule == "manual":
            expected = self.bandwidth
        else:
            raise ConfigurationError(f"unknown bandwidth_rule {self.bandwidth_rule!r}")
        if expected != self.bandwidth:
            raise ConfigurationError(
                f"bandwidth {self.bandwidth!r} disagrees with rule "
                f"{self.bandwidth_rule!r} ({expected!r})"
            )

    @classmethod
    def from_rule(cls, epsilon, H, tau, rule="theorem31", smoothness=None, bandwidth=None):
        if rule == "theorem31":
            bw = bandwidth_theorem31(epsilon, H)
        elif rule == "smooth":
            if smoothness is None:
                raise ConfigurationError("bandwidth_rule 'smooth' needs smoothness=(k, beta)")
            bw = bandwidth_smooth(epsilon, H, *smoothness)
            smoothness = (int(smoothness[0]), float(smoothness[1]))
        elif rule == "manual":
            if bandwidth is None:
                raise ConfigurationError("bandwidth_rule 'manual' needs a bandwidth")
            bw = float(bandwidth)
        else:
            raise ConfigurationError(f"unknown bandwidth_rule {rule!r}")
        return cls(float(epsilon), float(H), float(tau), bw, rule, smoothness)

    def check_horizon(self, T: float) -> None:
        if not self.bandwidth < (T - self.tau) / 4:
            raise ConfigurationError(
                f"bandwidth {self.bandwidth!r} must be below (T - tau)/4 = {(T - self.tau) / 4!r}"
            )


@dataclass(frozen=True)
class TrendEstimate:
    value: float
    hitting_time: float
    level: Optional[float]
    edge_clipped: bool
    fallback_used: bool
    bandwidth: float
    epsilon: float
    H: float

    def to_json(self) -> dict:
        return asdict(self)


def hitting_time(X: SamplePath, level: float, tau: float, T: float) -> tuple:
    """First time ``t > tau`` with ``X_{t - tau} >= level``.

    The first grid crossing on ``[0, T - tau]`` is refined by linear
    interpolation. With no crossing the result is ``(T - tau, True)``.
    """
    g = X.grid
    v = X.values
    s_max = T - tau
    n_last = int(math.floor((s_max - g.t0) / g.dt + 1e-9))
    n_last = min(n_last, g.n_steps)
    if n_last < 0:
        return s_max, True
    window = v[: n_last + 1]
    if window[0] >= level:
        return tau + g.t0, False
    above = np.flatnonzero(window >= level)
    if above.size == 0:
        return s_max, True
    i = int(above[0])
    lo, hi = window[i - 1], window[i]
    s = g.time(i - 1) + g.dt * (level - lo) / (hi - lo)
    return tau + s, False


def _resolution_guard(X: SamplePath, bandwidth: float) -> None:
    if bandwidth < RESOLUTION_FACTOR * X.grid.dt * (1 - 1e-12):
        raise ConfigurationError(
            f"bandwidth {bandwidth!r} needs dt <= bandwidth/{RESOLUTION_FACTOR} = "
            f"{bandwidth / RESOLUTION_FACTOR!r}, path has dt={X.grid.dt!r}"
        )


def stieltjes_convolution(X: SamplePath, center: float, K: KernelSpec, bandwidth: float) -> float:
    """Left-point sum ``(1/h) sum_i G((s_i - c)/h) (X_{i+1} - X_i)``.

    Only increments whose left point lies strictly inside ``(c - h, c + h)``
    are visited; the kernel vanishes elsewhere so nothing is lost.
    """
    _resolution_guard(X, bandwidth)
    g = X.grid
    if not (g.t0 - 1e-12 <= center <= g.end + 1e-12):
        raise DomainError(f"center {center!r} outside [{g.t0}, {g.end}]")
    lo = max(0, int(math.floor((center - bandwidth - g.t0) / g.dt)))
    hi = min(g.n_steps - 1, int(math.ceil((center + bandwidth - g.t0) / g.dt)))
    if hi < lo:
        return 0.0
    idx = np.arange(lo, hi + 1)
    s = g.t0 + idx * g.dt
    w = eval_kernel(K, (s - center) / bandwidth)
    dx = X.values[lo + 1 : hi + 2] - X.values[lo : hi + 1]
    return float(np.dot(w, dx) / bandwidth)


def _edge_clipped(t: float, T: float, bandwidth: float) -> bool:
    return bool(t <= 2 * bandwidth or T - t <= 2 * bandwidth)


def estimate_trend_at_level(
    X: SamplePath,
    level: float,
    config: EstimatorConfig,
    K: KernelSpec,
    alpha: Optional[float] = None,
    x0: Optional[float] = None,
) -> TrendEstimate:
    """Estimate ``S(t_x, x)`` at ``x = level`` from one observed path.

    The level must exceed ``x0`` (default: the first path value) and, when
    the trend's lower bound ``alpha`` is given, lie below
    ``x0 + (T - tau) * alpha``.
    """
    T = X.grid.end
    config.check_horizon(T)
    _resolution_guard(X, config.bandwidth)
    lo = float(X.values[0]) if x0 is None else x0
    hi = math.inf if alpha is None else lo + (T - config.tau) * alpha
    if not lo < level < hi:
        raise OutOfRangeError(f"level {level!r} outside the admissible window ({lo!r}, {hi!r})")
    t_hit, fallback = hitting_time(X, level, config.tau, T)
    value = stieltjes_convolution(X, t_hit, K, config.bandwidth)
    return TrendEstimate(
        value=value,
        hitting_time=float(t_hit),
        level=float(level),
        edge_clipped=bool(_edge_clipped(t_hit, T, config.bandwidth)),
        fallback_used=bool(fallback),
        bandwidth=config.bandwidth,
        epsilon=config.epsilon,
        H=config.H,
    )


def estimate_trend_at_time(X: SamplePath, t: float, config: EstimatorConfig, K: KernelSpec) -> TrendEstimate:
    """Estimate ``f(t) = S(t, x_{t - tau})`` at a fixed interior time; no delay needed."""
    T = X.grid.end
    _resolution_guard(X, config.bandwidth)
    bw = config.bandwidth
    if not (X.grid.t0 + 2 * bw < t < T - 2 * bw):
        raise EdgeError(f"t={t!r} must lie in ({X.grid.t0 + 2 * bw!r}, {T - 2 * bw!r})")
    value = stieltjes_convolution(X, t, K, bw)
    return TrendEstimate(value, float(t), None, False, False, bw, config.epsilon, config.H)
