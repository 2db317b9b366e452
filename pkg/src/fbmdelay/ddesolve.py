"""Deterministic delay ODE, small-noise delay SDE and level crossing times.

The model is ``dX_t = S(t, X_{t-tau}) dt + eps dW^H_t`` with constant
pre-history ``X_s = x0`` for ``s <= 0``. Grids must be aligned with the
delay so the delayed state is an exact index shift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import ConfigurationError, DivergenceError, DomainError, OutOfRangeError
from .fbm import HurstLike, SamplePath, TimeGrid, as_hurst, sample_fbm

__all__ = [
    "TrendField",
    "DelaySpec",
    "delay_lag",
    "solve_delay_ode",
    "simulate_delay_sde",
    "euler_from_noise",
    "fundamental_solution_linear",
    "crossing_time",
    "interpolate_path",
]

_KINDS = {
    "constant": (_backend.CONSTANT, ("c",)),
    "tanh_sine": (_backend.TANH_SINE, ("c0", "c1", "c2", "omega")),
    "logistic": (_backend.LOGISTIC, ("c0", "c1")),
}

# max over x of |d/dx 1/(1+x^2)|, attained at x = 1/sqrt(3)
_LOGISTIC_SLOPE = 3.0 * math.sqrt(3.0) / 8.0


@dataclass(frozen=True)
class TrendField:
    """Catalog trend ``S(t, x)`` with analytic bounds.

    ``alpha`` is the infimum of S, ``lip_x`` bounds ``|dS/dx|``, ``bound_t``
    bounds ``|dS/dt|`` and ``sup_bound`` bounds ``|S|``.

    Catalog
    -------
    constant : ``[c]``, ``S = c`` with ``c > 0``
    tanh_sine : ``[c0, c1, c2, omega]``, ``S = c0 + c1 tanh(x) + c2 sin(omega t)``,
        requires ``c0 > |c1| + |c2|``
    logistic : ``[c0, c1]``, ``S = c0 + c1 / (1 + x^2)``, requires ``c0 + min(c1, 0) > 0``
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(
                f"unknown trend kind {self.kind!r}; expected one of {sorted(_KINDS)}"
            )
        names = _KINDS[self.kind][1]
        p = tuple(float(v) for v in self.params)
        if len(p) != len(names):
            raise ConfigurationError(
                f"trend {self.kind!r} takes params {list(names)}, got {len(p)} values"
            )
        if not all(math.isfinite(v) for v in p):
            raise ConfigurationError(f"trend {self.kind!r} has non-finite params {p}")
        object.__setattr__(self, "params", p)
        if self.kind == "tanh_sine" and not p[0] > abs(p[1]) + abs(p[2]):
            raise ConfigurationError("tanh_sine needs c0 > |c1| + |c2|")
        if not self.alpha > 0:
            raise ConfigurationError(
                f"trend {self.kind!r} with params {p} is not bounded away from zero"
            )
        self._spot_check()

    @property
    def code(self) -> int:
        return _KINDS[self.kind][0]

    @property
    def alpha(self) -> float:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "tanh_sine":
            return p[0] - abs(p[1]) - abs(p[2])
        return p[0] + min(p[1], 0.0)

    @property
    def lip_x(self) -> float:
        p = self.params
        if self.kind == "constant":
            return 0.0
        if self.kind == "tanh_sine":
            return abs(p[1])
        return abs(p[1]) * _LOGISTIC_SLOPE

    @property
    def bound_t(self) -> float:
        if self.kind == "tanh_sine":
            return abs(self.params[2] * self.params[3])
        return 0.0

    @property
    def sup_bound(self) -> float:
        p = self.params
        if self.kind == "constant":
            return abs(p[0])
        if self.kind == "tanh_sine":
            return p[0] + abs(p[1]) + abs(p[2])
        return p[0] + max(p[1], 0.0)

    def __call__(self, t, x):
        t = np.asarray(t, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        p = self.params
        if self.kind == "constant":
            out = np.full(np.broadcast(t, x).shape, p[0])
        elif self.kind == "tanh_sine":
            out = p[0] + p[1] * np.tanh(x) + p[2] * np.sin(p[3] * t)
        else:
            out = p[0] + p[1] / (1.0 + x * x)
        return float(out) if out.ndim == 0 else out

    def _spot_check(self) -> None:
        t = np.linspace(0.0, 20.0, 81)[:, None]
        x = np.linspace(-20.0, 20.0, 161)[None, :]
        s = self(t, x)
        if np.min(s) < self.alpha * (1 - 1e-12):
            raise ConfigurationError(f"trend {self.kind!r}: S < alpha on the check grid")
        dx = np.abs(np.diff(s, axis=1)) / np.diff(x, axis=1)
        if np.max(dx) > self.lip_x * (1 + 1e-9) + 1e-12:
            raise ConfigurationError(f"trend {self.kind!r}: Lipschitz bound in x violated")

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_json(cls, obj) -> "TrendField":
        if not isinstance(obj, dict) or "kind" not in obj or "params" not in obj:
            raise ConfigurationError("trend must be an object {kind, params}")
        return cls(obj["kind"], tuple(obj["params"]))


@dataclass(frozen=True)
class DelaySpec:
    """Delay ``tau``, constant initial value ``x0`` on ``(-inf, 0]`` and horizon ``T``."""

    tau: float
    x0: float
    T: float

    def __post_init__(self):
        for name in ("tau", "x0", "T"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ConfigurationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.tau < 0:
            raise ConfigurationError(f"tau must be >= 0, got {self.tau}")
        if not self.tau < self.T:
            raise ConfigurationError(f"need tau < T, got tau={self.tau}, T={self.T}")

    def admissible_levels(self, alpha: float) -> tuple:
        """Open interval ``(x0, x0 + (T - tau) * alpha)`` of guaranteed-reachable levels."""
        return self.x0, self.x0 + (self.T - self.tau) * alpha

    def to_json(self) -> dict:
        return {"tau": self.tau, "x0": self.x0, "T": self.T}

    @classmethod
    def from_json(cls, obj) -> "DelaySpec":
        try:
            return cls(obj["tau"], obj["x0"], obj["T"])
        except (KeyError, TypeError):
            raise ConfigurationError("spec must be an object {tau, x0, T}") from None


def delay_lag(tau: float, dt: float) -> int:
    """Number of grid steps in the delay; ``dt`` must divide ``tau``."""
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if tau == 0:
        return 0
    ratio = tau / dt
    lag = int(round(ratio))
    if lag < 1 or abs(lag * dt - tau) > 1e-12 * max(tau, dt) * max(1.0, ratio):
        raise ConfigurationError(f"dt={dt!r} does not divide tau={tau!r}")
    return lag


def _check_finite(values: np.ndarray, grid: TimeGrid, what: str) -> None:
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise DivergenceError(f"{what} diverged at t={grid.time(i)!r}")


def solve_delay_ode(S: TrendField, spec: DelaySpec, dt: float) -> SamplePath:
    """Noiseless solution ``x`` on ``[0, T]`` by the method of steps.

    Each step is classical RK4; delayed values at stage midpoints come from
    cubic Hermite interpolation of the already-computed earlier segment.
    """
    lag = delay_lag(spec.tau, dt)
    grid = TimeGrid.over(spec.T, dt)
    x = _backend.rk4_delay(S.code, S.params, spec.x0, spec.x0, dt, lag, grid.n_steps)
    _check_finite(x, grid, "delay ODE")
    return SamplePath(grid, x, "x", {"trend": S.to_json(), **spec.to_json()})


def simulate_delay_sde(
    S: TrendField,
    spec: DelaySpec,
    epsilon: float,
    H: HurstLike,
    dt: float,
    seed: int,
    method: str = "davies_harte",
) -> tuple:
    """Euler scheme for the delay SDE driven by exact fBm increments.

    Returns ``(X, W)`` on the same grid; ``W`` is the driving fBm path.
    """
    if not epsilon >= 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    h = as_hurst(H)
    grid = TimeGrid.over(spec.T, dt)
    delay_lag(spec.tau, dt)
    W = sample_fbm(grid, h, seed, method)
    return euler_from_noise(S, spec, epsilon, W), W


def euler_from_noise(S: TrendField, spec: DelaySpec, epsilon: float, W: SamplePath) -> SamplePath:
    """Euler path of the delay SDE for a given driving fBm path ``W``."""
    if not epsilon >= 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    grid = W.grid
    if abs(grid.end - spec.T) > 1e-9 * max(1.0, spec.T) or grid.t0 != 0.0:
        raise ConfigurationError(f"driving path covers [{grid.t0}, {grid.end}], need [0, {spec.T}]")
    lag = delay_lag(spec.tau, grid.dt)
    noise = epsilon * np.diff(W.values)
    X = _backend.euler_delay(S.code, S.params, spec.x0, grid.dt, lag, noise)
    _check_finite(X, grid, "delay SDE")
    meta = {"trend": S.to_json(), **spec.to_json(), "epsilon": float(epsilon),
            **W.metadata}
    return SamplePath(grid, X, "X", meta)


def fundamental_solution_linear(a: float, b: float, T: float, dt: float) -> SamplePath:
    """Solution of ``x' = a x(t) + b x(t - 1)`` with ``x(0) = 1`` and zero pre-history."""
    if not T > 0:
        raise ConfigurationError(f"T must be positive, got {T}")
    lag = delay_lag(1.0, dt)
    grid = TimeGrid.over(T, dt)
    x = _backend.rk4_delay(_backend.LINEAR, (float(a), float(b)), 1.0, 0.0, dt, lag, grid.n_steps)
    _check_finite(x, grid, "fundamental solution")
    return SamplePath(grid, x, "x0", {"a": float(a), "b": float(b)})


def interpolate_path(x: SamplePath, t: float) -> float:
    """Linear interpolation of ``x`` at time ``t`` inside the grid."""
    g = x.grid
    u = (t - g.t0) / g.dt
    if u < -1e-9 or u > g.n_steps + 1e-9:
        raise DomainError(f"t={t!r} outside [{g.t0}, {g.end}]")
    i = min(max(int(math.floor(u)), 0), g.n_steps - 1)
    w = u - i
    v = x.values
    return float(v[i] + w * (v[i + 1] - v[i]))


def crossing_time(x: SamplePath, level: float, tau: float) -> float:
    """Deterministic crossing time ``t_x = tau + s`` with ``x_s = level``.

    ``x`` must be strictly increasing. The bracketing grid interval is found by
    bisection and ``s`` by linear interpolation inside it.
    """
    g = x.grid
    v = x.values
    s_max = g.end - tau
    top = interpolate_path(x, s_max)
    if not (v[0] < level < top):
        raise OutOfRangeError(
            f"level {level!r} outside the crossing window ({v[0]!r}, {top!r})"
        )
    if np.any(np.diff(v) <= 0):
        raise DomainError("crossing_time needs a strictly increasing path")
    i = int(np.searchsorted(v, level, side="left"))
    lo = v[i - 1]
    s = g.time(i - 1) + g.dt * (level - lo) / (v[i] - lo)
    return tau + s
