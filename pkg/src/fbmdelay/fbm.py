"""Exact fractional Brownian motion on uniform grids.

Two samplers share one law contract: a dense Cholesky factorisation of the
fBm covariance, and the Davies-Harte circulant embedding of fractional
Gaussian noise. Randomness comes from numpy's counter-based Philox generator
keyed by an explicit integer seed, so a path is a pure function of
``(grid, H, seed)``.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DomainError, GenerationError

__all__ = [
    "HurstIndex",
    "TimeGrid",
    "SamplePath",
    "make_rng",
    "fbm_covariance",
    "fgn_autocovariance",
    "circulant_root",
    "sample_fbm_cholesky",
    "sample_fbm_davies_harte",
    "sample_fbm",
    "path_supremum",
    "write_path",
    "read_path",
]

GENERATOR_NAME = "numpy.Philox"
EIGEN_RTOL = 1e-9
CHOLESKY_JITTER = 1e-12


@dataclass(frozen=True)
class HurstIndex:
    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 < v < 1.0) or math.isnan(v):
            raise DomainError(f"Hurst index must lie in (0, 1), got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def wiener_integral_regime(self) -> bool:
        """True when H >= 1/2, where the moment bounds for fBm Wiener integrals apply."""
        return self.value >= 0.5

    def __float__(self):
        return self.value


HurstLike = Union[float, HurstIndex]


def as_hurst(H: HurstLike) -> HurstIndex:
    return H if isinstance(H, HurstIndex) else HurstIndex(H)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + i*dt`` for ``i = 0..n_steps``."""

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise DomainError(f"dt must be positive and finite, got {self.dt!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def over(cls, T: float, dt: float, t0: float = 0.0) -> "TimeGrid":
        """Grid on ``[t0, T]``; ``T - t0`` must be a multiple of ``dt``."""
        from .errors import ConfigurationError

        ratio = (T - t0) / dt
        n = int(round(ratio))
        if n < 1 or abs(n - ratio) > 1e-9 * max(1.0, ratio):
            raise ConfigurationError(
                f"horizon {T - t0!r} is not an integer multiple of dt={dt!r}"
            )
        return cls(t0, dt, n)

    def time(self, i: int) -> float:
        return self.t0 + i * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_steps + 1) * self.dt

    @property
    def end(self) -> float:
        return self.time(self.n_steps)


@dataclass(frozen=True, eq=False)
class SamplePath:
    """A process observed on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != self.grid.n_steps + 1:
            raise DomainError(
                f"path {self.label!r} has {v.shape} values for a grid of "
                f"{self.grid.n_steps + 1} points"
            )
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise DomainError(
                f"path {self.label!r} has a non-finite value at t={self.grid.time(bad)!r}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.label == other.label
            and np.array_equal(self.values, other.values)
        )


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator for ``seed``; identical streams on every platform."""
    if int(seed) != seed or seed < 0:
        raise DomainError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.Generator(np.random.Philox(int(seed)))


def fbm_covariance(s, t, H: HurstLike):
    """Covariance ``(s^2H + t^2H - |t - s|^2H) / 2`` of fBm at times ``s`` and ``t``.

    Broadcasts over arrays.
    """
    h2 = 2.0 * as_hurst(H).value
    s_arr = np.asarray(s, dtype=np.float64)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(s_arr < 0) or np.any(t_arr < 0):
        raise DomainError("fbm_covariance needs non-negative times")
    out = 0.5 * (s_arr**h2 + t_arr**h2 - np.abs(t_arr - s_arr) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(lags, dt: float, H: HurstLike) -> np.ndarray:
    """Autocovariance of fBm increments over steps of length ``dt``."""
    h2 = 2.0 * as_hurst(H).value
    k = np.abs(np.asarray(lags, dtype=np.float64))
    return 0.5 * dt**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


def _check_grid(grid: TimeGrid) -> None:
    if grid.t0 != 0.0:
        raise DomainError(f"fBm samplers need t0 = 0, got {grid.t0!r}")


@lru_cache(maxsize=32)
def _cholesky_factor(n: int, dt: float, H: float) -> np.ndarray:
    t = np.arange(1, n + 1) * dt
    cov = fbm_covariance(t[:, None], t[None, :], H)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    cov = cov + np.eye(n) * (CHOLESKY_JITTER * np.trace(cov) / n)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        lam = float(np.linalg.eigvalsh(cov)[0])
        raise GenerationError(
            f"fBm covariance (n={n}, dt={dt}, H={H}) is not positive definite "
            f"after jitter; smallest eigenvalue {lam:.3e}"
        ) from None


def sample_fbm_cholesky(grid: TimeGrid, H: HurstLike, seed: int) -> SamplePath:
    """Exact fBm path by Cholesky factorisation of the covariance. O(n^3) once per grid."""
    _check_grid(grid)
    h = as_hurst(H)
    L = _cholesky_factor(grid.n_steps, grid.dt, h.value)
    z = make_rng(seed).standard_normal(grid.n_steps)
    values = np.empty(grid.n_steps + 1)
    values[0] = 0.0
    values[1:] = L @ z
    meta = {"H": h.value, "seed": int(seed), "generator": GENERATOR_NAME,
            "method": "cholesky"}
    return SamplePath(grid, values, "fbm", meta)


def circulant_root(lam: np.ndarray):
    """``sqrt(lam / m)`` after clamping rounding-level negatives, or None.

    Eigenvalues below ``-1e-9 * max(lam)`` mean the embedding is not
    nonnegative definite and the caller must fall back.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if lam.min() < -EIGEN_RTOL * lam.max():
        return None
    return np.sqrt(np.where(lam < 0.0, 0.0, lam) / lam.shape[0])


@lru_cache(maxsize=32)
def _circulant_sqrt_eigs(n: int, dt: float, H: float):
    m = 1 << max(1, (2 * n - 1).bit_length())
    half = m // 2
    gamma = fgn_autocovariance(np.arange(half + 1), dt, H)
    row = np.concatenate([gamma, gamma[half - 1:0:-1]])
    return circulant_root(np.fft.fft(row).real)


def sample_fbm_davies_harte(grid: TimeGrid, H: HurstLike, seed: int) -> SamplePath:
    """Exact fBm path by circulant embedding of fractional Gaussian noise.

    The embedding size is the first power of two not below ``2 * n_steps``.
    Negative eigenvalues within ``1e-9`` of the largest are rounding noise
    and are clamped; anything worse switches to :func:`sample_fbm_cholesky`,
    recorded as ``metadata["fallback"] = "cholesky"``.
    """
    _check_grid(grid)
    h = as_hurst(H)
    n = grid.n_steps
    root = _circulant_sqrt_eigs(n, grid.dt, h.value)
    if root is None:
        path = sample_fbm_cholesky(grid, h, seed)
        meta = dict(path.metadata, method="davies_harte", fallback="cholesky")
        return SamplePath(grid, path.values, "fbm", meta)
    m = root.shape[0]
    z = make_rng(seed).standard_normal((2, m))
    w = np.fft.fft(root * (z[0] + 1j * z[1]))
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(w.real[:n], out=values[1:])
    meta = {"H": h.value, "seed": int(seed), "generator": GENERATOR_NAME,
            "method": "davies_harte"}
    return SamplePath(grid, values, "fbm", meta)


def sample_fbm(grid: TimeGrid, H: HurstLike, seed: int, method: str = "davies_harte") -> SamplePath:
    if method == "davies_harte":
        return sample_fbm_davies_harte(grid, H, seed)
    if method == "cholesky":
        return sample_fbm_cholesky(grid, H, seed)
    raise DomainError(f"unknown fBm method {method!r}")


def path_supremum(path: SamplePath) -> float:
    """``max_i |values[i]|``."""
    return float(np.max(np.abs(path.values)))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_path(path: SamplePath, csv_file, meta_file=None) -> None:
    """Write ``t,value`` CSV and, optionally, the JSON metadata sidecar."""
    csv_file = Path(csv_file)
    with csv_file.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "value"])
        for i, v in enumerate(path.values):
            wr.writerow([_fmt(path.grid.time(i)), _fmt(v)])
    if meta_file is not None:
        meta = {
            "label": path.label,
            "t0": path.grid.t0,
            "dt": path.grid.dt,
            "n_steps": path.grid.n_steps,
            "H": path.metadata.get("H"),
            "seed": path.metadata.get("seed"),
            "generator": path.metadata.get("generator"),
        }
        extra = {k: v for k, v in path.metadata.items() if k not in meta}
        meta.update(extra)
        Path(meta_file).write_text(json.dumps(meta, indent=2) + "\n")


def read_path(csv_file, meta_file=None, label: str | None = None) -> SamplePath:
    """Read a path written by :func:`write_path`.

    Without a sidecar the grid is recovered from the first two time stamps.
    """
    with Path(csv_file).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise DomainError(f"{csv_file}: expected header 't,value'")
    t = np.array([float(r[0]) for r in rows[1:]])
    v = np.array([float(r[1]) for r in rows[1:]])
    if t.shape[0] < 2:
        raise DomainError(f"{csv_file}: need at least two rows")
    meta = {}
    if meta_file is not None and Path(meta_file).exists():
        meta = json.loads(Path(meta_file).read_text())
        grid = TimeGrid(meta["t0"], meta["dt"], meta["n_steps"])
    else:
        grid = TimeGrid(t[0], t[1] - t[0], t.shape[0] - 1)
    if grid.n_steps + 1 != t.shape[0] or not np.allclose(grid.times, t, rtol=0, atol=1e-9 * max(1.0, abs(t[-1]))):
        raise DomainError(f"{csv_file}: time column is not the uniform grid {grid}")
    lbl = label if label is not None else meta.get("label", "")
    extra = {k: meta[k] for k in meta if k not in ("label", "t0", "dt", "n_steps")}
    return SamplePath(grid, v, lbl, extra)
