"""Trajectories of the Ornstein-Uhlenbeck volatility driver.

The driver solves ``dY = -alpha * Y dt + k dZ``.  Three path schemes are
provided on an equidistant grid:

* ``euler``: the Euler-Maruyama recursion ``Y[l+1] = (1 - alpha*dt) Y[l] + k dZ[l]``.
  With additive noise this coincides with the Milstein scheme.
* ``exact``: the Gaussian transition of the OU process, driven by the same
  standard normals as the Euler path so the two can be compared path by path.
* ``deterministic``: the noiseless solution ``Y(t) = y0 exp(-alpha t)``.

Randomness comes from :class:`NoiseStream`, a counter-based Philox stream keyed
by ``(master_seed, substream_id)``.  Trajectory ``i`` therefore depends only on
the master seed and ``i``, never on how work is split between workers.
Normals are produced by inverting the standard normal CDF, one uniform per
step, so every scheme consumes exactly ``m`` variates per path.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtri

__all__ = [
    "OUParams",
    "GridSpec",
    "Path",
    "NoiseStream",
    "ContractionWarning",
    "ou_exact_moments",
    "simulate_em_path",
    "simulate_exact_path",
    "deterministic_path",
    "subsample_path",
    "em_values",
    "exact_values",
    "coupled_values",
]

Scheme = Literal["euler", "exact", "deterministic"]

_SEED_LIMIT = 2**64
_TWO_POW_M53 = 2.0**-53


class ContractionWarning(UserWarning):
    """Euler step with ``alpha * dt >= 1``: the contraction factor is not positive."""


@dataclass(frozen=True)
class OUParams:
    """Parameters of ``dY = -alpha Y dt + k dZ`` with ``Y(0) = y0``."""

    alpha: float
    k: float
    y0: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"alpha must be a positive finite number, got {self.alpha}")
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ValueError(f"k must be a non-negative finite number, got {self.k}")
        if not math.isfinite(self.y0):
            raise ValueError(f"y0 must be finite, got {self.y0}")

    @property
    def stationary_variance(self) -> float:
        return self.k**2 / (2.0 * self.alpha)


@dataclass(frozen=True)
class GridSpec:
    """``m`` equal steps on ``[0, maturity]``."""

    maturity: float
    m: int

    def __post_init__(self):
        if not (self.maturity > 0 and math.isfinite(self.maturity)):
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be an integer >= 1, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def from_step(cls, maturity: float, dt: float) -> "GridSpec":
        """Grid with ``m = round(maturity / dt)`` steps.

        The realised step is ``maturity / m``, which differs from ``dt`` when
        ``dt`` does not divide the maturity.
        """
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        return cls(maturity, max(1, round(maturity / dt)))

    @property
    def dt(self) -> float:
        return self.maturity / self.m

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.m + 1) * self.dt


@dataclass(frozen=True)
class Path:
    """Driver values ``Y[0..m]`` on ``grid``, tagged with the producing scheme."""

    grid: GridSpec
    values: np.ndarray
    scheme: Scheme

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] != self.grid.m + 1:
            raise ValueError(
                f"expected {self.grid.m + 1} values for m={self.grid.m}, got shape {values.shape}"
            )
        if self.scheme not in ("euler", "exact", "deterministic"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class NoiseStream:
    """Reproducible standard-normal increments for one trajectory.

    The stream is Philox-4x64 keyed with ``master_seed`` in the low 64 bits and
    ``substream_id`` in the high 64 bits, started at counter zero.  The first
    ``n`` draws are a pure function of the key, so any draw can be recomputed
    without replaying other trajectories.
    """

    master_seed: int
    substream_id: int = 0
    _key: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("master_seed", "substream_id"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or not 0 <= v < _SEED_LIMIT:
                raise ValueError(f"{name} must be an integer in [0, 2**64), got {v}")
        object.__setattr__(self, "_key", int(self.master_seed) | (int(self.substream_id) << 64))

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` uniforms on the open interval (0, 1), 53-bit resolution."""
        raw = np.random.Philox(key=self._key).random_raw(n)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53

    def standard_normals(self, n: int) -> np.ndarray:
        return ndtri(self.uniforms(n))


def _normals_matrix(master_seed: int, substreams: Iterable[int], n: int) -> np.ndarray:
    ids = list(substreams)
    out = np.empty((len(ids), n))
    for row, sid in enumerate(ids):
        out[row] = NoiseStream(master_seed, sid).standard_normals(n)
    return out


def ou_exact_moments(p: OUParams, t: float) -> tuple[float, float]:
    """Mean and variance of ``Y(t)``."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    mean = p.y0 * math.exp(-p.alpha * t)
    var = p.k**2 / (2.0 * p.alpha) * -math.expm1(-2.0 * p.alpha * t)
    return mean, var


def _check_contraction(p: OUParams, g: GridSpec) -> None:
    if p.alpha * g.dt >= 1.0:
        warnings.warn(
            f"alpha*dt = {p.alpha * g.dt:g} >= 1; Euler contraction factor "
            f"{1.0 - p.alpha * g.dt:g} is not positive",
            ContractionWarning,
            stacklevel=3,
        )


def _ar1(values0: np.ndarray, factor: float, shocks: np.ndarray) -> np.ndarray:
    """Run ``y[l+1] = factor * y[l] + shocks[l]`` along the last axis."""
    n = shocks.shape[0]
    zi = (factor * values0).reshape(n, 1)
    y, _ = lfilter([1.0], [1.0, -factor], shocks, axis=1, zi=zi)
    return np.hstack([values0.reshape(n, 1), y])


def _em_from_normals(p: OUParams, g: GridSpec, xi: np.ndarray) -> np.ndarray:
    dt = g.dt
    shocks = p.k * (math.sqrt(dt) * xi)
    return _ar1(np.full(xi.shape[0], p.y0), 1.0 - p.alpha * dt, shocks)


def _exact_from_normals(p: OUParams, g: GridSpec, xi: np.ndarray) -> np.ndarray:
    dt = g.dt
    scale = math.sqrt(-math.expm1(-2.0 * p.alpha * dt) / (2.0 * p.alpha))
    shocks = p.k * (scale * xi)
    return _ar1(np.full(xi.shape[0], p.y0), math.exp(-p.alpha * dt), shocks)


def em_values(p: OUParams, g: GridSpec, master_seed: int, substreams: Sequence[int]) -> np.ndarray:
    """Euler paths for several substreams as an array of shape ``(len(substreams), m+1)``."""
    _check_contraction(p, g)
    return _em_from_normals(p, g, _normals_matrix(master_seed, substreams, g.m))


def exact_values(p: OUParams, g: GridSpec, master_seed: int, substreams: Sequence[int]) -> np.ndarray:
    """Exact-transition paths for several substreams, shape ``(len(substreams), m+1)``."""
    return _exact_from_normals(p, g, _normals_matrix(master_seed, substreams, g.m))


def coupled_values(
    p: OUParams, g: GridSpec, master_seed: int, substreams: Sequence[int]
) -> tuple[np.ndarray, np.ndarray]:
    """Euler and exact paths driven by the same standard normals."""
    _check_contraction(p, g)
    xi = _normals_matrix(master_seed, substreams, g.m)
    return _em_from_normals(p, g, xi), _exact_from_normals(p, g, xi)


def simulate_em_path(p: OUParams, g: GridSpec, noise: NoiseStream) -> Path:
    """Euler-Maruyama path; warns with :class:`ContractionWarning` if ``alpha*dt >= 1``."""
    _check_contraction(p, g)
    xi = noise.standard_normals(g.m).reshape(1, -1)
    return Path(g, _em_from_normals(p, g, xi)[0], "euler")


def simulate_exact_path(p: OUParams, g: GridSpec, noise: NoiseStream) -> Path:
    xi = noise.standard_normals(g.m).reshape(1, -1)
    return Path(g, _exact_from_normals(p, g, xi)[0], "exact")


def deterministic_path(p: OUParams, g: GridSpec) -> Path:
    """Noiseless solution sampled on the grid; ``k`` is ignored."""
    return Path(g, p.y0 * np.exp(-p.alpha * g.times), "deterministic")


def subsample_path(path: Path, factor: int) -> Path:
    """Keep every ``factor``-th value, giving a path on ``m / factor`` steps."""
    if isinstance(factor, bool) or int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    if path.grid.m % factor:
        raise ValueError(f"factor {factor} does not divide m={path.grid.m}")
    grid = GridSpec(path.grid.maturity, path.grid.m // factor)
    return Path(grid, path.values[::factor], path.scheme)
