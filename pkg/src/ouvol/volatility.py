"""Squared-volatility transforms and their time averages along a driver path."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate

from .sde import OUParams, Path

__all__ = [
    "VolFunction",
    "AbsAffine",
    "ExpShift",
    "QuadratureError",
    "eval_sigma_sq",
    "avg_sigma_sq_discrete",
    "avg_sigma_sq_exact_deterministic",
    "vol_from_dict",
]

Endpoints = Literal["right", "left"]

QUAD_TOL = 1e-12
QUAD_LIMIT = 200


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""


class VolFunction:
    """Base class for ``sigma^2(y)``.

    ``hoelder_exponent`` is the exponent in ``|s(x) - s(y)| <= L |x - y|^g``
    used to read empirical convergence orders; ``hoelder_verified`` says whether
    that condition actually holds globally.  ``lower_bound`` is the infimum of
    ``sigma^2``.
    """

    kind: str = ""
    hoelder_exponent: float = 1.0
    hoelder_verified: bool = True

    @property
    def lower_bound(self) -> float:
        raise NotImplementedError

    @property
    def constant(self) -> bool:
        """True when ``sigma^2`` does not depend on ``y`` (equal to ``lower_bound``)."""
        return False

    def __call__(self, y):
        raise NotImplementedError

    def as_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class AbsAffine(VolFunction):
    """``sigma^2(y) = a |y| + b``; globally Lipschitz."""

    a: float
    b: float

    kind = "abs_affine"

    def __post_init__(self):
        if not (self.a >= 0 and self.b >= 0):
            raise ValueError(f"AbsAffine needs a >= 0 and b >= 0, got a={self.a}, b={self.b}")

    @property
    def lower_bound(self) -> float:
        return self.b

    @property
    def constant(self) -> bool:
        return self.a == 0

    def __call__(self, y):
        return self.a * np.abs(y) + self.b

    def as_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass(frozen=True)
class ExpShift(VolFunction):
    """``sigma^2(y) = exp(y) + c``.

    Not globally Hoelder on the real line; the exponent 1 is only local
    (Lipschitz on bounded sets), hence ``hoelder_verified = False``.
    """

    c: float

    kind = "exp_shift"
    hoelder_verified = False

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError(f"ExpShift needs c >= 0, got c={self.c}")

    @property
    def lower_bound(self) -> float:
        return self.c

    def __call__(self, y):
        return np.exp(y) + self.c

    def as_dict(self) -> dict:
        return {"kind": self.kind, "c": self.c}


def vol_from_dict(spec: dict) -> VolFunction:
    """Build a transform from ``{"kind": ..., "a", "b", "c"}``; unused fields are ignored."""
    kind = spec.get("kind")
    if kind == AbsAffine.kind:
        return AbsAffine(float(spec["a"]), float(spec["b"]))
    if kind == ExpShift.kind:
        return ExpShift(float(spec["c"]))
    raise ValueError(f"unknown volatility kind {kind!r}; expected 'abs_affine' or 'exp_shift'")


def eval_sigma_sq(f: VolFunction, y):
    return f(y)


def avg_sigma_sq_discrete(f: VolFunction, path, endpoints: Endpoints = "right"):
    """Discrete time average of ``sigma^2`` along a path.

    ``path`` is a :class:`Path` or an array whose last axis holds ``Y[0..m]``
    (a 2-D array gives one average per row).  With ``endpoints="right"`` the
    average is ``mean(sigma^2(Y[1..m]))``; ``"left"`` uses ``Y[0..m-1]``.
    """
    values = path.values if isinstance(path, Path) else np.asarray(path, dtype=float)
    if values.shape[-1] < 2:
        raise ValueError("path needs at least one step")
    if endpoints == "right":
        window = values[..., 1:]
    elif endpoints == "left":
        window = values[..., :-1]
    else:
        raise ValueError(f"endpoints must be 'right' or 'left', got {endpoints!r}")
    if f.constant:
        # a plain mean of equal values can be off by an ulp
        avg = np.full(window.shape[:-1], f.lower_bound)
    else:
        avg = np.mean(f(window), axis=-1)
    return float(avg) if np.ndim(avg) == 0 else avg


def avg_sigma_sq_exact_deterministic(f: VolFunction, p: OUParams, T: float) -> float:
    """``(1/T) * integral_0^T sigma^2(y0 exp(-alpha s)) ds`` for the noiseless driver."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if isinstance(f, AbsAffine):
        # sign of y0 exp(-alpha s) never changes, so |y| = |y0| exp(-alpha s)
        return f.a * abs(p.y0) * -math.expm1(-p.alpha * T) / (p.alpha * T) + f.b

    def integrand(s):
        return float(f(p.y0 * math.exp(-p.alpha * s)))

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, abserr = integrate.quad(
                integrand, 0.0, T, epsabs=QUAD_TOL, epsrel=0.0, limit=QUAD_LIMIT
            )
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature failed for {f!r} on [0, {T}]: {exc}") from exc
    if not abserr <= QUAD_TOL:
        raise QuadratureError(f"quadrature error estimate {abserr:.3g} exceeds {QUAD_TOL:g}")
    return value / T
