"""Catalog of compactly supported laws used as targets and test inputs.

Grid laws are built from closed-form (or angle-substituted) CDFs so that each
dual cell carries its exact mass.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .spectral import DEFAULT_GRID, Atoms, GridDensity, SpectralMeasure

__all__ = [
    "semicircle",
    "quarter_circle",
    "marchenko_pastur",
    "arcsine",
    "uniform",
    "point",
    "two_point",
    "LAWS",
    "make_law",
]


def _semicircle_cdf_unit(x):
    """CDF of the standard semicircle on [-2, 2]."""
    x = np.clip(x, -2.0, 2.0)
    return 0.5 + (x * np.sqrt(4.0 - x * x) / 4.0 + np.arcsin(x / 2.0)) / np.pi


def semicircle(variance: float = 1.0, n: int = DEFAULT_GRID) -> GridDensity:
    """Semicircle law with the given variance, support ``[-2 sigma, 2 sigma]``."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    r = 2.0 * math.sqrt(variance)
    s = math.sqrt(variance)
    return GridDensity.from_cdf(lambda t: _semicircle_cdf_unit(t / s), -r, r, n)


def quarter_circle(n: int = DEFAULT_GRID) -> GridDensity:
    """Quarter-circle law ``sqrt(4 - t^2)/pi`` on ``[0, 2]`` (second moment 1)."""
    return GridDensity.from_cdf(lambda t: 2.0 * _semicircle_cdf_unit(t) - 1.0, 0.0, 2.0, n)


def _angle_cdf(lo: float, hi: float, integrand: Callable[[np.ndarray], np.ndarray]):
    """CDF on [lo, hi] via ``t = c - r cos(theta)``; ``integrand`` is in theta."""
    c, r = (lo + hi) / 2, (hi - lo) / 2
    gx, gw = np.polynomial.legendre.leggauss(12)

    def cdf(t):
        t = np.clip(np.asarray(t, dtype=float), lo, hi)
        theta = np.arccos(np.clip((c - t) / r, -1.0, 1.0))
        flat = theta.ravel()
        order = np.argsort(flat)
        th = np.concatenate([[0.0], flat[order]])
        mid, half = (th[:-1] + th[1:]) / 2, np.diff(th) / 2
        pts = mid[:, None] + half[:, None] * gx[None, :]
        pieces = (integrand(pts) @ gw) * half
        out = np.empty_like(flat)
        out[order] = np.cumsum(pieces)
        return out.reshape(theta.shape)

    return cdf


def marchenko_pastur(ratio: float = 1.0, n: int = DEFAULT_GRID) -> GridDensity:
    """Marchenko-Pastur law with mean 1 and ratio in ``(0, 1]``."""
    if not 0 < ratio <= 1:
        raise ValueError("ratio must lie in (0, 1]; larger ratios carry an atom at 0")
    lo, hi = (1 - math.sqrt(ratio)) ** 2, (1 + math.sqrt(ratio)) ** 2
    c, r = (lo + hi) / 2, (hi - lo) / 2

    def integrand(theta):
        # density sqrt((hi-t)(t-lo)) / (2 pi ratio t) times dt/dtheta
        s = np.sin(theta)
        t = c - r * np.cos(theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (r * s) ** 2 / (2 * math.pi * ratio * t)
        # only degenerate zero-length pieces touch t = 0 when ratio = 1
        return np.where(t > 0, out, 0.0)

    cdf = _angle_cdf(lo, hi, integrand)
    total = float(cdf(np.array([hi]))[0])
    return GridDensity.from_cdf(lambda t: cdf(t) / total, lo, hi, n)


def arcsine(a: float = -1.0, b: float = 1.0, n: int = DEFAULT_GRID) -> GridDensity:
    """Arcsine law on ``[a, b]``."""
    if not b > a:
        raise ValueError("need b > a")
    c, r = (a + b) / 2, (b - a) / 2
    return GridDensity.from_cdf(
        lambda t: 0.5 + np.arcsin(np.clip((t - c) / r, -1, 1)) / math.pi, a, b, n)


def uniform(a: float = 0.0, b: float = 1.0, n: int = DEFAULT_GRID) -> GridDensity:
    """Uniform law on ``[a, b]``."""
    if not b > a:
        raise ValueError("need b > a")
    return GridDensity.from_cdf(lambda t: (np.clip(t, a, b) - a) / (b - a), a, b, n)


def point(c: float = 0.0) -> Atoms:
    """Dirac mass at ``c``."""
    return Atoms([c], [1.0])


def two_point(p: float = 0.5, a: float = 0.0, b: float = 1.0) -> Atoms:
    """``p delta_a + (1 - p) delta_b``."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    if a == b:
        return point(a)
    if a > b:
        a, b, p = b, a, 1 - p
    return Atoms([a, b], [p, 1 - p])


LAWS: dict[str, Callable[..., SpectralMeasure]] = {
    "semicircle": semicircle,
    "quarter_circle": quarter_circle,
    "marchenko_pastur": marchenko_pastur,
    "arcsine": arcsine,
    "uniform": uniform,
    "point": point,
    "two_point": two_point,
}


def make_law(name: str, **params) -> SpectralMeasure:
    """Look up a catalog law by name."""
    try:
        ctor = LAWS[name]
    except KeyError:
        raise ValueError(f"unknown law {name!r}; choose from {sorted(LAWS)}") from None
    return ctor(**params)
