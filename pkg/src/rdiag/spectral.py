"""Spectral measures on the real line and the matrix predicates used throughout.

Two representations are supported and never converted implicitly:

* :class:`Atoms` -- finitely many weighted point masses (empirical spectra).
* :class:`GridDensity` -- a density sampled on a uniform grid.  Node values are
  dual-cell averages, so the trapezoid weights describe a piecewise-constant
  density on the dual cells ``[x_i - h/2, x_i + h/2]`` clipped to ``[a, b]``.
  All grid operations (moments, CDF, pushforward, regridding) use this same
  piecewise-constant model.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "Atoms",
    "GridDensity",
    "SpectralMeasure",
    "FunctionSpec",
    "DEFAULT_GRID",
    "is_unitary",
    "is_self_adjoint",
    "is_positive_semidefinite",
    "as_matrix",
    "esd",
    "singular_square_measure",
    "pushforward",
    "symmetrize",
    "dilate",
    "regrid",
    "measure_moments",
    "quantiles",
    "save_measure",
    "load_measure",
]

DEFAULT_GRID = 4096
MASS_TOL = 1e-10
TIE_TOL = 0.0


# ---------------------------------------------------------------------------
# matrix predicates
# ---------------------------------------------------------------------------

def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a square complex array, raising on bad shapes."""
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 1:
        raise ValueError(f"expected square matrix, got shape {arr.shape}")
    return arr


def _scale(a: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)


def is_self_adjoint(a, tol: float = 1e-10) -> bool:
    a = as_matrix(a)
    return bool(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))) <= tol * _scale(a))


def is_unitary(a, tol: float = 1e-10) -> bool:
    a = as_matrix(a)
    k = a.shape[-1]
    g = np.conj(np.swapaxes(a, -1, -2)) @ a
    return bool(np.max(np.abs(g - np.eye(k))) <= tol)


def is_positive_semidefinite(a, tol: float = 1e-10) -> bool:
    a = as_matrix(a)
    if not is_self_adjoint(a, tol):
        return False
    h = (a + np.conj(np.swapaxes(a, -1, -2))) / 2
    lam = np.linalg.eigvalsh(h)
    return bool(np.min(lam) >= -tol * _scale(a))


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Atoms:
    """Finite atomic probability measure.

    Parameters
    ----------
    locations : array_like
        Strictly increasing atom positions.
    weights : array_like
        Positive weights summing to one.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if loc.shape != w.shape or loc.size == 0:
            raise ValueError("locations and weights must be non-empty and equally long")
        if not np.all(np.isfinite(loc)):
            raise ValueError("atom locations must be finite")
        if np.any(w <= 0):
            raise ValueError("atom weights must be positive")
        if np.any(np.diff(loc) <= 0):
            raise ValueError("atom locations must be strictly increasing")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {w.sum()!r} differs from 1")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_samples(cls, values, weights=None) -> "Atoms":
        """Build from unsorted values, merging exact ties."""
        v = np.asarray(values, dtype=float).ravel()
        w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, float).ravel()
        order = np.argsort(v, kind="stable")
        v, w = v[order], w[order]
        keep = w > 0
        v, w = v[keep], w[keep]
        uniq, idx = np.unique(v, return_inverse=True)
        merged = np.bincount(idx, weights=w)
        return cls(uniq, merged / merged.sum())

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def support(self) -> tuple[float, float]:
        return float(self.locations[0]), float(self.locations[-1])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        c = np.concatenate([[0.0], np.cumsum(self.weights)])
        return c[np.searchsorted(self.locations, x, side="right")]

    def __eq__(self, other):
        return (
            isinstance(other, Atoms)
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True, eq=False)
class GridDensity:
    """Density on ``[a, b]`` sampled at ``n`` uniform nodes.

    ``values[i]`` is the average density over the dual cell of node ``i``.
    """

    a: float
    b: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b) and b > a):
            raise ValueError("grid support must be a finite interval with b > a")
        if v.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite and nonnegative")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "values", v)
        if abs(self.total_mass - 1.0) > MASS_TOL:
            raise ValueError(f"total mass {self.total_mass!r} differs from 1")

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.a, self.b, self.n)

    @property
    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = self.h / 2
        return w

    @property
    def total_mass(self) -> float:
        return float(self.trapezoid_weights @ self.values)

    @property
    def support(self) -> tuple[float, float]:
        return self.a, self.b

    def half_cells(self) -> tuple[np.ndarray, np.ndarray]:
        """Edges (length 2n-1) and densities (length 2n-2) of the half-cells."""
        n = self.n
        edges = self.a + (self.h / 2) * np.arange(2 * n - 1)
        edges[-1] = self.b
        dens = np.empty(2 * (n - 1))
        dens[0::2] = self.values[:-1]
        dens[1::2] = self.values[1:]
        return edges, dens

    def cdf(self, x):
        """Piecewise-linear CDF of the piecewise-constant density."""
        edges, dens = self.half_cells()
        cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(edges))])
        cum /= cum[-1]
        x = np.clip(np.asarray(x, dtype=float), self.a, self.b)
        return np.interp(x, edges, cum)

    @classmethod
    def from_cdf(cls, cdf: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                 n: int = DEFAULT_GRID) -> "GridDensity":
        """Grid whose dual-cell masses are exact increments of ``cdf``."""
        if n < 3:
            raise ValueError("grid needs at least 3 nodes")
        x = np.linspace(a, b, n)
        edges = np.concatenate([[a], (x[:-1] + x[1:]) / 2, [b]])
        masses = np.diff(np.asarray(cdf(edges), dtype=float))
        masses = np.clip(masses, 0.0, None)
        masses /= masses.sum()
        h = (b - a) / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
        return cls(a, b, masses / w)

    @classmethod
    def from_density(cls, pdf: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                     n: int = DEFAULT_GRID) -> "GridDensity":
        """Grid from a density function, cell masses by 8-point Gauss-Legendre."""
        x = np.linspace(a, b, n)
        edges = np.concatenate([[a], (x[:-1] + x[1:]) / 2, [b]])
        gx, gw = np.polynomial.legendre.leggauss(8)
        mid, half = (edges[:-1] + edges[1:]) / 2, np.diff(edges) / 2
        pts = mid[:, None] + half[:, None] * gx[None, :]
        masses = (np.asarray(pdf(pts), dtype=float) @ gw) * half
        cum = np.concatenate([[0.0], np.cumsum(masses)])
        return cls.from_cdf(lambda t: np.interp(t, edges, cum), a, b, n)

    def __eq__(self, other):
        return (
            isinstance(other, GridDensity)
            and self.a == other.a
            and self.b == other.b
            and np.array_equal(self.values, other.values)
        )


SpectralMeasure = Union[Atoms, GridDensity]


# ---------------------------------------------------------------------------
# function catalog
# ---------------------------------------------------------------------------

_INVERSE_KIND = {"affine": "affine", "power": "power", "exp_shift": "log_shift",
                 "log_shift": "exp_shift"}


def _apply_step(kind: str, p: float, t: np.ndarray) -> np.ndarray:
    if kind == "affine":
        return p * t
    if kind == "power":
        return np.power(t, p)
    if kind == "exp_shift":
        return np.expm1(p * t) / p
    if kind == "log_shift":
        return np.log1p(p * t) / p
    raise ValueError(f"unknown catalog entry {kind!r}")


def _step_derivative(kind: str, p: float, t: np.ndarray) -> np.ndarray:
    if kind == "affine":
        return np.full_like(t, p)
    if kind == "power":
        with np.errstate(divide="ignore"):
            return p * np.power(t, p - 1)
    if kind == "exp_shift":
        return np.exp(p * t)
    if kind == "log_shift":
        return 1.0 / (1.0 + p * t)
    raise ValueError(f"unknown catalog entry {kind!r}")


@dataclass(frozen=True)
class FunctionSpec:
    """Increasing bijection of ``[0, inf)`` fixing 0, from a closed catalog.

    ``steps`` are applied in order: ``FunctionSpec((("affine", 2.0), ("power", 0.5)))``
    is ``t -> (2t)**0.5``.
    """

    steps: tuple[tuple[str, float], ...]

    def __post_init__(self):
        steps = tuple((str(k), float(p)) for k, p in self.steps)
        for kind, p in steps:
            if kind not in _INVERSE_KIND:
                raise ValueError(f"unknown catalog entry {kind!r}")
            if not (p > 0 and math.isfinite(p)):
                raise ValueError(f"{kind} parameter must be positive, got {p}")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def affine(cls, a: float, c: float = 0.0) -> "FunctionSpec":
        if c != 0:
            raise ValueError("catalog maps must fix 0: affine offset must be 0")
        return cls((("affine", a),))

    @classmethod
    def power(cls, p: float) -> "FunctionSpec":
        return cls((("power", p),))

    @classmethod
    def exp_shift(cls, s: float) -> "FunctionSpec":
        return cls((("exp_shift", s),))

    @classmethod
    def log_shift(cls, s: float) -> "FunctionSpec":
        return cls((("log_shift", s),))

    @classmethod
    def identity(cls) -> "FunctionSpec":
        return cls((("affine", 1.0),))

    def then(self, other: "FunctionSpec") -> "FunctionSpec":
        """``other`` after ``self``."""
        return FunctionSpec(self.steps + other.steps)

    def __matmul__(self, inner: "FunctionSpec") -> "FunctionSpec":
        """Mathematical composition ``self o inner``."""
        return FunctionSpec(inner.steps + self.steps)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        for kind, p in self.steps:
            t = _apply_step(kind, p, t)
        return t

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        d = np.ones_like(t)
        for kind, p in self.steps:
            d = d * _step_derivative(kind, p, t)
            t = _apply_step(kind, p, t)
        return d

    def inverse(self) -> "FunctionSpec":
        inv = []
        for kind, p in reversed(self.steps):
            ik = _INVERSE_KIND[kind]
            inv.append((ik, 1.0 / p if kind in ("affine", "power") else p))
        return FunctionSpec(tuple(inv))

    def to_dict(self) -> dict:
        return {"steps": [[k, p] for k, p in self.steps]}

    @classmethod
    def from_dict(cls, d: dict) -> "FunctionSpec":
        return cls(tuple((k, p) for k, p in d["steps"]))

    @classmethod
    def parse(cls, text: str) -> "FunctionSpec":
        """Parse ``"affine(2)|power(0.5)"`` (steps separated by ``|``, first applied first)."""
        steps = []
        for part in text.split("|"):
            part = part.strip()
            name, _, rest = part.partition("(")
            if not rest.endswith(")"):
                raise ValueError(f"cannot parse function step {part!r}")
            args = [float(x) for x in rest[:-1].split(",") if x.strip()]
            if name == "affine":
                steps.extend(cls.affine(*args).steps)
            elif len(args) == 1:
                steps.append((name, args[0]))
            else:
                raise ValueError(f"cannot parse function step {part!r}")
        return cls(tuple(steps))

    def __str__(self):
        return "|".join(f"{k}({p:g})" for k, p in self.steps)


# ---------------------------------------------------------------------------
# constructors from matrices
# ---------------------------------------------------------------------------

def esd(a, self_adjoint: bool = True) -> Atoms:
    """Empirical spectral distribution (eigenvalues, weight 1/k each)."""
    a = as_matrix(a)
    if a.ndim != 2:
        raise ValueError("esd expects a single matrix")
    k = a.shape[0]
    try:
        if self_adjoint:
            if not is_self_adjoint(a, 1e-10):
                raise ValueError("matrix is not self-adjoint within 1e-10")
            lam = np.linalg.eigvalsh((a + a.conj().T) / 2)
        else:
            ev = np.linalg.eigvals(a)
            if np.max(np.abs(ev.imag)) > 1e-10 * _scale(a):
                raise ValueError("eigenvalues are not real; complex spectra are not supported")
            lam = np.sort(ev.real)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(a)
        raise np.linalg.LinAlgError(f"eigensolver failed (condition number {cond:.3e})") from exc
    return Atoms.from_samples(lam, np.full(k, 1.0 / k))


def singular_square_measure(a) -> Atoms:
    """Eigenvalues of ``a* a / 2`` as an atomic measure."""
    a = as_matrix(a)
    s = np.linalg.svd(a, compute_uv=False)
    return Atoms.from_samples(np.sort(s * s / 2), np.full(s.size, 1.0 / s.size))


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------

def _grid_from_cdf_of(m: GridDensity, a: float, b: float, n: int,
                      pullback: Callable[[np.ndarray], np.ndarray]) -> GridDensity:
    return GridDensity.from_cdf(lambda y: m.cdf(pullback(y)), a, b, n)


def pushforward(m: SpectralMeasure, f: FunctionSpec) -> SpectralMeasure:
    """Image measure ``f_* m`` for ``m`` supported in ``[0, inf)``."""
    lo, _ = m.support
    if lo < 0:
        raise ValueError("pushforward requires support in [0, inf)")
    if isinstance(m, Atoms):
        # distinct atoms can collide in floating point (e.g. tiny values squared)
        return Atoms.from_samples(f(m.locations), m.weights)
    finv = f.inverse()
    fa, fb = float(f(m.a)), float(f(m.b))
    return _grid_from_cdf_of(m, fa, fb, m.n, lambda y: finv(np.clip(y, fa, fb)))


def dilate(m: SpectralMeasure, lam: float) -> SpectralMeasure:
    """Image of ``m`` under ``t -> lam * t`` for ``lam > 0``."""
    if not lam > 0:
        raise ValueError("dilation factor must be positive")
    if isinstance(m, Atoms):
        return Atoms(m.locations * lam, m.weights)
    return GridDensity(m.a * lam, m.b * lam, m.values / lam)


def regrid(m: GridDensity, a: float, b: float, n: int) -> GridDensity:
    """Resample a grid density onto a new uniform grid, preserving cell masses."""
    return _grid_from_cdf_of(m, a, b, n, lambda y: y)


def _is_symmetric(m: SpectralMeasure) -> bool:
    if isinstance(m, Atoms):
        return (np.array_equal(m.locations, -m.locations[::-1])
                and np.allclose(m.weights, m.weights[::-1], rtol=0, atol=1e-15))
    return m.a == -m.b and np.allclose(m.values, m.values[::-1], rtol=1e-13, atol=1e-15)


def symmetrize(mu_b: SpectralMeasure) -> SpectralMeasure:
    """Symmetric measure with ``|x|`` distributed as ``mu_b``.

    Already-symmetric measures are returned unchanged.
    """
    if _is_symmetric(mu_b):
        return mu_b
    lo, _ = mu_b.support
    if lo < 0:
        raise ValueError("symmetrize requires support in [0, inf)")
    if isinstance(mu_b, Atoms):
        loc, w = mu_b.locations, mu_b.weights
        pos = loc > 0
        zero_w = w[~pos].sum()
        locs = np.concatenate([-loc[pos][::-1], [0.0] if zero_w > 0 else [], loc[pos]])
        ws = np.concatenate([w[pos][::-1] / 2, [zero_w] if zero_w > 0 else [], w[pos] / 2])
        return Atoms(locs, ws)
    m = mu_b if mu_b.a == 0 else regrid(mu_b, 0.0, mu_b.b, mu_b.n)
    v = m.values / 2
    return GridDensity(-m.b, m.b, np.concatenate([v[::-1], v[1:]]))


def measure_moments(m: SpectralMeasure, n: int) -> list[float]:
    """Moments ``int t^j dm`` for ``j = 0..n``.

    Grid moments integrate the piecewise-constant density exactly per cell.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    j = np.arange(n + 1)
    if isinstance(m, Atoms):
        return [float(v) for v in (m.weights[None, :] * m.locations[None, :] ** j[:, None]).sum(axis=1)]
    edges, dens = m.half_cells()
    lo, hi = edges[:-1], edges[1:]
    out = []
    for jj in j:
        cell = (hi ** (jj + 1) - lo ** (jj + 1)) / (jj + 1)
        out.append(float(dens @ cell))
    out[0] = 1.0 if abs(out[0] - 1.0) < 1e-12 else out[0]
    return out


def quantiles(m: SpectralMeasure, k: int) -> np.ndarray:
    """Quantiles at levels ``(i - 1/2)/k``, ``i = 1..k`` (generalized inverse CDF)."""
    if k < 1:
        raise ValueError("k must be positive")
    levels = (np.arange(1, k + 1) - 0.5) / k
    if isinstance(m, Atoms):
        c = np.cumsum(m.weights)
        idx = np.searchsorted(c, levels - 1e-12, side="left")
        return m.locations[np.minimum(idx, m.locations.size - 1)]
    edges, dens = m.half_cells()
    cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(edges))])
    cum /= cum[-1]
    idx = np.clip(np.searchsorted(cum, levels, side="left"), 1, cum.size - 1)
    c0, c1 = cum[idx - 1], cum[idx]
    frac = np.where(c1 > c0, (levels - c0) / np.where(c1 > c0, c1 - c0, 1.0), 0.0)
    return edges[idx - 1] + frac * (edges[idx] - edges[idx - 1])


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_measure(m: SpectralMeasure, path) -> None:
    """Write atoms as ``location,weight`` rows or a grid as ``a``, ``b``, ``n`` then values."""
    with open(path, "w", newline="") as fh:
        if isinstance(m, Atoms):
            w = csv.writer(fh)
            w.writerow(["location", "weight"])
            for x, p in zip(m.locations, m.weights):
                w.writerow([_fmt(x), _fmt(p)])
        else:
            fh.write(f"{_fmt(m.a)}\n{_fmt(m.b)}\n{m.n}\n")
            for v in m.values:
                fh.write(_fmt(v) + "\n")


def load_measure(path) -> SpectralMeasure:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].startswith("location"):
        rows = [ln.split(",") for ln in lines[1:]]
        return Atoms([float(r[0]) for r in rows], [float(r[1]) for r in rows])
    a, b, n = float(lines[0]), float(lines[1]), int(lines[2])
    vals = np.array([float(x) for x in lines[3:]])
    if vals.size != n:
        raise ValueError(f"grid file declares {n} nodes but holds {vals.size}")
    return GridDensity(a, b, vals)
