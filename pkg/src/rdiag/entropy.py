"""One-variable free entropy and the measure-level entropy identities.

Every function returns an :class:`EntropyValue`; ``-inf`` is a value (tagged
through :attr:`EntropyValue.is_neg_inf`), never an exception.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._logkernel import log_energy_grid
from .spectral import (
    Atoms,
    FunctionSpec,
    GridDensity,
    SpectralMeasure,
    dilate,
    pushforward,
    regrid,
    symmetrize,
)

__all__ = [
    "CHI_CONSTANT",
    "EntropyValue",
    "log_energy",
    "chi_sa_one",
    "chi_rdiag",
    "chi_symmetric_identity_defect",
    "chi_upper_bound",
    "changevar_defect",
    "changevar_integral",
    "log_energy_estimator",
    "HALF_SQUARE",
]

#: 3/4 + log(2 pi)/2, the additive constant of the one-variable formula.
CHI_CONSTANT = 0.75 + 0.5 * math.log(2.0 * math.pi)

#: t -> t^2 / 2
HALF_SQUARE = FunctionSpec.power(2.0).then(FunctionSpec.affine(0.5))

# ratio |E(n) - E(n/2)| -> error bound, assuming at least sqrt(h) convergence
_TAIL_FACTOR = 1.0 / (math.sqrt(2.0) - 1.0)


@dataclass(frozen=True)
class EntropyValue:
    """An entropy or log-energy value with its provenance.

    Attributes
    ----------
    value : float
        ``-inf`` when the quantity diverges.
    method : str
        ``"quadrature"`` or ``"eigenvalue_estimator"``.
    error_estimate : float
        Nonnegative error scale (0 for exact ``-inf``).
    """

    value: float
    method: str
    error_estimate: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "error_estimate", float(self.error_estimate))

    @property
    def is_neg_inf(self) -> bool:
        return self.value == -math.inf

    def shifted(self, c: float) -> "EntropyValue":
        return EntropyValue(self.value + c, self.method, self.error_estimate)

    def scaled(self, c: float) -> "EntropyValue":
        return EntropyValue(self.value * c, self.method, self.error_estimate * abs(c))

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method,
                "error_estimate": self.error_estimate}


NEG_INF = -math.inf


def _grid_energy(m: GridDensity) -> float:
    return log_energy_grid(m.a, m.b, m.values)


def log_energy(m: SpectralMeasure, error: bool = True) -> EntropyValue:
    """Logarithmic energy ``int int log|s - t| dm(s) dm(t)``.

    Parameters
    ----------
    m : SpectralMeasure
        Atomic measures always give ``-inf`` (each atom pairs with itself).
    error : bool
        If true, also evaluate on a grid with about half the nodes and report
        ``|E(n) - E(n/2)| / (sqrt(2) - 1)`` as the error estimate.
    """
    if isinstance(m, Atoms):
        return EntropyValue(NEG_INF, "quadrature", 0.0)
    e = _grid_energy(m)
    err = 0.0
    if error:
        coarse = regrid(m, m.a, m.b, (m.n + 1) // 2)
        err = abs(e - _grid_energy(coarse)) * _TAIL_FACTOR
    return EntropyValue(e, "quadrature", err)


def chi_sa_one(m: SpectralMeasure) -> EntropyValue:
    """Free entropy of one self-adjoint variable with distribution ``m``."""
    return log_energy(m).shifted(CHI_CONSTANT)


def chi_rdiag(mu_b: SpectralMeasure) -> EntropyValue:
    """Free entropy of ``u b`` with ``u`` Haar and free from ``b ~ mu_b``."""
    return chi_sa_one(pushforward(mu_b, HALF_SQUARE)).shifted(CHI_CONSTANT)


def chi_symmetric_identity_defect(mu_b: SpectralMeasure) -> float:
    """``|chi_rdiag(mu_b) - 2 chi_sa(x / sqrt 2)|`` for ``x`` symmetric with ``|x| ~ mu_b``."""
    if isinstance(mu_b, Atoms):
        raise ValueError("identity defect is undefined for atomic laws (both sides are -inf)")
    lhs = chi_rdiag(mu_b)
    rhs = chi_sa_one(dilate(symmetrize(mu_b), 2.0 ** -0.5))
    return abs(lhs.value - 2.0 * rhs.value)


def chi_upper_bound(mu_yy: SpectralMeasure) -> EntropyValue:
    """Upper bound on the free entropy of any ``y`` whose ``y* y`` has law ``mu_yy``."""
    half = pushforward(mu_yy, FunctionSpec.affine(0.5))
    return chi_sa_one(half).shifted(CHI_CONSTANT)


def changevar_integral(mu: GridDensity, f: FunctionSpec, rows: int = 256) -> float:
    """``int int log|(f(s) - f(t)) / (s - t)| dmu dmu`` by half-cell midpoints.

    The divided difference is smooth for catalog maps away from ``f' = 0``,
    so a midpoint rule on the half-cells is second order.
    """
    edges, dens = mu.half_cells()
    mass = dens * np.diff(edges)
    keep = mass > 0
    s = ((edges[:-1] + edges[1:]) / 2)[keep]
    mass = mass[keep]
    fs = f(s)
    ds = f.derivative(s)
    total = 0.0
    for i in range(0, s.size, rows):
        si, fi = s[i:i + rows, None], fs[i:i + rows, None]
        num = fi - fs[None, :]
        den = si - s[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            dd = np.where(den != 0, num / np.where(den != 0, den, 1.0), ds[None, :])
        total += float(mass[i:i + rows] @ np.log(dd) @ mass)
    return total


def changevar_defect(mu: SpectralMeasure, f: FunctionSpec) -> float:
    """Mismatch between the log-energy shift under ``f`` and the divided-difference integral."""
    if isinstance(mu, Atoms):
        raise ValueError("change-of-variables defect needs a non-atomic law")
    shift = log_energy(pushforward(mu, f), error=False).value - log_energy(mu, error=False).value
    return abs(shift - changevar_integral(mu, f))


def log_energy_estimator(eigs) -> EntropyValue:
    """Finite-k estimate ``k^-2 sum_{i != j} log|l_i - l_j|`` (no bias correction).

    The error estimate is the heuristic bias scale ``(1 + log k)/k``.
    """
    lam = np.sort(np.asarray(eigs, dtype=float).ravel())
    k = lam.size
    if k < 2:
        raise ValueError("need at least two eigenvalues")
    bias = (1.0 + math.log(k)) / k
    if np.any(np.diff(lam) == 0):
        return EntropyValue(NEG_INF, "eigenvalue_estimator", bias)
    diff = lam[None, :] - lam[:, None]
    iu = np.triu_indices(k, 1)
    val = 2.0 * float(np.sum(np.log(diff[iu]))) / (k * k)
    return EntropyValue(val, "eigenvalue_estimator", bias)
