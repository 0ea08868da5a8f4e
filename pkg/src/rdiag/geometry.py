"""Polar decomposition geometry: Jacobians, unitary group volumes, measure checks.

Conventions
-----------
``M_k`` carries the real inner product ``Re Tr(a b*)``; orthonormal real
coordinates are the real and imaginary parts of the entries.  ``M_k^sa`` is
given the orthonormal basis ``e_aa``, ``(e_ab + e_ba)/sqrt2``,
``i(e_ab - e_ba)/sqrt2`` and the Lie algebra ``i M_k^sa`` of ``U(k)`` the basis
``i`` times those.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats
from scipy.linalg import expm

from .entropy import CHI_CONSTANT
from .models import RngStream, ginibre
from .spectral import as_matrix, is_positive_semidefinite

__all__ = [
    "PolarPair",
    "polar_decompose",
    "jacobian_dp",
    "jacobian_ds",
    "fd_jacobian_dp",
    "fd_jacobian_ds",
    "sa_basis",
    "unitary_algebra_basis",
    "volume_ck",
    "limck_residual",
    "PushCheckReport",
    "push_measure_check",
    "k2_cell_probabilities",
    "predicted_eigen_density",
    "K2_EDGES",
]


@dataclass(frozen=True)
class PolarPair:
    """``a = v p`` with ``v`` unitary and ``p = (a* a)^{1/2}``."""

    v: np.ndarray
    p: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.v @ self.p


def polar_decompose(a) -> PolarPair:
    """Polar decomposition via the SVD ``a = W S V*``: ``v = W V*``, ``p = V S V*``.

    Works on stacks ``(..., k, k)``.  For singular ``a`` the unitary part is the
    one produced by the SVD, which is deterministic for a given input.
    """
    a = as_matrix(a)
    w, s, vh = np.linalg.svd(a)
    vmat = np.conj(np.swapaxes(vh, -1, -2))
    p = (vmat * s[..., None, :]) @ vh
    p = (p + np.conj(np.swapaxes(p, -1, -2))) / 2
    return PolarPair(w @ vh, p)


def _psd_eigenvalues(p) -> np.ndarray:
    p = as_matrix(p)
    if p.ndim != 2:
        raise ValueError("expected a single matrix")
    if not is_positive_semidefinite(p, 1e-10):
        raise ValueError("matrix is not positive semidefinite")
    lam = np.linalg.eigvalsh((p + p.conj().T) / 2)
    return np.clip(lam, 0.0, None)


def _log_det_half_sum(p) -> float:
    """``log det (1/2)(1 x p + p x 1) = -k^2 log 2 + sum_{a,b} log(l_a + l_b)``."""
    lam = _psd_eigenvalues(p)
    k = lam.size
    s = lam[:, None] + lam[None, :]
    if np.any(s <= 0):
        return -math.inf
    return float(-k * k * math.log(2.0) + np.sum(np.log(s)))


def jacobian_dp(p) -> float:
    """Log Jacobian of ``(v, p) -> v p`` at ``(1, p)``."""
    return _log_det_half_sum(p)


def jacobian_ds(p) -> float:
    """Log Jacobian of ``S: y -> y* y / 2`` restricted to positive ``p``.

    Same expression as :func:`jacobian_dp`; the two agree identically.
    """
    return _log_det_half_sum(p)


def sa_basis(k: int) -> list[np.ndarray]:
    """Orthonormal basis of ``M_k^sa`` under ``Re Tr(a b*)``."""
    out = []
    r2 = math.sqrt(2.0)
    for a in range(k):
        e = np.zeros((k, k), complex)
        e[a, a] = 1
        out.append(e)
    for a in range(k):
        for b in range(a + 1, k):
            e = np.zeros((k, k), complex)
            e[a, b] = e[b, a] = 1 / r2
            out.append(e)
            f = np.zeros((k, k), complex)
            f[a, b], f[b, a] = 1j / r2, -1j / r2
            out.append(f)
    return out


def unitary_algebra_basis(k: int) -> list[np.ndarray]:
    """Orthonormal basis of ``i M_k^sa``: ``i e_aa``, ``(e_ab - e_ba)/sqrt2``, ``i(e_ab + e_ba)/sqrt2``."""
    out = []
    r2 = math.sqrt(2.0)
    for a in range(k):
        e = np.zeros((k, k), complex)
        e[a, a] = 1j
        out.append(e)
    for a in range(k):
        for b in range(a + 1, k):
            e = np.zeros((k, k), complex)
            e[a, b], e[b, a] = 1 / r2, -1 / r2
            out.append(e)
            f = np.zeros((k, k), complex)
            f[a, b] = f[b, a] = 1j / r2
            out.append(f)
    return out


def _real_coords(m: np.ndarray) -> np.ndarray:
    return np.concatenate([m.real.ravel(), m.imag.ravel()])


def _sa_coords(m: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    return np.array([np.real(np.trace(m @ e.conj().T)) for e in basis])


def fd_jacobian_dp(p, step: float = 1e-5) -> float:
    """Central-difference log Jacobian of ``(v, p) -> v p`` at ``(1, p)``."""
    p = as_matrix(p)
    k = p.shape[0]
    cols = []
    for xi in unitary_algebra_basis(k):
        plus, minus = expm(step * xi) @ p, expm(-step * xi) @ p
        cols.append(_real_coords((plus - minus) / (2 * step)))
    for eta in sa_basis(k):
        plus, minus = p + step * eta, p - step * eta
        cols.append(_real_coords((plus - minus) / (2 * step)))
    _, logdet = np.linalg.slogdet(np.column_stack(cols))
    return float(logdet)


def fd_jacobian_ds(p, step: float = 1e-5) -> float:
    """Central-difference log Jacobian of ``x -> x^2 / 2`` on ``M_k^sa`` at ``p``."""
    p = as_matrix(p)
    k = p.shape[0]
    basis = sa_basis(k)
    cols = []
    for eta in basis:
        plus, minus = p + step * eta, p - step * eta
        cols.append(_sa_coords((plus @ plus - minus @ minus) / (4 * step), basis))
    _, logdet = np.linalg.slogdet(np.column_stack(cols))
    return float(logdet)


def volume_ck(k: int) -> float:
    """``log vol U(k) = (k(k+1)/2) log 2pi - sum_{j<k} log j!`` for ``Re Tr(a b*)``."""
    if k < 1:
        raise ValueError("k must be positive")
    logfact = special.gammaln(np.arange(2, k + 1, dtype=float)).sum() if k > 1 else 0.0
    return 0.5 * k * (k + 1) * math.log(2.0 * math.pi) - float(logfact)


def limck_residual(k: int) -> float:
    """``volume_ck(k)/k^2 + (1/2) log k - (3/4 + (1/2) log 2pi)``."""
    return volume_ck(k) / (k * k) + 0.5 * math.log(k) - CHI_CONSTANT


# ---------------------------------------------------------------------------
# measure preservation check
# ---------------------------------------------------------------------------

def predicted_eigen_density(lam) -> np.ndarray:
    """Unnormalized density of the eigenvalues of ``p = (g* g)^{1/2}``.

    Product of the Gaussian weight ``exp(-sum l^2)``, the polar Jacobian
    ``prod_{a,b}(l_a + l_b)`` and the Weyl factor ``prod_{a<b}(l_a - l_b)^2``.
    """
    lam = np.asarray(lam, dtype=float)
    k = lam.shape[-1]
    gauss = np.exp(-np.sum(lam ** 2, axis=-1))
    jac = np.prod((lam[..., :, None] + lam[..., None, :]).reshape(*lam.shape[:-1], k * k), axis=-1)
    weyl = np.ones(lam.shape[:-1])
    for a in range(k):
        for b in range(a + 1, k):
            weyl = weyl * (lam[..., a] - lam[..., b]) ** 2
    return gauss * jac * weyl


def _gamma_moment(n: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``int_lo^hi x^n e^{-x} dx``."""
    f = math.factorial(n)
    return f * (special.gammainc(n + 1, hi) - special.gammainc(n + 1, lo))


def k2_cell_probabilities(edges) -> np.ndarray:
    """Probabilities of ordered cells ``x1 in bin i, x2 in bin j`` (``i >= j``) for k = 2.

    ``x = lambda^2`` has density ``(x1 - x2)^2 e^{-x1-x2}`` on ``x1 > x2``.
    Returns a lower-triangular matrix.
    """
    e = np.asarray(edges, dtype=float)
    lo, hi = e[:-1], e[1:]
    m0, m1, m2 = (_gamma_moment(n, lo, hi) for n in (0, 1, 2))
    rect = m2[:, None] * m0[None, :] - 2 * m1[:, None] * m1[None, :] + m0[:, None] * m2[None, :]
    probs = np.tril(rect, -1) + np.diag(np.diag(rect) / 2)
    return probs


K2_EDGES = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0, 8.0, math.inf)


@dataclass
class PushCheckReport:
    """Goodness-of-fit outcome of the measure-preservation check."""

    k: int
    method: str
    statistic: float
    p_value: float
    threshold: float
    passed: bool
    n_samples: int
    dof: int | None = None
    control: "PushCheckReport | None" = None

    def to_dict(self) -> dict:
        d = {"k": self.k, "method": self.method, "statistic": self.statistic,
             "p_value": self.p_value, "threshold": self.threshold, "pass": self.passed,
             "n_samples": self.n_samples, "dof": self.dof}
        if self.control is not None:
            d["control"] = self.control.to_dict()
        return d


def _chi2_ordered(x: np.ndarray, threshold: float, edges=K2_EDGES) -> tuple[float, float, int]:
    """Chi-square of ordered pairs ``x[:, 0] >= x[:, 1]`` against the k = 2 law."""
    e = np.asarray(edges)
    probs = k2_cell_probabilities(e)
    i = np.clip(np.searchsorted(e, x[:, 0], side="right") - 1, 0, len(e) - 2)
    j = np.clip(np.searchsorted(e, x[:, 1], side="right") - 1, 0, len(e) - 2)
    counts = np.zeros_like(probs)
    np.add.at(counts, (i, j), 1)
    mask = np.tril(np.ones_like(probs, dtype=bool))
    p, c = probs[mask], counts[mask]
    n = x.shape[0]
    expected = n * p
    small = expected < 5
    if small.any():
        expected = np.append(expected[~small], expected[small].sum())
        c = np.append(c[~small], c[small].sum())
    stat = float(np.sum((c - expected) ** 2 / expected))
    dof = expected.size - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


def _sample_p_eigs(k: int, n_samples: int, rng: RngStream, chunk: int = 10_000) -> np.ndarray:
    out = []
    for c, start in enumerate(range(0, n_samples, chunk)):
        size = min(chunk, n_samples - start)
        g = ginibre(k, 1.0, rng.child(c), size)
        p = polar_decompose(g).p
        out.append(np.linalg.eigvalsh(p)[:, ::-1])
    return np.clip(np.concatenate(out), 0.0, None)


def push_measure_check(k: int, n_samples: int, rng: RngStream, threshold: float = 1e-3,
                       control: bool = True) -> PushCheckReport:
    """Test the eigenvalue law of ``p`` in ``g = v p`` (``g`` unit-variance Ginibre).

    k = 2: chi-square over ordered cells of ``x = lambda^2``, plus the
    shuffled-pair control (pairs built from different samples) which must fail.
    k = 1: Kolmogorov-Smirnov against ``P(|g| <= r) = 1 - e^{-r^2}``.
    """
    if n_samples < 10_000:
        raise ValueError("need at least 10^4 samples")
    if k not in (1, 2):
        raise ValueError("push_measure_check supports k = 1 and k = 2")
    lam = _sample_p_eigs(k, n_samples, rng.child(0))
    if k == 1:
        res = stats.kstest(lam[:, 0], lambda r: 1.0 - np.exp(-np.square(r)))
        return PushCheckReport(1, "ks", float(res.statistic), float(res.pvalue), threshold,
                               bool(res.pvalue > threshold), n_samples)
    x = lam ** 2
    stat, pval, dof = _chi2_ordered(x, threshold)
    rep = PushCheckReport(2, "chi2", stat, pval, threshold, pval > threshold, n_samples, dof)
    if control:
        perm = rng.child(1).generator().permutation(n_samples)
        mixed = np.column_stack([x[:, 0], x[perm, 1]])
        mixed = np.sort(mixed, axis=1)[:, ::-1]
        cs, cp, cd = _chi2_ordered(mixed, threshold)
        rep.control = PushCheckReport(2, "chi2-shuffled-control", cs, cp, threshold,
                                      cp > threshold, n_samples, cd)
    return rep
