"""Quadrature for the logarithmic energy of a piecewise-constant density.

The density lives on half-cells of width ``w = h/2``.  For two cells the
integral of ``log|s - t|`` has the closed form built from
``G(x) = x^2 log|x| / 2 - 3 x^2 / 4``; on a uniform grid this gives a Toeplitz
kernel, applied with an FFT product.

A piecewise-constant model converges slowly at endpoints where the density
blows up like ``s^{-alpha}``.  Those endpoints are detected from the two end
half-cells, and the mass of the first few half-cells is spread over geometric
subcells following the fitted power law (each half-cell keeps its mass).
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import matmul_toeplitz

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_FAR_X, _FAR_W = np.polynomial.legendre.leggauss(4)
_J_SERIES_FROM = 30


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = x[nz] * np.log(np.abs(x[nz]))
    return out


def _g2(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x != 0
    out[nz] = 0.5 * x[nz] ** 2 * np.log(np.abs(x[nz])) - 0.75 * x[nz] ** 2
    return out


def _inner(s, c, d):
    """Integral of ``log|s - t|`` over ``t`` in ``[c, d]``."""
    return _xlogx(s - c) - _xlogx(s - d) - (d - c)


def pair_integral(a, wa, c, wc):
    """Integral of ``log|s - t|`` over ``[a, a+wa] x [c, c+wc]`` (vectorized).

    Widths are passed separately so that cells far below the resolution of
    their absolute position keep an exact width.  Cells of very different
    widths use Gauss-Legendre over the smaller cell with the exact inner
    integral, which avoids cancellation in the closed form.
    """
    a, wa, c, wc = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (a, wa, c, wc)))
    out = np.empty(a.shape)
    small_a = wa <= wc
    wmax = np.maximum(wa, wc)
    gap = np.maximum(c - a - wa, a - c - wc)
    far = gap > 4 * wmax
    g = ~far & (wmax > 4 * np.minimum(wa, wc))
    ex = ~far & ~g
    if far.any():
        # smooth kernel: tensor Gauss-Legendre, widths enter only as weights
        ha, hc = wa[far] / 2, wc[far] / 2
        off = (c[far] + hc) - (a[far] + ha)
        s = ha[:, None] * _FAR_X[None, :]
        t = hc[:, None] * _FAR_X[None, :]
        d = np.abs(off[:, None, None] + t[:, None, :] - s[:, :, None])
        out[far] = np.einsum("i,j,nij->n", _FAR_W, _FAR_W, np.log(d)) * ha * hc
    if ex.any():
        off = c[ex] - a[ex]
        A, C, D = wa[ex], off, off + wc[ex]
        out[ex] = -(_g2(A - D) - _g2(-D) - _g2(A - C) + _g2(-C))
    if g.any():
        s0 = np.where(small_a, a, c)[g]
        ws = np.where(small_a, wa, wc)[g]
        c0 = np.where(small_a, c, a)[g]
        wo = np.where(small_a, wc, wa)[g]
        half = ws / 2
        rel = (s0 - c0)[:, None] + half[:, None] * (1.0 + _GL_X[None, :])
        out[g] = ((_xlogx(rel) - _xlogx(rel - wo[:, None]) - wo[:, None]) @ _GL_W) * half
    return out


def unit_kernel(m):
    """Integral of ``log|s - t|`` over ``[0,1] x [m, m+1]`` for integer ``m >= 0``."""
    m = np.asarray(m, dtype=float)
    out = np.empty_like(m)
    near = m < _J_SERIES_FROM
    mm = m[near]
    out[near] = -(_g2(-mm) - _g2(-mm - 1) - _g2(1 - mm) + _g2(-mm))
    # the closed form cancels badly for large m; use its asymptotic series
    mf = m[~near]
    out[~near] = np.log(mf) - 1 / (12 * mf ** 2) - 1 / (60 * mf ** 4)
    return out


def _fit_alpha(r0: float, r1: float) -> float:
    """Exponent alpha of ``s^{-alpha}`` matching the ratio of two adjacent cell averages."""
    if r0 <= 0 or r1 <= 0:
        return 0.0
    return 1.0 - np.log1p(2.0 / (r0 / r1)) / np.log(3.0)


def _endpoint_cells(dens: np.ndarray, n_cells: int, octaves: int, per_oct: int):
    """Subcells (lo, width, mass/w) in distance-from-endpoint units of ``w``, or None."""
    if dens.size < 2 * n_cells + 1 or dens[0] <= dens[1] * 1.0001:
        return None
    alpha = _fit_alpha(dens[0], dens[1])
    if not 0.05 < alpha < 0.999:
        return None
    beta = 1.0 - alpha
    cells = []
    ge = np.concatenate([[0.0], 2.0 ** (-np.arange(octaves * per_oct, -1, -1) / per_oct)])
    pm = np.diff(ge ** beta)
    pm /= pm.sum()
    cells.append(np.column_stack([ge[:-1], np.diff(ge), dens[0] * pm]))
    for j in range(1, n_cells):
        e = np.linspace(j, j + 1, 5)
        p = np.diff(e ** beta)
        p /= p.sum()
        cells.append(np.column_stack([e[:-1], np.diff(e), dens[j] * p]))
    return np.vstack(cells)


def log_energy_grid(a: float, b: float, values: np.ndarray, refine: bool = True,
                    n_cells: int = 4, octaves: int = 48, per_oct: int = 2) -> float:
    """Logarithmic energy of the dual-cell density ``values`` on ``[a, b]``.

    Work is done in units of the half-cell width ``w`` with the left endpoint
    at 0; the energy is then ``E_unit + log w`` (mass one).
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    w = (b - a) / (2 * (n - 1))
    nh = 2 * (n - 1)
    dens = np.empty(nh)
    dens[0::2] = values[:-1]
    dens[1::2] = values[1:]
    dens = dens * w  # mass per unit-width half-cell

    left = _endpoint_cells(dens, n_cells, octaves, per_oct) if refine else None
    right = _endpoint_cells(dens[::-1], n_cells, octaves, per_oct) if refine else None
    lo_idx = n_cells if left is not None else 0
    hi_idx = nh - n_cells if right is not None else nh

    bulk = dens[lo_idx:hi_idx]
    kern = unit_kernel(np.arange(bulk.size))
    energy = float(bulk @ matmul_toeplitz((kern, kern), bulk))
    ones = np.ones(bulk.size)
    pieces = []
    if left is not None:
        rho = left[:, 2] / left[:, 1]
        starts = np.arange(lo_idx, hi_idx, dtype=float)
        cross = sum(r * float(pair_integral(lo, wd, starts, ones) @ bulk)
                    for (lo, wd, _), r in zip(left, rho))
        energy += 2.0 * cross
        pieces.append((left[:, 0], left[:, 1], rho))
    if right is not None:
        rho = right[:, 2] / right[:, 1]
        # reflected coordinates: distance from the right endpoint
        starts = nh - np.arange(lo_idx, hi_idx, dtype=float) - 1.0
        cross = sum(r * float(pair_integral(lo, wd, starts, ones) @ bulk)
                    for (lo, wd, _), r in zip(right, rho))
        energy += 2.0 * cross
        pieces.append((right[:, 0], right[:, 1], rho))
    for lo, wd, rho in pieces:
        pp = pair_integral(lo[:, None], wd[:, None], lo[None, :], wd[None, :])
        energy += float(rho @ pp @ rho)
    if len(pieces) == 2:
        (l0, lw, lr), (r0, rw, rr) = pieces
        far = nh - r0 - rw  # right cells in left coordinates
        pp = pair_integral(l0[:, None], lw[:, None], far[None, :], rw[None, :])
        energy += 2.0 * float(lr @ pp @ rr)
    return energy + np.log(w)
