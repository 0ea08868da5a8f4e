"""Microstate sets, their log-volumes, and the block amplification bookkeeping.

Lebesgue measure on ``M_k`` uses the real and imaginary parts of the entries
as coordinates; on ``M_k^sa`` it uses ``x_ii, sqrt2 Re x_ij, sqrt2 Im x_ij``
(``i < j``), so that ``Tr(x^2)`` is the squared Euclidean norm.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .cumulants import MomentTable
from .entropy import chi_rdiag
from .laws import quarter_circle
from .models import RngStream, chunked_map
from .spectral import dilate
from .words import StarWord, all_words, canonical, word_traces

__all__ = [
    "GammaSpec",
    "EntropyEstimate",
    "Membership",
    "MAX_REAL_DIMENSION",
    "gamma_membership",
    "log_volume_estimate",
    "log_volume_splitting",
    "chi_curve",
    "realify",
    "block_embed",
    "entry_split",
    "amplification_constant",
]

#: Largest real dimension accepted by the volume estimators.
MAX_REAL_DIMENSION = 200
LOW_CONFIDENCE_ESS = 100.0
_MIN_VARIANCE = 1e-12


@dataclass(frozen=True)
class GammaSpec:
    """Microstate set: norm bound ``R``, word length ``m``, tolerance ``epsilon``.

    ``targets`` supplies the moments; its symbols are the variables.  For a
    self-adjoint spec every symbol of ``targets`` must be self-adjoint.
    """

    R: float
    m: int
    epsilon: float
    targets: MomentTable
    self_adjoint: bool = False

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.targets.order < self.m:
            raise ValueError(f"targets stop at order {self.targets.order} < m = {self.m}")
        if self.self_adjoint and not all(self.targets.self_adjoint):
            raise ValueError("self-adjoint spec needs self-adjoint target symbols")

    @property
    def n_vars(self) -> int:
        return self.targets.n_symbols

    def real_dimension(self, k: int) -> int:
        return (1 if self.self_adjoint else 2) * k * k * self.n_vars

    def words(self) -> list[StarWord]:
        """One word per rotation/adjoint class, lengths ``1..m``."""
        sa = self.targets.self_adjoint if self.self_adjoint else (False,) * self.n_vars
        seen, out = set(), []
        for w in all_words(sa, self.m, 1):
            rep, _ = canonical(w)
            rep = rep.normalized(self.targets.self_adjoint)
            if rep not in seen:
                seen.add(rep)
                out.append(rep)
        return out

    def target_values(self, words) -> np.ndarray:
        return np.array([self.targets[w] for w in words], dtype=complex)


@dataclass(frozen=True)
class Membership:
    """Outcome of :func:`gamma_membership`; unpacks as ``(flag, deviation, word)``."""

    is_member: bool
    worst_deviation: float
    worst_word: str
    norm_ok: bool = True

    def __iter__(self):
        return iter((self.is_member, self.worst_deviation, self.worst_word))


@dataclass(frozen=True)
class EntropyEstimate:
    """A log-volume estimate of a microstate set and its normalized value."""

    log_volume: float
    stderr: float
    effective_sample_size: float
    k: int
    normalized: float
    n_samples: int
    method: str
    n_vars: int = 1
    self_adjoint: bool = False
    upper_bound: float | None = None
    details: dict = field(default_factory=dict)

    @property
    def low_confidence(self) -> bool:
        return self.effective_sample_size < LOW_CONFIDENCE_ESS

    @property
    def is_neg_inf(self) -> bool:
        return self.log_volume == -math.inf

    @property
    def normalized_stderr(self) -> float:
        return self.stderr / (self.k * self.k)

    def to_dict(self) -> dict:
        return {"k": self.k, "log_volume": self.log_volume, "stderr": self.stderr,
                "ess": self.effective_sample_size, "normalized": self.normalized,
                "normalized_stderr": self.normalized_stderr, "n_samples": self.n_samples,
                "method": self.method, "low_confidence": self.low_confidence,
                "upper_bound": self.upper_bound, **self.details}


def _normalize(log_volume: float, k: int, n_vars: int, self_adjoint: bool) -> float:
    shift = (0.5 if self_adjoint else 1.0) * n_vars * math.log(k)
    return log_volume / (k * k) + shift


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def _op_norms(x: np.ndarray, self_adjoint: bool) -> np.ndarray:
    if self_adjoint:
        return np.abs(np.linalg.eigvalsh(x)).max(axis=-1)
    return np.linalg.svd(x, compute_uv=False)[..., 0]


def _distances(mats: list[np.ndarray], spec: GammaSpec, words, targets) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample worst deviation, its word index, and the norm check."""
    dev = np.abs(word_traces(mats, words) - targets)
    norm_ok = np.ones(dev.shape[:-1], dtype=bool)
    for x in mats:
        norm_ok &= _op_norms(x, spec.self_adjoint) <= spec.R
    return dev.max(axis=-1), dev.argmax(axis=-1), norm_ok


def gamma_membership(mats, spec: GammaSpec) -> Membership:
    """Check whether a tuple of ``k x k`` matrices lies in the microstate set."""
    mats = [np.asarray(m, dtype=complex) for m in mats]
    if len(mats) != spec.n_vars:
        raise ValueError(f"expected {spec.n_vars} matrices, got {len(mats)}")
    if len({m.shape for m in mats}) != 1 or mats[0].ndim != 2 or mats[0].shape[0] != mats[0].shape[1]:
        raise ValueError("matrices must be square and share one dimension")
    words = spec.words()
    dmax, idx, ok = _distances(mats, spec, words, spec.target_values(words))
    dev = float(dmax)
    return Membership(bool(ok) and dev < spec.epsilon, dev,
                      words[int(idx)].to_string(spec.targets.names), bool(ok))


# ---------------------------------------------------------------------------
# Gaussian reference
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Reference:
    """Independent Gaussian per variable, centred at ``tau(x) 1`` with matched variance."""

    k: int
    centers: tuple[complex, ...]
    variances: tuple[float, ...]  # per-entry variance times k
    self_adjoint: bool

    @classmethod
    def for_spec(cls, spec: GammaSpec, k: int) -> "_Reference":
        centers, variances = [], []
        for s in range(spec.n_vars):
            c = spec.targets[StarWord([(s, False)])]
            if spec.self_adjoint:
                c = complex(c.real, 0.0)
            centers.append(c)
            if spec.m < 2 or spec.targets.order < 2:
                # second moments are unconstrained: spread over the norm ball
                variances.append(spec.R ** 2 / 4)
                continue
            if spec.self_adjoint:
                second = spec.targets[StarWord([(s, False), (s, False)])].real
            else:
                second = spec.targets[StarWord([(s, True), (s, False)])].real
            variances.append(max(second - abs(c) ** 2, _MIN_VARIANCE))
        return cls(k, tuple(centers), tuple(variances), spec.self_adjoint)

    def _noise(self, gen: np.random.Generator, n: int) -> np.ndarray:
        k = self.k
        g = (gen.standard_normal((n, k, k)) + 1j * gen.standard_normal((n, k, k))) / math.sqrt(2)
        if self.self_adjoint:
            g = (g + np.conj(np.swapaxes(g, -1, -2))) / math.sqrt(2)
        return g

    def sample(self, gen: np.random.Generator, n: int) -> list[np.ndarray]:
        eye = np.eye(self.k)
        return [c * eye + math.sqrt(v / self.k) * self._noise(gen, n)
                for c, v in zip(self.centers, self.variances)]

    def propose(self, gen: np.random.Generator, x: list[np.ndarray], rho: float) -> list[np.ndarray]:
        """Preconditioned Crank-Nicolson step, reversible for the reference."""
        eye = np.eye(self.k)
        n = x[0].shape[0]
        s = math.sqrt(1.0 - rho * rho)
        return [c * eye + rho * (xi - c * eye) + s * math.sqrt(v / self.k) * self._noise(gen, n)
                for xi, c, v in zip(x, self.centers, self.variances)]

    def log_density(self, x: list[np.ndarray]) -> np.ndarray:
        k = self.k
        eye = np.eye(k)
        out = 0.0
        for xi, c, v in zip(x, self.centers, self.variances):
            s2 = v / k
            d = xi - c * eye
            sq = np.sum(d.real ** 2 + d.imag ** 2, axis=(-2, -1))
            if self.self_adjoint:
                out = out - 0.5 * k * k * math.log(2 * math.pi * s2) - sq / (2 * s2)
            else:
                out = out - k * k * math.log(math.pi * s2) - sq / s2
        return out


def _check_domain(spec: GammaSpec, k: int) -> None:
    if k < 1:
        raise ValueError("k must be positive")
    dim = spec.real_dimension(k)
    if dim > MAX_REAL_DIMENSION:
        raise ValueError(f"real dimension {dim} exceeds the estimator cap {MAX_REAL_DIMENSION}")


# ---------------------------------------------------------------------------
# importance sampling
# ---------------------------------------------------------------------------

def _is_chunk(task):
    spec, k, n, rng, restrict_positive = task
    ref = _Reference.for_spec(spec, k)
    words = spec.words()
    x = ref.sample(rng.generator(), n)
    dmax, _, ok = _distances(x, spec, words, spec.target_values(words))
    hit = ok & (dmax < spec.epsilon)
    if restrict_positive:
        for xi in x:
            hit &= np.linalg.eigvalsh(xi).min(axis=-1) >= 0
    logw = -ref.log_density(x)[hit]
    if logw.size == 0:
        return -math.inf, -math.inf, 0
    return float(logsumexp(logw)), float(logsumexp(2 * logw)), int(logw.size)


def log_volume_estimate(spec: GammaSpec, k: int, n_samples: int, rng: RngStream,
                        chunk: int = 2000, workers: int = 1,
                        restrict_positive: bool = False) -> EntropyEstimate:
    """Importance-sampling estimate of ``log vol`` of the microstate set.

    Samples come from the moment-matched Gaussian reference ``q``; the volume
    is ``E_q[1_Gamma / q]``.  Chunks are reduced in chunk order in log space.

    Parameters
    ----------
    restrict_positive : bool
        Self-adjoint specs only: intersect the set with positive semidefinite
        tuples.
    """
    _check_domain(spec, k)
    if n_samples < 10_000:
        raise ValueError("need at least 10^4 samples")
    if restrict_positive and not spec.self_adjoint:
        raise ValueError("positivity restriction needs a self-adjoint spec")
    sizes = [min(chunk, n_samples - i) for i in range(0, n_samples, chunk)]
    tasks = [(spec, k, s, rng.child(c), restrict_positive) for c, s in enumerate(sizes)]
    l1, l2, hits = -math.inf, -math.inf, 0
    for a, b, h in chunked_map(_is_chunk, tasks, workers):
        l1, l2, hits = np.logaddexp(l1, a), np.logaddexp(l2, b), hits + h
    n = n_samples
    if hits == 0:
        return EntropyEstimate(-math.inf, math.inf, 0.0, k, -math.inf, n, "importance",
                               spec.n_vars, spec.self_adjoint, details={"hits": 0})
    log_vol = float(l1 - math.log(n))
    ess = float(math.exp(2 * l1 - l2))
    stderr = math.sqrt(max(n / ess - 1.0, 0.0) / n)
    return EntropyEstimate(log_vol, stderr, ess, k,
                           _normalize(log_vol, k, spec.n_vars, spec.self_adjoint), n,
                           "importance", spec.n_vars, spec.self_adjoint,
                           details={"hits": hits})


# ---------------------------------------------------------------------------
# splitting (subset simulation)
# ---------------------------------------------------------------------------

def _split_run(task):
    """One subset-simulation run; returns log P_q(Gamma), log E[1/q | Gamma], hits, levels."""
    spec, k, n, rng, p0, n_mcmc, max_levels, patience = task
    ref = _Reference.for_spec(spec, k)
    words = spec.words()
    tv = spec.target_values(words)
    gen = rng.generator()

    def dist(x):
        dmax, _, ok = _distances(x, spec, words, tv)
        return np.where(ok, dmax, np.inf)

    x = ref.sample(gen, n)
    d = dist(x)
    log_p, rho, prev, flat = 0.0, 0.8, math.inf, 0
    for level in range(max_levels):
        thr = float(np.quantile(d, p0))
        if thr < spec.epsilon:
            hit = d < spec.epsilon
            log_p += math.log(hit.mean())
            inv_q = -ref.log_density([xi[hit] for xi in x])
            return log_p, float(logsumexp(inv_q) - math.log(inv_q.size)), int(hit.sum()), level
        if not math.isfinite(thr):
            return -math.inf, math.inf, 0, level
        flat = flat + 1 if thr > prev * (1 - 1e-3) else 0
        if flat >= patience:
            # zero of n conditional samples reach epsilon: rule-of-three bound
            inv_q = -ref.log_density(x)
            bound = log_p + math.log(3.0 / n) + float(inv_q.max())
            return -math.inf, bound, 0, level
        prev = thr
        keep = d <= thr
        log_p += math.log(keep.mean())
        seeds = [xi[keep] for xi in x]
        idx = gen.integers(0, keep.sum(), n)
        x = [s[idx] for s in seeds]
        d = d[keep][idx]
        acc = 0.0
        for _ in range(n_mcmc):
            y = ref.propose(gen, x, rho)
            dy = dist(y)
            a = dy <= thr
            for xi, yi in zip(x, y):
                xi[a] = yi[a]
            d[a] = dy[a]
            acc += a.mean()
        acc /= n_mcmc
        if acc < 0.2:
            rho = min(0.995, 1 - (1 - rho) * 0.7)
        elif acc > 0.5:
            rho = max(0.0, 1 - (1 - rho) * 1.3)
    return -math.inf, math.inf, 0, max_levels


def log_volume_splitting(spec: GammaSpec, k: int, n_particles: int, rng: RngStream,
                         replicates: int = 4, p0: float = 0.1, n_mcmc: int = 10,
                         max_levels: int = 200, patience: int = 5,
                         workers: int = 1) -> EntropyEstimate:
    """Subset-simulation estimate of ``log vol`` for sets too small for plain sampling.

    The distance ``max_w |tr(w) - tau(w)|`` is driven below ``epsilon`` through
    adaptive levels, each keeping a fraction ``p0`` and refreshing particles by
    reference-reversible Crank-Nicolson moves.  The volume is
    ``P_q(Gamma) * E_q[1/q | Gamma]``.  ``stderr`` is the spread over
    independent replicates.  If the levels stall above ``epsilon`` the result
    is ``-inf`` and ``upper_bound`` carries a rule-of-three bound.
    """
    _check_domain(spec, k)
    if replicates < 1 or n_particles < 100:
        raise ValueError("need at least one replicate of at least 100 particles")
    tasks = [(spec, k, n_particles, rng.child(r), p0, n_mcmc, max_levels, patience)
             for r in range(replicates)]
    runs = chunked_map(_split_run, tasks, workers)
    levels = [r[3] for r in runs]
    n_total = n_particles * replicates
    details = {"levels": levels, "replicates": replicates}
    if any(not math.isfinite(r[0]) for r in runs):
        bounds = [r[1] if not math.isfinite(r[0]) else r[0] + r[1] for r in runs]
        return EntropyEstimate(-math.inf, math.inf, 0.0, k, -math.inf, n_total, "splitting",
                               spec.n_vars, spec.self_adjoint,
                               upper_bound=float(max(bounds)), details=details)
    vals = np.array([r[0] + r[1] for r in runs])
    log_vol = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else math.inf
    hits = float(sum(r[2] for r in runs))
    details["replicate_log_volumes"] = vals.tolist()
    return EntropyEstimate(log_vol, stderr, hits, k,
                           _normalize(log_vol, k, spec.n_vars, spec.self_adjoint), n_total,
                           "splitting", spec.n_vars, spec.self_adjoint, details=details)


def chi_curve(spec: GammaSpec, k_list, n_samples: int, rng: RngStream,
              method: str = "importance", workers: int = 1) -> list[EntropyEstimate]:
    """Normalized estimates for each ``k``; ``k`` uses stream ``rng.child(k)``."""
    out = []
    for k in k_list:
        if method == "importance":
            out.append(log_volume_estimate(spec, k, n_samples, rng.child(k), workers=workers))
        elif method == "splitting":
            out.append(log_volume_splitting(spec, k, n_samples, rng.child(k), workers=workers))
        else:
            raise ValueError(f"unknown method {method!r}")
    return out


# ---------------------------------------------------------------------------
# real and imaginary parts
# ---------------------------------------------------------------------------

def realify(spec: GammaSpec, epsilon_scale: float = 1.0, R_scale: float = 1.0) -> GammaSpec:
    """Self-adjoint spec for ``(Re Y_s, Im Y_s)`` with moments implied by ``spec``.

    Every word in the real parts is an average of ``2^L`` words in ``Y, Y*``
    with unimodular weights, so ``Gamma(Y; m, eps, R)`` lies inside the
    realified set with the same ``eps, R``; conversely the realified set with
    ``eps / 2^m`` and ``R / 2`` lies inside ``Gamma(Y; m, eps, R)``.
    """
    if spec.self_adjoint:
        raise ValueError("spec is already self-adjoint")
    n = spec.n_vars
    names = tuple(f"{c}" for c in "abcdefghijklmnopqrstuvwxyz"[:2 * n])
    sa = (True,) * (2 * n)
    # real part 2s = (Y + Y*)/2, imaginary part 2s+1 = (Y - Y*)/(2i)
    expand = {False: ((0.5, False), (0.5, True)), True: ((-0.5j, False), (0.5j, True))}
    values = {}
    for w in all_words(sa, spec.targets.order):
        total = 0j
        for choice in itertools.product((0, 1), repeat=len(w)):
            coef, letters = 1 + 0j, []
            for (sym, _), c in zip(w, choice):
                co, st = expand[bool(sym % 2)][c]
                coef *= co
                letters.append((sym // 2, st))
            total += coef * spec.targets[StarWord(letters)]
        values[w] = total
    table = MomentTable(values, spec.targets.order, names, sa)
    return GammaSpec(spec.R * R_scale, spec.m, spec.epsilon * epsilon_scale, table, True)


# ---------------------------------------------------------------------------
# block amplification
# ---------------------------------------------------------------------------

def block_embed(entries, d: int) -> np.ndarray:
    """``Z = sum_ij X_ij (x) e_ij``: the ``dk x dk`` matrix with block ``(i, j) = X_ij``."""
    if len(entries) != d or any(len(row) != d for row in entries):
        raise ValueError(f"expected a {d} x {d} array of blocks")
    blocks = [[np.asarray(x, dtype=complex) for x in row] for row in entries]
    shapes = {b.shape for row in blocks for b in row}
    if len(shapes) != 1:
        raise ValueError("blocks have different shapes")
    shape = shapes.pop()
    if len(shape) != 2 or shape[0] != shape[1]:
        raise ValueError("blocks must be square matrices")
    return np.block(blocks)


def entry_split(z, d: int) -> np.ndarray:
    """Inverse of :func:`block_embed`; returns an array of shape ``(d, d, k, k)``."""
    z = np.asarray(z, dtype=complex)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValueError("expected a square matrix")
    if d < 1 or z.shape[0] % d:
        raise ValueError(f"dimension {z.shape[0]} is not divisible by d = {d}")
    k = z.shape[0] // d
    return z.reshape(d, k, d, k).swapaxes(1, 2).copy()


def _chi_circular(variance: float):
    """Free entropy of a circular element with ``tau(z* z) = variance``."""
    return chi_rdiag(dilate(quarter_circle(), math.sqrt(variance)))


def amplification_constant(d: int, v: float) -> dict:
    """Constant relating the ``d^2`` free circular entries of variance ``v/d`` to ``Z``.

    ``lhs = d^2 chi(entry)`` and ``rhs_matrix_term = d^2 chi(Z)`` with ``Z``
    circular of variance ``v``.  The entry entropy uses the additivity of
    free entropy over free families; both values come from quadrature.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if not v > 0:
        raise ValueError("v must be positive")
    entry = _chi_circular(v / d)
    whole = _chi_circular(v)
    lhs = d * d * entry.value
    rhs = d * d * whole.value
    constant = lhs - rhs
    magnitude = d * d * math.log(d)
    return {
        "d": d,
        "v": v,
        "lhs": lhs,
        "rhs_matrix_term": rhs,
        "constant": constant,
        "magnitude": magnitude,
        "sign": 0 if magnitude == 0 else int(math.copysign(1, constant)),
        "pass": abs(abs(constant) - magnitude) < 1e-9,
        "provenance": "quadrature",
        # dilation shifts the quadrature by exactly log(scale), so errors cancel
        "error_estimate": d * d * abs(entry.error_estimate - whole.error_estimate),
        "note": ("magnitude d^2 log d is pinned; the sign follows from the Lebesgue "
                 "bookkeeping of M_dk as d^2 copies of M_k and is recorded, not assumed"),
    }
