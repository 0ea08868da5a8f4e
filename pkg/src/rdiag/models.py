"""Matrix models: Haar unitaries, Ginibre matrices, prescribed spectra, ``u b``.

Samplers are pure functions of an :class:`RngStream`: the same stream always
yields the same matrices.  Monte Carlo loops draw fixed-size chunks, chunk
``c`` from ``rng.child(c)``, and combine per-chunk sums in chunk order, so the
result does not depend on how chunks are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .cumulants import FreeFamilies, haar_table, self_adjoint_table
from .spectral import SpectralMeasure, as_matrix, quantiles
from .words import Diag, StarWord, all_words, canonical, word_traces

__all__ = [
    "RngStream",
    "haar_unitary",
    "ginibre",
    "positive_with_spectrum",
    "rdiag_sample",
    "mixed_moment_estimate",
    "freeness_words",
    "freeness_report",
    "freeness_defect",
    "freeness_defect_model",
    "chunked_map",
    "save_samples",
    "load_samples",
]

_U64 = 2 ** 64


@dataclass(frozen=True)
class RngStream:
    """Seed plus stream id; ``path`` addresses derived sub-streams."""

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        for v in (self.seed, self.stream_id, *self.path):
            if not 0 <= int(v) < _U64:
                raise ValueError("seed, stream id and path entries must be 64-bit unsigned")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed),
                                    spawn_key=(int(self.stream_id),) + tuple(self.path))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *idx: int) -> "RngStream":
        return replace(self, path=self.path + tuple(int(i) for i in idx))


def _complex_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """Entries with ``E|g|^2 = 1``."""
    re = gen.standard_normal(shape)
    im = gen.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def haar_unitary(k: int, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with the R-diagonal phases removed."""
    if k < 1:
        raise ValueError("k must be positive")
    shape = (k, k) if size is None else (size, k, k)
    z = _complex_normal(rng.generator(), shape)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def ginibre(k: int, sigma2: float, rng: RngStream, size: int | None = None) -> np.ndarray:
    """Independent complex Gaussian entries with ``E|g_ij|^2 = sigma2``."""
    if k < 1:
        raise ValueError("k must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    shape = (k, k) if size is None else (size, k, k)
    return math.sqrt(sigma2) * _complex_normal(rng.generator(), shape)


def _spectrum(mu: SpectralMeasure, k: int) -> np.ndarray:
    lo, hi = mu.support
    if lo < 0:
        raise ValueError("law must be supported in [0, inf)")
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("law must have bounded support")
    return quantiles(mu, k)


def positive_with_spectrum(mu: SpectralMeasure, k: int, rng: RngStream,
                           size: int | None = None) -> np.ndarray:
    """``U D U*`` with ``D`` the quantiles of ``mu`` at levels ``(i - 1/2)/k``."""
    d = _spectrum(mu, k)
    if np.all(d == d[0]):
        eye = d[0] * np.eye(k, dtype=complex)
        return eye if size is None else np.broadcast_to(eye, (size, k, k)).copy()
    u = haar_unitary(k, rng, size)
    p = (u * d[..., None, :]) @ np.conj(np.swapaxes(u, -1, -2))
    return (p + np.conj(np.swapaxes(p, -1, -2))) / 2


def rdiag_sample(mu_b: SpectralMeasure, k: int, rng: RngStream,
                 size: int | None = None) -> np.ndarray:
    """``u b`` with independent streams for the Haar and positive factors."""
    u = haar_unitary(k, rng.child(0), size)
    b = positive_with_spectrum(mu_b, k, rng.child(1), size)
    return u @ b


# ---------------------------------------------------------------------------
# moment estimates
# ---------------------------------------------------------------------------

def _stack_samples(samples) -> list:
    """Turn a list of per-sample tuples (or dicts keyed by symbol id) into per-symbol stacks."""
    if isinstance(samples, (list, tuple)) and samples and isinstance(samples[0], dict):
        n_sym = max(max(s) for s in samples) + 1
        samples = [tuple(s[i] for i in range(n_sym)) for s in samples]
    if isinstance(samples, np.ndarray):
        return [as_matrix(samples)]
    if not samples:
        raise ValueError("no samples")
    first = samples[0]
    if isinstance(first, np.ndarray) and first.ndim == 2:
        return [np.stack([as_matrix(s) for s in samples])]
    n_sym = len(first)
    dims = {np.shape(m)[-1] for s in samples for m in s}
    if len(dims) != 1:
        raise ValueError("all matrices must share one dimension")
    return [np.stack([as_matrix(s[i]) for s in samples]) for i in range(n_sym)]


def _mean_stderr(values: np.ndarray) -> tuple[complex, float]:
    n = values.size
    mean = complex(values.mean())
    if n < 2:
        return mean, 0.0 if np.all(values == values.flat[0]) else math.inf
    var = values.real.var(ddof=1) + values.imag.var(ddof=1)
    return mean, math.sqrt(var / n)


def mixed_moment_estimate(samples, word: StarWord) -> tuple[complex, float]:
    """Sample mean and standard error of ``tr(word)``.

    Parameters
    ----------
    samples : list
        Per-sample tuples of matrices (position = symbol id), dicts keyed by
        symbol id, or a single stacked array for one symbol.
    word : StarWord
    """
    mats = _stack_samples(samples)
    word = StarWord(word)
    if any(s >= len(mats) for s, _ in word):
        raise ValueError("word uses a symbol id with no matrix")
    vals = word_traces(mats, [word])[..., 0]
    return _mean_stderr(np.asarray(vals))


# ---------------------------------------------------------------------------
# asymptotic freeness
# ---------------------------------------------------------------------------

U, B = 0, 1


def freeness_words(order: int) -> list[StarWord]:
    """Words in ``u, u*, b`` of length ``1..order``, one per rotation/adjoint class."""
    if not 1 <= order <= 6:
        raise ValueError("order must lie in 1..6")
    seen = []
    found = set()
    for w in all_words((False, True), order, 1):
        rep, _ = canonical(w)
        if rep not in found:
            found.add(rep)
            seen.append(rep)
    return seen


def _free_predictions(words: Sequence[StarWord], b_moments: Sequence[float]) -> np.ndarray:
    order = max(len(w) for w in words)
    fam = FreeFamilies([haar_table(order), self_adjoint_table(list(b_moments[:order + 1]))])
    return np.array([fam.moment([(U if s == U else 1, 0, st) for s, st in w]) for w in words])


@dataclass(frozen=True)
class FreenessReport:
    """Per-word empirical means, standard errors and free predictions."""

    words: tuple[str, ...]
    means: np.ndarray
    stderrs: np.ndarray
    predictions: np.ndarray
    n_samples: int

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.means - self.predictions)

    @property
    def defect(self) -> float:
        return float(self.deviations.max())

    @property
    def worst_word(self) -> str:
        return self.words[int(np.argmax(self.deviations))]


def _b_operand(b):
    b = np.asarray(b)
    if b.ndim == 1 or (b.ndim == 2 and b.shape[0] != b.shape[1]):
        return Diag(b)
    return as_matrix(b)


def _b_moments(b, order: int) -> list[float]:
    if isinstance(b, Diag):
        lam = b.d.real
        per = np.array([np.mean(lam ** j, axis=-1) for j in range(order + 1)])
    else:
        lam = np.linalg.eigvalsh((b + np.conj(np.swapaxes(b, -1, -2))) / 2)
        per = np.array([np.mean(lam ** j, axis=-1) for j in range(order + 1)])
    return [float(np.mean(p)) for p in per]


def freeness_report(u_samples, b_samples, order: int) -> FreenessReport:
    """Empirical mixed moments of ``(u, b)`` against the free prediction.

    ``b_samples`` may be one matrix, a diagonal vector, or a stack matching
    ``u_samples``.  The prediction uses the empirical moments of ``b`` itself.
    """
    words = freeness_words(order)
    u = as_matrix(u_samples)
    if u.ndim == 2:
        u = u[None]
    b = _b_operand(b_samples)
    traces = word_traces([u, b], words)
    means, errs = zip(*(_mean_stderr(traces[:, j]) for j in range(len(words))))
    names = ("u", "b")
    pred = _free_predictions(words, _b_moments(b, order))
    return FreenessReport(tuple(w.to_string(names) for w in words), np.array(means),
                          np.array(errs), pred, u.shape[0])


def freeness_defect(u_samples, b_samples, order: int) -> float:
    """Largest ``|empirical - free|`` over words of length ``<= order``."""
    return freeness_report(u_samples, b_samples, order).defect


def chunked_map(fn: Callable, args: Sequence, workers: int = 1) -> list:
    """Map ``fn`` over ``args`` in order, optionally in worker processes."""
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, args))


def _freeness_chunk(task):
    rng, k, n, d, words = task
    u = haar_unitary(k, rng, n)
    tr = word_traces([u, Diag(d)], words)
    return tr.sum(axis=0), (tr.real ** 2 + tr.imag ** 2).sum(axis=0)


def freeness_defect_model(mu_b: SpectralMeasure, k: int, n_samples: int, order: int,
                          rng: RngStream, chunk: int | None = None,
                          workers: int = 1) -> FreenessReport:
    """Freeness report for Haar ``u`` and ``b = diag(quantiles of mu_b)``, streamed in chunks."""
    d = _spectrum(mu_b, k)
    words = freeness_words(order)
    chunk = chunk or max(1, min(1000, 2 ** 20 // (k * k)))
    sizes = [min(chunk, n_samples - i) for i in range(0, n_samples, chunk)]
    tasks = [(rng.child(c), k, s, d, words) for c, s in enumerate(sizes)]
    parts = chunked_map(_freeness_chunk, tasks, workers)
    s1 = np.zeros(len(words), dtype=complex)
    s2 = np.zeros(len(words))
    for a, b in parts:
        s1 += a
        s2 += b
    n = float(n_samples)
    means = s1 / n
    var = np.maximum(s2 / n - np.abs(means) ** 2, 0.0) * n / max(n - 1, 1)
    errs = np.sqrt(var / n)
    pred = _free_predictions(words, _b_moments(Diag(d), order))
    return FreenessReport(tuple(w.to_string(("u", "b")) for w in words), means, errs, pred,
                          n_samples)


# ---------------------------------------------------------------------------
# sample dumps
# ---------------------------------------------------------------------------

def save_samples(path, mats, k: int, rng: RngStream) -> None:
    """CSV: a header line ``k,seed,stream_id`` then one matrix row per line,
    entries interleaved as ``re,im``; matrices follow one another."""
    mats = as_matrix(mats)
    if mats.ndim == 2:
        mats = mats[None]
    with open(path, "w") as fh:
        fh.write("k,seed,stream_id\n")
        fh.write(f"{k},{rng.seed},{rng.stream_id}\n")
        for m in mats:
            for row in m:
                inter = np.empty(2 * k)
                inter[0::2], inter[1::2] = row.real, row.imag
                fh.write(",".join(format(x, ".17g") for x in inter) + "\n")


def load_samples(path) -> tuple[np.ndarray, dict]:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    k, seed, sid = (int(x) for x in lines[1].split(","))
    rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    mats = (rows[:, 0::2] + 1j * rows[:, 1::2]).reshape(-1, k, k)
    return mats, {"k": k, "seed": seed, "stream_id": sid}
