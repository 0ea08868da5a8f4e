"""Star-words in noncommuting letters and batched normalized traces.

A letter is ``(symbol, starred)``.  Words print with one character per letter:
the symbol name in lower case for ``x`` and upper case for ``x*``.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "StarWord",
    "alphabet",
    "all_words",
    "canonical",
    "word_traces",
    "Diag",
]


class StarWord(tuple):
    """Immutable word of ``(symbol, starred)`` letters; the empty word is the unit."""

    def __new__(cls, letters: Iterable = ()):
        return super().__new__(cls, tuple((int(s), bool(st)) for s, st in letters))

    def star(self) -> "StarWord":
        """Adjoint word: reversed with every star flag toggled."""
        return StarWord((s, not st) for s, st in reversed(self))

    def rotations(self) -> list["StarWord"]:
        n = len(self)
        return [StarWord(self[i:] + self[:i]) for i in range(max(n, 1))]

    def normalized(self, self_adjoint: Sequence[bool]) -> "StarWord":
        """Drop stars on self-adjoint symbols."""
        return StarWord((s, st and not self_adjoint[s]) for s, st in self)

    def restrict(self, positions: Sequence[int]) -> "StarWord":
        return StarWord(self[i] for i in positions)

    def to_string(self, names: Sequence[str]) -> str:
        if not self:
            return "1"
        return "".join(names[s].upper() if st else names[s].lower() for s, st in self)

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "StarWord":
        text = text.strip()
        if text in ("", "1"):
            return cls()
        lookup = {n.lower(): i for i, n in enumerate(names)}
        out = []
        for ch in text:
            if ch.lower() not in lookup:
                raise ValueError(f"unknown letter {ch!r} in word {text!r}")
            out.append((lookup[ch.lower()], ch.isupper()))
        return cls(out)

    def __repr__(self):
        return f"StarWord({list(self)!r})"


def alphabet(self_adjoint: Sequence[bool]) -> list[tuple[int, bool]]:
    """Letters available for symbols with the given self-adjointness flags."""
    out = []
    for s, sa in enumerate(self_adjoint):
        out.append((s, False))
        if not sa:
            out.append((s, True))
    return out


def all_words(self_adjoint: Sequence[bool], max_len: int, min_len: int = 0) -> Iterator[StarWord]:
    """All words of length ``min_len..max_len`` in shortlex order."""
    letters = alphabet(self_adjoint)
    for n in range(min_len, max_len + 1):
        for w in itertools.product(letters, repeat=n):
            yield StarWord(w)


def canonical(w: StarWord, use_star: bool = True) -> tuple[StarWord, bool]:
    """Least representative under rotation (and adjoint if ``use_star``).

    Returns ``(representative, conjugated)``; for a tracial state
    ``tau(w) = conj(tau(rep))`` when ``conjugated`` is true.
    """
    if not w:
        return w, False
    best, conj = min(w.rotations()), False
    if use_star:
        alt = min(w.star().rotations())
        if alt < best:
            best, conj = alt, True
    return best, conj


# ---------------------------------------------------------------------------
# batched traces
# ---------------------------------------------------------------------------

class Diag:
    """Diagonal matrix stored by its diagonal (shape ``(..., k)``)."""

    __slots__ = ("d",)

    def __init__(self, d):
        self.d = np.asarray(d, dtype=complex)


def _adjoint(x):
    if isinstance(x, Diag):
        return Diag(np.conj(x.d))
    return np.conj(np.swapaxes(x, -1, -2))


def _mul(x, y):
    if isinstance(x, Diag) and isinstance(y, Diag):
        return Diag(x.d * y.d)
    if isinstance(x, Diag):
        return x.d[..., :, None] * y
    if isinstance(y, Diag):
        return x * y.d[..., None, :]
    return x @ y


def _trace_mul(x, y):
    """``Tr(x y)`` without forming the product."""
    if isinstance(x, Diag) and isinstance(y, Diag):
        return np.sum(x.d * y.d, axis=-1)
    if isinstance(x, Diag):
        return np.sum(x.d * np.diagonal(y, axis1=-2, axis2=-1), axis=-1)
    if isinstance(y, Diag):
        return np.sum(np.diagonal(x, axis1=-2, axis2=-1) * y.d, axis=-1)
    return np.einsum("...ij,...ji->...", x, y)


def _dim(x) -> int:
    return x.d.shape[-1] if isinstance(x, Diag) else x.shape[-1]


class _Products:
    """Memoized products of letter prefixes (no closures, so no reference cycles)."""

    def __init__(self, letters: dict):
        self.letters = letters
        self.cache: dict[tuple, object] = {}

    def __call__(self, w: tuple):
        p = self.cache.get(w)
        if p is not None:
            return p
        i = len(w) - 1
        while i > 1 and w[:i] not in self.cache:
            i -= 1
        p = self.cache[w[:i]] if i > 1 else self.letters[w[0]]
        for j in range(max(i, 1), len(w)):
            p = _mul(p, self.letters[w[j]])
            self.cache[w[:j + 1]] = p
        return p


def word_traces(mats: Sequence, words: Sequence[StarWord]) -> np.ndarray:
    """Normalized traces ``tr(w) = Tr(w)/k`` for each word, batched over samples.

    Parameters
    ----------
    mats : sequence
        One entry per symbol: an array ``(..., k, k)`` or a :class:`Diag`.
        Leading batch dimensions broadcast.
    words : sequence of StarWord

    Returns
    -------
    ndarray
        Shape ``batch + (len(words),)``.
    """
    k = _dim(mats[0])
    letters = {}
    for s, m in enumerate(mats):
        letters[(s, False)] = m
        letters[(s, True)] = _adjoint(m)
    prod = _Products(letters)
    batch = np.broadcast_shapes(*[(m.d.shape[:-1] if isinstance(m, Diag) else m.shape[:-2])
                                  for m in mats])
    out = np.empty(batch + (len(words),), dtype=complex)
    for j, w in enumerate(words):
        w = tuple(w)
        if not w:
            out[..., j] = 1.0
            continue
        if len(w) == 1:
            x = letters[w[0]]
            t = np.sum(x.d, axis=-1) if isinstance(x, Diag) else np.trace(x, axis1=-2, axis2=-1)
        else:
            h = (len(w) + 1) // 2
            t = _trace_mul(prod(w[:h]), prod(w[h:]))
        out[..., j] = t / k
    return out
