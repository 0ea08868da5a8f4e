"""Moment-level free probability on *-words.

Moments and free cumulants are related by

    tau(w) = sum over non-crossing partitions pi of prod_{V in pi} kappa(w|V).

Grouping by the block ``V`` that contains the first letter, every other block
lies inside one of the gaps between consecutive elements of ``V``, so

    tau(w) = sum_{V contains 1} kappa(w|V) * prod_{gaps I} tau(w|I).

This single recursion drives the moment/cumulant transforms and the free
product of several families (mixed cumulants vanish, so only blocks inside
one family contribute).
"""
from __future__ import annotations

import cmath
import csv
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .words import StarWord, all_words, canonical

__all__ = [
    "NCPartition",
    "enumerate_nc",
    "catalan",
    "MomentTable",
    "CumulantTable",
    "moments_to_cumulants",
    "cumulants_to_moments",
    "FreeFamilies",
    "polynomial_table",
    "haar_multiply",
    "is_r_diagonal",
    "RDiagonalReport",
    "is_alternating",
    "gamma_split",
    "GammaSplit",
    "circular_table",
    "haar_table",
    "semicircular_table",
    "self_adjoint_table",
    "rdiag_corpus",
    "MAX_ORDER",
]

MAX_ORDER = 8
SYMMETRY_TOL = 1e-9


# ---------------------------------------------------------------------------
# non-crossing partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NCPartition:
    """Non-crossing partition of ``{1..n}`` as sorted blocks."""

    n: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        flat = sorted(i for b in self.blocks for i in b)
        if flat != list(range(1, self.n + 1)):
            raise ValueError("blocks do not partition {1..n}")
        if any(list(b) != sorted(b) for b in self.blocks):
            raise ValueError("blocks must be sorted")
        if self.crosses():
            raise ValueError("partition is crossing")

    def crosses(self) -> bool:
        owner = {i: j for j, b in enumerate(self.blocks) for i in b}
        for b in self.blocks:
            for x, y in zip(b, b[1:]):
                # any element strictly between x and y must have its whole block inside (x, y)
                inside = {owner[t] for t in range(x + 1, y)}
                for j in inside:
                    if any(t < x or t > y for t in self.blocks[j]):
                        return True
        return False


def catalan(n: int) -> int:
    return math.comb(2 * n, n) // (n + 1)


def _nc_blocks(elems: tuple[int, ...]) -> list[list[tuple[int, ...]]]:
    """All non-crossing partitions of the ordered tuple ``elems``."""
    if not elems:
        return [[]]
    first, rest = elems[0], elems[1:]
    out = []
    m = len(rest)
    for r in range(m + 1):
        for chosen in itertools.combinations(range(m), r):
            block = (first,) + tuple(rest[i] for i in chosen)
            cuts = [-1] + list(chosen) + [m]
            gaps = [rest[cuts[i] + 1:cuts[i + 1]] for i in range(len(cuts) - 1)]
            parts = [_nc_blocks(g) for g in gaps]
            for combo in itertools.product(*parts):
                out.append([block] + [b for p in combo for b in p])
    return out


def enumerate_nc(n: int) -> list[NCPartition]:
    """All non-crossing partitions of ``{1..n}``, ``1 <= n <= 10``."""
    if not 1 <= n <= 10:
        raise ValueError("n must lie in 1..10")
    return [NCPartition(n, tuple(sorted(bl))) for bl in _nc_blocks(tuple(range(1, n + 1)))]


@lru_cache(maxsize=None)
def _first_block_splits(n: int, allowed: tuple[int, ...] | None = None):
    """For positions ``0..n-1``: list of (block, gaps) with ``0`` in block.

    ``allowed`` restricts the block to a subset of positions (must contain 0).
    """
    pool = tuple(range(1, n)) if allowed is None else tuple(p for p in allowed if p != 0)
    out = []
    for r in range(len(pool) + 1):
        for chosen in itertools.combinations(pool, r):
            block = (0,) + chosen
            bounds = list(block) + [n]
            gaps = tuple((bounds[i] + 1, bounds[i + 1]) for i in range(len(block))
                         if bounds[i + 1] > bounds[i] + 1)
            out.append((block, gaps))
    return tuple(out)


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------

def _default_names(n: int) -> tuple[str, ...]:
    if n == 1:
        return ("z",)
    pool = "xyvwabcdefghijklmnopqrstu"
    return tuple(pool[:n])


class _WordTable:
    """Dense map from every *-word of length ``<= order`` to a complex number."""

    kind = "table"

    def __init__(self, values: dict, order: int, names: Sequence[str] | None = None,
                 self_adjoint: Sequence[bool] = (False,)):
        self.self_adjoint = tuple(bool(s) for s in self_adjoint)
        self.names = tuple(names) if names is not None else _default_names(len(self.self_adjoint))
        if len(self.names) != len(self.self_adjoint):
            raise ValueError("names and self_adjoint flags differ in length")
        if order < 0 or order > MAX_ORDER * 2:
            raise ValueError(f"order {order} out of range")
        self.order = int(order)
        vals = {}
        for w, v in values.items():
            w = StarWord(w).normalized(self.self_adjoint)
            vals[w] = complex(v)
        missing = [w for w in all_words(self.self_adjoint, order) if w not in vals]
        if missing:
            raise ValueError(f"table is missing {len(missing)} words, e.g. "
                             f"{missing[0].to_string(self.names)!r}")
        self.values = {w: vals[w] for w in all_words(self.self_adjoint, order)}

    @property
    def n_symbols(self) -> int:
        return len(self.self_adjoint)

    def words(self, length: int | None = None) -> list[StarWord]:
        if length is None:
            return list(self.values)
        return [w for w in self.values if len(w) == length]

    def _key(self, word) -> StarWord:
        if isinstance(word, str):
            return StarWord.parse(word, self.names)
        return StarWord(word).normalized(self.self_adjoint)

    def __getitem__(self, word) -> complex:
        return self.values[self._key(word)]

    def get(self, word, default=None):
        return self.values.get(self._key(word), default)

    def max_abs_diff(self, other: "_WordTable", order: int | None = None) -> float:
        order = self.order if order is None else order
        return max((abs(v - other[w]) for w, v in self.values.items() if len(w) <= order),
                   default=0.0)

    def truncate(self, order: int):
        return type(self)({w: v for w, v in self.values.items() if len(w) <= order},
                          order, self.names, self.self_adjoint)

    # -- csv ---------------------------------------------------------------
    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["word", "real", "imag"])
            for w, v in self.values.items():
                wr.writerow([w.to_string(self.names), format(v.real, ".17g"),
                             format(v.imag, ".17g")])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or [c.strip() for c in rows[0]] != ["word", "real", "imag"]:
            raise ValueError("expected header 'word,real,imag'")
        body = [r for r in rows[1:] if r]
        letters = sorted({ch.lower() for r in body for ch in r[0].strip() if r[0].strip() != "1"})
        starred = {ch.lower() for r in body for ch in r[0].strip() if ch.isupper()}
        names = tuple(letters) or ("z",)
        sa = tuple(n not in starred for n in names)
        values = {}
        order = 0
        for r in body:
            w = StarWord.parse(r[0], names)
            values[w] = complex(float(r[1]), float(r[2]))
            order = max(order, len(w))
        return cls(values, order, names, sa)

    def __repr__(self):
        return f"{type(self).__name__}(names={self.names}, order={self.order})"


class MomentTable(_WordTable):
    """Tracial *-moments; cyclic and adjoint symmetry are checked on construction."""

    kind = "moments"

    def __init__(self, values, order, names=None, self_adjoint=(False,), check: bool = True):
        super().__init__(values, order, names, self_adjoint)
        if check:
            self._check()

    def _check(self):
        if abs(self.values[StarWord()] - 1) > SYMMETRY_TOL:
            raise ValueError("moment of the empty word must be 1")
        for w, v in self.values.items():
            tol = SYMMETRY_TOL * max(1.0, abs(v))
            for r in w.rotations():
                if abs(self.values[r] - v) > tol:
                    raise ValueError(f"not tracial: {w.to_string(self.names)} vs "
                                     f"{r.to_string(self.names)}")
            ws = w.star().normalized(self.self_adjoint)
            if abs(self.values[ws] - v.conjugate()) > tol:
                raise ValueError(f"adjoint symmetry fails at {w.to_string(self.names)}")

    @classmethod
    def from_function(cls, fn: Callable[[StarWord], complex], order: int, names=None,
                      self_adjoint=(False,)) -> "MomentTable":
        """Fill a table by evaluating ``fn`` on one representative per rotation/adjoint class."""
        sa = tuple(self_adjoint)
        reps: dict[StarWord, complex] = {}
        values = {}
        for w in all_words(sa, order):
            rep, conj = canonical(w)
            rep = rep.normalized(sa)
            if rep not in reps:
                reps[rep] = complex(fn(rep))
            v = reps[rep]
            values[w] = v.conjugate() if conj else v
        return cls(values, order, names, sa)

    def as_star_symbol(self) -> "MomentTable":
        """View a one-symbol self-adjoint table as a table over ``z, z*`` with ``z* = z``."""
        if self.n_symbols != 1 or not self.self_adjoint[0]:
            return self
        vals = {w: self.values[StarWord((0, False) for _ in w)]
                for w in all_words((False,), self.order)}
        return MomentTable(vals, self.order, ("z",), (False,))


class CumulantTable(_WordTable):
    """Free cumulants over the same word set as a :class:`MomentTable`."""

    kind = "cumulants"


def _transform(src: _WordTable, inverse: bool) -> dict:
    """Shared recursion; ``inverse`` maps cumulants to moments."""
    known = {StarWord(): 1.0 + 0j}  # moments
    kap = {StarWord(): 0j}
    by_len = sorted(src.values, key=len)
    for w in by_len:
        n = len(w)
        if n == 0:
            continue
        total = 0j
        for block, gaps in _first_block_splits(n):
            if len(block) == n:
                continue
            k = kap[w.restrict(block)]
            if k == 0:
                continue
            term = k
            for lo, hi in gaps:
                term *= known[StarWord(w[lo:hi])]
                if term == 0:
                    break
            total += term
        if inverse:
            kap[w] = src.values[w]
            known[w] = total + kap[w]
        else:
            known[w] = src.values[w]
            kap[w] = known[w] - total
    return known if inverse else kap


def moments_to_cumulants(m: MomentTable) -> CumulantTable:
    """Free cumulants by recursive subtraction over the block containing the first letter."""
    kap = _transform(m, inverse=False)
    kap[StarWord()] = 0j
    return CumulantTable(kap, m.order, m.names, m.self_adjoint)


def cumulants_to_moments(c: CumulantTable) -> MomentTable:
    """Inverse of :func:`moments_to_cumulants`."""
    mom = _transform(c, inverse=True)
    mom[StarWord()] = 1.0 + 0j
    return MomentTable(mom, c.order, c.names, c.self_adjoint)


# ---------------------------------------------------------------------------
# free products
# ---------------------------------------------------------------------------

class FreeFamilies:
    """Joint moments of several mutually *-free families.

    Letters of a mixed word are ``(family, symbol, starred)``.
    """

    def __init__(self, families: Sequence[MomentTable]):
        self.families = list(families)
        self.cumulants = [moments_to_cumulants(f) for f in self.families]
        self._memo: dict[tuple, complex] = {}

    def _local(self, fam: int, letters) -> StarWord:
        return StarWord((s, st) for _, s, st in letters).normalized(self.families[fam].self_adjoint)

    def moment(self, word: Sequence[tuple[int, int, bool]]) -> complex:
        word = tuple((int(f), int(s), bool(st)) for f, s, st in word)
        return self._moment(word)

    def _moment(self, word: tuple) -> complex:
        if not word:
            return 1.0 + 0j
        hit = self._memo.get(word)
        if hit is not None:
            return hit
        fams = {f for f, _, _ in word}
        if len(fams) == 1:
            f = word[0][0]
            val = self._family_value(self.families[f], f, word)
        else:
            f0 = word[0][0]
            same = tuple(i for i, (f, _, _) in enumerate(word) if f == f0)
            kap = self.cumulants[f0]
            val = 0j
            for block, gaps in _first_block_splits(len(word), same):
                k = self._family_value(kap, f0, tuple(word[i] for i in block))
                if k == 0:
                    continue
                term = k
                for lo, hi in gaps:
                    term *= self._moment(word[lo:hi])
                    if term == 0:
                        break
                val += term
        self._memo[word] = val
        return val

    def _family_value(self, table: _WordTable, fam: int, letters) -> complex:
        local = self._local(fam, letters)
        if len(local) > table.order:
            raise ValueError(f"family {fam} table order {table.order} too small for "
                             f"a word of length {len(local)}")
        return table.values[local]


Monomial = tuple  # tuple of (family, symbol, starred)


def _star_monomial(mono: Monomial) -> Monomial:
    return tuple((f, s, not st) for f, s, st in reversed(mono))


def polynomial_table(order: int, terms: Sequence[tuple[complex, Monomial]],
                     families: Sequence[MomentTable]) -> MomentTable:
    """*-moment table of ``z = sum_j c_j m_j`` with ``m_j`` monomials in free families.

    The empty monomial stands for the unit.
    """
    ff = FreeFamilies(families)
    plus = [(complex(c), tuple(m)) for c, m in terms]
    minus = [(c.conjugate(), _star_monomial(m)) for c, m in plus]

    def value(w: StarWord) -> complex:
        total = 0j
        options = [minus if st else plus for _, st in w]
        for combo in itertools.product(*options):
            coef = 1 + 0j
            letters = []
            for c, m in combo:
                coef *= c
                letters.extend(m)
            if coef != 0:
                total += coef * ff.moment(letters)
        return total

    return MomentTable.from_function(value, order)


def _as_one_symbol(m: MomentTable) -> MomentTable:
    m = m.as_star_symbol()
    if m.n_symbols != 1:
        raise ValueError("expected a table over one symbol")
    return m


def haar_multiply(m: MomentTable) -> MomentTable:
    """*-moments of ``u z`` for a Haar unitary ``u`` free from ``z``."""
    m = _as_one_symbol(m)
    if m.order > MAX_ORDER:
        raise ValueError(f"order {m.order} exceeds the supported maximum {MAX_ORDER}")
    return polynomial_table(m.order, [(1.0, ((0, 0, False), (1, 0, False)))],
                            [haar_table(m.order), m])


def is_alternating(w: StarWord) -> bool:
    """Even length with stars strictly alternating."""
    return len(w) % 2 == 0 and len(w) > 0 and all(a[1] != b[1] for a, b in zip(w, w[1:]))


@dataclass(frozen=True)
class RDiagonalReport:
    """Outcome of the alternating-cumulant test."""

    is_r_diagonal: bool
    worst_word: str
    worst_value: complex
    invariance_defect: float | None = None
    invariance_agrees: bool | None = None

    def __iter__(self):  # allows ``flag, worst = is_r_diagonal(...)``
        return iter((self.is_r_diagonal, (self.worst_word, self.worst_value)))


def is_r_diagonal(m: MomentTable, tol: float = 1e-10, cross_check: bool = False,
                  invariance_tol: float = 1e-9) -> RDiagonalReport:
    """Test whether every non-alternating free cumulant vanishes.

    With ``cross_check`` the Haar-multiplication fixed-point test is also run
    and its agreement recorded.
    """
    m = _as_one_symbol(m)
    kap = moments_to_cumulants(m)
    worst_w, worst_v = StarWord(), 0j
    for w, v in kap.values.items():
        if w and not is_alternating(w) and abs(v) > abs(worst_v):
            worst_w, worst_v = w, v
    flag = abs(worst_v) < tol
    defect = agrees = None
    if cross_check:
        defect = haar_multiply(m).max_abs_diff(m)
        agrees = (defect < invariance_tol) == flag
    return RDiagonalReport(flag, worst_w.to_string(m.names), worst_v, defect, agrees)


@dataclass(frozen=True)
class GammaSplit:
    """Order-two data of ``X = (g z + conj(g) z*)/2`` and ``Y = (g z - conj(g) z*)/(2i)``."""

    gamma: complex
    auto_selected: bool
    tau_x: float
    tau_y: float
    tau_x2: float
    tau_y2: float
    tau_xy: float
    rotated_tau_z2: complex

    def to_dict(self) -> dict:
        return {
            "gamma": [self.gamma.real, self.gamma.imag],
            "auto_selected": self.auto_selected,
            "tau_x": self.tau_x, "tau_y": self.tau_y,
            "tau_x2": self.tau_x2, "tau_y2": self.tau_y2, "tau_xy": self.tau_xy,
            "rotated_tau_z2": [self.rotated_tau_z2.real, self.rotated_tau_z2.imag],
        }


def gamma_split(m: MomentTable, gamma: complex | None = None) -> GammaSplit:
    """Covariance data of the rotated real and imaginary parts.

    With ``gamma=None`` a unit ``gamma`` making ``gamma^2 tau(z^2)`` purely
    imaginary is chosen (``gamma = 1`` when ``tau(z^2) = 0``).
    """
    m = _as_one_symbol(m)
    if m.order < 2:
        raise ValueError("need moments up to order 2")
    t_z, t_z2, t_zzs = m["z"], m["zz"], m["zZ"].real
    auto = gamma is None
    if auto:
        gamma = 1.0 + 0j if t_z2 == 0 else cmath.exp(0.5j * (math.pi / 2 - cmath.phase(t_z2)))
    gamma = complex(gamma)
    if abs(abs(gamma) - 1) > 1e-12:
        raise ValueError("gamma must have unit modulus")
    r = gamma * gamma * t_z2
    return GammaSplit(
        gamma=gamma,
        auto_selected=auto,
        tau_x=(gamma * t_z).real,
        tau_y=(gamma * t_z).imag,
        tau_x2=0.25 * (2 * t_zzs + 2 * r.real),
        tau_y2=0.25 * (2 * t_zzs - 2 * r.real),
        tau_xy=0.5 * r.imag,
        rotated_tau_z2=r,
    )


# ---------------------------------------------------------------------------
# standard tables
# ---------------------------------------------------------------------------

def _cumulant_table(fn: Callable[[StarWord], complex], order: int, names=None,
                    self_adjoint=(False,)) -> CumulantTable:
    return CumulantTable({w: fn(w) for w in all_words(self_adjoint, order)}, order, names,
                         self_adjoint)


def circular_table(order: int, variance: float = 1.0) -> MomentTable:
    """Circular element with ``tau(z* z) = variance``."""
    return cumulants_to_moments(_cumulant_table(
        lambda w: variance if len(w) == 2 and w[0][1] != w[1][1] else 0.0, order))


def haar_table(order: int) -> MomentTable:
    """Haar unitary: ``tau(w) = 1`` iff the word has as many ``u`` as ``u*``."""
    return MomentTable.from_function(
        lambda w: 1.0 if sum(1 if st else -1 for _, st in w) == 0 else 0.0, order)


def self_adjoint_table(moments: Sequence[float], order: int | None = None,
                       name: str = "x") -> MomentTable:
    """One self-adjoint symbol with ``tau(x^j) = moments[j]``."""
    order = len(moments) - 1 if order is None else order
    return MomentTable({w: moments[len(w)] for w in all_words((True,), order)}, order,
                       (name,), (True,))


def semicircular_table(order: int, variance: float = 1.0, as_star: bool = False) -> MomentTable:
    """Semicircular element; ``as_star`` views it over ``z, z*`` with ``z = z*``."""
    mom = [0.0 if j % 2 else catalan(j // 2) * variance ** (j // 2) for j in range(order + 1)]
    t = self_adjoint_table(mom, order)
    return t.as_star_symbol() if as_star else t


def rdiag_corpus(order: int = 6) -> dict[str, tuple[MomentTable, bool]]:
    """Ten one-symbol tables with their expected R-diagonality."""
    semi = semicircular_table(order)
    circ = circular_table(order)
    haar = haar_table(order)
    corpus = {
        "circular": (circ, True),
        "haar": (haar, True),
        "semicircular": (semi.as_star_symbol(), False),
        "shifted_circular": (polynomial_table(order, [(1.0, ((0, 0, False),)), (1.0, ())],
                                              [circ]), False),
        "circular_times_circular": (polynomial_table(
            order, [(1.0, ((0, 0, False), (1, 0, False)))], [circ, circ]), True),
        "semicircular_times_semicircular": (polynomial_table(
            order, [(1.0, ((0, 0, False), (1, 0, False)))], [semi, semi]), True),
        "haar_times_shifted_semicircular": (polynomial_table(
            order, [(1.0, ((0, 0, False), (1, 0, False))), (2.0, ((0, 0, False),))],
            [haar, semi]), True),
        "elliptic": (polynomial_table(
            order, [(1.0, ((0, 0, False),)), (0.5j, ((1, 0, False),))], [semi, semi]), False),
        "semicircular_times_circular": (polynomial_table(
            order, [(1.0, ((0, 0, False), (1, 0, False)))], [semi, circ]), True),
        "shifted_semicircular_product": (polynomial_table(
            order, [(1.0, ((0, 0, False), (1, 0, False))), (1.0, ((0, 0, False),)),
                    (1.0, ((1, 0, False),)), (1.0, ())], [semi, semi]), False),
    }
    return corpus
