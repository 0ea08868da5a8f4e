from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdiag.cumulants import (
    CumulantTable,
    MomentTable,
    NCPartition,
    catalan,
    circular_table,
    cumulants_to_moments,
    enumerate_nc,
    gamma_split,
    haar_multiply,
    haar_table,
    is_alternating,
    is_r_diagonal,
    moments_to_cumulants,
    polynomial_table,
    rdiag_corpus,
    self_adjoint_table,
    semicircular_table,
)
from rdiag.words import Diag, StarWord, all_words, canonical, word_traces

CORPUS = rdiag_corpus(6)


def _set_partitions(elems):
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def _crossing(blocks):
    where = {e: i for i, b in enumerate(blocks) for e in b}
    n = len(where)
    for a, b, c, d in itertools.combinations(range(1, n + 1), 4):
        if where[a] == where[c] != where[b] == where[d]:
            return True
    return False


def _random_table(seed: int, order: int) -> MomentTable:
    """*-moments of a random 3x3 matrix under the normalized trace."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    a /= np.linalg.norm(a, 2)
    words = list(all_words((False,), order))
    vals = word_traces([a], words)
    return MomentTable(dict(zip(words, vals)), order)


# -- words ---------------------------------------------------------------------

def test_word_parse_and_print():
    w = StarWord.parse("zZz", ("z",))
    assert w == StarWord([(0, False), (0, True), (0, False)])
    assert w.to_string(("z",)) == "zZz"
    assert w.star().to_string(("z",)) == "ZzZ"
    assert StarWord.parse("1", ("z",)) == StarWord()
    with pytest.raises(ValueError):
        StarWord.parse("q", ("z",))


def test_canonical_representative():
    names = ("z",)
    rep, conj = canonical(StarWord.parse("Zzz", names))
    assert rep == min(StarWord.parse("Zzz", names).rotations())
    assert not conj
    rep2, conj2 = canonical(StarWord.parse("zZZ", names))
    assert rep2 == rep and conj2


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 5))
@settings(max_examples=30, deadline=None)
def test_word_traces_match_direct_products(seed, n):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2, 4, 4)) + 1j * rng.normal(size=(2, 4, 4))
    d = rng.normal(size=4)
    words = list(all_words((False, True), n, n))
    got = word_traces([a, Diag(d)], words)
    mats = {(0, False): a, (0, True): a.conj().swapaxes(-1, -2),
            (1, False): np.broadcast_to(np.diag(d), (2, 4, 4)),
            (1, True): np.broadcast_to(np.diag(d), (2, 4, 4))}
    for j, w in enumerate(words):
        p = np.broadcast_to(np.eye(4), (2, 4, 4))
        for letter in w:
            p = p @ mats[letter]
        assert np.allclose(got[:, j], np.trace(p, axis1=-2, axis2=-1) / 4, atol=1e-12)


# -- non-crossing partitions ---------------------------------------------------------

def test_enumerate_nc_counts():
    assert len(enumerate_nc(1)) == 1
    assert len(enumerate_nc(4)) == 14
    assert len(enumerate_nc(8)) == 1430


def test_nc4_against_brute_force():
    brute = [p for p in _set_partitions([1, 2, 3, 4])]
    assert len(brute) == 15
    nc = [p for p in brute if not _crossing(p)]
    assert len(nc) == 14
    got = {tuple(sorted(tuple(b) for b in p.blocks)) for p in enumerate_nc(4)}
    assert got == {tuple(sorted(tuple(sorted(b)) for b in p)) for p in nc}


@pytest.mark.parametrize("n", range(1, 9))
def test_nc_counts_follow_catalan_recursion(n):
    c = [1]
    for j in range(1, n + 1):
        c.append(sum(c[i] * c[j - 1 - i] for i in range(j)))
    assert len(enumerate_nc(n)) == c[n] == catalan(n)
    for p in enumerate_nc(n):
        assert not p.crosses()
        assert sorted(e for b in p.blocks for e in b) == list(range(1, n + 1))


def test_crossing_partition_rejected():
    with pytest.raises(ValueError):
        NCPartition(4, ((1, 3), (2, 4)))
    with pytest.raises(ValueError):
        NCPartition(3, ((1, 2),))


# -- transforms ----------------------------------------------------------------

def test_semicircular_cumulants():
    kap = moments_to_cumulants(semicircular_table(8))
    for w, v in kap.values.items():
        assert abs(v - (1.0 if len(w) == 2 else 0.0)) < 1e-12


def test_haar_alternating_cumulants_signed_catalan():
    kap = moments_to_cumulants(haar_table(8))
    names = ("z",)
    for n, expected in zip((1, 2, 3, 4), (1, -1, 2, -5)):
        assert abs(kap[StarWord.parse("zZ" * n, names)] - expected) < 1e-12
        assert abs(kap[StarWord.parse("Zz" * n, names)] - expected) < 1e-12
    assert all(abs(v) < 1e-12 for w, v in kap.values.items() if w and not is_alternating(w))


def test_point_mass_cumulants():
    kap = moments_to_cumulants(self_adjoint_table([1.0, 2.0, 4.0, 8.0, 16.0]))
    assert abs(kap["x"] - 2.0) < 1e-12
    assert all(abs(kap["x" * n]) < 1e-12 for n in (2, 3, 4))


def test_cumulants_to_moments_examples():
    sa = (True,)
    kap = CumulantTable({w: (1.0 if len(w) == 2 else 0.0) for w in all_words(sa, 6)}, 6,
                        ("x",), sa)
    mom = cumulants_to_moments(kap)
    assert [mom["x" * n].real for n in (2, 4, 6)] == pytest.approx([1, 2, 5], abs=1e-12)
    zero = cumulants_to_moments(CumulantTable({w: 0.0 for w in all_words(sa, 4)}, 4, ("x",), sa))
    assert all(v == (1 if not w else 0) for w, v in zero.values.items())
    circ = circular_table(4)
    assert abs(circ["zZzZ"] - 2) < 1e-12 and abs(circ["zz"]) < 1e-12


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_round_trip_random_tables(seed, order):
    m = _random_table(seed, order)
    assert cumulants_to_moments(moments_to_cumulants(m)).max_abs_diff(m) < 1e-12


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_round_trip_corpus(name):
    m, _ = CORPUS[name]
    assert cumulants_to_moments(moments_to_cumulants(m)).max_abs_diff(m) < 1e-12


@pytest.mark.parametrize("table", [circular_table(8), haar_table(8)])
def test_round_trip_order_8(table):
    assert cumulants_to_moments(moments_to_cumulants(table)).max_abs_diff(table) < 1e-12


def test_table_rejects_non_tracial():
    words = list(all_words((False,), 2))
    vals = {w: 0.0 for w in words}
    vals[StarWord()] = 1.0
    vals[StarWord.parse("zZ", ("z",))] = 1.0
    vals[StarWord.parse("Zz", ("z",))] = 2.0
    with pytest.raises(ValueError):
        MomentTable(vals, 2)


# -- R-diagonality -------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(CORPUS))
def test_corpus_classification_and_invariance_agree(name):
    m, expected = CORPUS[name]
    rep = is_r_diagonal(m, 1e-10, cross_check=True)
    assert rep.is_r_diagonal is expected
    assert rep.invariance_agrees


def test_r_diagonal_examples():
    assert is_r_diagonal(circular_table(6)).is_r_diagonal
    assert is_r_diagonal(haar_table(6)).is_r_diagonal
    flag, (word, value) = is_r_diagonal(semicircular_table(6))
    assert not flag and abs(value) > 0.5


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=10, deadline=None)
def test_haar_multiply_idempotent_and_positive_part_preserved(seed):
    m = _random_table(seed, 4)
    h = haar_multiply(m)
    assert haar_multiply(h).max_abs_diff(h) < 1e-10
    for n in (1, 2):
        assert h["zZ" * n] == pytest.approx(m["zZ" * n], abs=1e-12)
    rep = is_r_diagonal(m, cross_check=True)
    assert rep.invariance_agrees


def test_haar_multiply_examples():
    circ = circular_table(6)
    assert haar_multiply(circ).max_abs_diff(circ) < 1e-12
    # b quarter-circular: tau(b^j) = even semicircle moments
    qc = self_adjoint_table([1.0, 8 / (3 * np.pi), 1.0, 128 / (15 * np.pi), 2.0])
    ub = haar_multiply(qc)
    assert abs(ub["zZ"] - 1) < 1e-12 and abs(ub["zz"]) < 1e-12
    unit = self_adjoint_table([1.0] * 7)
    assert haar_multiply(unit).max_abs_diff(haar_table(6)) < 1e-12


# -- gamma split ---------------------------------------------------------------

def test_gamma_split_examples():
    g = gamma_split(circular_table(2, variance=2.0))
    assert g.tau_x2 == pytest.approx(1) and g.tau_y2 == pytest.approx(1)
    assert g.gamma == 1 and g.auto_selected
    vals = {StarWord(): 1, StarWord([(0, False)]): 0, StarWord([(0, True)]): 0,
            StarWord([(0, False)] * 2): 1j, StarWord([(0, True)] * 2): -1j,
            StarWord([(0, False), (0, True)]): 3, StarWord([(0, True), (0, False)]): 3}
    m = MomentTable(vals, 2)
    g = gamma_split(m, 1.0)
    assert g.tau_x2 == pytest.approx(1.5) and g.tau_y2 == pytest.approx(1.5)
    with pytest.raises(ValueError):
        gamma_split(m, 2.0)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_gamma_auto_selection_equalizes(seed):
    g = gamma_split(_random_table(seed, 2))
    assert abs(g.rotated_tau_z2.real) < 1e-12
    assert abs(g.tau_x2 - g.tau_y2) < 1e-12


# -- polynomial tables and CSV -------------------------------------------------------

def test_polynomial_of_free_semicirculars_is_circular():
    semi = semicircular_table(6, 0.5)
    z = polynomial_table(6, [(1.0, ((0, 0, False),)), (1j, ((1, 0, False),))], [semi, semi])
    assert z.max_abs_diff(circular_table(6)) < 1e-12


@pytest.mark.parametrize("name", ["circular", "elliptic"])
def test_table_csv_round_trip(tmp_path, name):
    m, _ = CORPUS[name]
    m.to_csv(tmp_path / "t.csv")
    back = MomentTable.from_csv(tmp_path / "t.csv")
    assert back.order == m.order
    assert back.max_abs_diff(m) == 0.0


def test_csv_bad_header(tmp_path):
    (tmp_path / "bad.csv").write_text("w,re,im\n1,1,0\n")
    with pytest.raises(ValueError):
        MomentTable.from_csv(tmp_path / "bad.csv")
