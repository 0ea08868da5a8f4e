from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from rdiag import laws
from rdiag.models import RngStream, ginibre
from rdiag.spectral import (
    Atoms,
    FunctionSpec,
    GridDensity,
    dilate,
    esd,
    is_positive_semidefinite,
    is_self_adjoint,
    is_unitary,
    load_measure,
    measure_moments,
    pushforward,
    quantiles,
    save_measure,
    singular_square_measure,
    symmetrize,
)

CATALAN = [1, 1, 2, 5, 14, 42]

atom_lists = st.lists(st.floats(0.0, 10.0, allow_nan=False), min_size=1, max_size=12)


def _gue(k: int, rng: RngStream) -> np.ndarray:
    g = ginibre(k, 1.0 / k, rng)
    return (g + g.conj().T) / math.sqrt(2)


# -- matrix predicates -------------------------------------------------------

def test_predicates():
    assert is_self_adjoint(np.diag([1.0, 2.0]))
    assert not is_self_adjoint(np.array([[0, 1], [0, 0]]))
    assert is_unitary(np.array([[0, 1j], [1, 0]]))
    assert not is_unitary(2 * np.eye(2))
    assert is_positive_semidefinite(np.diag([0.0, 3.0]))
    assert not is_positive_semidefinite(np.diag([-1e-3, 3.0]))


# -- Atoms / GridDensity invariants ---------------------------------------------

def test_atoms_validation():
    with pytest.raises(ValueError):
        Atoms([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        Atoms([0.0, 1.0], [0.5, 0.6])
    m = Atoms.from_samples([2.0, 1.0, 2.0])
    assert list(m.locations) == [1.0, 2.0]
    assert np.allclose(m.weights, [1 / 3, 2 / 3])


@pytest.mark.parametrize("law", [laws.semicircle(), laws.quarter_circle(), laws.uniform(),
                                 laws.arcsine(), laws.marchenko_pastur(1.0),
                                 laws.marchenko_pastur(0.3)])
def test_grid_laws_unit_mass(law):
    assert abs(law.total_mass - 1.0) < 1e-12
    assert np.all(np.diff(law.nodes) > 0)
    assert np.all(law.values >= 0)


# -- esd / singular_square_measure ----------------------------------------------

def test_esd_examples():
    m = esd(np.eye(3))
    assert list(m.locations) == [1.0] and list(m.weights) == [1.0]
    m = esd(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(m.locations, [1, 2, 3]) and np.allclose(m.weights, 1 / 3)


def test_esd_gue_moments_match_catalan():
    a = _gue(512, RngStream(1))
    mom = measure_moments(esd(a), 4)
    assert np.allclose(mom, [1, 0, 1, 0, 2], atol=0.1)
    assert abs(mom[1] - np.trace(a).real / 512) < 1e-10


def test_esd_rejects_non_self_adjoint():
    with pytest.raises(ValueError):
        esd(np.array([[0, 1], [0, 0]]))


def test_singular_square_measure_examples():
    m = singular_square_measure(np.eye(4))
    assert np.allclose(m.locations, [0.5])
    m = singular_square_measure(2 * np.eye(4))
    assert np.allclose(m.locations, [2.0])
    g = ginibre(512, 1.0 / 512, RngStream(2))
    assert abs(measure_moments(singular_square_measure(g), 1)[1] - 0.5) < 0.05


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_esd_of_half_gram_matches_singular_square(k, seed):
    a = ginibre(k, 1.0, RngStream(seed))
    lhs = esd(a.conj().T @ a / 2)
    rhs = singular_square_measure(a)
    lam_l = np.repeat(lhs.locations, np.round(lhs.weights * k).astype(int))
    lam_r = np.repeat(rhs.locations, np.round(rhs.weights * k).astype(int))
    assert np.allclose(lam_l, lam_r, atol=1e-10)


# -- pushforward ---------------------------------------------------------------

def test_pushforward_examples():
    d1 = Atoms([1.0], [1.0])
    assert pushforward(d1, FunctionSpec.power(2)) == d1
    u2 = pushforward(laws.uniform(0, 1), FunctionSpec.affine(2))
    assert u2.support == (0.0, 2.0)
    assert np.allclose(u2.values, 0.5, atol=1e-9)
    with pytest.raises(ValueError):
        pushforward(Atoms([-1.0, 1.0], [0.5, 0.5]), FunctionSpec.power(2))


def test_pushforward_matches_sample_transport():
    # quarter-circle squared, then t -> (2t)^(1/2), against 10^6 transported samples
    qc = laws.quarter_circle()
    f = FunctionSpec.affine(2).then(FunctionSpec.power(0.5))
    out = pushforward(pushforward(qc, FunctionSpec.power(2)), f)
    grid = np.linspace(0, 2, 20001)
    u = np.random.default_rng(0).uniform(size=1_000_000)
    t = np.interp(u, qc.cdf(grid), grid)
    mc = np.mean(f(t ** 2) ** 2)
    assert abs(measure_moments(out, 2)[2] - mc) < 1e-3 * mc + 3 * np.std(f(t ** 2) ** 2) / 1e3
    assert abs(out.total_mass - 1) < 1e-10


@given(atom_lists, st.sampled_from(["power(2)", "affine(3)", "exp_shift(0.5)",
                                    "power(0.5)|affine(2)", "log_shift(1)"]))
@settings(max_examples=60, deadline=None)
def test_pushforward_inverse_round_trip(xs, text):
    m = Atoms.from_samples(xs)
    f = FunctionSpec.parse(text)
    image = pushforward(m, f)
    assume(len(image.locations) == len(m.locations))  # no floating-point collisions
    back = pushforward(image, f.inverse())
    assert np.allclose(back.locations, m.locations, atol=1e-9)
    assert np.allclose(back.weights, m.weights)


@given(st.lists(st.sampled_from(["affine(2)", "power(3)", "exp_shift(1)", "log_shift(2)",
                                 "power(0.25)"]), min_size=1, max_size=4),
       st.floats(0.0, 2.0))
@settings(max_examples=60, deadline=None)
def test_function_spec_monotone_and_fixes_zero(parts, t):
    f = FunctionSpec.parse("|".join(parts))
    with np.errstate(over="ignore"):
        assume(np.isfinite(f(t + 0.1)) and f(t + 0.1) < 1e12)
    assert f(0.0) == 0.0
    assert f(t + 0.1) > f(t)
    assert FunctionSpec.from_dict(f.to_dict()) == f
    assert abs(f.inverse()(f(t)) - t) < 1e-8 * max(1.0, t)


def test_function_spec_catalog_errors():
    with pytest.raises(ValueError):
        FunctionSpec.affine(2.0, 1.0)
    with pytest.raises(ValueError):
        FunctionSpec.power(-1.0)
    with pytest.raises(ValueError):
        FunctionSpec.parse("sin(2)")


# -- symmetrize ----------------------------------------------------------------

def test_symmetrize_examples():
    m = symmetrize(Atoms([1.0], [1.0]))
    assert np.allclose(m.locations, [-1, 1]) and np.allclose(m.weights, 0.5)
    assert symmetrize(Atoms([0.0], [1.0])) == Atoms([0.0], [1.0])
    sc = symmetrize(laws.quarter_circle())
    mom = measure_moments(sc, 6)
    assert np.allclose(mom[0::2], CATALAN[:4], atol=1e-6)
    assert np.allclose(mom[1::2], 0, atol=1e-12)


@given(atom_lists)
@settings(max_examples=60, deadline=None)
def test_symmetrize_moments_and_idempotence(xs):
    mu = Atoms.from_samples(xs)
    sym = symmetrize(mu)
    a, b = measure_moments(mu, 6), measure_moments(sym, 6)
    scale = max(1.0, max(xs)) ** 6
    assert all(abs(b[j]) < 1e-12 * scale for j in (1, 3, 5))
    assert all(abs(a[j] - b[j]) < 1e-12 * scale for j in (0, 2, 4, 6))
    assert symmetrize(sym) == sym


# -- moments -------------------------------------------------------------------

def test_moment_examples():
    assert np.allclose(measure_moments(Atoms([1.5], [1.0]), 3), [1, 1.5, 1.5 ** 2, 1.5 ** 3])
    assert np.allclose(measure_moments(laws.semicircle(), 6), [1, 0, 1, 0, 2, 0, 5], atol=1e-6)
    assert np.allclose(measure_moments(laws.uniform(-1, 1), 4), [1, 0, 1 / 3, 0, 1 / 5],
                       atol=1e-6)
    assert abs(measure_moments(laws.semicircle(), 0)[0] - 1) < 1e-12


def test_quantile_levels():
    q = quantiles(laws.uniform(0, 1), 4)
    assert np.allclose(q, [1 / 8, 3 / 8, 5 / 8, 7 / 8], atol=1e-9)
    assert np.allclose(quantiles(laws.two_point(0.5, 0, 1), 4), [0, 0, 1, 1])


def test_dilate_scales_support_and_mass():
    m = dilate(laws.quarter_circle(), 3.0)
    assert m.support == (0.0, 6.0)
    assert abs(m.total_mass - 1) < 1e-12


# -- CSV round trip ------------------------------------------------------------

@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=20))
@settings(max_examples=40, deadline=None)
def test_atoms_csv_round_trip_bit_exact(tmp_path_factory, xs):
    m = Atoms.from_samples(xs)
    path = tmp_path_factory.mktemp("csv") / "atoms.csv"
    save_measure(m, path)
    back = load_measure(path)
    assert np.array_equal(back.locations, m.locations)
    assert np.array_equal(back.weights, m.weights)


def test_grid_csv_round_trip_bit_exact(tmp_path):
    m = laws.marchenko_pastur(0.5, 257)
    save_measure(m, tmp_path / "g.csv")
    back = load_measure(tmp_path / "g.csv")
    assert isinstance(back, GridDensity)
    assert (back.a, back.b) == (m.a, m.b)
    assert np.array_equal(back.values, m.values)
