from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from rdiag import laws
from rdiag.entropy import (
    CHI_CONSTANT,
    HALF_SQUARE,
    chi_rdiag,
    chi_sa_one,
    chi_symmetric_identity_defect,
    chi_upper_bound,
    changevar_defect,
    changevar_integral,
    log_energy,
    log_energy_estimator,
)
from rdiag.spectral import (
    Atoms,
    FunctionSpec,
    dilate,
    measure_moments,
    pushforward,
    quantiles,
    symmetrize,
)

# Independent oracles, computed once with nested scipy.integrate.quad on the
# closed-form densities (inner integral split at the log singularity).
QUARTER_CIRCLE_ENERGY = -0.899914430344103
SEMICIRCLE_ENERGY_QUAD = -0.25000000000098394

POSITIVE_LAWS = {
    "quarter_circle": laws.quarter_circle,
    "uniform01": lambda: laws.uniform(0, 1),
    "mp1": lambda: laws.marchenko_pastur(1.0),
    "mp_half": lambda: laws.marchenko_pastur(0.5),
}


def _nested_quad_energy(dens, a, b):
    def inner(s):
        return integrate.quad(lambda t: math.log(abs(s - t)) * dens(t), a, b,
                              points=[s], limit=200)[0]
    return integrate.quad(lambda s: dens(s) * inner(s), a, b, limit=200)[0]


# -- catalog -------------------------------------------------------------------

def test_catalog_closed_form_moments():
    assert np.allclose(measure_moments(laws.marchenko_pastur(1.0), 3), [1, 1, 2, 5], atol=1e-5)
    assert np.allclose(measure_moments(laws.arcsine(), 4), [1, 0, 0.5, 0, 0.375], atol=1e-5)
    assert np.allclose(measure_moments(laws.quarter_circle(), 2)[2], 1.0, atol=1e-6)
    assert abs(measure_moments(laws.quarter_circle(), 1)[1] - 8 / (3 * math.pi)) < 1e-6
    assert np.allclose(measure_moments(laws.semicircle(2.0), 2), [1, 0, 2], atol=1e-5)
    assert np.allclose(measure_moments(laws.two_point(0.25, 0, 2), 2), [1, 1.5, 3], atol=1e-12)


def test_catalog_lookup_errors():
    with pytest.raises(ValueError):
        laws.make_law("cauchy")
    with pytest.raises(ValueError):
        laws.two_point(1.5)
    assert laws.make_law("point", c=2.0) == Atoms([2.0], [1.0])


# -- log energy ----------------------------------------------------------------

@pytest.mark.parametrize("law, expected", [
    (laws.semicircle(), -0.25),
    (laws.uniform(-1, 1), math.log(2) - 1.5),
    (laws.arcsine(), -math.log(2)),
    (laws.marchenko_pastur(1.0), -0.5),
    (laws.quarter_circle(), QUARTER_CIRCLE_ENERGY),
])
def test_log_energy_closed_forms(law, expected):
    e = log_energy(law)
    assert abs(e.value - expected) < 1e-3
    assert e.method == "quadrature"
    assert e.error_estimate >= 0


def test_log_energy_uniform_against_antiderivative_oracle():
    # inner integral of log|s - t| over t in [-1, 1] in closed form
    def inner(s):
        return (1 - s) * math.log(1 - s) + (1 + s) * math.log(1 + s) - 2
    oracle = integrate.quad(inner, -1, 1)[0] / 4
    assert abs(log_energy(laws.uniform(-1, 1)).value - oracle) < 1e-6


def test_frozen_oracles_reproduce():
    sc = lambda t: math.sqrt(max(4 - t * t, 0.0)) / (2 * math.pi)
    assert abs(_nested_quad_energy(sc, -2, 2) - SEMICIRCLE_ENERGY_QUAD) < 1e-9
    assert abs(SEMICIRCLE_ENERGY_QUAD + 0.25) < 1e-9


def test_atoms_have_neg_inf_energy():
    e = log_energy(laws.point(0.0))
    assert e.is_neg_inf and e.error_estimate == 0
    assert log_energy(laws.two_point()).is_neg_inf


@given(st.sampled_from(sorted(POSITIVE_LAWS) + ["semicircle", "arcsine"]),
       st.sampled_from([0.5, 2.0, 3.0]))
@settings(max_examples=12, deadline=None)
def test_log_energy_scaling_law(name, a):
    law = POSITIVE_LAWS[name]() if name in POSITIVE_LAWS else laws.make_law(name)
    shift = log_energy(dilate(law, a), error=False).value - log_energy(law, error=False).value
    assert abs(shift - math.log(a)) < 1e-6


@pytest.mark.parametrize("name", sorted(POSITIVE_LAWS))
def test_refinement_within_error_estimate(name):
    coarse = POSITIVE_LAWS[name]()
    fine = laws.make_law({"uniform01": "uniform", "mp1": "marchenko_pastur",
                          "mp_half": "marchenko_pastur"}.get(name, name),
                         **{"uniform01": {"a": 0, "b": 1}, "mp1": {"ratio": 1.0},
                            "mp_half": {"ratio": 0.5}}.get(name, {}),
                         n=2 * coarse.n - 1)
    e = log_energy(coarse)
    assert abs(log_energy(fine, error=False).value - e.value) <= e.error_estimate + 1e-12


# -- chi -----------------------------------------------------------------------

def test_chi_constant_from_first_principles():
    assert CHI_CONSTANT == 0.75 + 0.5 * math.log(2 * math.pi)


def test_chi_sa_examples():
    assert abs(chi_sa_one(laws.semicircle()).value - 0.5 * math.log(2 * math.pi * math.e)) < 1e-3
    assert abs(chi_sa_one(laws.semicircle(0.5)).value - 0.5 * math.log(math.pi * math.e)) < 1e-3
    assert chi_sa_one(laws.point(3.0)).is_neg_inf


def test_chi_rdiag_examples():
    qc = laws.quarter_circle()
    base = chi_rdiag(qc).value
    # a circular element splits into two free semicirculars of variance 1/2
    assert abs(base - 2 * chi_sa_one(laws.semicircle(0.5)).value) < 2e-3
    assert abs(base - math.log(math.pi * math.e)) < 2e-3
    assert chi_rdiag(laws.point(1.0)).is_neg_inf
    assert abs(chi_rdiag(dilate(qc, 2.0)).value - base - 2 * math.log(2)) < 2e-3


@pytest.mark.parametrize("name", sorted(POSITIVE_LAWS))
def test_symmetric_identity_defect(name):
    assert chi_symmetric_identity_defect(POSITIVE_LAWS[name]()) < 5e-3


def test_symmetric_identity_rejects_atoms():
    with pytest.raises(ValueError):
        chi_symmetric_identity_defect(laws.point(1.0))


@pytest.mark.parametrize("name", sorted(POSITIVE_LAWS))
def test_squared_vs_symmetric_energy(name):
    mu_b = POSITIVE_LAWS[name]()
    x = symmetrize(mu_b)
    lhs = log_energy(pushforward(mu_b, HALF_SQUARE), error=False).value
    rhs = 2 * log_energy(dilate(x, 2 ** -0.5), error=False).value
    assert abs(lhs - rhs) < 5e-3


def test_upper_bound_examples():
    assert abs(chi_upper_bound(laws.marchenko_pastur(1.0)).value - math.log(math.pi * math.e)) < 2e-3
    assert chi_upper_bound(laws.point(1.0)).is_neg_inf
    u = laws.uniform(0, 4)
    bound = chi_upper_bound(u).value
    assert math.isfinite(bound)
    assert abs(bound - chi_rdiag(pushforward(u, FunctionSpec.power(0.5))).value) < 5e-3


@pytest.mark.parametrize("name", sorted(POSITIVE_LAWS))
def test_upper_bound_attained_by_rdiagonal(name):
    mu_yy = POSITIVE_LAWS[name]()
    bound = chi_upper_bound(mu_yy).value
    attained = chi_rdiag(pushforward(mu_yy, FunctionSpec.power(0.5))).value
    assert abs(bound - attained) < 5e-3


# -- change of variables ---------------------------------------------------------

def test_changevar_examples():
    assert changevar_defect(laws.uniform(0, 1), FunctionSpec.affine(1.0)) == pytest.approx(0, abs=1e-12)
    u = laws.uniform(0, 1)
    f = FunctionSpec.affine(3.0)
    assert changevar_defect(u, f) < 1e-6
    assert abs(changevar_integral(u, f) - math.log(3)) < 1e-6
    assert changevar_defect(laws.uniform(1, 2), FunctionSpec.power(2)) < 1e-4
    with pytest.raises(ValueError):
        changevar_defect(laws.point(1.0), f)


def test_changevar_power_against_independent_quadrature():
    # log((s^2 - t^2)/(s - t)) = log(s + t) on [1, 2]^2 with uniform weight
    oracle = integrate.dblquad(lambda t, s: math.log(s + t), 1, 2, 1, 2)[0]
    assert abs(changevar_integral(laws.uniform(1, 2), FunctionSpec.power(2)) - oracle) < 1e-4


@given(st.sampled_from(["power(2)", "exp_shift(0.5)", "power(3)|affine(2)", "log_shift(1)"]),
       st.sampled_from(["uniform01", "quarter_circle"]))
@settings(max_examples=8, deadline=None)
def test_changevar_defect_small(text, name):
    assert changevar_defect(POSITIVE_LAWS[name](), FunctionSpec.parse(text)) < 5e-3


# -- finite-k estimator -----------------------------------------------------------

def test_estimator_examples():
    e = log_energy_estimator([0.0, 1.0])
    assert e.value == 0.0 and e.method == "eigenvalue_estimator"
    assert log_energy_estimator([0.0, 1.0, 1.0]).is_neg_inf
    assert abs(log_energy_estimator(quantiles(laws.semicircle(), 512)).value + 0.25) < 2e-2
    with pytest.raises(ValueError):
        log_energy_estimator([1.0])


@pytest.mark.parametrize("name", ["semicircle", "uniform", "arcsine", "quarter_circle"])
def test_estimator_converges_on_quantile_spectra(name):
    law = laws.make_law(name)
    target = log_energy(law, error=False).value
    errs = [abs(log_energy_estimator(quantiles(law, k)).value - target) for k in (128, 256, 512)]
    assert errs[0] > errs[1] > errs[2]


@given(st.lists(st.integers(-500, 500), min_size=2, max_size=30, unique=True),
       st.floats(0.1, 10))
@settings(max_examples=60, deadline=None)
def test_estimator_scaling_and_permutation(xs, a):
    xs = [x / 100 for x in xs]
    k = len(xs)
    e = log_energy_estimator(xs).value
    assert abs(log_energy_estimator(xs[::-1]).value - e) < 1e-12 * max(1, abs(e))
    scaled = log_energy_estimator(np.asarray(xs) * a).value
    assert abs(scaled - e - (k - 1) / k * math.log(a)) < 1e-9 * max(1, abs(e))
