from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rdiag import laws
from rdiag.cumulants import haar_multiply, self_adjoint_table
from rdiag.models import (
    RngStream,
    freeness_defect,
    freeness_defect_model,
    freeness_report,
    freeness_words,
    ginibre,
    haar_unitary,
    load_samples,
    mixed_moment_estimate,
    positive_with_spectrum,
    rdiag_sample,
    save_samples,
)
from rdiag.spectral import is_positive_semidefinite, is_unitary, quantiles
from rdiag.words import StarWord, all_words

NAMES = ("u", "b")
Z = ("z",)


def _w(text, names=Z):
    return StarWord.parse(text, names)


# -- RngStream -----------------------------------------------------------------

def test_rng_stream_determinism_and_independence():
    a = ginibre(4, 1.0, RngStream(5, 1))
    assert np.array_equal(a, ginibre(4, 1.0, RngStream(5, 1)))
    assert not np.array_equal(a, ginibre(4, 1.0, RngStream(5, 2)))
    assert not np.array_equal(a, ginibre(4, 1.0, RngStream(5, 1).child(0)))
    with pytest.raises(ValueError):
        RngStream(-1)


def test_batched_and_single_draws_differ_only_in_shape():
    u = haar_unitary(3, RngStream(1), size=5)
    assert u.shape == (5, 3, 3)
    assert all(is_unitary(x) for x in u)


# -- Haar unitaries --------------------------------------------------------------

def test_haar_k1_is_a_phase():
    u = haar_unitary(1, RngStream(0), size=100)
    assert np.allclose(np.abs(u), 1, atol=1e-12)


def test_haar_trace_mean():
    u = haar_unitary(64, RngStream(1), size=10_000)
    tr = np.trace(u, axis1=-2, axis2=-1) / 64
    assert abs(tr.mean()) < 0.02


def test_haar_first_entry_modulus():
    u = haar_unitary(16, RngStream(2), size=100_000)
    assert abs(np.mean(np.abs(u[:, 0, 0]) ** 2) - 1 / 16) < 5e-3


def test_haar_left_invariance_ks():
    k = 8
    v = haar_unitary(k, RngStream(99))
    u1 = haar_unitary(k, RngStream(3), size=10_000)
    u2 = haar_unitary(k, RngStream(4), size=10_000)
    t1 = np.trace(v @ u1, axis1=-2, axis2=-1).real
    t2 = np.trace(u2, axis1=-2, axis2=-1).real
    assert stats.ks_2samp(t1, t2).pvalue > 1e-3


def test_naive_qr_would_fail_invariance():
    # control: without the phase correction the diagonal of R is positive and
    # tr(U) picks up a bias at k = 1
    z = ginibre(1, 1.0, RngStream(5), size=10_000)
    q, _ = np.linalg.qr(z)
    assert abs(np.mean(q)) > 0.5
    assert abs(np.mean(haar_unitary(1, RngStream(5), size=10_000))) < 0.05


# -- Ginibre ---------------------------------------------------------------------

def test_ginibre_examples():
    g = ginibre(1, 1.0, RngStream(6), size=100_000)
    assert abs(np.mean(np.abs(g) ** 2) - 1) < 2e-2
    g = ginibre(256, 1 / 256, RngStream(7))
    s = np.linalg.svd(g, compute_uv=False)
    assert abs(np.mean(s ** 2) / 2 - 0.5) < 2e-2
    assert np.array_equal(ginibre(2, 0.0, RngStream(8)), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ginibre(2, -1.0, RngStream(8))


# -- positive_with_spectrum / rdiag_sample ---------------------------------------------

def test_positive_with_spectrum_examples():
    assert np.array_equal(positive_with_spectrum(laws.point(2.0), 3, RngStream(0)),
                          2 * np.eye(3))
    p = positive_with_spectrum(laws.two_point(0.5, 0, 1), 4, RngStream(1))
    assert np.allclose(np.linalg.eigvalsh(p), [0, 0, 1, 1], atol=1e-12)
    p = positive_with_spectrum(laws.quarter_circle(), 512, RngStream(2))
    lam = np.linalg.eigvalsh(p)
    assert abs(np.mean(lam ** 2) - 1) < 5e-3
    with pytest.raises(ValueError):
        positive_with_spectrum(laws.semicircle(), 4, RngStream(0))


@given(st.integers(1, 8), st.integers(0, 2 ** 32 - 1),
       st.sampled_from(["quarter_circle", "uniform", "marchenko_pastur"]))
@settings(max_examples=30, deadline=None)
def test_positive_with_spectrum_is_psd_with_quantile_spectrum(k, seed, name):
    law = laws.make_law(name)
    p = positive_with_spectrum(law, k, RngStream(seed))
    assert is_positive_semidefinite(p, tol=1e-10)
    assert np.allclose(np.linalg.eigvalsh(p), quantiles(law, k), atol=1e-10)


def test_rdiag_sample_examples():
    z = rdiag_sample(laws.point(1.0), 5, RngStream(0))
    assert np.allclose(np.linalg.svd(z, compute_uv=False), 1, atol=1e-12)
    assert np.array_equal(rdiag_sample(laws.point(0.0), 3, RngStream(0)), np.zeros((3, 3)))
    z = rdiag_sample(laws.quarter_circle(), 512, RngStream(1))
    zz = z @ z.conj().T
    assert abs(np.trace(zz @ zz).real / 512 - 2) < 0.05


def test_rdiag_sample_is_deterministic():
    a = rdiag_sample(laws.quarter_circle(), 6, RngStream(11, 3), size=4)
    b = rdiag_sample(laws.quarter_circle(), 6, RngStream(11, 3), size=4)
    assert np.array_equal(a, b)


def test_rdiag_sample_matches_haar_multiply_prediction():
    k, n = 64, 400
    qc = laws.quarter_circle()
    z = rdiag_sample(qc, k, RngStream(12), size=n)
    b_mom = [float(np.mean(quantiles(qc, k) ** j)) for j in range(5)]
    pred = haar_multiply(self_adjoint_table(b_mom))
    for w in all_words((False,), 4, 1):
        mean, err = mixed_moment_estimate(z, w)
        # the finite-k correction is O(1/k^2) for these words
        assert abs(mean - pred[w]) < 3 * err + 2e-3, w.to_string(Z)


def test_rdiag_phase_invariance():
    k, n = 32, 400
    z = rdiag_sample(laws.uniform(0, 1), k, RngStream(13), size=n)
    v = haar_unitary(k, RngStream(14), size=n)
    for w in all_words((False,), 4, 1):
        m1, e1 = mixed_moment_estimate(z, w)
        m2, e2 = mixed_moment_estimate(v @ z, w)
        assert abs(m1 - m2) < 3 * math.hypot(e1, e2) + 1e-12, w.to_string(Z)


# -- mixed moments -------------------------------------------------------------

def test_mixed_moment_examples():
    u = haar_unitary(8, RngStream(15), size=20)
    mean, err = mixed_moment_estimate(u, StarWord())
    assert mean == 1 and err == 0
    vals = [(x,) for x in u]
    mean, err = mixed_moment_estimate(vals, _w("zZ"))
    assert abs(mean - 1) < 1e-12 and err < 1e-12
    with pytest.raises(ValueError):
        mixed_moment_estimate([], _w("z"))


def test_mixed_moment_freeness_example():
    k, n = 256, 200
    d = quantiles(laws.two_point(0.5, 1, 3), k)
    b = np.diag(d).astype(complex)
    u = haar_unitary(k, RngStream(16), size=n)
    samples = [(x, b) for x in u]
    mean, err = mixed_moment_estimate(samples, StarWord.parse("ubUb", NAMES))
    assert abs(mean - np.mean(d) ** 2) < 3 * err + 1e-12


# -- freeness ----------------------------------------------------------------

def test_freeness_words_cover_classes():
    words = freeness_words(2)
    # b is self-adjoint, so "uB" is the rotation/adjoint class of "Ub"
    assert [w.to_string(NAMES) for w in words] == ["u", "b", "uu", "uU", "ub", "uB", "bb"]
    with pytest.raises(ValueError):
        freeness_words(7)


def test_freeness_order_one_and_zero_b():
    k, n = 16, 500
    u = haar_unitary(k, RngStream(17), size=n)
    d = quantiles(laws.uniform(0, 1), k)
    rep = freeness_report(u, d, 1)
    assert np.all(rep.deviations < 3 * rep.stderrs + 1e-12)
    rep0 = freeness_report(u, np.zeros(k), 3)
    assert np.all(rep0.deviations < 3 * rep0.stderrs + 1e-12)
    assert freeness_defect(u, d, 1) == rep.defect


def test_freeness_model_chunking_is_invisible_to_workers():
    qc = laws.quarter_circle()
    a = freeness_defect_model(qc, 8, 300, 3, RngStream(18), chunk=64)
    b = freeness_defect_model(qc, 8, 300, 3, RngStream(18), chunk=64, workers=2)
    assert np.array_equal(a.means, b.means) and np.array_equal(a.stderrs, b.stderrs)


def test_freeness_defect_shrinks_with_k():
    qc = laws.quarter_circle()
    small = freeness_defect_model(qc, 8, 2000, 4, RngStream(19))
    large = freeness_defect_model(qc, 32, 2000, 4, RngStream(20))
    assert large.defect < small.defect / 2


# -- sample dumps --------------------------------------------------------------

def test_save_load_samples_round_trip(tmp_path):
    rng = RngStream(21, 4)
    m = ginibre(3, 1.0, rng, size=2)
    save_samples(tmp_path / "s.csv", m, 3, rng)
    back, meta = load_samples(tmp_path / "s.csv")
    assert np.array_equal(back, m)
    assert meta == {"k": 3, "seed": 21, "stream_id": 4}
