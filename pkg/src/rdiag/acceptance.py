"""Acceptance criteria AC-1 .. AC-11 with pinned seeds.

Each criterion returns a :class:`CriterionResult` whose ``details`` hold only
deterministic values (no timings), so report bodies can be compared byte for
byte.  ``quick`` shrinks sizes but keeps every assertion.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import cumulants, entropy, geometry, laws, microstates, models
from .spectral import FunctionSpec, pushforward, quantiles

__all__ = [
    "CriterionResult",
    "CRITERIA",
    "SUITES",
    "DEFAULT_SEED",
    "run_criterion",
    "run_suite",
    "encode",
    "dumps",
]

DEFAULT_SEED = 20240601


def quantity(value, provenance: str, error: float = 0.0) -> dict:
    """A reported number with its provenance (analytic, quadrature, monte-carlo)."""
    return {"value": value, "provenance": provenance, "error_estimate": error}


@dataclass
class CriterionResult:
    id: str
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def body(self) -> dict:
        return {"id": self.id, "title": self.title, "pass": self.passed,
                "details": self.details}

    def line(self) -> str:
        return f"{self.id} {'PASS' if self.passed else 'FAIL'} {self.title}"


def encode(obj):
    """JSON-safe copy: non-finite floats become strings, complex becomes ``{re, im}``."""
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": encode(float(obj.real)), "im": encode(float(obj.imag))}
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(encode(obj), sort_keys=True, indent=2, ensure_ascii=False)


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def ac1(seed: int, quick: bool, workers: int) -> CriterionResult:
    ks = [100, 1000, 10000]
    res = [geometry.limck_residual(k) for k in ks]
    absr = [abs(r) for r in res]
    ok = absr[-1] < 0.01 and all(a > b for a, b in zip(absr, absr[1:]))
    return CriterionResult("AC-1", "unitary group volume asymptotics", ok, {
        "k": ks, "residual": [quantity(r, "analytic") for r in res]})


def ac2(seed: int, quick: bool, workers: int) -> CriterionResult:
    rng = models.RngStream(seed, 2)
    n = 5 if quick else 20
    worst_dp = worst_ds = 0.0
    identical = True
    for k in (1, 2, 3):
        g = models.ginibre(k, 1.0, rng.child(k), n)
        for p in geometry.polar_decompose(g).p:
            an = geometry.jacobian_dp(p)
            identical &= an == geometry.jacobian_ds(p)
            worst_dp = max(worst_dp, abs(math.expm1(geometry.fd_jacobian_dp(p) - an)))
            worst_ds = max(worst_ds, abs(math.expm1(geometry.fd_jacobian_ds(p) - an)))
    ok = worst_dp < 1e-4 and worst_ds < 1e-4 and identical
    return CriterionResult("AC-2", "polar Jacobian formulas", ok, {
        "matrices_per_k": n, "dp_vs_fd_rel": quantity(worst_dp, "analytic"),
        "ds_vs_fd_rel": quantity(worst_ds, "analytic"), "dp_equals_ds": identical})


def ac3(seed: int, quick: bool, workers: int) -> CriterionResult:
    n = 1024 if quick else 4096
    defects = {}
    for name, law in (("quarter_circle", laws.quarter_circle(n)),
                      ("marchenko_pastur_1", laws.marchenko_pastur(1.0, n)),
                      ("uniform_0_1", laws.uniform(0.0, 1.0, n))):
        defects[name] = entropy.chi_symmetric_identity_defect(law)
    chi = entropy.chi_rdiag(laws.quarter_circle(n))
    target = math.log(math.pi * math.e)
    ok = all(d < 5e-3 for d in defects.values()) and abs(chi.value - target) < 2e-3
    return CriterionResult("AC-3", "entropy identity chain", ok, {
        "grid": n, "identity_defect": {k: quantity(v, "quadrature") for k, v in defects.items()},
        "chi_rdiag_quarter_circle": quantity(chi.value, "quadrature", chi.error_estimate),
        "target": quantity(target, "analytic")})


def ac4(seed: int, quick: bool, workers: int) -> CriterionResult:
    n = 20_000 if quick else 100_000
    rep = geometry.push_measure_check(2, n, models.RngStream(seed, 4))
    rep1 = geometry.push_measure_check(1, max(10_000, n // 10), models.RngStream(seed, 4, (1,)))
    ok = rep.passed and not rep.control.passed and rep1.passed
    return CriterionResult("AC-4", "polar map preserves the Gaussian measure", ok, {
        "k2": rep.to_dict(), "k1": rep1.to_dict(), "provenance": "monte-carlo"})


def ac5(seed: int, quick: bool, workers: int) -> CriterionResult:
    order = 6 if quick else 8
    fixed = {}
    for name, tab in (("circular", cumulants.circular_table(order)),
                      ("haar", cumulants.haar_table(order))):
        fixed[name] = cumulants.haar_multiply(tab).max_abs_diff(tab)
    corpus = {}
    agree = True
    for name, (tab, expected) in cumulants.rdiag_corpus(6).items():
        rep = cumulants.is_r_diagonal(tab, cross_check=True)
        corpus[name] = {"is_r_diagonal": rep.is_r_diagonal, "expected": expected,
                        "invariance_agrees": rep.invariance_agrees}
        agree &= bool(rep.invariance_agrees) and rep.is_r_diagonal == expected
    ok = all(v < 1e-12 for v in fixed.values()) and agree
    return CriterionResult("AC-5", "R-diagonality invariance", ok, {
        "fixed_point_order": order,
        "fixed_point_defect": {k: quantity(v, "analytic") for k, v in fixed.items()},
        "corpus": corpus})


def ac6(seed: int, quick: bool, workers: int) -> CriterionResult:
    ks = (32, 128) if quick else (64, 256)
    n = 2000 if quick else 10_000
    mu = laws.quarter_circle()
    reps = [models.freeness_defect_model(mu, k, n, 4, models.RngStream(seed, 6, (k,)),
                                         workers=workers) for k in ks]
    small, large = reps
    ratio = small.defect / large.defect
    ok = large.defect < 5e-2 and ratio >= 2.0
    return CriterionResult("AC-6", "asymptotic freeness of the matrix model", ok, {
        "k": list(ks), "samples": n,
        "defect": [quantity(r.defect, "monte-carlo", float(r.stderrs.max())) for r in reps],
        "worst_word": [r.worst_word for r in reps], "ratio": ratio})


def ac7(seed: int, quick: bool, workers: int) -> CriterionResult:
    ks = [128, 256, 512]
    sc = laws.semicircle()
    errs = []
    for k in ks:
        est = entropy.log_energy_estimator(quantiles(sc, k))
        errs.append(abs(est.value + 0.25))
    ok = errs[-1] < 2e-2 and all(a > b for a, b in zip(errs, errs[1:]))
    return CriterionResult("AC-7", "finite-k log-energy estimator convergence", ok, {
        "k": ks, "error": [quantity(e, "analytic") for e in errs]})


def ac8(seed: int, quick: bool, workers: int) -> CriterionResult:
    n, reps = (2000, 3) if quick else (4000, 4)
    est = {}
    for name, tab in (("circular", cumulants.circular_table(4)),
                      ("haar", cumulants.haar_table(4))):
        spec = microstates.GammaSpec(4.0, 4, 0.05, tab)
        est[name] = microstates.log_volume_splitting(
            spec, 4, n, models.RngStream(seed, 8, (len(est),)), replicates=reps, workers=workers)
    c, h = est["circular"], est["haar"]
    if h.is_neg_inf:
        combined = c.normalized_stderr
        ordered = math.isfinite(c.normalized) and math.isfinite(combined)
    else:
        combined = math.hypot(c.normalized_stderr, h.normalized_stderr)
        ordered = h.normalized < c.normalized - 3 * combined
    bound_below = None
    if h.upper_bound is not None and math.isfinite(c.log_volume):
        ub_norm = h.upper_bound / 16 + math.log(4)
        bound_below = ub_norm < c.normalized - 3 * combined
    gaps = {}
    for name, law in (("quarter_circle", laws.quarter_circle()),
                      ("marchenko_pastur_1", laws.marchenko_pastur(1.0)),
                      ("uniform_0_1", laws.uniform(0.0, 1.0))):
        ub = entropy.chi_upper_bound(pushforward(law, FunctionSpec.power(2.0)))
        gaps[name] = abs(ub.value - entropy.chi_rdiag(law).value)
    ok = ordered and all(g < 5e-3 for g in gaps.values())
    return CriterionResult("AC-8", "maximality ordering and bound equality", ok, {
        "circular": quantity(c.normalized, "monte-carlo", c.normalized_stderr),
        "haar": quantity(h.normalized, "monte-carlo", h.normalized_stderr),
        "haar_log_volume_upper_bound": h.upper_bound,
        "haar_bound_also_below": bound_below,
        "combined_stderr": combined,
        "levels": {"circular": c.details["levels"], "haar": h.details["levels"]},
        "upper_bound_gap": {k: quantity(v, "quadrature") for k, v in gaps.items()}})


def ac9(seed: int, quick: bool, workers: int) -> CriterionResult:
    u01, u12 = laws.uniform(0.0, 1.0), laws.uniform(1.0, 2.0)
    d_aff = entropy.changevar_defect(u01, FunctionSpec.affine(3.0))
    d_pow = entropy.changevar_defect(u12, FunctionSpec.power(2.0))
    shift = (entropy.log_energy(pushforward(u01, FunctionSpec.affine(3.0)), error=False).value
             - entropy.log_energy(u01, error=False).value)
    ok = d_aff < 1e-4 and d_pow < 1e-4 and abs(shift - math.log(3.0)) < 1e-6
    return CriterionResult("AC-9", "change of variables", ok, {
        "affine_3_defect": quantity(d_aff, "quadrature"),
        "power_2_defect": quantity(d_pow, "quadrature"),
        "affine_shift_minus_log3": quantity(shift - math.log(3.0), "quadrature")})


def ac10(seed: int, quick: bool, workers: int) -> CriterionResult:
    reports = [microstates.amplification_constant(d, v) for d, v in ((1, 1.0), (2, 1.0), (3, 2.0))]
    ok = all(r["pass"] for r in reports)
    return CriterionResult("AC-10", "amplification constant", ok, {"reports": reports})


def _determinism_body(seed: int, workers: int) -> str:
    bodies = [CRITERIA[c][1](seed, True, workers).body() for c in ("AC-4", "AC-6", "AC-8")]
    return dumps(bodies)


def ac11(seed: int, quick: bool, workers: int) -> CriterionResult:
    counts = (1, 2, 8)
    bodies = [_determinism_body(seed, w) for w in counts]
    same = all(b == bodies[0] for b in bodies)
    return CriterionResult("AC-11", "determinism across worker counts", same, {
        "workers": list(counts), "criteria": ["AC-4", "AC-6", "AC-8"], "mode": "quick",
        "identical": same})


CRITERIA: dict[str, tuple[str, Callable]] = {
    "AC-1": ("geometry", ac1),
    "AC-2": ("geometry", ac2),
    "AC-3": ("entropy", ac3),
    "AC-4": ("geometry", ac4),
    "AC-5": ("cumulants", ac5),
    "AC-6": ("models", ac6),
    "AC-7": ("entropy", ac7),
    "AC-8": ("microstates", ac8),
    "AC-9": ("entropy", ac9),
    "AC-10": ("amplify", ac10),
    "AC-11": ("determinism", ac11),
}

SUITES = ("geometry", "entropy", "cumulants", "models", "microstates", "amplify",
          "determinism", "all")


def run_criterion(cid: str, seed: int = DEFAULT_SEED, quick: bool = False,
                  workers: int = 1) -> CriterionResult:
    if cid not in CRITERIA:
        raise KeyError(f"unknown criterion {cid!r}")
    t0 = time.perf_counter()
    res = CRITERIA[cid][1](seed, quick, workers)
    res.seconds = time.perf_counter() - t0
    return res


def run_suite(name: str, seed: int = DEFAULT_SEED, quick: bool = False,
              workers: int = 1) -> list[CriterionResult]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    ids = [c for c, (s, _) in CRITERIA.items() if name == "all" or s == name]
    return [run_criterion(c, seed, quick, workers) for c in ids]
