"""Command-line runner.

Every invocation becomes an :class:`~rdiag.config.ExperimentConfig` and
prints (or writes) one JSON document::

    {"schema": ..., "body": {command, config, result, assertions}, "manifest": {...}}

The body depends only on the config, so identical configs give byte-identical
bodies.  Exit status: 0 when all assertions pass, 1 when one fails, 2 on
invalid input.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__, acceptance, cumulants, entropy, geometry, laws, microstates, models
from .acceptance import dumps, quantity
from .config import ExperimentConfig
from .spectral import FunctionSpec

__all__ = ["main", "run", "build_parser", "load_gamma_spec", "SCHEMA"]

SCHEMA = "rdiag.result/1"


class _Assertions:
    def __init__(self, tolerances: dict):
        self.tol = dict(tolerances)
        self.items: list[dict] = []
        self.timings: dict | None = None

    def check(self, name: str, value, ok: bool, threshold=None) -> None:
        self.items.append({"name": name, "value": value, "threshold": threshold,
                           "pass": bool(ok)})

    def below(self, name: str, value: float, default: float) -> None:
        thr = self.tol.get(name, default)
        self.check(name, value, value < thr, thr)

    @property
    def passed(self) -> bool:
        return all(a["pass"] for a in self.items)


def _ints(value) -> list[int]:
    if isinstance(value, (int, float)):
        return [int(value)]
    if isinstance(value, list):
        return [int(v) for v in value]
    return [int(float(v)) for v in str(value).split(",") if v.strip()]


def _law(params: dict):
    lp = dict(params.get("law_params") or {})
    if "grid" in params and params["grid"] is not None:
        lp["n"] = int(params["grid"])
    return laws.make_law(params.get("law", "quarter_circle"), **lp)


# ---------------------------------------------------------------------------
# command bodies: (params, config, assertions) -> result
# ---------------------------------------------------------------------------

_ENTROPY_OPS = ("log_energy", "chi_sa", "chi_rdiag", "identity_defect", "upper_bound",
                "changevar")


def _entropy(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    op = p.get("op", "chi_rdiag")
    m = _law(p)
    if op == "log_energy":
        val = entropy.log_energy(m)
    elif op == "chi_sa":
        val = entropy.chi_sa_one(m)
    elif op == "chi_rdiag":
        val = entropy.chi_rdiag(m)
    elif op == "upper_bound":
        val = entropy.chi_upper_bound(m)
    elif op == "identity_defect":
        d = entropy.chi_symmetric_identity_defect(m)
        a.below("identity_defect", d, 5e-3)
        return {"op": op, "law": p.get("law"), "defect": quantity(d, "quadrature")}
    elif op == "changevar":
        if not p.get("f"):
            raise ValueError("changevar needs --f")
        f = FunctionSpec.parse(p["f"])
        d = entropy.changevar_defect(m, f)
        a.below("changevar_defect", d, 1e-4)
        return {"op": op, "law": p.get("law"), "f": str(f), "defect": quantity(d, "quadrature")}
    else:
        raise ValueError(f"unknown entropy op {op!r}; choose from {', '.join(_ENTROPY_OPS)}")
    if "expect" in a.tol:
        err = abs(val.value - a.tol["expect"])
        a.check("expect", val.value, err <= a.tol.get("abs_tol", 1e-3), a.tol["expect"])
    return {"op": op, "law": p.get("law"),
            "value": quantity(val.value, val.method, val.error_estimate)}


def _geometry(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    check = p.get("check", "volume")
    if check == "volume":
        ks = _ints(p.get("k", 10000))
        res = [geometry.limck_residual(k) for k in ks]
        for k, r in zip(ks, res):
            a.below(f"residual[k={k}]", abs(r), a.tol.get("residual", 0.01))
        return {"check": check, "k": ks,
                "log_volume": [quantity(geometry.volume_ck(k), "analytic") for k in ks],
                "residual": [quantity(r, "analytic") for r in res]}
    if check == "jacobian":
        ks = _ints(p.get("k", "1,2,3"))
        n = int(p.get("samples", 20))
        rng = models.RngStream(cfg.seed, 2)
        rows = []
        for k in ks:
            g = models.ginibre(k, 1.0, rng.child(k), n)
            for p_ in geometry.polar_decompose(g).p:
                an = geometry.jacobian_dp(p_)
                rows.append({"k": k, "analytic": an,
                             "fd_dp_rel": abs(math.expm1(geometry.fd_jacobian_dp(p_) - an)),
                             "fd_ds_rel": abs(math.expm1(geometry.fd_jacobian_ds(p_) - an))})
        worst = max(max(r["fd_dp_rel"], r["fd_ds_rel"]) for r in rows)
        a.below("jacobian_rel", worst, 1e-4)
        return {"check": check, "k": ks, "samples": n,
                "worst_rel": quantity(worst, "analytic"), "rows": rows}
    if check == "push":
        ks = _ints(p.get("k", 2))
        n = int(float(p.get("samples", 100_000)))
        reports = []
        for k in ks:
            rep = geometry.push_measure_check(k, n, models.RngStream(cfg.seed, 4, (k,)))
            a.check(f"push[k={k}]", rep.p_value, rep.passed, rep.threshold)
            if rep.control is not None:
                a.check(f"control_fails[k={k}]", rep.control.p_value, not rep.control.passed,
                        rep.threshold)
            reports.append(rep.to_dict())
        return {"check": check, "reports": reports, "provenance": "monte-carlo"}
    raise ValueError(f"unknown geometry check {check!r}; choose volume, jacobian or push")


def _table(p: dict) -> cumulants.MomentTable:
    if p.get("csv"):
        return cumulants.MomentTable.from_csv(p["csv"])
    name = p.get("table", "circular")
    order = int(p.get("order", 6))
    var = float(p.get("variance", 1.0))
    if name == "circular":
        return cumulants.circular_table(order, var)
    if name == "haar":
        return cumulants.haar_table(order)
    if name == "semicircular":
        return cumulants.semicircular_table(order, var, as_star=True)
    corpus = cumulants.rdiag_corpus(order)
    if name in corpus:
        return corpus[name][0]
    raise ValueError(f"unknown table {name!r}")


def _table_dict(t) -> dict:
    return {w.to_string(t.names): v for w, v in t.values.items()}


def _cumulants(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    t = _table(p)
    op = p.get("op", "is_r_diagonal")
    out: dict = {"op": op, "table": p.get("csv") or p.get("table", "circular"), "order": t.order}
    result_table = None
    if op == "moments":
        result_table = t
    elif op == "cumulants":
        result_table = cumulants.moments_to_cumulants(t)
    elif op == "haar_multiply":
        result_table = cumulants.haar_multiply(t)
        out["invariance_defect"] = quantity(result_table.max_abs_diff(t), "analytic")
    elif op == "is_r_diagonal":
        rep = cumulants.is_r_diagonal(t, cross_check=True)
        out.update({"is_r_diagonal": rep.is_r_diagonal, "worst_word": rep.worst_word,
                    "worst_value": rep.worst_value,
                    "invariance_defect": rep.invariance_defect,
                    "invariance_agrees": rep.invariance_agrees, "provenance": "analytic"})
        a.check("invariance_agrees", rep.invariance_agrees, bool(rep.invariance_agrees))
    elif op == "gamma_split":
        out["split"] = cumulants.gamma_split(t).to_dict()
        out["provenance"] = "analytic"
    else:
        raise ValueError(f"unknown cumulants op {op!r}")
    if result_table is not None:
        out["values"] = _table_dict(result_table)
        out["provenance"] = "analytic"
        if p.get("export"):
            result_table.to_csv(p["export"])
    return out


def _models(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    mu = _law(p)
    ks = _ints(p.get("k", 64))
    n = int(float(p.get("samples", 1000)))
    order = int(p.get("order", 4))
    recs = []
    for k in ks:
        rep = models.freeness_defect_model(mu, k, n, order, models.RngStream(cfg.seed, 6, (k,)),
                                           workers=cfg.workers)
        if "defect" in a.tol:
            a.below(f"defect[k={k}]", rep.defect, a.tol["defect"])
        recs.append({"k": k, "defect": quantity(rep.defect, "monte-carlo",
                                                float(rep.stderrs.max())),
                     "worst_word": rep.worst_word,
                     "words": {w: {"mean": m, "stderr": e, "free": f} for w, m, e, f in
                               zip(rep.words, rep.means, rep.stderrs, rep.predictions)}})
    return {"law": p.get("law", "quarter_circle"), "samples": n, "order": order, "records": recs}


_SPEC_KEYS = {"R", "m", "epsilon", "self_adjoint", "targets"}
_TARGET_KEYS = {"table", "order", "variance", "moments", "csv"}


def load_gamma_spec(source) -> microstates.GammaSpec:
    """GammaSpec from a JSON object or file path.

    ``targets`` is ``{"table": circular|haar|semicircular, "order", "variance"}``,
    ``{"moments": [1, m1, m2, ...]}`` for one self-adjoint variable, or
    ``{"csv": path}``.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            source = json.load(fh)
    unknown = set(source) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown spec keys: {', '.join(sorted(unknown))}")
    tg = source.get("targets", {"table": "circular"})
    unknown = set(tg) - _TARGET_KEYS
    if unknown:
        raise ValueError(f"unknown target keys: {', '.join(sorted(unknown))}")
    m = int(source.get("m", 2))
    sa = bool(source.get("self_adjoint", False))
    order = int(tg.get("order", m))
    if "csv" in tg:
        table = cumulants.MomentTable.from_csv(tg["csv"])
    elif "moments" in tg:
        table = cumulants.self_adjoint_table([float(x) for x in tg["moments"]])
    else:
        name = tg.get("table", "circular")
        var = float(tg.get("variance", 1.0))
        if name == "circular":
            table = cumulants.circular_table(order, var)
        elif name == "haar":
            table = cumulants.haar_table(order)
        elif name == "semicircular":
            table = cumulants.semicircular_table(order, var, as_star=not sa)
        else:
            raise ValueError(f"unknown target table {name!r}")
    return microstates.GammaSpec(float(source.get("R", 4.0)), m,
                                 float(source.get("epsilon", 0.5)), table, sa)


def _microstates(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    if "spec" not in p:
        raise ValueError("microstates needs --spec")
    spec = load_gamma_spec(p["spec"])
    ks = _ints(p.get("k", "2,3,4"))
    n = int(float(p.get("samples", 100_000)))
    method = p.get("method", "importance")
    recs = []
    for k in ks:
        rng = models.RngStream(cfg.seed, 8, (k,))
        if method == "importance":
            est = microstates.log_volume_estimate(spec, k, n, rng, workers=cfg.workers)
        elif method == "splitting":
            est = microstates.log_volume_splitting(spec, k, n, rng,
                                                   replicates=int(p.get("replicates", 4)),
                                                   workers=cfg.workers)
        else:
            raise ValueError(f"unknown method {method!r}")
        rec = est.to_dict()
        rec["provenance"] = "monte-carlo"
        recs.append(rec)
    return {"method": method, "records": recs}


def _amplify(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    rep = microstates.amplification_constant(int(p.get("d", 2)), float(p.get("v", 1.0)))
    a.check("magnitude", abs(rep["constant"]), rep["pass"], rep["magnitude"])
    return rep


def _suite(p: dict, cfg: ExperimentConfig, a: _Assertions) -> dict:
    seed = acceptance.DEFAULT_SEED if cfg.seed is None else cfg.seed
    results = acceptance.run_suite(p.get("name", "all"), seed, bool(p.get("quick", False)),
                                   cfg.workers)
    for r in results:
        a.check(r.id, r.title, r.passed)
    a.timings = {r.id: round(r.seconds, 3) for r in results}
    return {"suite": p.get("name", "all"), "quick": bool(p.get("quick", False)), "seed": seed,
            "criteria": [r.body() for r in results]}


COMMANDS = {
    "entropy": _entropy,
    "geometry": _geometry,
    "cumulants": _cumulants,
    "models": _models,
    "microstates": _microstates,
    "amplify": _amplify,
    "suite": _suite,
}


def _manifest(cfg: ExperimentConfig, seconds: float, extra: dict | None = None) -> dict:
    m = {"config_sha256": cfg.digest(), "seed": cfg.seed, "workers": cfg.workers,
         "versions": {"rdiag": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                      "python": platform.python_version()},
         "seconds": round(seconds, 3)}
    if extra:
        m.update(extra)
    return m


def run(cfg: ExperimentConfig, stream=None) -> tuple[int, dict]:
    """Execute a config; returns ``(exit_status, document)`` and writes the document.

    The document goes to ``cfg.output`` (plus ``<output>.manifest.json``) when
    set, otherwise to ``stream`` (stdout by default).
    """
    stream = sys.stdout if stream is None else stream
    a = _Assertions(cfg.tolerances)
    t0 = time.perf_counter()
    result = COMMANDS[cfg.command](dict(cfg.params), cfg, a)
    cfg_body = cfg.to_dict()
    cfg_body.pop("output")
    cfg_body.pop("workers")
    body = {"command": cfg.command, "config": cfg_body, "result": result,
            "assertions": a.items, "pass": a.passed}
    extra = {"timings": a.timings} if a.timings is not None else None
    doc = {"schema": SCHEMA, "body": body,
           "manifest": _manifest(cfg, time.perf_counter() - t0, extra)}
    text = dumps(doc) + "\n"
    if cfg.output:
        out = Path(cfg.output)
        out.write_text(text, encoding="utf-8")
        Path(str(out) + ".manifest.json").write_text(dumps(doc["manifest"]) + "\n",
                                                     encoding="utf-8")
    else:
        stream.write(text)
    if cfg.command == "suite":
        for r in body["assertions"]:
            print(f"{r['name']} {'PASS' if r['pass'] else 'FAIL'} {r['value']}", file=sys.stderr)
    return (0 if a.passed else 1), doc


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _kv(text: str) -> tuple[str, float]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    k, v = text.split("=", 1)
    try:
        return k.strip(), float(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {k!r} is not a number") from None


def _common(p: argparse.ArgumentParser, seed_help: str = "random seed") -> None:
    p.add_argument("--seed", type=int, help=seed_help)
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--output", help="write the JSON document here instead of stdout")
    p.add_argument("--tol", type=_kv, action="append", default=[], metavar="NAME=VALUE",
                   help="override an assertion threshold")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdiag", description="Free-entropy numerical laboratory.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="one-variable entropy functionals")
    p.add_argument("--law", default="quarter_circle", choices=sorted(laws.LAWS))
    p.add_argument("--param", type=_kv, action="append", default=[], metavar="NAME=VALUE",
                   help="law parameter, e.g. ratio=0.5")
    p.add_argument("--op", default="chi_rdiag", choices=_ENTROPY_OPS)
    p.add_argument("--f", help="function spec for changevar, e.g. 'power(2)'")
    p.add_argument("--grid", type=int, help="grid nodes")
    p.add_argument("--expect", type=float, help="assert the value equals this")
    _common(p)

    p = sub.add_parser("geometry", help="polar geometry checks")
    p.add_argument("--check", default="volume", choices=("volume", "jacobian", "push"))
    p.add_argument("--k", default=None, help="k or comma-separated list")
    p.add_argument("--samples", type=float)
    _common(p)

    p = sub.add_parser("cumulants", help="moment tables and R-diagonality")
    p.add_argument("--table", default="circular")
    p.add_argument("--csv", help="read the moment table from CSV")
    p.add_argument("--variance", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--op", default="is_r_diagonal",
                   choices=("moments", "cumulants", "haar_multiply", "is_r_diagonal",
                            "gamma_split"))
    p.add_argument("--export", help="write the resulting table as CSV")
    _common(p)

    p = sub.add_parser("models", help="asymptotic freeness of u and b")
    p.add_argument("--law", default="quarter_circle", choices=sorted(laws.LAWS))
    p.add_argument("--param", type=_kv, action="append", default=[], metavar="NAME=VALUE")
    p.add_argument("--k", default="64")
    p.add_argument("--samples", type=float, default=1000)
    p.add_argument("--order", type=int, default=4)
    _common(p)

    p = sub.add_parser("microstates", help="microstate log-volumes")
    p.add_argument("--spec", required=True, help="GammaSpec JSON file")
    p.add_argument("--k", default="2,3,4")
    p.add_argument("--samples", type=float, default=1e5)
    p.add_argument("--method", default="importance", choices=("importance", "splitting"))
    p.add_argument("--replicates", type=int)
    _common(p)

    p = sub.add_parser("amplify", help="block amplification constant")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--v", type=float, default=1.0)
    _common(p)

    p = sub.add_parser("suite", help="acceptance criteria")
    p.add_argument("name", choices=acceptance.SUITES)
    p.add_argument("--quick", action="store_true", help="reduced sizes, same assertions")
    _common(p, "seed (default: pinned)")

    p = sub.add_parser("run", help="run an ExperimentConfig JSON file")
    p.add_argument("config")
    p.add_argument("--workers", type=int, help="override the worker count")
    p.add_argument("--output", help="override the output path")
    return ap


def _config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    if ns.command == "run":
        cfg = ExperimentConfig.load(ns.config)
        if ns.workers is not None:
            cfg.workers = ns.workers
        if ns.output is not None:
            cfg.output = ns.output
        return cfg
    skip = {"command", "seed", "workers", "output", "tol", "param", "expect"}
    params = {k: v for k, v in vars(ns).items() if k not in skip and v is not None}
    if getattr(ns, "param", None):
        params["law_params"] = dict(ns.param)
    tols = dict(ns.tol)
    if getattr(ns, "expect", None) is not None:
        tols["expect"] = ns.expect
    return ExperimentConfig(ns.command, params, ns.seed, ns.workers, ns.output, tols)


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = _config_from_args(ns)
        status, _ = run(cfg)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"rdiag: error: {exc}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
