"""Command line runner: ``validate``, ``run`` and ``sweep``.

Exit codes: 0 success, 2 validation failure, 3 runtime (step) failure,
4 analysis failure (an envelope was required to dominate and none does).
"""
from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import math
import sys
import time
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, SimConfig, config_from_dict, load_config, load_yaml
from .decay import (NOISE_FLOOR, EnvelopeFitError, EnvelopeShape, calibrate_envelope, fit_rates,
                    predicted_decay_kind, spectral_abscissa, tail_envelope)
from .dynamics import simulate
from .exceptions import ConfigurationError, DataError, NumericalError
from .functionals import (TRACE_COLUMNS, compatibility_residual, dissipation_residuals,
                          evaluate_trace)
from .model import GrowthProfile, check_hypotheses, validate_params
from .spatial import assemble, coercivity_min_eig

log = logging.getLogger("diskbeam")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_ANALYSIS = 0, 2, 3, 4

# hypotheses whose failure makes a run meaningless; the others only void decay claims
HARD_HYPOTHESES = ("H.I",)


# --------------------------------------------------------------------------
# validation

def sharp_spin_threshold(cfg: SimConfig) -> float | None:
    """Spin rate at which the discrete stiffness form stops being coercive.

    Always above the admissible bound; reported as a diagnostic only.
    """
    p = cfg.params
    if not (p.EI > 0 and p.rho > 0):
        return None
    ops = assemble(replace(p, varpi=0.0, omega0=0.0), cfg.grid, check=False)
    return math.sqrt(coercivity_min_eig(ops) / p.rho)


def validation_report(cfg: SimConfig) -> dict:
    params = validate_params(cfg.params)
    sharp = sharp_spin_threshold(cfg)
    hyp = check_hypotheses(cfg.law)
    prof = cfg.law.profile
    hard = params.admissible and all(hyp[h].passed for h in HARD_HYPOTHESES)
    return {
        "admissible": params.admissible,
        "varpi_bound": params.bound,
        "varpi_sharp_threshold": sharp,
        "params": [{"name": c.name, "passed": c.passed, "message": c.message}
                   for c in params.checks],
        "hypotheses": [{"name": c.name, "passed": c.passed, "detail": c.detail,
                        "counterexample": c.counterexample} for c in hyp.checks],
        "hypotheses_passed": hyp.passed,
        "profile": {"kind": prof.kind, "c": prof.c, "p": prof.p, "r": prof.r,
                    "eps0_default": 0.5 * prof.r ** 2},
        "hard_checks_passed": hard,
        "_text": str(params) + "\n" + str(hyp)
        + ("" if sharp is None else f"\ndiscrete coercivity is lost at |varpi| = {sharp:.6g}"),
    }


# --------------------------------------------------------------------------
# single run

def _fmt(x) -> str:
    return repr(float(x))


def write_csv(path: Path, columns: dict):
    names = list(columns)
    rows = zip(*(columns[n] for n in names))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _rate_dict(fit):
    return {"kind": fit.kind, "rate": fit.rate, "prefactor": fit.prefactor,
            "window": list(fit.window), "quality": fit.quality}


ENVELOPE_PROFILES = ("auto", "linear", "exp_type")


def _envelope_profile(cfg: SimConfig, name: str) -> GrowthProfile:
    """``auto`` uses the law's own profile; the others force a family."""
    if name == "auto":
        return cfg.law.profile
    if name in ENVELOPE_PROFILES:
        return GrowthProfile(name)
    raise ConfigError(f"envelope profile must be one of {ENVELOPE_PROFILES}",
                      "analysis.envelope.profile")


def analyse(cfg: SimConfig, trace, ops):
    """Functionals, residuals, fits, envelope and spectral results for one trace.

    Returns (results, trace columns, envelope columns or None, analysis_failed).
    """
    fs = evaluate_trace(trace, ops, cfg.law)
    out: dict = {"n_samples": len(fs)}
    out["initial"] = fs.sample(0).__dict__
    out["final"] = fs.sample(-1).__dict__
    out["compatibility"] = compatibility_residual(ops, cfg.law, trace.Y[0], trace.V[0])
    E0_0 = fs.E[0]
    out["conservation_drift"] = abs(fs.E[-1] - E0_0) / E0_0 if E0_0 > 0 else None
    if len(fs) >= 2:
        res = dissipation_residuals(fs)
        out["residual_E_max"] = res.max_E
        out["residual_V_max"] = res.max_V
        dV = fs.dV if fs.dV is not None else np.diff(fs.V)
        worst = float(np.max(dV)) if dV.size else 0.0
        out["V_max_increase"] = worst / fs.V[0] if fs.V[0] > 0 else worst
        out["V_monotone"] = bool(worst <= 1e-8 * fs.V[0])
    out["decay_kind"] = predicted_decay_kind(cfg.law.profile)

    fits: dict = {}
    analysis_failed = False
    for kind in cfg.analysis.rates:
        try:
            # E0(0) carries the acceleration of possibly incompatible data
            fits[f"E0_{kind}"] = _rate_dict(fit_rates(fs.t, fs.E0, kind, floor=NOISE_FLOOR,
                                                      floor_ref="window"))
        except DataError as exc:
            fits[f"E0_{kind}"] = {"error": str(exc)}
    if cfg.mode == "coupled" and cfg.analysis.rates:
        for name, series in (("state_norm", fs.state_norm()),
                             ("omega_deviation", tail_envelope(fs.dev))):
            try:
                fits[f"{name}_exponential"] = _rate_dict(
                    fit_rates(fs.t, series, "exponential", floor=NOISE_FLOOR))
            except DataError as exc:
                fits[f"{name}_exponential"] = {"error": str(exc)}
    out["fits"] = fits

    env_cols = None
    req = cfg.analysis.envelope
    if req is not None:
        prof = _envelope_profile(cfg, req.profile)
        try:
            ef = calibrate_envelope(fs.t, fs.E0, prof, eps0=req.eps0, search_eps0=req.search_eps0)
            out["envelope"] = {"feasible": True, "profile": prof.kind, "eps0": ef.eps0,
                               "k1": ef.k1, "k2": ef.k2, "k3": ef.k3,
                               "dominance_margin": ef.dominance_margin}
            shape = EnvelopeShape(prof, ef.eps0)
            env = ef.k3 * shape(ef.k1 * (fs.t - fs.t[0]) + ef.k2) * ef.E0_initial
            env_cols = {"t": fs.t, "E0": fs.E0, "envelope": env}
        except EnvelopeFitError as exc:
            out["envelope"] = {"feasible": False, "profile": prof.kind, "message": str(exc),
                               "diagnostics": exc.diagnostics}
            analysis_failed = req.require_dominance
        except (DataError, NumericalError) as exc:
            out["envelope"] = {"feasible": False, "profile": prof.kind, "message": str(exc)}
            analysis_failed = req.require_dominance

    if cfg.analysis.spectral:
        if cfg.law.damping.kind != "linear":
            out["spectral"] = {"applicable": False,
                               "message": "spectral oracle needs linear damping"}
        else:
            try:
                sp = spectral_abscissa(ops, linear_gain=cfg.law.damping.c)
                out["spectral"] = {"applicable": True, "max_real_part": sp.max_real_part,
                                   "max_real_part_all": sp.max_real_part_all,
                                   "cutoff": sp.cutoff}
            except NumericalError as exc:
                out["spectral"] = {"applicable": True, "error": str(exc)}
    return out, fs.columns(), env_cols, analysis_failed


def run_config(cfg: SimConfig, out_dir: Path | None) -> tuple[int, dict]:
    """Validate, simulate and analyse; write outputs when ``out_dir`` is given."""
    started = time.perf_counter()
    report = validation_report(cfg)
    summary = {"config": cfg.to_dict(), "config_hash": cfg.content_hash(),
               "validation": report}
    if not report["hard_checks_passed"]:
        summary["status"] = "rejected"
        code = EXIT_VALIDATION
    else:
        trace = simulate(cfg)
        ops = assemble(cfg.params, cfg.grid)
        summary["completed"] = trace.complete
        summary["failure"] = trace.failure
        results, cols, env, failed = analyse(cfg, trace, ops)
        summary["results"] = results
        code = EXIT_OK
        if not trace.complete:
            code = EXIT_RUNTIME
        elif failed:
            code = EXIT_ANALYSIS
        summary["status"] = {EXIT_OK: "ok", EXIT_RUNTIME: "step_failure",
                             EXIT_ANALYSIS: "analysis_failure"}[code]
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            write_csv(out_dir / "trace.csv", {c: cols[c] for c in TRACE_COLUMNS})
            if env is not None:
                write_csv(out_dir / "envelope.csv", env)
    summary["timing"] = {"wall_clock_seconds": time.perf_counter() - started}
    summary = _clean(summary)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    return code, summary


# --------------------------------------------------------------------------
# sweeps

SWEEP_KEYS = {"schema_version", "base", "axes"}


def load_sweep(path) -> tuple[dict, list[tuple[str, list]]]:
    """Sweep file: ``base`` (mapping or path to a run config) and one or two ``axes``.

    Axis names are dotted key paths into the run config, e.g. ``params.varpi``.
    """
    path = Path(path)
    data = load_yaml(path)
    if not isinstance(data, dict):
        raise ConfigError("sweep file must be a mapping")
    for key in data:
        if key not in SWEEP_KEYS:
            raise ConfigError("unknown key", str(key))
    base = data.get("base")
    if isinstance(base, str):
        base = load_yaml(path.parent / base)
    if not isinstance(base, dict):
        raise ConfigError("base must be a mapping or a path to a config file", "base")
    axes = data.get("axes")
    if not isinstance(axes, dict) or not 1 <= len(axes) <= 2:
        raise ConfigError("axes must map one or two dotted keys to value lists", "axes")
    out = []
    for name, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError("axis values must be a non-empty list", f"axes.{name}")
        out.append((str(name), values))
    return base, out


def _set_path(d: dict, dotted: str, value):
    keys = dotted.split(".")
    node = d
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError("axis path crosses a non-mapping", dotted)
    node[keys[-1]] = value


SWEEP_COLUMNS = ("status", "admissible", "hypotheses_passed", "decay_kind", "E0_initial",
                 "E0_final", "E_final", "conservation_drift", "residual_E_max",
                 "residual_V_max", "V_monotone", "omega_final", "spectral_abscissa",
                 "envelope_feasible", "envelope_k1", "rate_exponential", "rate_power",
                 "rate_logarithmic", "message")


def _row_from_summary(summary: dict) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS)
    row["status"] = summary.get("status")
    val = summary.get("validation", {})
    row["admissible"] = val.get("admissible")
    row["hypotheses_passed"] = val.get("hypotheses_passed")
    res = summary.get("results")
    if summary.get("status") == "rejected":
        fails = [c["name"] for c in val.get("params", []) if not c["passed"]]
        fails += [c["name"] for c in val.get("hypotheses", [])
                  if not c["passed"] and c["name"] in HARD_HYPOTHESES]
        row["message"] = "rejected: " + " ".join(fails)
    if res:
        row["decay_kind"] = res.get("decay_kind")
        row["E0_initial"] = res["initial"]["E0"]
        row["E0_final"] = res["final"]["E0"]
        row["E_final"] = res["final"]["E"]
        row["omega_final"] = res["final"]["omega"]
        for k in ("conservation_drift", "residual_E_max", "residual_V_max", "V_monotone"):
            row[k] = res.get(k)
        sp = res.get("spectral") or {}
        row["spectral_abscissa"] = sp.get("max_real_part")
        env = res.get("envelope") or {}
        row["envelope_feasible"] = env.get("feasible")
        row["envelope_k1"] = env.get("k1")
        for kind in ("exponential", "power", "logarithmic"):
            row[f"rate_{kind}"] = (res["fits"].get(f"E0_{kind}") or {}).get("rate")
        if summary.get("failure"):
            row["message"] = summary["failure"].get("message")
    return row


def _run_cell(args) -> dict:
    index, cell, cell_dir = args
    try:
        cfg = config_from_dict(cell)
    except ConfigurationError as exc:
        return {"status": "invalid", "message": str(exc)}
    try:
        _, summary = run_config(cfg, Path(cell_dir) if cell_dir else None)
    except Exception as exc:          # a failing cell must not stop the sweep
        return {"status": "error", "message": f"{type(exc).__name__}: {exc}"}
    return _row_from_summary(summary)


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(float(v)) if isinstance(v, float) else str(v)
    return str(v).replace(",", ";").replace("\n", " ")


def run_sweep(path, out_dir: Path, workers: int = 1) -> list[dict]:
    base, axes = load_sweep(path)
    names = [a[0] for a in axes]
    cells = []
    for i, combo in enumerate(itertools.product(*(a[1] for a in axes))):
        cell = copy.deepcopy(base)
        for name, value in zip(names, combo):
            _set_path(cell, name, value)
        cells.append((i, cell, str(out_dir / f"cell_{i:04d}"), combo))
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [c[:3] for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))   # map preserves grid order
    else:
        rows = [_run_cell(j) for j in jobs]
    header = ["cell"] + names + list(SWEEP_COLUMNS)
    merged = []
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for (i, _, _, combo), row in zip(cells, rows):
            full = {"cell": i, **dict(zip(names, combo)), **{k: row.get(k) for k in SWEEP_COLUMNS}}
            merged.append(full)
            fh.write(",".join(_cell_text(full[h]) for h in header) + "\n")
    return merged


# --------------------------------------------------------------------------
# entry point

def _parser():
    ap = argparse.ArgumentParser(prog="diskbeam", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True)
    v = sub.add_parser("validate", help="check parameters and feedback hypotheses")
    v.add_argument("config")
    r = sub.add_parser("run", help="simulate one scenario and write trace/summary files")
    r.add_argument("config")
    r.add_argument("--out", required=True)
    s = sub.add_parser("sweep", help="run a grid of scenarios and write sweep.csv")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "sweep":
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            rows = run_sweep(args.config, Path(args.out), args.workers)
            bad = sum(r["status"] not in ("ok",) for r in rows)
            print(f"{len(rows)} cells written to {Path(args.out) / 'sweep.csv'} ({bad} not ok)")
            return EXIT_OK
        cfg = load_config(args.config)
        if args.verb == "validate":
            rep = validation_report(cfg)
            print(rep["_text"])
            prof = rep["profile"]
            print(f"profile: {prof['kind']} c={prof['c']:g} p={prof['p']:g} r={prof['r']:g} "
                  f"eps0 default={prof['eps0_default']:g}")
            print("valid" if rep["hard_checks_passed"] else "INVALID")
            return EXIT_OK if rep["hard_checks_passed"] else EXIT_VALIDATION
        code, summary = run_config(cfg, Path(args.out))
        if code == EXIT_VALIDATION:
            print(validation_report(cfg)["_text"], file=sys.stderr)
            print("configuration rejected; nothing simulated", file=sys.stderr)
        else:
            fin = summary["results"]["final"]
            print(f"{summary['status']}: t={fin['t']:g} E={fin['E']:.6g} E0={fin['E0']:.6g} "
                  f"omega={fin['omega']:.10g} -> {args.out}")
        return code
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
