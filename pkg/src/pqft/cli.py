"""Scenario runner: configure, execute a verification suite, emit reports.

Usage:
    pqft run --scenario koszul --nt 8 --nx 8 --mode rational --seed 1 --out runs/

Each scenario executes one verification suite, writes a JSON report plus any
CSV tables into the output directory, and the process exits 0 only when every
check in the scenario passed.  Exit codes: 0 all checks pass, 1 a check
failed, 2 invalid configuration or unusable output directory, 3 internal
error.  ``--deterministic`` freezes file names and strips timestamps so runs
with equal seeds are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import importlib.resources
import json
import os
import random
import sys
import traceback
from dataclasses import dataclass, field
from fractions import Fraction

import jsonschema
import numpy as np

from . import cones as cones_mod
from . import koszul as koszul_mod
from . import probe as probe_mod
from . import quantize as quantize_mod
from .functionals import PolyFunctional, random_multivector, supnorm, diff_supnorm
from .lattice import Retraction, build_lattice, compute_propagators, make_switching
from .quantize import (check_associativity, check_first_order_commutator,
                       pointwise_product, poisson_bracket, star_product)
from .lattice import to_float

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_INTERNAL = 3

DEFAULTS = {
    "scenario": "all",
    "nt": 8,
    "nx": 8,
    "dt": 0.5,
    "dx": 1.0,
    "mass": 1.0,
    "theta_lo": 2,
    "theta_hi": 5,
    "mode": "float",
    "seed": 0,
    "samples": 100_000,
    "fields": 6,
    "probes": 5,
    "cauchy": 30,
    "sweep_limit": 4,
    "deterministic": False,
}


def load_schema() -> dict:
    text = importlib.resources.files("pqft").joinpath("schema/scenario.schema.json").read_text()
    return json.loads(text)


def validate_config(config: dict) -> dict:
    jsonschema.validate(config, load_schema())
    merged = dict(DEFAULTS)
    merged.update(config)
    if merged.get("out") is None:
        merged["out"] = os.environ.get("PQFT_OUT", "pqft-out")
    return merged


@dataclass
class ScenarioResult:
    name: str
    passed: bool
    report: dict
    tables: dict = field(default_factory=dict)  # name -> list of row tuples


def _lattice_setup(cfg: dict, mode: str | None = None):
    lat = build_lattice(cfg["nt"], cfg["nx"], cfg["dt"], cfg["dx"], cfg["mass"],
                        mode=mode or cfg["mode"])
    props = compute_propagators(lat)
    sw = make_switching(lat, cfg["theta_lo"], cfg["theta_hi"])
    return lat, props, Retraction(props, sw)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def scenario_koszul(cfg: dict) -> ScenarioResult:
    lat, props, ret = _lattice_setup(cfg)
    rng = random.Random(cfg["seed"])
    tol = 1e-10
    reports = []
    worst = 0.0
    all_exact = lat.mode == "rational"
    for k in (0, 1, 2):
        for _ in range(max(1, cfg["fields"] // 3)):
            X = random_multivector(rng, lat.n_sites, k, 2, entries_per_degree=2,
                                   mode=lat.mode)
            probes = koszul_mod.random_probes(rng, lat, k, cfg["probes"])
            rep = koszul_mod.verify_homotopy_identity(X, ret, probes, tol=tol)
            reports.append(rep.to_json())
            worst = max(worst, rep.residual_sup)
            all_exact = all_exact and rep.exact_zero
    passed = worst <= tol and (lat.mode != "rational" or all_exact)
    report = {
        "scenario": "koszul",
        "params": {key: cfg[key] for key in ("nt", "nx", "dt", "dx", "mass",
                                             "mode", "seed", "fields", "probes")},
        "residual_sup": worst,
        "exact_zero": all_exact,
        "checks": reports,
        "pass": passed,
    }
    return ScenarioResult("koszul", passed, report)


def scenario_timeslice(cfg: dict) -> ScenarioResult:
    lat, props, ret = _lattice_setup(cfg)
    rng = random.Random(cfg["seed"])
    region = (cfg["theta_lo"], cfg["theta_hi"])
    outside_rows = [t for t in range(lat.nt) if not region[0] <= t <= region[1]]
    pool = [lat.site(t, x) for t in outside_rows for x in range(lat.nx)]
    support_tol = 0.0 if lat.mode == "rational" else 1e-12
    checks = []
    passed = True
    for _ in range(max(1, cfg["fields"])):
        F = random_multivector(rng, lat.n_sites, 0, 2, entries_per_degree=2,
                               mode=lat.mode, sites=pool)
        rep = koszul_mod.time_slice_check(F, region, ret, rng, n_cauchy=cfg["cauchy"],
                                          support_tol=support_tol)
        checks.append(rep.to_json())
        passed = passed and rep.passed
    report = {
        "scenario": "timeslice",
        "params": {key: cfg[key] for key in ("nt", "nx", "mode", "seed",
                                             "theta_lo", "theta_hi", "fields", "cauchy")},
        "checks": checks,
        "pass": passed,
    }
    return ScenarioResult("timeslice", passed, report)


def scenario_star(cfg: dict) -> ScenarioResult:
    lat, props, _ = _lattice_setup(cfg, mode="float")
    rng = random.Random(cfg["seed"])
    D = props.twopoint
    comm = to_float(props.commutator)
    worst = {"commutator": 0.0, "associativity": 0.0, "pointwise": 0.0, "jacobi": 0.0}
    for _ in range(max(1, cfg["fields"])):
        F = random_multivector(rng, lat.n_sites, 0, 2, entries_per_degree=3)
        G = random_multivector(rng, lat.n_sites, 0, 2, entries_per_degree=3)
        H = random_multivector(rng, lat.n_sites, 0, 2, entries_per_degree=3)
        worst["commutator"] = max(worst["commutator"],
                                  check_first_order_commutator(F, G, props))
        worst["associativity"] = max(worst["associativity"],
                                     check_associativity(F, G, H, D))
        worst["pointwise"] = max(worst["pointwise"], diff_supnorm(
            star_product(F, G, D).coefficient(0), pointwise_product(F, G)))
        jac = (poisson_bracket(F, poisson_bracket(G, H, comm), comm)
               + poisson_bracket(G, poisson_bracket(H, F, comm), comm)
               + poisson_bracket(H, poisson_bracket(F, G, comm), comm))
        worst["jacobi"] = max(worst["jacobi"], supnorm(jac))
    passed = (worst["commutator"] <= 1e-10 and worst["associativity"] <= 1e-9
              and worst["pointwise"] == 0.0 and worst["jacobi"] <= 1e-10)
    report = {
        "scenario": "star",
        "params": {key: cfg[key] for key in ("nt", "nx", "seed", "fields")},
        "residuals": worst,
        "pass": passed,
    }
    return ScenarioResult("star", passed, report)


def scenario_cones(cfg: dict) -> ScenarioResult:
    V = cones_mod.DirectionCone.from_degrees(40, 50)
    limit = cfg["sweep_limit"]
    lemma_reports = []
    violations = 0
    for n in range(limit + 1):
        for m in range(limit + 1 - n):
            for k in range(limit + 1 - n - m):
                if n + m + k == 0:
                    continue
                rep = cones_mod.verify_cone_lemma(V, n, m, k, cfg["samples"],
                                                  seed=cfg["seed"])
                violations += rep.violations
                lemma_reports.append(rep.to_json())
    conormal_reports = []
    for n in range(2, 5):
        rep = cones_mod.conormal_check(V, n, cfg["samples"], seed=cfg["seed"])
        violations += rep.violations
        conormal_reports.append(rep.to_json())
    passed = violations == 0
    report = {
        "scenario": "cones",
        "params": {"samples": cfg["samples"], "seed": cfg["seed"],
                   "sweep_limit": limit, "cone_deg": [40, 50]},
        "violations": violations,
        "lemma": lemma_reports,
        "conormal": conormal_reports,
        "pass": passed,
    }
    return ScenarioResult("cones", passed, report)


def scenario_probe(cfg: dict) -> ScenarioResult:
    gaussian = probe_mod.gaussian_sample(-1, 1, 256, width=0.12)
    spike = probe_mod.spike_sample(-1, 1, 256)
    ridge = probe_mod.diagonal_ridge_sample(-1, 1, 256)
    n_bins = 12
    rep_g = probe_mod.wavefront_probe(gaussian, (0.0, 0.0), n_bins=n_bins, shells=4)
    rep_s = probe_mod.wavefront_probe(spike, (0.0, 0.0), n_bins=n_bins, shells=4)
    rep_r = probe_mod.wavefront_probe(ridge, (0.0, 0.0), n_bins=n_bins, shells=4)
    conormal_bins = {int(135 // (360 / n_bins)), int(315 // (360 / n_bins))}
    allowed = set()
    for b in conormal_bins:
        allowed.update({(b - 1) % n_bins, b, (b + 1) % n_bins})
    ridge_ok = (set(rep_r.flagged_bins) <= allowed
                and all(b in rep_r.flagged_bins for b in conormal_bins))
    passed = (not rep_g.flagged_bins and len(rep_s.flagged_bins) == n_bins and ridge_ok)
    report = {
        "scenario": "probe",
        "params": {"n_bins": n_bins, "shells": 4, "grid": 256},
        "gaussian_flags": rep_g.flagged_bins,
        "spike_flags": rep_s.flagged_bins,
        "ridge_flags": rep_r.flagged_bins,
        "ridge_allowed_bins": sorted(allowed),
        "pass": passed,
    }
    tables = {"probe-gaussian": rep_g.csv_rows(), "probe-spike": rep_s.csv_rows(),
              "probe-ridge": rep_r.csv_rows()}
    return ScenarioResult("probe", passed, report, tables)


def scenario_counterexample(cfg: dict) -> ScenarioResult:
    mags = [1e-1, 1e-2, 1e-3]
    chi = probe_mod.standard_bump(n=8192)
    ident = probe_mod.identity_kernel()
    gauss = probe_mod.gaussian_kernel()
    matched = probe_mod.counterexample_scan(ident, 1, 1, probe_mod.matched_path(mags),
                                            chi1=chi)
    mismatched = probe_mod.counterexample_scan(ident, 1, 1, probe_mod.mismatched_path(mags),
                                               chi1=chi)
    g_matched = probe_mod.counterexample_scan(gauss, 1, 1, probe_mod.matched_path(mags),
                                              chi1=chi)
    g_mismatched = probe_mod.counterexample_scan(gauss, 1, 1,
                                                 probe_mod.mismatched_path(mags), chi1=chi)
    bound = 10.0 * max(mismatched.rows[0][2], 1e-6)
    passed = (matched.growth_slope is not None
              and abs(matched.growth_slope + 2.0) <= 0.1
              and mismatched.max_abs <= bound
              and g_matched.max_abs <= bound
              and g_mismatched.max_abs <= bound)
    report = {
        "scenario": "counterexample",
        "params": {"K": 1, "L": 1, "magnitudes": mags, "grid": 8192},
        "matched_slope": matched.growth_slope,
        "matched_values": [r[2] for r in matched.rows],
        "mismatched_max": mismatched.max_abs,
        "gaussian_matched_max": g_matched.max_abs,
        "gaussian_mismatched_max": g_mismatched.max_abs,
        "pass": passed,
    }
    tables = {
        "counterexample-matched": matched.csv_rows(),
        "counterexample-mismatched": mismatched.csv_rows(),
        "counterexample-gaussian-matched": g_matched.csv_rows(),
        "counterexample-gaussian-mismatched": g_mismatched.csv_rows(),
    }
    return ScenarioResult("counterexample", passed, report, tables)


SCENARIOS = {
    "koszul": scenario_koszul,
    "timeslice": scenario_timeslice,
    "star": scenario_star,
    "cones": scenario_cones,
    "probe": scenario_probe,
    "counterexample": scenario_counterexample,
}


def run_scenario(cfg: dict) -> list[ScenarioResult]:
    name = cfg["scenario"]
    if name == "all":
        return [SCENARIOS[s](cfg) for s in SCENARIOS]
    return [SCENARIOS[name](cfg)]


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def emit_report(results: list[ScenarioResult], out_dir: str, deterministic: bool) -> list[str]:
    try:
        os.makedirs(out_dir, exist_ok=True)
        probe_path = os.path.join(out_dir, ".pqft-write-test")
        with open(probe_path, "w") as fh:
            fh.write("ok")
        os.remove(probe_path)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {exc}") from exc
    stamp = "" if deterministic else \
        "-" + datetime.datetime.now(datetime.timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    written = []
    for res in results:
        doc = dict(res.report)
        doc["timestamp"] = None if deterministic else stamp.lstrip("-")
        path = os.path.join(out_dir, f"{res.name}{stamp}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(path)
        for table_name, rows in res.tables.items():
            tpath = os.path.join(out_dir, f"{table_name}{stamp}.csv")
            with open(tpath, "w", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerows(rows)
            written.append(tpath)
    return written


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pqft",
                                     description="verification scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="execute a verification scenario")
    run.add_argument("--config", help="JSON config file (flags override it)")
    run.add_argument("--scenario", choices=sorted([*SCENARIOS, "all"]))
    run.add_argument("--nt", type=int)
    run.add_argument("--nx", type=int)
    run.add_argument("--dt", type=str)
    run.add_argument("--dx", type=str)
    run.add_argument("--mass", type=str)
    run.add_argument("--theta-lo", dest="theta_lo", type=int)
    run.add_argument("--theta-hi", dest="theta_hi", type=int)
    run.add_argument("--mode", choices=["float", "rational"])
    run.add_argument("--seed", type=int)
    run.add_argument("--samples", type=int)
    run.add_argument("--fields", type=int)
    run.add_argument("--probes", type=int)
    run.add_argument("--cauchy", type=int)
    run.add_argument("--sweep-limit", dest="sweep_limit", type=int)
    run.add_argument("--out", type=str)
    run.add_argument("--deterministic", action="store_true", default=None)
    return parser


def _collect_config(args: argparse.Namespace) -> dict:
    config: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config.update(json.load(fh))
    for key in ("scenario", "nt", "nx", "dt", "dx", "mass", "theta_lo", "theta_hi",
                "mode", "seed", "samples", "fields", "probes", "cauchy",
                "sweep_limit", "out", "deterministic"):
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = validate_config(_collect_config(args))
    except (jsonschema.ValidationError, json.JSONDecodeError, OSError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = run_scenario(cfg)
        emit_report(results, cfg["out"], bool(cfg["deterministic"]))
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    for res in results:
        print(f"[{'PASS' if res.passed else 'FAIL'}] scenario {res.name}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
