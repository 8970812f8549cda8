"""Command-line entry point.

Every file written here is a pure function of the resolved configuration and the package
version: no timestamps, wall times or worker counts are recorded, and ensemble results
are merged by path or trial index.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .coefficients import AssumptionError, validate_mobility, validate_pair
from .config import DEFAULTS, ExperimentConfig, load
from .functionals import (CSV_HEADER, check_admissible, check_sup_bound_explicit, gamma_range,
                          random_positive_coefficients, sample_positive_field, sup_bound_ratios)
from .maxreg import caccioppoli_experiment, mr_ratio_experiment, muckenhoupt_constant
from .noise import RNG_SCHEME, NoiseBasis, intensity_profile, regularity_sums
from .solver import (ConfigError, coupled_pair_run, heun_gap_study, ito_shift_equivalence, run,
                     run_ensemble, spatial_convergence)

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_PROPERTY = 0, 2, 3, 4
GAMMA_TABLE_BETAS = (-0.4, -0.2, 0.0, 0.25, 0.5, 0.75, 0.95)


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _header(exp: ExperimentConfig, command: str) -> dict:
    return {"command": command, "version": __version__, "rng_scheme": RNG_SCHEME,
            "config": exp.doc, "config_hash": exp.content_hash()}


def _print_table(rows) -> None:
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")


# -- validate ---------------------------------------------------------------------

def cmd_validate(exp: ExperimentConfig, args) -> int:
    cfg = exp.sim
    rows = []
    try:
        rep = validate_mobility(cfg.mobility)
        rows.append(("mobility", True, f"n={rep.n:g} nu={rep.nu:g} c1={rep.first_derivative_const:.4g} "
                                       f"c2={rep.second_derivative_const:.4g}"))
    except (AssumptionError, ValueError) as exc:
        rows.append(("mobility", False, str(exc)))
    if cfg.potential is None:
        rows.append(("potential", False, "no repulsive potential configured"))
    else:
        pair = validate_pair(cfg.mobility, cfg.potential)
        detail = (f"theta={pair.theta:g} threshold={pair.theta_threshold} min_phi={pair.min_phi:.4g}"
                  if pair.passed else "; ".join(pair.messages))
        rows.append(("potential", pair.passed, detail))
    s_w, s_h = regularity_sums(cfg.noise)
    rows.append(("noise regularity", math.isfinite(s_w) and math.isfinite(s_h),
                 f"sum W2inf={s_w:.6g} sum H2={s_h:.6g} modes={len(cfg.noise)}"))
    C, dev = intensity_profile(cfg.noise, cfg.grid)
    need = cfg.scheme == "stratonovich"
    rows.append(("noise intensity", dev <= 1e-10 or not need,
                 f"C={C:.6g} deviation={dev:.3g}" + ("" if need else " (not required for ito)")))
    adm = check_admissible(2.0, 0.0, 1.0, 2.0, 1)
    rows.append(("parameters (p,kappa,s,q,d)=(2,0,1,2,1)", adm.admissible,
                 f"trace smoothness {adm.trace_smoothness:g}"))
    _print_table(rows)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report = _header(exp, "validate")
        report["checks"] = [{"check": n, "pass": ok, "detail": d} for n, ok, d in rows]
        write_json(out / "validate_report.json", report)
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_PROPERTY


# -- simulate -----------------------------------------------------------------------

def write_path_csv(path: Path, rows) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(r.csv() + "\n")


def cmd_simulate(exp: ExperimentConfig, args) -> int:
    cfg = exp.sim.validate()
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    results = run_ensemble(cfg, threads=args.threads)
    for res in results:
        write_path_csv(out / f"path_{res.path}.csv", res.diagnostics)
    manifest = _header(exp, "simulate")
    manifest["paths"] = [r.summary() for r in results]
    write_json(out / "manifest.json", manifest)
    blown = [r.path for r in results if not r.completed]
    done = len(results) - len(blown)
    print(f"{done}/{len(results)} paths completed" + (f"; blow-up on paths {blown}" if blown else ""))
    return EXIT_BLOWUP if blown else EXIT_OK


# -- compare-schemes -------------------------------------------------------------------

def cmd_compare_schemes(exp: ExperimentConfig, args) -> int:
    cfg = replace(exp.sim, scheme="stratonovich")
    C, dev = intensity_profile(cfg.noise, cfg.grid)
    if dev > 1e-10:
        raise ConfigError(f"compare-schemes needs constant noise intensity (deviation {dev:.3g})")
    cfg.validate()
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    bit_equal, _, _ = ito_shift_equivalence(cfg, path=0)
    quiet = replace(cfg, noise=NoiseBasis())
    finals = [run(replace(quiet, scheme=s), diagnostics=False).final_field.values for s in ("ito", "stratonovich")]
    finals.append(run(replace(quiet, scheme="ito", ito_shift=0.0), diagnostics=False).final_field.values)
    noise_free = all(np.array_equal(finals[0], f) for f in finals[1:])
    conv = exp.converge
    gap = heun_gap_study(cfg, conv.levels, conv.paths, args.threads, conv.heun_ref_offset)
    checks = {"bit_equal": bit_equal, "noise_free_equal": noise_free,
              "heun_order_at_least_0.4": bool(gap["order"] >= 0.4)}
    report = _header(exp, "compare-schemes")
    report.update({"intensity": C, "checks": checks, "heun_gap": gap})
    write_json(out / "compare_schemes.json", report)
    _print_table([(k, v, "") for k, v in checks.items()])
    print(f"Heun gap order {gap['order']:.3f} over {conv.levels} levels, {gap['paths'] - gap['excluded']} paths")
    return EXIT_OK if all(checks.values()) else EXIT_PROPERTY


# -- converge ------------------------------------------------------------------------------

def cmd_converge(exp: ExperimentConfig, args) -> int:
    conv = exp.converge
    levels = conv.levels if args.levels is None else args.levels
    if levels < 1:
        raise ConfigError("converge needs at least one level")
    cfg = exp.sim.validate()
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    stochastic = coupled_pair_run(cfg, levels, conv.paths, args.threads)
    deterministic = coupled_pair_run(replace(cfg, noise=NoiseBasis()), levels, 1, 1)
    spatial = spatial_convergence(replace(cfg, T=conv.spatial_T), list(conv.grids), conv.spatial_dt)
    report = _header(exp, "converge")
    report.update({"temporal": stochastic, "temporal_deterministic": deterministic, "spatial": spatial})
    write_json(out / "converge.json", report)
    print(f"temporal order {stochastic['order']:.3f} (excluded {stochastic['excluded']}), "
          f"deterministic {deterministic['order']:.3f}, spatial {spatial['order']:.3f}")
    return EXIT_OK


# -- inequalities --------------------------------------------------------------------------

def inequality_report(corpus_size: int, n: int, betas, thetas, seed: int, refine: bool = True) -> dict:
    rng = np.random.default_rng(seed)
    data = [random_positive_coefficients(rng) for _ in range(corpus_size)]
    fields = [sample_positive_field(lv, c, n) for lv, c in data]
    explicit = []
    for beta in betas:
        for theta in thetas:
            fails = sum(not check_sup_bound_explicit(f, beta, theta).passed for f in fields)
            explicit.append({"beta": beta, "theta": theta, "fields": len(fields), "failures": fails})
    ratios = []
    for beta in betas:
        for theta in thetas:
            row = {"beta": beta, "theta": theta}
            grids = (n, 2 * n) if refine else (n,)
            for m in grids:
                rs = [sup_bound_ratios(f if m == n else sample_positive_field(lv, c, m), beta, theta)
                      for f, (lv, c) in zip(fields, data)]
                key = "" if m == n else "_refined"
                for name in ("quartic", "energy_min", "energy_max"):
                    row[f"max_{name}{key}"] = max((getattr(r, name) for r in rs), default=math.nan)
            ratios.append(row)
    gammas = [{"beta": b, "gamma_lo": gamma_range(b)[0], "gamma_hi": gamma_range(b)[1]} for b in GAMMA_TABLE_BETAS]
    return {"corpus_size": corpus_size, "n": n, "explicit": explicit, "ratios": ratios, "gamma_interval": gammas}


def cmd_inequalities(exp: ExperimentConfig, args) -> int:
    q = exp.inequalities
    size = q.corpus_size if args.corpus_size is None else args.corpus_size
    rep = inequality_report(size, q.n, q.betas, q.thetas, exp.seed, q.refine)
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    report = _header(exp, "inequalities")
    report.update(rep)
    write_json(out / "inequalities.json", report)
    for row in rep["explicit"]:
        print(f"explicit sup bound beta={row['beta']:g} theta={row['theta']:g}: "
              f"{row['fields'] - row['failures']}/{row['fields']} pass")
    for row in rep["gamma_interval"]:
        print(f"beta={row['beta']:>5g}  gamma in [{row['gamma_lo']:.6f}, {row['gamma_hi']:.6f}]")
    return EXIT_OK if all(r["failures"] == 0 for r in rep["explicit"]) else EXIT_PROPERTY


# -- maxreg ------------------------------------------------------------------------------

def cmd_maxreg(exp: ExperimentConfig, args) -> int:
    m = exp.maxreg()
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    w = m.weight
    main = mr_ratio_experiment(m.lam, m.trials, w, m.T, m.K_modes, m.pieces, exp.seed, m.n_t,
                               forcing_decay=m.forcing_decay, grading=m.grading)
    control = mr_ratio_experiment(1.0, min(m.trials, 10), w, m.T, m.K_modes, m.pieces, exp.seed, m.n_t,
                                  forcing_decay=m.forcing_decay, grading=m.grading)
    muck = {str(L): muckenhoupt_constant(w.kappa, w.p / 2, L) for L in (10, 20, 40)}
    report = _header(exp, "maxreg")
    report.update({"experiment": main, "control_lambda_1": {k: control[k] for k in ("spread", "max", "min")},
                   "muckenhoupt": muck})
    write_json(out / "maxreg_report.json", report)
    cac = caccioppoli_experiment(m.lam, m.cacc_trials, m.cacc_scales, exp.seed, m.cacc_K_modes,
                                 m.pieces, m.cacc_t_factor)
    creport = _header(exp, "maxreg")
    creport["caccioppoli"] = cac
    write_json(out / "caccioppoli_report.json", creport)
    print(f"R spread {main['spread']:.4f} (time-grid doubling change {main['spread_change']:.2e}), "
          f"lambda=1 control spread {control['spread']:.6f}")
    print(f"Caccioppoli max ratio per scale {cac['max_ratio']}, scale spread {cac['scale_spread']:.3f}")
    return EXIT_OK


# -- info ------------------------------------------------------------------------------------

def cmd_info(exp: ExperimentConfig, args) -> int:
    info = {"version": __version__, "rng_scheme": RNG_SCHEME, "defaults": DEFAULTS,
            "mobility_kinds": ["power", "mixed", "interp"],
            "potential_kinds": ["lennard-jones", "pure-power", "none"],
            "schemes": ["ito", "stratonovich"], "csv_header": CSV_HEADER,
            "exit_codes": {"ok": EXIT_OK, "config": EXIT_CONFIG, "blowup": EXIT_BLOWUP,
                           "property": EXIT_PROPERTY}}
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "simulate": cmd_simulate, "compare-schemes": cmd_compare_schemes,
            "converge": cmd_converge, "inequalities": cmd_inequalities, "maxreg": cmd_maxreg, "info": cmd_info}


def _add_common(p: argparse.ArgumentParser, suppress: bool) -> None:
    # flags are accepted before or after the subcommand; the sub-level copies must not
    # overwrite values given at the top level, hence SUPPRESS there
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="TOML experiment file (defaults are used when omitted)")
    p.add_argument("--seed", type=int, default=d(None), help="unsigned 64-bit seed, overrides [noise].seed")
    p.add_argument("--out", default=d(None), help="output directory (default ./out)")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes for ensembles")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinfilm", description="Stochastic thin-film solver and inequality lab")
    _add_common(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _add_common(p, suppress=True)
        if name == "converge":
            p.add_argument("--levels", type=int)
        if name == "inequalities":
            p.add_argument("--corpus-size", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        exp = load(args.config, args.seed)
        return COMMANDS[args.command](exp, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
