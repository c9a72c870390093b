"""Command-line front end.

Subcommands:

* simulate  one scenario from a YAML config (or builtin name):
            trace CSV plus metric/certification JSON
* reproduce the builtin study families (sec4, sec7, waterbed): one CSV
            per variant plus a comparison JSON with region markers
* bounds    the analytical constant ledger for a scenario, with the
            gain thresholds and applicability warnings
* optimize  grid search over (rho, ell) minimizing the truncated L2
            norm of the control-input rate
* verify    certification sweep over every builtin scenario

Exit codes: 0 success, 1 usage/config/runtime error (no partial trace
CSV is left behind), 2 bound violation (outputs are still written).
"""

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import backend, bounds, metrics, studies
from .config import load_scenario
from .errors import CrmsimError
from .matan import spectral_constants
from .sim import integrate, write_trace_csv

_STUDIES = {
    "sec4": {
        "variants": ("sec4_open", "sec4_closed"),
        "markers": (10.0, 20.0),
        "regions": ((0.0, 10.0), (10.0, 20.0), (20.0, 35.0)),
    },
    "sec7": {
        "variants": ("sec7_open", "sec7_closed"),
        "markers": (4.0,),
        "regions": ((0.0, 4.0), (4.0, 15.0)),
    },
    "waterbed": {
        "variants": ("waterbed_orm", "waterbed_tuned", "waterbed_detuned"),
        "markers": (),
        "regions": ((0.0, 10.0),),
    },
}


def _jsonable(obj):
    """Recursively convert numpy scalars/arrays and infinities into
    plain JSON-safe values."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_scenario(token):
    """A scenario token is a YAML path or a builtin name."""
    if os.path.exists(token):
        return load_scenario(token)
    if token in studies.BUILTINS:
        return studies.get_builtin(token), {}
    raise CrmsimError(
        "no config file %r and no builtin of that name (builtins: %s)"
        % (token, ", ".join(sorted(studies.BUILTINS)))
    )


def _stem(token, scenario):
    if scenario.name:
        return scenario.name
    base = os.path.basename(token)
    return os.path.splitext(base)[0] or "run"


def cmd_simulate(config_path, csv_path=None, report_path=None,
                 backend_name=None):
    """Run one scenario, write its trace CSV and certification JSON."""
    scenario, outputs = _resolve_scenario(config_path)
    stem = _stem(config_path, scenario)
    csv_path = csv_path or outputs.get("csv") or stem + ".csv"
    report_path = report_path or outputs.get("report") or stem + "_report.json"

    trace = integrate(scenario, backend_name=backend_name,
                      raise_on_divergence=False)
    if trace.status != 0:
        sys.stderr.write(
            "error: state diverged at t=%.6f; no outputs written\n"
            % trace.last_time())
        return 1
    ledger = metrics.ledger_for_scenario(scenario)
    report = metrics.check_bounds(trace, ledger)
    write_trace_csv(trace, csv_path)
    _write_json({
        "scenario": scenario.name or stem,
        "kernel": trace.kernel,
        "projection_repairs": trace.repairs,
        "ledger": ledger.to_dict(),
        "certification": report.to_dict(),
    }, report_path)
    if not report.passed:
        for v in report.violations:
            sys.stderr.write(
                "bound violation: %s (margin %.3e at t=%s)\n"
                % (v["bound"], v["margin"], v["t"]))
        return 2
    return 0


def _variant_summary(trace, regions, tau):
    summary = {
        "rms_udot_by_region": [
            metrics.rms(trace, "udot", lo, hi) for lo, hi in regions
        ],
        "truncated_l2_udot": metrics.truncated_l2(trace, "udot", tau),
        "sup_e": metrics.sup_by_interval(trace, "e", 0.0,
                                         trace.last_time() + trace.step),
        "terminal_theta": [float(v) for v in trace.theta[-1]],
        "e_settle_0.05": metrics.settle_time(trace, "e", 0.05),
        "projection_repairs": trace.repairs,
    }
    if trace.theta_hat is not None:
        summary["sup_theta_norm"] = float(
            np.sqrt((trace.theta ** 2).sum(axis=1)).max())
        summary["sup_theta_hat_norm"] = float(
            np.sqrt((trace.theta_hat ** 2).sum(axis=1)).max())
    return summary


def cmd_reproduce(study, outdir=".", backend_name=None):
    """Rerun a builtin study family and write its comparison JSON."""
    if study not in _STUDIES:
        raise CrmsimError("unknown study %r (have: %s)"
                          % (study, ", ".join(sorted(_STUDIES))))
    plan = _STUDIES[study]
    os.makedirs(outdir, exist_ok=True)
    comparison = {
        "study": study,
        "region_markers": list(plan["markers"]),
        "regions": [list(r) for r in plan["regions"]],
        "variants": {},
    }
    tau = plan["regions"][-1][1]
    for name in plan["variants"]:
        scenario = studies.get_builtin(name)
        if ((scenario.identifier is not None
             and not scenario.identifier.prescribed)
                or (scenario.observer is not None
                    and not scenario.observer.prescribed)):
            sys.stderr.write(
                "warning: %s overrides the prescribed identifier/observer "
                "gain; decrease-rate certificates do not apply to it\n"
                % name)
        trace = integrate(scenario, backend_name=backend_name)
        path = os.path.join(outdir, name + ".csv")
        write_trace_csv(trace, path)
        summary = _variant_summary(trace, plan["regions"], tau)
        summary["csv"] = path
        comparison["variants"][name] = summary

    variants = comparison["variants"]
    if study == "waterbed":
        orm = variants["waterbed_orm"]["truncated_l2_udot"]
        tuned = variants["waterbed_tuned"]["truncated_l2_udot"]
        detuned = variants["waterbed_detuned"]["truncated_l2_udot"]
        comparison["udot_l2_ordering_ok"] = bool(tuned < orm < detuned)
    if study == "sec7":
        open_rms = variants["sec7_open"]["rms_udot_by_region"][1]
        closed_rms = variants["sec7_closed"]["rms_udot_by_region"][1]
        comparison["region2_rms_udot"] = {
            "sec7_open": open_rms,
            "sec7_closed": closed_rms,
            "closed_lower": bool(closed_rms < open_rms),
        }
    out_json = os.path.join(outdir, study + "_comparison.json")
    _write_json(comparison, out_json)
    return 0


def cmd_bounds(config_path, out_json=None):
    """Write the analytical ledger and gain thresholds for a scenario."""
    scenario, outputs = _resolve_scenario(config_path)
    stem = _stem(config_path, scenario)
    out_json = out_json or outputs.get("report") or stem + "_bounds.json"
    consts = spectral_constants(scenario.ref_model.A_m)
    ledger = metrics.ledger_for_scenario(scenario, consts)
    cfg = scenario.controller.projection
    b_norm = float(np.sqrt((scenario.plant.b ** 2).sum()))
    warnings_out = []
    ell_star = {}
    for N in (1, 3):
        try:
            ell_star["N=%d" % N] = bounds.find_ell_star(
                consts, b_norm, cfg.theta_tilde_max, float(N), 1.0)
        except CrmsimError as exc:
            warnings_out.append("ell_star N=%d: %s" % (N, exc))
    ell_dp = bounds.find_ell_doubleprime(consts, b_norm, cfg.vartheta)
    if ledger.m1_singular:
        warnings_out.append(
            "m1 is singular at this design point (sigma + 2 ell <= "
            "sigma m**2): interval envelopes past T1 unavailable")
    if ledger.delta_ge_one:
        warnings_out.append(
            "Delta(ell) >= 1: observer-architecture guarantees need "
            "ell above ell_doubleprime=%.6f" % ell_dp)
    elif (scenario.controller.kind == "cmracco"
            and scenario.ref_model.ell < ell_dp):
        warnings_out.append(
            "ell=%.6f is below ell_doubleprime=%.6f"
            % (scenario.ref_model.ell, ell_dp))
    payload = {
        "scenario": scenario.name or stem,
        "constants": {
            "sigma": consts.sigma, "s": consts.s, "a": consts.a,
            "kappa": consts.kappa, "m": consts.m, "n": consts.n,
        },
        "ledger": ledger.to_dict(),
        "ell_star": ell_star,
        "ell_doubleprime": ell_dp,
        "warnings": warnings_out,
    }
    _write_json(payload, out_json)
    for w in warnings_out:
        sys.stderr.write("warning: %s\n" % w)
    return 0


def _parse_grid(text):
    try:
        grid = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise CrmsimError("bad grid %r: %s" % (text, exc)) from exc
    if not grid:
        raise CrmsimError("empty grid %r" % text)
    return grid


def cmd_optimize(config_path, tau, rho_grid, ell_grid, out_csv=None, jobs=1):
    """Grid-search (rho, ell) for one scenario, write the cost table."""
    scenario, outputs = _resolve_scenario(config_path)
    stem = _stem(config_path, scenario)
    out_csv = out_csv or outputs.get("csv") or stem + "_costs.csv"
    rho_opt, ell_opt, table = bounds.optimize_rho_ell(
        scenario, tau, rho_grid, ell_grid, jobs=jobs)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rho", "ell", "gamma", "cost", "status"])
        for row in table:
            writer.writerow([repr(float(row["rho"])),
                             repr(float(row["ell"])),
                             repr(float(row["gamma"])),
                             repr(float(row["cost"])),
                             row["status"]])
    print("optimum: rho=%g ell=%g (table: %s)" % (rho_opt, ell_opt, out_csv))
    return 0


def cmd_verify(backend_name=None, udot_checks=False):
    """Certify every builtin scenario; print one line per check."""
    worst = 0
    for name in sorted(studies.BUILTINS):
        scenario = studies.get_builtin(name)
        trace = integrate(scenario, backend_name=backend_name)
        ledger = metrics.ledger_for_scenario(scenario)
        intervals = (3, 0.05) if udot_checks else None
        report = metrics.check_bounds(trace, ledger,
                                      udot_intervals=intervals)
        for chk in report.checks:
            tag = "PASS" if chk["passed"] else "FAIL"
            print("[%s] %s :: %s (worst margin %.3e)"
                  % (tag, name, chk["name"], chk["worst_margin"]))
        for note in report.notes:
            print("[SKIP] %s :: %s" % (name, note))
        if not report.passed:
            worst = 2
    return worst


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the exit-code
    contract reserves 2 for bound violations, so remap usage to 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("error: %s\n" % message)
        raise SystemExit(1)


def build_parser():
    parser = _Parser(prog="crmsim",
                     description="Adaptive-control simulation and bound "
                                 "certification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one scenario")
    p_sim.add_argument("config", help="YAML config path or builtin name")
    p_sim.add_argument("--csv", default=None, help="trace CSV path")
    p_sim.add_argument("--report", default=None, help="metric JSON path")
    p_sim.add_argument("--backend", default=None,
                       choices=backend.available_backends())

    p_rep = sub.add_parser("reproduce", help="rerun a builtin study family")
    p_rep.add_argument("study", choices=sorted(_STUDIES))
    p_rep.add_argument("--outdir", default=".")
    p_rep.add_argument("--backend", default=None,
                       choices=backend.available_backends())

    p_bnd = sub.add_parser("bounds", help="write the analytical ledger")
    p_bnd.add_argument("config", help="YAML config path or builtin name")
    p_bnd.add_argument("--out", default=None, help="ledger JSON path")

    p_opt = sub.add_parser("optimize", help="grid-search rho and ell")
    p_opt.add_argument("config", help="YAML config path or builtin name")
    p_opt.add_argument("--tau", type=float, required=True,
                       help="truncation time for the u-rate cost")
    p_opt.add_argument("--rho-grid", required=True,
                       help="comma-separated rho values")
    p_opt.add_argument("--ell-grid", required=True,
                       help="comma-separated ell values")
    p_opt.add_argument("--out", default=None, help="cost-table CSV path")
    p_opt.add_argument("--jobs", type=int, default=1,
                       help="concurrent grid evaluations")

    p_ver = sub.add_parser("verify",
                           help="certify every builtin scenario")
    p_ver.add_argument("--backend", default=None,
                       choices=backend.available_backends())
    p_ver.add_argument("--udot-checks", action="store_true",
                       help="include interval sup checks where they apply")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, csv_path=args.csv,
                                report_path=args.report,
                                backend_name=args.backend)
        if args.command == "reproduce":
            return cmd_reproduce(args.study, outdir=args.outdir,
                                 backend_name=args.backend)
        if args.command == "bounds":
            return cmd_bounds(args.config, out_json=args.out)
        if args.command == "optimize":
            return cmd_optimize(args.config, args.tau,
                                _parse_grid(args.rho_grid),
                                _parse_grid(args.ell_grid),
                                out_csv=args.out, jobs=args.jobs)
        if args.command == "verify":
            return cmd_verify(backend_name=args.backend,
                              udot_checks=args.udot_checks)
        parser.error("unknown command %r" % args.command)
    except CrmsimError as exc:
        sys.stderr.write("error: %s\n" % exc)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
