"""Command-line surface: simulate, scan, analyze, plan, verify, report.

Exit codes: 0 success, 1 usage error, 2 data or configuration error,
3 template verification failure.  The CSMG_THREADS environment variable
caps scan parallelism.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from typing import List, Optional

from .analysis import (DetectorLayout, TemplateFamily, direct_bounds,
                       fit_error_model, max_direct_length,
                       naive_tomography_K, optimal_instance_probability,
                       optimal_pp, splitter_settings, xi_e)
from .config import ConfigError, RunConfig, override, read_config
from .recordio import RecordFormatError, read_record, write_record
from .reports import (default_pd_grid, default_pzz_grid, reach_rows,
                      read_estimates_csv, tomography_rows, write_bounds_csv,
                      write_estimates_csv, write_reach_csv,
                      write_summary_json, write_tomography_csv,
                      write_xi_curve_csv, xi_curve_rows)
from .stream import simulate
from .templates import (TemplateVerificationError, make_template,
                        scan, verify_template)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this tool's contract says 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _effective_threads(requested: int) -> int:
    cap = os.environ.get("CSMG_THREADS")
    if cap:
        try:
            return max(1, min(requested, int(cap)))
        except ValueError:
            raise ConfigError(f"CSMG_THREADS must be an integer, got {cap!r}")
    return max(1, requested)


def _load_config(args: argparse.Namespace) -> RunConfig:
    cfg = read_config(args.config) if args.config else RunConfig()
    updates = {}
    for flag, field in (("photons", "n_photons"), ("seed", "seed"),
                        ("pd", "p_d"), ("qx", "q_x"), ("qy", "q_y"),
                        ("qz", "q_z"), ("psigma", "p_sigma"),
                        ("pzz", "p_zz"), ("burn_in", "burn_in"),
                        ("tau_em", "tau_em"), ("lmax", "l_max"),
                        ("mode", "mode"), ("stride", "stride"),
                        ("threads", "threads")):
        if hasattr(args, flag):
            updates[field] = getattr(args, flag)
    if getattr(args, "families", None) is not None:
        updates["families"] = tuple(args.families.split(","))
    if getattr(args, "l_values", None) is not None:
        updates["l_values"] = tuple(int(v) for v in args.l_values.split(","))
    return override(cfg, **updates)


def _add_source_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration file (key = value)")
    p.add_argument("--photons", type=int, help="number of photons to emit")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--pd", type=float, help="detection probability")
    p.add_argument("--qx", type=float, help="X-basis splitter probability")
    p.add_argument("--qy", type=float, help="Y-basis splitter probability")
    p.add_argument("--qz", type=float, help="Z-basis splitter probability")
    p.add_argument("--psigma", type=float,
                   help="per-photon single-Pauli error probability")
    p.add_argument("--pzz", type=float,
                   help="per-pair Z*Z error probability")
    p.add_argument("--burn-in", dest="burn_in", type=int,
                   help="photons flagged as burn-in in the record header")
    p.add_argument("--tau-em", dest="tau_em", type=float,
                   help="emission period in seconds")


def _add_template_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lmax", type=int, help="largest separation on the grid")
    p.add_argument("--l-values", dest="l_values",
                   help="explicit comma-separated separations")
    p.add_argument("--families",
                   help="comma-separated template families "
                        "(Gamma1, Gamma2)")


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = args.out or cfg.record_path
    if not out:
        raise ConfigError("no output path: pass --out or set record_path")
    started = time.perf_counter()
    record = simulate(cfg.experiment(), method=args.method)
    elapsed = time.perf_counter() - started
    write_record(out, record)
    rate = cfg.n_photons / elapsed if elapsed > 0 else float("inf")
    print(f"wrote {out}: {cfg.n_photons} photons "
          f"(lost fraction {record.lost_fraction():.4f}, "
          f"{rate:.3g} photons/s)")
    return 0


def cmd_scan(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    record_path = args.record or cfg.record_path
    if not record_path:
        raise ConfigError("no record path: pass one or set record_path")
    out = args.out or cfg.estimates_path
    if not out:
        raise ConfigError("no output path: pass --out or set estimates_path")
    record = read_record(record_path)
    templates = list(cfg.templates())
    estimates = scan(record, templates, mode=cfg.mode, stride=cfg.stride,
                     threads=_effective_threads(cfg.threads))
    write_estimates_csv(out, estimates)
    for est in estimates:
        print(f"{est.template_id}: {est.match_count} matches, "
              f"mean {est.mean:+.6f} +- {est.stderr:.6f} "
              f"(overlap {est.overlap_fraction:.3f})")
    print(f"wrote {out}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    estimates = read_estimates_csv(args.estimates)
    table = direct_bounds(estimates, z=args.z)
    write_bounds_csv(args.out_bounds, table)
    fit = None
    xi = None
    if not args.no_fit:
        fit = fit_error_model(estimates)
        xi = xi_e(fit)
    write_summary_json(args.out_summary, table=table, fit=fit, xi=xi)
    for row in table.rows:
        print(f"l={row.l}: EoF central {row.eof_central:.4f}, "
              f"conservative {row.eof_conservative:.4f}"
              + (" [clamped]" if row.clamped else ""))
    print(f"direct xi_e = {table.xi_e}")
    if fit is not None:
        print(f"fit: p_sigma = {fit.p_sigma:.6g} +- {fit.stderr_p_sigma:.2g}, "
              f"p_zz = {fit.p_zz:.6g} +- {fit.stderr_p_zz:.2g}, "
              f"chi2/dof = {fit.chi2_per_dof:.3f}")
    if xi is not None:
        print(f"indirect xi_e: grid {xi.grid:g}, "
              f"continuous {xi.continuous:g}")
    print(f"wrote {args.out_bounds} and {args.out_summary}")
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    k = naive_tomography_K(args.pd, args.budget)
    print(f"p_d = {args.pd}, photon budget = {args.budget:g}")
    print(f"tomography baseline: K = {k}")
    for family in (TemplateFamily.GAMMA1, TemplateFamily.GAMMA2):
        reach = max_direct_length(family, args.pd, args.budget,
                                  min_expected=args.min_expected)
        line = f"{family.value}: direct reach l = {reach}"
        if reach:
            pp = optimal_pp(family, reach)
            qs = splitter_settings(family, reach)
            prob = optimal_instance_probability(family, reach, args.pd)
            line += (f" (p_p = {pp:.4f}, q = ({qs[0]:.4f}, {qs[1]:.4f}, "
                     f"{qs[2]:.4f}), match prob {prob:.3g})")
        print(line)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    families = [TemplateFamily(name) for name in args.families.split(",")]
    ls = [l for l in range(2, args.lmax + 1) if l % 3 == 2]
    if not ls:
        raise ConfigError(f"no valid separations up to {args.lmax}")
    for family in families:
        for l in ls:
            template = make_template(family, l)
            verify_template(template, windows=args.windows)
            print(f"ok {template.id} phase +1")
    print(f"verified {len(families) * len(ls)} templates")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    p_ds = default_pd_grid()
    tomo = os.path.join(args.out_dir, "tomography_baseline.csv")
    write_tomography_csv(tomo, tomography_rows(p_ds, args.budget))
    reach = os.path.join(args.out_dir, "direct_reach.csv")
    write_reach_csv(reach, reach_rows(p_ds, args.budget,
                                      min_expected=args.min_expected))
    xi = os.path.join(args.out_dir, "xi_curve.csv")
    p_sigmas = [float(v) for v in args.psigmas.split(",")]
    write_xi_curve_csv(xi, xi_curve_rows(default_pzz_grid(), p_sigmas))
    for path in (tomo, reach, xi):
        print(f"wrote {path}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="csmg",
                     description="Photon-stream cluster-source simulator "
                                 "and entanglement-length certifier")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("simulate", help="emit a click record")
    _add_source_flags(p)
    p.add_argument("--method", choices=("auto", "table", "frame"),
                   default="auto", help="simulation path")
    p.add_argument("--out", help="output record path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="scan a record for template matches")
    p.add_argument("record", nargs="?", help="input record path")
    p.add_argument("--config", help="run configuration file")
    _add_template_flags(p)
    p.add_argument("--mode", choices=("all", "greedy"),
                   help="count every match or non-overlapping only")
    p.add_argument("--stride", type=int, help="window start spacing")
    p.add_argument("--threads", type=int, help="scan worker threads")
    p.add_argument("--out", help="output estimates CSV")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("analyze", help="bounds and rate fit from estimates")
    p.add_argument("estimates", help="estimates CSV from scan")
    p.add_argument("--z", type=float, default=1.96,
                   help="haircut in standard errors for conservative bounds")
    p.add_argument("--no-fit", action="store_true",
                   help="skip the error-model fit")
    p.add_argument("--out-bounds", default="bounds.csv",
                   help="output bounds CSV")
    p.add_argument("--out-summary", default="summary.json",
                   help="output summary JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plan", help="budget calculators for one p_d")
    p.add_argument("--pd", type=float, required=True,
                   help="detection probability")
    p.add_argument("--budget", type=float, default=1e10,
                   help="photon budget")
    p.add_argument("--min-expected", dest="min_expected", type=float,
                   default=1.0, help="required expected matches")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="self-check the template constructions")
    p.add_argument("--lmax", type=int, default=50,
                   help="largest separation to verify")
    p.add_argument("--families", default="Gamma1,Gamma2",
                   help="comma-separated families")
    p.add_argument("--windows", type=int, default=256,
                   help="simulated windows per template")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="emit planner curve tables")
    p.add_argument("--out-dir", default="reports", help="output directory")
    p.add_argument("--budget", type=float, default=1e10)
    p.add_argument("--min-expected", dest="min_expected", type=float,
                   default=1.0)
    p.add_argument("--psigmas", default="0,0.002",
                   help="comma-separated single-Pauli rates for the xi curve")
    p.set_defaults(func=cmd_report)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TemplateVerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, RecordFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
