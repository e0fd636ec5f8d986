"""fluxkit command line: solve | sweep | optimize | dispersion | verify-table.

Exit codes: 0 success, 2 bad config or design, 3 numerical failure,
4 no feasible design.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from . import config as cfgmod
from .circuit import derive_energies
from .dispersion import charge_dispersion_1d, dispersion_empirical
from .errors import ConfigError, FluxkitError, NoFeasibleDesign
from .fullmodel import DEFAULT_MAX_MODES, charge_dispersion_full
from .report import build_report, csv_text, dumps, quantity, stage, write_atomic
from .sweep import load_table, optimize_design, run_sweep, table_summary, verify_table_designs

TRACE_COLUMNS = ["index", "stage", "n", "ic_na", "csh_ff", "gamma_over_n", "omega01_ghz",
                 "anharmonicity_ghz", "objective", "penalty", "best_so_far"]
TABLE_COLUMNS = ["device", "n", "ic_na", "csh_ff", "gamma_over_n", "ic_scale",
                 "measured_omega01_ghz", "measured_anharmonicity_ghz", "nominal_omega01_ghz",
                 "nominal_anharmonicity_ghz", "scaled_omega01_ghz", "scaled_anharmonicity_ghz",
                 "nominal_omega01_deviation", "scaled_omega01_deviation",
                 "nominal_anharmonicity_deviation", "scaled_anharmonicity_deviation",
                 "scaled_improves", "status", "message"]
BAND_COLUMNS = ["model", "level", "island", "ng", "energy_ghz"]


def _emit(text: str, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        write_atomic(path, text)


def _design_overrides(args) -> dict:
    return {"design": {"cg_ff": getattr(args, "cg_ff", None)},
            "optimize": {"seed": getattr(args, "seed", None)}}


def cmd_solve(args) -> int:
    with stage("config"):
        cfg = cfgmod.load_config(args.config, _design_overrides(args))
        if cfg.design is None:
            raise ConfigError("solve needs a 'design' section")
    rep = build_report(cfg.design, noise=cfg.noise, dispersion=not args.no_dispersion,
                       full_model=args.full_model)
    _emit(rep.to_json(), args.out)
    return 0


def cmd_sweep(args) -> int:
    with stage("config"):
        over = _design_overrides(args)
        over["sweep"] = {"points": args.points}
        cfg = cfgmod.load_config(args.config, over)
        spec = cfgmod.sweep_spec(cfg)
    with stage("sweep"):
        result = run_sweep(spec, jobs=args.jobs)
    _emit(csv_text(result.columns, result.rows), args.out)
    if args.summary:
        write_atomic(args.summary, dumps({
            "axis": spec.axis, "range": [spec.lo, spec.hi], "rows": len(result.rows),
            "failures": result.failures, "columns": result.columns,
            "base_design": spec.base_design.to_dict(),
        }))
    return 0


def cmd_optimize(args) -> int:
    with stage("config"):
        cfg = cfgmod.load_config(args.config, _design_overrides(args))
        targets = cfgmod.design_targets(cfg)
        seed = cfgmod.seed(cfg)
    with stage("optimize"):
        res = optimize_design(targets, seed=seed, jobs=args.jobs)
    e = res.evaluation
    summary = {
        "seed": seed,
        "objective": res.objective,
        "design": res.design.to_dict(),
        "omega01": quantity(e.omega01, "GHz"),
        "anharmonicity": quantity(e.anharmonicity, "GHz"),
        "targets": {"omega01": quantity(targets.target_omega01, "GHz"),
                    "anharmonicity": quantity(targets.target_anharmonicity, "GHz")},
        "evaluations": len(res.trace),
        "restarts": res.restarts,
        "ratio_curves": [{"n": n, "ic_na": ic, "csh_ff": csh, "checksum": ck,
                          "selected_gamma_over_n": gn} for n, ic, csh, ck, gn in res.ratio_curves],
    }
    _emit(dumps(summary), args.out)
    if args.trace:
        rows = [{"index": t.index, "stage": t.stage, "n": t.n, "ic_na": t.ic, "csh_ff": t.csh,
                 "gamma_over_n": t.gamma_over_n, "omega01_ghz": t.omega01,
                 "anharmonicity_ghz": t.anharmonicity, "objective": t.objective,
                 "penalty": t.penalty, "best_so_far": t.best_so_far} for t in res.trace]
        write_atomic(args.trace, csv_text(TRACE_COLUMNS, rows))
    return 0


def _parse_level(text: str):
    if "-" in text:
        i, j = (int(x) for x in text.split("-"))
        return (i, j)
    return int(text)


def cmd_dispersion(args) -> int:
    with stage("config"):
        cfg = cfgmod.load_config(args.config, _design_overrides(args))
        if cfg.design is None:
            raise ConfigError("dispersion needs a 'design' section")
        try:
            level = _parse_level(args.level)
        except ValueError:
            raise ConfigError(f"bad level {args.level!r}; use e.g. 0 or 0-1") from None
    design = cfg.design
    models = ["1d", "empirical", "full"] if args.model == "all" else [args.model]
    summary, bands = {"design": design.to_dict(), "level": args.level}, []
    for model in models:
        with stage(f"dispersion ({model})"):
            if model == "empirical":
                amp = dispersion_empirical(derive_energies(design), design.array_size)
                summary[model] = {"amplitude": quantity(amp, "GHz"), "fidelity": "fit"}
                continue
            if model == "1d":
                r = charge_dispersion_1d(design, level=level, samples=args.samples)
                summary[model] = {"amplitude": quantity(r.amplitude, "GHz"),
                                  "log10_amplitude": quantity(r.log10_amplitude, "log10 GHz"),
                                  "method": r.method, "fidelity": "low"}
                bands += [{"model": model, "level": r.level_label, "island": "", "ng": float(ng),
                           "energy_ghz": float(e)} for ng, e in zip(r.offsets, r.band)]
                continue
            if args.model == "all" and design.array_size > DEFAULT_MAX_MODES:
                summary[model] = {"skipped": f"full model runs for N <= {DEFAULT_MAX_MODES}"}
                continue
            fd = charge_dispersion_full(design, levels=(level,), samples=args.samples,
                                        worst_case=not args.principal_only)
            p, w = fd.principal[level], fd.worst[level]
            summary[model] = {
                "amplitude": quantity(p.amplitude, "GHz"),
                "log10_amplitude": quantity(p.log10_amplitude, "log10 GHz"),
                "worst_island": fd.worst_island[level],
                "worst_amplitude": quantity(w.amplitude, "GHz"),
                "charge_cutoff": fd.basis.charge_cutoff,
                "cg_ff": fd.ground_capacitance,
                "fidelity": "high",
            }
            bands += [{"model": model, "level": p.level_label, "island": design.array_size - 1,
                       "ng": float(ng), "energy_ghz": float(e)} for ng, e in zip(p.offsets, p.band)]
    _emit(dumps(summary), args.summary)
    if args.out:
        write_atomic(args.out, csv_text(BAND_COLUMNS, bands))
    return 0


def cmd_verify_table(args) -> int:
    with stage("config"):
        if not args.ic_scale > 0 or not math.isfinite(args.ic_scale):
            raise ConfigError("--ic-scale must be a positive number")
        try:
            rows = load_table(args.data)
        except (OSError, KeyError, ValueError) as exc:
            if isinstance(exc, FluxkitError):
                raise
            raise ConfigError(f"cannot read table data: {exc}") from exc
    with stage("verify-table"):
        out = verify_table_designs(rows, ic_scale=args.ic_scale, jobs=args.jobs)
    _emit(csv_text(TABLE_COLUMNS, out), args.out)
    summary = table_summary(out)
    summary["ic_scale"] = args.ic_scale
    if args.summary:
        write_atomic(args.summary, dumps(summary))
    else:
        sys.stderr.write(dumps(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="worker processes (default: logical cores)")
    common.add_argument("--seed", type=int, default=None, help="overrides optimize.seed")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--cg-ff", type=float, default=None, dest="cg_ff",
                        help="ground capacitance per island, overrides design.cg_ff")

    parser = argparse.ArgumentParser(prog="fluxkit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="report for one design")
    p.add_argument("config")
    p.add_argument("--full-model", action="store_true",
                   help="also run the full charge-basis dispersion (N <= 4)")
    p.add_argument("--no-dispersion", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    p.add_argument("config")
    p.add_argument("--points", type=int, default=None, help="overrides sweep.points")
    p.add_argument("--summary", default=None, help="summary JSON path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", parents=[common], help="fit a design to target omega01, A")
    p.add_argument("config")
    p.add_argument("--trace", default=None, help="evaluation trace CSV path")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("dispersion", parents=[common], help="charge dispersion estimates")
    p.add_argument("config")
    p.add_argument("--model", choices=["1d", "empirical", "full", "all"], default="all")
    p.add_argument("--level", default="0-1", help="level (0) or transition (0-1)")
    p.add_argument("--samples", type=int, default=17)
    p.add_argument("--principal-only", action="store_true",
                   help="full model: skip the per-island worst-case sweeps")
    p.add_argument("--summary", default=None,
                   help="summary JSON path when --out holds the band CSV")
    p.set_defaults(func=cmd_dispersion)

    p = sub.add_parser("verify-table", parents=[common], help="compare with the shipped table of measured devices")
    p.add_argument("data", nargs="?", default=None, help="table JSON (default: shipped copy)")
    p.add_argument("--ic-scale", type=float, default=1.0, dest="ic_scale")
    p.add_argument("--summary", default=None, help="summary JSON path (default: stderr)")
    p.set_defaults(func=cmd_verify_table)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("fluxkit: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except NoFeasibleDesign as exc:
        print(f"fluxkit: {getattr(exc, 'stage', 'optimize')} failed: {exc}", file=sys.stderr)
        return exc.exit_code
    except FluxkitError as exc:
        print(f"fluxkit: {getattr(exc, 'stage', None) or args.command} failed: {exc}",
              file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fluxkit: output failed: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
