"""Command-line entry point.

Exit codes: 0 success, 2 infeasible or degenerate analysis, 3 malformed input.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io
from .analysis import (AnalysisError, Case, SweepSpec, compute_lsp, demand_curves, rp_analysis,
                       rp_from_sweep, run_sweep)
from .building import augment
from .lp import LpError
from .scheduler import ScheduleError, solve_schedule
from .thermal import ModelError, simulate_rule_based

log = logging.getLogger("loadshift")

EXIT_OK = 0
EXIT_ANALYSIS = 2
EXIT_INPUT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _csv_floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _csv_ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker threads for room solves")
    common.add_argument("--seed", type=int, default=None, help="override the building seed")
    common.add_argument("--output-dir", type=Path, default=None,
                        help="output folder (default: from config)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="loadshift",
                     description="Building HVAC load-shifting potential under energy and reserve prices.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common], help="rule-based thermostat run")
    p.add_argument("config", type=Path)
    p.add_argument("--setpoint", type=float, default=None,
                   help="heat while the room is below this, degC (default: comfort midpoint)")
    p.add_argument("--rated-mdot", type=float, default=None, help="kg/s (default: mdot_max)")

    p = sub.add_parser("schedule", parents=[common], help="one cost-minimal schedule")
    p.add_argument("config", type=Path)

    p = sub.add_parser("sweep", parents=[common], help="full LSP sweep with all reports")
    p.add_argument("config", type=Path)
    p.add_argument("--scenarios", type=_csv_floats, default=None,
                   help="comma-separated percentiles, overriding the config")
    p.add_argument("--steps", type=_csv_ints, default=None)

    p = sub.add_parser("demand-curve", parents=[common], help="per-step demand-curve fits")
    p.add_argument("config", type=Path)
    p.add_argument("--cases", default=None, help="comma-separated subset of Case1,Case2,Case3")
    p.add_argument("--steps", type=_csv_ints, default=None)

    p = sub.add_parser("rp-study", parents=[common], help="LSP change against reserve/energy ratio")
    p.add_argument("config", type=Path)
    p.add_argument("--scenario", type=float, default=None, help="percentile (default: config)")

    p = sub.add_parser("gen-synthetic", parents=[common], help="seeded synthetic input files")
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--rp-range", type=float, nargs=2, default=(0.2, 1.4), metavar=("LO", "HI"))
    return parser


def _load(args):
    cfg = io.load_run_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.threads < 1:
        raise io.InputError("--threads must be at least 1")
    cfg.scheduler = replace(cfg.scheduler, workers=args.threads)
    room = cfg.model()
    prices = io.ingest_prices(cfg.prices_path, room.dt)
    profile = io.ingest_disturbance(cfg.disturbance_path)
    if len(profile) != prices.N:
        raise io.InputError(f"{cfg.disturbance_path}: {len(profile)} rows, prices have {prices.N}")
    building = augment(room, cfg.floors, cfg.rooms_per_floor, cfg.seed, cfg.participation)
    return cfg, building, prices, profile


def cmd_simulate(args):
    cfg, building, prices, profile = _load(args)
    room = building.room
    setpoint = room.comfort.midpoint() if args.setpoint is None else args.setpoint
    rated = room.hvac.mdot_max if args.rated_mdot is None else args.rated_mdot
    tr = simulate_rule_based(room, profile, setpoint, rated)
    rows = [(k, float(tr.temperatures[k, 4]), *map(float, tr.temperatures[k, :4]),
             float(tr.mdot[k]), float(tr.power[k] / 1000.0)) for k in range(len(profile))]
    out = io.write_csv(cfg.output_dir / "trace.csv",
                       ("step", "t_room_c", "t_wall_n_c", "t_wall_e_c", "t_wall_s_c",
                        "t_wall_w_c", "mdot_kgps", "power_kw"), rows, cfg.source_hash, cfg.seed)
    log.info("wrote %s", out)
    return EXIT_OK


def cmd_schedule(args):
    cfg, building, prices, profile = _load(args)
    sol = solve_schedule(building, prices, cfg.scheduler, profile=profile)
    kappa = building.room.power_conversion
    io.write_schedule(sol, kappa, cfg.output_dir / "schedule.csv", cfg.source_hash, cfg.seed)
    io.write_summary(sol, cfg.output_dir / "schedule_summary.json", cfg.source_hash, cfg.seed,
                     {"rooms": building.n_br, "steps": prices.N})
    return EXIT_OK


def _spec(cfg, scenarios=None, steps=None, cases=None):
    s = cfg.sweep
    return SweepSpec(s.scenarios if scenarios is None else scenarios,
                     s.cases if cases is None else cases,
                     s.perturbation_mode,
                     s.steps if steps is None else steps)


def cmd_sweep(args):
    cfg, building, prices, profile = _load(args)
    spec = _spec(cfg, args.scenarios, args.steps)
    sweep = run_sweep(building, prices, spec, cfg.scheduler, profile=profile)
    h, seed, out = cfg.source_hash, cfg.seed, cfg.output_dir
    report = compute_lsp(building, prices, spec, cfg.scheduler, sweep=sweep)
    sat = {case.value: s for case, s in report.saturation_scenario.items()}
    io.write_lsp(report, out / "lsp.csv", h, seed)
    curves = [c for case in spec.cases for c in demand_curves(sweep, case)]
    io.write_demand_curves(curves, out / "demand_curve.csv", h, seed)
    summary = {"config_hash": h, "seed": seed, "lp_count": sweep.lp_count,
               "rooms": building.n_br, "steps": int(sweep.steps.size),
               "saturation_scenario": sat}
    if {Case.CASE2, Case.CASE3} <= set(spec.cases):
        scen = cfg.rp_scenario if cfg.rp_scenario in spec.scenarios else spec.scenarios[0]
        study = rp_from_sweep(sweep, scen)
        io.write_rp_fit(study, out / "rp_fit.csv", h, seed)
        summary["rp_scenario_pct"] = scen
        if study.fit is not None:
            summary["rp_region1_fit"] = {"slope": float(io.fmt(study.fit.slope)),
                                         "intercept": float(io.fmt(study.fit.intercept))}
    else:
        log.warning("Case2 and Case3 are both needed for rp_fit.csv; skipped")
    (out / "sweep_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_demand_curve(args):
    cfg, building, prices, profile = _load(args)
    cases = None
    if args.cases is not None:
        cases = tuple(Case(c.strip()) for c in args.cases.split(",") if c.strip())
    spec = _spec(cfg, steps=args.steps, cases=cases)
    sweep = run_sweep(building, prices, spec, cfg.scheduler, profile=profile)
    curves = [c for case in spec.cases for c in demand_curves(sweep, case)]
    io.write_demand_curves(curves, cfg.output_dir / "demand_curve.csv", cfg.source_hash, cfg.seed)
    if all(c.degenerate for c in curves):
        log.error("consumption does not respond at any step; every fit is degenerate")
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_rp_study(args):
    cfg, building, prices, profile = _load(args)
    scenario = cfg.rp_scenario if args.scenario is None else args.scenario
    study = rp_analysis(building, prices, scenario, cfg.scheduler, profile,
                        day_length=cfg.day_length, steps=cfg.sweep.steps)
    io.write_rp_fit(study, cfg.output_dir / "rp_fit.csv", cfg.source_hash, cfg.seed)
    if study.fit is None:
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_gen_synthetic(args):
    seed = 0 if args.seed is None else args.seed
    out = Path(".") if args.output_dir is None else args.output_dir
    paths = io.write_synthetic(args.days, seed, tuple(args.rp_range), out)
    for p in paths:
        log.info("wrote %s", p)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "schedule": cmd_schedule,
    "sweep": cmd_sweep,
    "demand-curve": cmd_demand_curve,
    "rp-study": cmd_rp_study,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ScheduleError, LpError) as exc:
        print(f"loadshift: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (io.InputError, AnalysisError, ModelError, ValueError) as exc:
        print(f"loadshift: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
