"""Command-line entry point: ``pwmstab {analyze,sweep,simulate,verify} CONFIG``.

Exit codes: 0 stable/ok, 1 verify failure, 2 unstable, 3 marginal or
inconclusive, 4 orbit solver failure, 64 usage or configuration error.
"""

import argparse
import json
import logging
import os
import sys


from .config import OUTPUT_FORMATS, load_config
from .corpus import corpus_cases
from .errors import ConfigError, PwmStabError, ValidationError
from .orbit import default_guess, find_periodic_orbit
from .output import (
    BOUNDARY_COLUMNS,
    SWEEP_COLUMNS,
    analyze_columns,
    analyze_row,
    boundary_rows,
    fmt,
    sweep_rows,
    sweep_svg,
    text_report,
    write_csv,
)
from .simulator import cycle_waveform, exact_cycle_map, probe_orbital_stability
from .stability import analyze_orbit, compute_jacobian
from .sweep import run_sweep
from .verify import corrupted_jacobian, run_verify

log = logging.getLogger("pwmstab")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_UNSTABLE = 2
EXIT_MARGINAL = 3
EXIT_SOLVER = 4
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(config, args):
    path = args.out_dir if args.out_dir is not None else config.output.dir
    os.makedirs(path, exist_ok=True)
    return path


def _out_format(config, args):
    return args.format if args.format is not None else config.output.format


def cmd_analyze(config, args):
    if config.sweep is not None:
        log.warning("sweep.* keys are ignored by 'analyze'")
    model, rule = config.model(), config.rule()
    try:
        orbit = find_periodic_orbit(model, rule, tol=config.solver.tol, max_iter=config.solver.max_iter)
        report = analyze_orbit(orbit, model, rule, margin=config.solver.margin)
    except PwmStabError as exc:
        print(f"orbit not found: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    probe = probe_orbital_stability(model, rule, orbit, n_cycles=config.solver.probe_cycles)
    check = exact_cycle_map(model, rule, orbit.x0)
    if check.pulse_count > 1:
        log.warning(
            "the comparator signal re-crosses the threshold during the off-stage (%d crossings per "
            "cycle); the period-1 description may not match the latched converter",
            check.pulse_count,
        )

    out = _out_dir(config, args)
    text = text_report(report, model, rule, probe)
    with open(os.path.join(out, "analyze.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    write_csv(os.path.join(out, "analyze.csv"), analyze_columns(model), [analyze_row(report, model, rule, probe)])
    sys.stdout.write(text)

    if report.verdict_exact == "unstable":
        return EXIT_UNSTABLE
    if report.verdict_exact == "marginal" or probe.verdict != "decaying":
        return EXIT_MARGINAL
    return EXIT_OK


def cmd_sweep(config, args):
    if config.sweep is None:
        print("sweep requires sweep.param, sweep.lo, sweep.hi and sweep.points", file=sys.stderr)
        return EXIT_USAGE
    model, rule = config.model(), config.rule()
    result = run_sweep(model, rule, config.sweep, config.solver, jobs=args.jobs)
    out = _out_dir(config, args)
    write_csv(os.path.join(out, "sweep.csv"), SWEEP_COLUMNS, sweep_rows(result))
    write_csv(os.path.join(out, "sweep_boundaries.csv"), BOUNDARY_COLUMNS, boundary_rows(result))
    if _out_format(config, args) == "csv+svg":
        with open(os.path.join(out, "sweep.svg"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(sweep_svg(result))

    n_ok = sum(row.status == "ok" for row in result.rows)
    print(f"{len(result.rows)} points, {n_ok} solved")
    for criterion, values in result.boundaries.items():
        shown = ", ".join(fmt(v) for v in values) if values else "absent"
        print(f"boundary {criterion:5s} {shown}")
    return EXIT_OK if n_ok else EXIT_SOLVER


def cmd_simulate(config, args):
    if args.cycles < 1:
        print("--cycles must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    model, rule = config.model(), config.rule()
    try:
        x = find_periodic_orbit(model, rule, tol=config.solver.tol).x0
    except PwmStabError as exc:
        log.warning("no period-1 orbit (%s); starting from the averaged-model state", exc)
        x = default_guess(model, rule)[0]
    x = x * (1.0 + args.perturb)

    names = model.state_names
    T = model.period
    sample_rows = [[0, 0.0, *x, None, None, None]]
    wave_rows = []
    for k in range(1, args.cycles + 1):
        res = exact_cycle_map(model, rule, x)
        t, states, threshold = cycle_waveform(model, rule, x, res)
        for ti, si, hi in zip(t, states, threshold):
            wave_rows.append([k - 1, (k - 1) * T + ti, *si, hi])
        x = res.end_state
        sample_rows.append([k, k * T, *x, res.switch_time, res.pulse_count, res.saturated])

    out = _out_dir(config, args)
    write_csv(
        os.path.join(out, "simulate_samples.csv"),
        ["cycle", "t", *names, "switch_time", "pulse_count", "saturated"],
        sample_rows,
    )
    write_csv(os.path.join(out, "simulate_waveform.csv"), ["cycle", "t", *names, "threshold"], wave_rows)
    print(f"simulated {args.cycles} cycles; final state " + ", ".join(f"{n}={fmt(v)}" for n, v in zip(names, x)))
    return EXIT_OK


def cmd_verify(config, args):
    cases = [("config", config.model(), config.rule())] + corpus_cases()
    jacobian = corrupted_jacobian if args.fault == "saltation-sign" else compute_jacobian
    summary = run_verify(cases, tol_scale=args.tol_scale, jacobian=jacobian, orbit_tol=config.solver.tol)
    print(json.dumps(summary, indent=2))
    for check in summary["checks"]:
        if not check["passed"]:
            print(
                f"FAILED {check['case']} {check['check']}: residual {check['residual']} "
                f"> tolerance {check['tolerance']} {check['detail']}",
                file=sys.stderr,
            )
    return EXIT_OK if summary["passed"] else EXIT_VERIFY_FAILED


def build_parser():
    parser = _Parser(prog="pwmstab", description="Sampled-data stability analysis of current-mode PWM converters.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="key = value configuration file")
        p.add_argument("--out-dir", default=None, help="output directory (default: output.dir)")
        p.add_argument("--format", choices=OUTPUT_FORMATS, default=None)
        p.set_defaults(func=func)
        return p

    add("analyze", cmd_analyze, "solve the orbit and compare the stability criteria")
    p = add("sweep", cmd_sweep, "sweep one parameter and locate criterion boundaries")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for grid points")
    p = add("simulate", cmd_simulate, "run the switched-system simulator")
    p.add_argument("--cycles", type=int, required=True)
    p.add_argument("--perturb", type=float, default=0.0, help="relative perturbation of the start state")
    p = add("verify", cmd_verify, "run the oracle cross-check suite")
    p.add_argument("--tol-scale", type=float, default=1.0, help="multiply every check tolerance")
    p.add_argument("--fault", choices=("saltation-sign",), default=None, help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ValidationError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return args.func(config, args)


if __name__ == "__main__":
    sys.exit(main())
