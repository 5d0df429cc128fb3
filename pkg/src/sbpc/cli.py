"""Command-line entry point.

::

    sbpc run <scenario> [-o DIR] [--algorithm A] [--timing]
    sbpc bound <scenario>
    sbpc verify <scenario> [--runs N] [--halve-bound]
    sbpc sweep <scenario> --param {omega,d_bar,L} --values v1,v2,... [-o DIR]

Exit status is 0 on success, 1 on invalid input or I/O failure and 2 when a
run aborts on an infeasible finite-horizon problem (``verify`` returns 2 when
the bound is violated). ``SBPC_WORKERS`` sets the number of processes used by
``verify``.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

from .blocking import num_blocks
from .bounds import beta_sequence, scenario_moduli, verify_bound
from .controller import simulate
from .dynamics import TrainModel
from .kernels import BACKEND
from .scenario import ScenarioError, parse_scenario

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _fail(msg: str) -> int:
    print(f"sbpc: error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _summary_text(scenario, log) -> str:
    s = log.summary()
    lines = [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in s.items()]
    lines.append(f"k_f = {scenario.k_f}")
    lines.append(f"L = {scenario.L}")
    lines.append(f"d_bar = {scenario.d_bar!r}")
    lines.append(f"seed = {scenario.seed}")
    lines.append(f"final_state = {log.states[-1][0]!r}, {log.states[-1][1]!r}")
    lines.append(f"terminal_set_reached = {scenario.terminal.contains(log.states[-1])}")
    return "\n".join(lines) + "\n"


def _plot_text(scenario, log) -> str:
    model = scenario.built_model
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "position", "speed", "input", "speed_limit"])
    for k, x in enumerate(log.states):
        u = repr(log.steps[k].u_applied) if k < len(log.steps) else ""
        if isinstance(model, TrainModel):
            limit = repr(model.track.speed_limit(x[0]))
        else:
            limit = "" if math.isinf(model.v_max) else repr(model.v_max)
        w.writerow([k, repr(x[0]), repr(x[1]), u, limit])
    return buf.getvalue()


def cmd_run(args) -> int:
    scenario = parse_scenario(args.scenario)
    log = simulate(scenario, args.algorithm)
    out = Path(args.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "steps.csv").write_text(log.to_csv(timing=args.timing))
        (out / "summary.txt").write_text(_summary_text(scenario, log))
        (out / "plot.csv").write_text(_plot_text(scenario, log))
    except OSError as exc:
        return _fail(f"cannot write outputs to {out}: {exc}")
    print(f"{log.algorithm}: {log.status}, terminal distance {log.terminal_delta!r}, "
          f"total cost {log.total_cost!r}")
    if not log.completed:
        print(log.message, file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_bound(args) -> int:
    scenario = parse_scenario(args.scenario)
    moduli = scenario_moduli(scenario)
    betas = beta_sequence(moduli, scenario.d_bar, scenario.k_f)
    print(f"moduli: {moduli.note}")
    if moduli.raw is not None:
        print(f"raw K_x = {moduli.raw[0]!r}, raw K_u = {moduli.raw[1]!r}")
    print(f"a_x slope = {moduli.a_x.slope!r}, a_u slope = {moduli.a_u.slope!r}")
    tail = betas[-5:]
    first = len(betas) - len(tail)
    for i, b in enumerate(tail, start=first):
        print(f"beta_{i} = {b!r}")
    print(f"beta_total = {math.fsum(betas)!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    scenario = parse_scenario(args.scenario)
    report = verify_bound(scenario, args.runs, bound_scale=0.5 if args.halve_bound else 1.0)
    sys.stdout.write(report.to_text())
    return EXIT_OK if report.passed else EXIT_INFEASIBLE


SWEEP_COLUMNS = ("value", "terminal_delta", "total_cost", "mean_solve_ms", "gamma0", "nodes0", "candidates0",
                 "status")


def _sweep_row(scenario, param: str, value: str):
    if param == "omega":
        s, v = scenario.with_(algorithm="multiobjective", omega=float(value)), float(value)
    elif param == "d_bar":
        s, v = scenario.with_(d_bar=float(value)), float(value)
    else:
        s, v = scenario.with_(L=int(value)), int(value)
    log = simulate(s)
    steps = log.steps
    mean_ms = math.fsum(st.wall_ms for st in steps) / len(steps) if steps else math.nan
    first = steps[0] if steps else None
    candidates = len(s.inputs.actions) ** num_blocks(0, s.k_f, s.policy) if s.inputs.discrete else ""
    return [
        v, repr(log.terminal_delta), repr(log.total_cost), f"{mean_ms:.3f}",
        repr(first.gamma_lb) if first else "", first.nodes if first else "", candidates, log.status,
    ]


def cmd_sweep(args) -> int:
    scenario = parse_scenario(args.scenario)
    values = [v for v in args.values.split(",") if v.strip()]
    if not values:
        return _fail("--values needs at least one value")
    try:
        rows = [_sweep_row(scenario, args.param, v.strip()) for v in values]
    except (ValueError, ScenarioError) as exc:
        return _fail(str(exc))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((args.param,) + SWEEP_COLUMNS[1:])
    w.writerows(rows)
    sys.stdout.write(buf.getvalue())
    if args.output:
        out = Path(args.output)
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"sweep_{args.param}.csv").write_text(buf.getvalue())
        except OSError as exc:
            return _fail(f"cannot write outputs to {out}: {exc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbpc", description="Shrinking-horizon blocked predictive control.")
    parser.add_argument("--version", action="version", version=f"%(prog)s (search kernel: {BACKEND})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one closed loop and write logs")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", default="out", help="output directory (default: out)")
    p.add_argument("--algorithm", choices=("nominal", "relaxed", "multiobjective"),
                   help="override the scenario's algorithm")
    p.add_argument("--timing", action="store_true", help="record wall-clock solve times in the step log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bound", help="print the terminal-distance bound")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("verify", help="Monte Carlo check of the terminal-distance bound")
    p.add_argument("scenario")
    p.add_argument("--runs", type=int, help="number of runs (default: scenario value)")
    p.add_argument("--halve-bound", action="store_true",
                   help="debug: compare against half the bound to exercise the violation detector")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="repeat a run over values of one parameter")
    p.add_argument("scenario")
    p.add_argument("--param", required=True, choices=("omega", "d_bar", "L"))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("-o", "--output", help="also write sweep_<param>.csv here")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        return _fail(str(exc))
    except OSError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
