"""Command-line front end: six experiment subcommands over one configuration.

Every subcommand reads the same sectioned key = value configuration (all
keys optional, defaults supplied), writes CSV reports into --out, and ends
with a run_summary.csv sidecar naming each check outcome plus the config
digest.  Wall time appears only in the sidecar, so report bodies from
identical config + seed are byte-identical no matter how often or with how
many workers the command runs.

Exit codes: 0 every check passed, 1 at least one FAIL, 2 the configuration
or an input file is unusable, 3 nothing failed but some check could not
reach a verdict.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .config import ExperimentConfig, default_config, parse_config
from .controls import ControlPath
from .dynamics import convergence_report, solve_transport
from .errors import ConfigError, TransportHJBError
from .grid import GridFunction
from .hjb import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    RADIAL_QUADRATIC,
    SearchSettings,
    Test1Function,
    Test2Function,
    add_localized_bump,
    comparison_probe,
    seed_states,
    subsolution_residual,
    supersolution_residual,
)
from .operators import build_weak_norm
from .props import run_props
from .reporting import (
    GAP_TABLE_HEADER,
    VALUE_HEADER,
    RunSummary,
    read_state,
    write_operator_dump,
    write_rows,
    write_run_summary,
    write_trajectory,
    write_verification,
)
from .value import LatticeSpec, ValueEvaluator, bellman_report, estimate_value

Outcomes = list[tuple[str, str]]


def _parse_n_list(text: str) -> list[int]:
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            n = int(token)
        except ValueError:
            raise ConfigError(f"invalid --n-list entry: {token!r}") from None
        if n < 1:
            raise ConfigError(f"--n-list entries must be positive, got {token!r}")
        out.append(n)
    if not out:
        raise ConfigError("--n-list needs at least one integer")
    return out


def cmd_simulate(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> Outcomes:
    """Roll the state solver: full trajectory, or per-n boundary-layer gaps."""
    problem = cfg.make_problem()
    bounds = cfg.make_bounds()
    grid = problem.grid

    if args.n_list is not None:
        # gap table: boundary value traded for an injected layer of width 1/n,
        # driven at the largest admissible boundary level from rest
        n_list = _parse_n_list(args.n_list)
        for n in n_list:
            if 1.0 / n < 2.0 * grid.dr:
                raise ConfigError(
                    f"--n-list entry {n} gives a layer thinner than two grid "
                    f"cells (dr = {grid.dr:g}); raise grid_points or drop it"
                )
        horizon = min(cfg.horizon, problem.sbar / problem.beta)
        steps = problem.time_steps_of(horizon, what="gap-table horizon")
        path = ControlPath.constant(grid, steps, bounds.gamma_norm, 0.0)
        report = convergence_report(problem, GridFunction.zero(grid), path, n_list)
        write_rows(
            str(out / "mollifier_gaps.csv"),
            GAP_TABLE_HEADER,
            zip(report.layer_indices, report.sup_gaps),
        )
        return [("mollifier-gap-table", PASS)]

    x0 = GridFunction.from_callable(grid, lambda r: np.sin(np.pi * r / problem.sbar))
    steps = problem.time_steps_of(cfg.horizon, what="config horizon")
    path = ControlPath.constant(grid, steps, bounds.gamma_hi, bounds.lambda_hi)
    traj = solve_transport(problem, x0, path)
    write_trajectory(str(out / "trajectory.csv"), traj.times, grid.nodes, traj.states)
    return [("trajectory", PASS)]


def cmd_value(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> Outcomes:
    """Estimate the discounted value from an initial state given as CSV."""
    problem = cfg.make_problem()
    bounds = cfg.make_bounds()
    lattice = cfg.make_lattice()
    cost = cfg.make_cost(build_weak_norm(problem))
    x0 = read_state(args.state, problem.grid)
    est = estimate_value(
        problem, cost, bounds, lattice, x0, cfg.horizon, budget=cfg["run"]["eval_budget"]
    )
    write_rows(
        str(out / "value.csv"),
        VALUE_HEADER,
        [
            (
                "initial-state",
                est.value,
                est.gap_lattice,
                est.gap_tail,
                lattice.n_boundary,
                lattice.n_distributed,
                lattice.segments,
                est.horizon,
            )
        ],
    )
    return [("value-estimate", PASS)]


def cmd_dpp(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> Outcomes:
    """One-segment dynamic-programming split on a batch of random states."""
    problem = cfg.make_problem()
    bounds = cfg.make_bounds()
    lattice = cfg.make_lattice()
    bf = build_weak_norm(problem)
    cost = cfg.make_cost(bf)
    slack = cfg["tolerances"]["dpp_slack"]
    budget = cfg["run"]["eval_budget"]
    states = seed_states(bf, 5, SearchSettings(), seed=cfg.seed + 404)
    rows = []
    for k, x0 in enumerate(states):
        rep = bellman_report(problem, cost, bounds, lattice, x0, cfg.horizon, budget)
        ok = rep.residual <= rep.combined_gap + slack
        rows.append(
            (
                "dpp-residual",
                f"state-{k}",
                rep.residual,
                rep.combined_gap,
                slack,
                PASS if ok else FAIL,
            )
        )
    write_verification(str(out / "dpp.csv"), rows)
    return [(f"dpp-residual:{row[1]}", row[5]) for row in rows]


def cmd_hjb_check(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> Outcomes:
    """Viscosity inequalities at located extrema, plus a comparison probe.

    The candidate is the lattice value itself; its tail gap feeds the verdict
    slack.  With --negative-control the candidate is corrupted by a localized
    bump centered on the first search seed, which must flip at least one
    check to FAIL.  A zero search budget skips the extremum searches and
    reports both checks INCONCLUSIVE.
    """
    problem = cfg.make_problem()
    bounds = cfg.make_bounds()
    lattice = cfg.make_lattice()
    bf = build_weak_norm(problem)
    cost = cfg.make_cost(bf)
    run = cfg["run"]
    tol = cfg["tolerances"]

    rows: list[tuple[str, str, float, float, float, str]] = []
    if run["search_budget"] <= 0:
        rows = [
            ("subsolution", "search-disabled", 0.0, 0.0, 0.0, INCONCLUSIVE),
            ("supersolution", "search-disabled", 0.0, 0.0, 0.0, INCONCLUSIVE),
        ]
        write_verification(str(out / "hjb_check.csv"), rows)
        return [(f"{row[0]}:{row[1]}", row[5]) for row in rows]

    settings = SearchSettings(stationarity_tol=tol["stationarity_tol"])
    evaluator = ValueEvaluator(
        problem, cost, bounds, lattice, cfg.horizon, budget=run["eval_budget"]
    )
    anchor = GridFunction(
        problem.grid, 0.15 * bf.eigenvectors[:, 0] + 0.1 * bf.eigenvectors[:, 2]
    )
    phi = Test1Function.quadratic(bf, anchor, scale=0.5)
    g = Test2Function(RADIAL_QUADRATIC, 0.25)
    seeds = seed_states(bf, 5, settings, seed=cfg.seed + 11)

    u: Callable[[GridFunction], float] = evaluator
    instance = "value-candidate"
    if args.negative_control:
        u = add_localized_bump(evaluator, seeds[0], height=0.8, width=0.6)
        instance = "corrupted"

    for check in (subsolution_residual, supersolution_residual):
        report = check(
            problem,
            bf,
            u,
            phi,
            g,
            seeds,
            cost,
            bounds,
            evaluator.gap_tail(),
            settings,
            instance=instance,
        )
        rows.append(
            (report.check, report.instance, report.lhs, report.rhs, report.slack, report.outcome)
        )

    # two independent discretizations must agree within their summed gaps
    probes = seed_states(bf, 3, settings, seed=cfg.seed + 12)
    alt = LatticeSpec(
        lattice.n_boundary + 1, lattice.n_distributed, max(2, lattice.segments // 2)
    )
    comp = comparison_probe(
        problem,
        cost,
        bounds,
        lattice,
        cfg.horizon,
        alt,
        cfg.horizon,
        probes,
        budget=run["eval_budget"],
    )
    for row in comp.rows:
        rows.append(
            (
                "comparison",
                f"probe-{row.probe}",
                abs(row.value_one - row.value_two),
                row.gap_one + row.gap_two,
                0.0,
                PASS if row.passed else FAIL,
            )
        )

    write_verification(str(out / "hjb_check.csv"), rows)
    return [(f"{row[0]}:{row[1]}", row[5]) for row in rows]


def cmd_props(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> Outcomes:
    """The twelve-check property suite, one verification row per check."""
    rows = run_props(cfg, workers=args.workers)
    write_verification(str(out / "props.csv"), rows)
    return [(row[0], row[5]) for row in rows]


def cmd_operators(cfg: ExperimentConfig, out: Path, args: argparse.Namespace) -> Outcomes:
    """Dump the weak-norm matrix and its symmetric square root as triplets."""
    problem = cfg.make_problem()
    bf = build_weak_norm(problem)
    write_operator_dump(str(out / "weak_norm.csv"), bf.matrix.entries)
    write_operator_dump(str(out / "weak_norm_half.csv"), bf.half.entries)
    return [("weak-norm-dump", PASS)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transport-hjb",
        description="Experiments for the boundary-controlled transport "
        "control problem: state solver, value enumeration, dynamic "
        "programming and viscosity checks, property suite, operator dumps.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config",
        metavar="PATH",
        default=None,
        help="experiment configuration file; built-in defaults when omitted",
    )
    common.add_argument(
        "--out", metavar="DIR", default=".", help="directory for CSV reports (default: .)"
    )
    common.add_argument(
        "--seed", metavar="N", type=int, default=None, help="override the [run] seed key"
    )
    common.add_argument(
        "--workers",
        metavar="N",
        type=int,
        default=1,
        help="worker processes for independent checks; never changes results",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser(
        "simulate",
        parents=[common],
        help="roll the state solver; --n-list switches to the boundary-layer gap table",
    )
    p.add_argument(
        "--n-list",
        metavar="A,B,C",
        default=None,
        help="comma-separated layer indices n for the gap table (layer width 1/n)",
    )
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser(
        "value", parents=[common], help="estimate the discounted value from a state CSV"
    )
    p.add_argument("state", metavar="STATE_CSV", help="initial state: CSV with header r,value")
    p.set_defaults(handler=cmd_value)

    p = sub.add_parser(
        "dpp", parents=[common], help="dynamic-programming split residuals on random states"
    )
    p.set_defaults(handler=cmd_dpp)

    p = sub.add_parser(
        "hjb-check", parents=[common], help="sub/supersolution checks and a comparison probe"
    )
    p.add_argument(
        "--negative-control",
        action="store_true",
        help="corrupt the candidate with a localized bump; checks must FAIL",
    )
    p.set_defaults(handler=cmd_hjb_check)

    p = sub.add_parser("props", parents=[common], help="run the full property suite")
    p.set_defaults(handler=cmd_props)

    p = sub.add_parser(
        "operators", parents=[common], help="dump the weak-norm operator and its square root"
    )
    p.set_defaults(handler=cmd_operators)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config) if args.config else default_config()
        if args.seed is not None:
            cfg = cfg.replaced("run", "seed", args.seed)
        if args.workers < 1:
            raise ConfigError(f"--workers must be at least 1, got {args.workers}")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        started = time.perf_counter()
        outcomes = args.handler(cfg, out, args)
        summary = RunSummary(
            outcomes=tuple(outcomes),
            wall_seconds=time.perf_counter() - started,
            config_digest=cfg.digest(),
        )
        write_run_summary(str(out / "run_summary.csv"), summary)
        for name, outcome in outcomes:
            print(f"{outcome:<13s} {name}")
        return summary.exit_code()
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except TransportHJBError as err:
        # domain preconditions violated by the requested run, not a crash
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
