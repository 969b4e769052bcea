"""The property suite behind the `props` subcommand: twelve named checks.

Each check produces exactly one verification row (check_name, instance_id,
lhs, rhs, slack, outcome).  The rows cover, in order: the two difference
quotient rates of the shift semigroup, the control-uniform small-time state
bound, convergence of the boundary-layer approximation, the chain-rule
pairing identity along trajectories, weak-norm trajectory stability, the
weak-norm Lipschitz property of the value, the two test-function expansion
rates, the directional gradient bound at a located extremum, the adjoint
domination of the weak-norm operator, and the linear-profile gap of the
mollified trace functional.

Rows are pure functions of the configuration, so the suite can fan out over
a process pool and still serialize identically: workers only change who
computes a row, never what it contains.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import hjb
from .config import ExperimentConfig
from .controls import ControlBounds, ControlPath
from .costs import RunningCost
from .dynamics import convergence_report, small_time_bound, solve_transport
from .grid import GridFunction, dq_energy, dq_pairing
from .hjb import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    RADIAL_QUADRATIC,
    SearchSettings,
    Test1Function,
    Test2Function,
)
from .operators import (
    WeakNormFactorization,
    build_weak_norm,
    check_adjoint_domination,
    mollified_trace,
)
from .problem import ProblemSpec
from .value import LatticeSpec, trajectory_gronwall_report, value_lipschitz_probe

Row = tuple[str, str, float, float, float, str]


@dataclass(frozen=True)
class PropsContext:
    cfg: ExperimentConfig
    problem: ProblemSpec
    bf: WeakNormFactorization
    bounds: ControlBounds
    lattice: LatticeSpec
    cost: RunningCost

    @property
    def tol(self) -> dict[str, float]:
        return self.cfg["tolerances"]

    @property
    def run(self) -> dict[str, Any]:
        return self.cfg["run"]


def build_context(cfg: ExperimentConfig) -> PropsContext:
    problem = cfg.make_problem()
    bf = build_weak_norm(problem)
    return PropsContext(
        cfg=cfg,
        problem=problem,
        bf=bf,
        bounds=cfg.make_bounds(),
        lattice=cfg.make_lattice(),
        cost=cfg.make_cost(bf),
    )


def _halving_shifts(grid_node_count: int) -> list[int]:
    """Grid-step multiples 16, 8, 4, 2, 1 trimmed to what the grid allows."""
    ks = [k for k in (16, 8, 4, 2, 1) if k < (grid_node_count - 1) // 2]
    return ks or [1]


def check_difference_energy_rate(ctx: PropsContext) -> Row:
    p = ctx.problem
    x = GridFunction(p.grid, p.grid.nodes.copy())
    dr, sbar = p.grid.dr, p.sbar
    vals, exact = [], []
    for k in _halving_shifts(p.grid.node_count):
        s = k * dr
        vals.append(dq_energy(x, s))
        exact.append(s * (sbar - s))
    dev = max(abs(v - e) for v, e in zip(vals, exact))
    noise = ctx.tol["monotone_noise_tol"]
    monotone = all(vals[i + 1] <= vals[i] + noise for i in range(len(vals) - 1))
    ok = dev <= ctx.tol["energy_rate_tol"] and monotone
    return (
        "difference-energy-rate",
        "linear-profile",
        float(dev),
        ctx.tol["energy_rate_tol"],
        noise,
        PASS if ok else FAIL,
    )


def check_difference_pairing_rate(ctx: PropsContext) -> Row:
    p = ctx.problem
    x = GridFunction(p.grid, p.grid.nodes.copy())
    dr, sbar = p.grid.dr, p.sbar
    ks = [k for k in _halving_shifts(p.grid.node_count) if 2 * k < p.grid.node_count - 1]
    vals, exact = [], []
    for k in ks:
        s = k * dr
        vals.append(dq_pairing(x, s))
        exact.append(sbar * (sbar - 2.0 * s) / 2.0)
    dev = max(abs(v - e) for v, e in zip(vals, exact))
    noise = ctx.tol["monotone_noise_tol"]
    # limit is sbar^2/2 from below, so the halving sequence must not decrease
    monotone = all(vals[i + 1] >= vals[i] - noise for i in range(len(vals) - 1))
    ok = dev <= ctx.tol["pairing_rate_tol"] and monotone
    return (
        "difference-pairing-rate",
        "linear-profile",
        float(dev),
        ctx.tol["pairing_rate_tol"],
        noise,
        PASS if ok else FAIL,
    )


def check_small_time_uniform_bound(ctx: PropsContext) -> Row:
    p, bounds = ctx.problem, ctx.bounds
    r = p.grid.nodes
    x0 = GridFunction(p.grid, np.sin(np.pi * r / p.sbar))
    corners = [
        (bounds.gamma_lo, bounds.lambda_lo),
        (bounds.gamma_lo, bounds.lambda_hi),
        (bounds.gamma_hi, bounds.lambda_lo),
        (bounds.gamma_hi, bounds.lambda_hi),
        (0.5 * (bounds.gamma_lo + bounds.gamma_hi), 0.5 * (bounds.lambda_lo + bounds.lambda_hi)),
    ]
    w = p.grid.trapezoid_weights
    worst = (-np.inf, 0.0, 0.0)
    for steps in (4, 8, 16):
        s = steps * p.dt
        bound = small_time_bound(p, x0, bounds, s)
        for a, al in corners:
            path = ControlPath.constant(p.grid, steps, a, al)
            traj = solve_transport(p, x0, path)
            diff = traj.states[steps] - x0.values
            dev = float(np.sqrt(max(np.dot(w, diff * diff), 0.0)))
            if dev - bound > worst[0]:
                worst = (dev - bound, dev, bound)
    slack = ctx.tol["uniform_bound_slack"]
    return (
        "small-time-uniform-bound",
        "sine-profile-corner-controls",
        worst[1],
        worst[2],
        slack,
        PASS if worst[0] <= slack else FAIL,
    )


def check_mollifier_state_convergence(ctx: PropsContext) -> Row:
    p, bounds = ctx.problem, ctx.bounds
    name = "mollifier-state-convergence"
    gamma = bounds.gamma_norm
    n_final = int(ctx.run["n_final"])
    if gamma == 0.0:
        # both dynamics coincide; nothing to converge
        return (name, "zero-boundary-box", 0.0, 0.0, 0.0, PASS)
    layers = []
    n = 8
    while n <= n_final:
        if 1.0 / n >= 2.0 * p.grid.dr:
            layers.append(n)
        n *= 2
    if len(layers) < 2:
        return (name, "grid-cannot-resolve-layers", float("nan"), float("nan"), 0.0, INCONCLUSIVE)
    horizon = p.dt * p.time_steps_of(min(ctx.cfg.horizon, p.sbar / p.beta), what="horizon")
    steps = p.time_steps_of(horizon, what="horizon")
    path = ControlPath.constant(p.grid, steps, gamma, 0.0)
    x0 = GridFunction.zero(p.grid)
    report = convergence_report(p, x0, path, layers)
    rhs = ctx.tol["state_convergence_margin"] * gamma * float(np.sqrt(2.0 / (5.0 * layers[-1])))
    ok = report.improved and report.final_gap <= rhs
    return (name, f"layers-8-to-{layers[-1]}", report.final_gap, rhs, 0.0, PASS if ok else FAIL)


def _bang_bang_path(p: ProblemSpec, bounds: ControlBounds, steps: int) -> ControlPath:
    f1 = max(1, round(0.15 * (p.grid.node_count - 1)))
    f2 = max(f1 + 1, round(0.30 * (p.grid.node_count - 1)))
    a = np.full(steps, bounds.gamma_hi)
    a[f1 : min(f2, steps)] = bounds.gamma_lo
    return ControlPath.from_step_values(p.grid, a, np.zeros(steps))


def check_chain_rule_identity(ctx: PropsContext) -> Row:
    p, bf = ctx.problem, ctx.bf
    r = p.grid.nodes / p.sbar
    x0 = GridFunction(p.grid, (r * (1.0 - r)) ** 2)
    phi = Test1Function.quadratic(bf, GridFunction.zero(p.grid), scale=1.0)
    steps = max(2, round(0.5 * (p.grid.node_count - 1)))
    path = _bang_bang_path(p, ctx.bounds, steps)
    residual = hjb.lyapunov_identity_residual(p, bf, phi, x0, path, steps * p.dt)
    tol = ctx.tol["chain_rule_tol"]
    return (
        "chain-rule-identity",
        "bang-bang-energy",
        float(residual),
        tol,
        0.0,
        PASS if residual <= tol else FAIL,
    )


def check_trajectory_stability(ctx: PropsContext) -> Row:
    p, bf, bounds = ctx.problem, ctx.bf, ctx.bounds
    rng = np.random.default_rng(ctx.cfg.seed + 101)
    r = p.grid.nodes
    steps = p.grid.node_count - 1
    horizon = steps * p.dt
    a_vals = rng.uniform(bounds.gamma_lo, bounds.gamma_hi, size=steps)
    al_vals = rng.uniform(bounds.lambda_lo, bounds.lambda_hi, size=steps)
    path = ControlPath.from_step_values(p.grid, a_vals, al_vals)

    def smooth() -> GridFunction:
        coefs = rng.normal(size=3)
        vals = sum(c * np.sin((j + 1) * np.pi * r / p.sbar) for j, c in enumerate(coefs))
        return GridFunction(p.grid, vals)

    worst = (-np.inf, 0.0, 0.0)
    all_forgotten = True
    for _ in range(5):
        rep = trajectory_gronwall_report(p, bf, smooth(), smooth(), path, horizon)
        all_forgotten = all_forgotten and rep.forgotten_exactly
        if rep.sup_energy - rep.bound > worst[0]:
            worst = (rep.sup_energy - rep.bound, rep.sup_energy, rep.bound)
    slack = ctx.tol["stability_slack"]
    ok = worst[0] <= slack and all_forgotten
    return (
        "trajectory-stability",
        "random-pairs-shared-path",
        worst[1],
        worst[2],
        slack,
        PASS if ok else FAIL,
    )


def check_value_lipschitz(ctx: PropsContext) -> Row:
    p, bf = ctx.problem, ctx.bf
    states = hjb.seed_states(bf, 10, SearchSettings(), seed=ctx.cfg.seed + 202)
    pairs = [(states[2 * i], states[2 * i + 1]) for i in range(5)]
    rows = value_lipschitz_probe(
        p,
        ctx.cost,
        ctx.bounds,
        ctx.lattice,
        bf,
        pairs,
        ctx.cfg.horizon,
        ctx.cost.weak_lipschitz,
        budget=int(ctx.run["eval_budget"]),
    )
    worst = max(rows, key=lambda row: row.lhs - row.rhs)
    slack = ctx.tol["lipschitz_slack"]
    ok = all(row.lhs <= row.rhs + slack for row in rows)
    return (
        "value-lipschitz",
        "random-pairs",
        worst.lhs,
        worst.rhs,
        slack,
        PASS if ok else FAIL,
    )


def _boundary_family(bounds: ControlBounds) -> list[float]:
    gamma = bounds.gamma_norm
    return [gamma, 0.75 * gamma, 0.5 * gamma, 0.25 * gamma, 0.0]


def check_radial_rate(ctx: PropsContext) -> Row:
    p = ctx.problem
    r = p.grid.nodes / p.sbar
    x0 = GridFunction(p.grid, (r * (1.0 - r)) ** 2)
    g = Test2Function(RADIAL_QUADRATIC, 0.25)
    dt = p.dt
    report = hjb.test2_rate_check(
        p,
        g,
        x0,
        ctx.bounds,
        _boundary_family(ctx.bounds),
        [8 * dt, 4 * dt, 2 * dt, dt],
        noise_tol=ctx.tol["radial_rate_tol"],
    )
    excesses = [row.excess for row in report.rows]
    worst_step = max(
        (excesses[i + 1] - excesses[i] for i in range(len(excesses) - 1)), default=0.0
    )
    return (
        "radial-rate",
        "worst-boundary-quadratic",
        float(worst_step),
        0.0,
        ctx.tol["radial_rate_tol"],
        PASS if report.passed else FAIL,
    )


def check_smooth_rate(ctx: PropsContext) -> Row:
    p, bf = ctx.problem, ctx.bf
    phi, x0 = hjb.rate_probe_instance(bf)
    dt = p.dt
    report = hjb.test1_rate_check(
        p, bf, phi, x0, _boundary_family(ctx.bounds), [8 * dt, 4 * dt, 2 * dt, dt]
    )
    finest = max(row.lhs for row in report.rows_at(dt))
    tol = ctx.tol["smooth_rate_tol"]
    ok = report.passed and finest <= tol
    return (
        "smooth-rate",
        "trace-free-quadratic",
        float(finest),
        tol,
        0.0,
        PASS if ok else FAIL,
    )


def check_gradient_range(ctx: PropsContext) -> Row:
    bf = ctx.bf
    name = "gradient-range"
    budget = int(ctx.run["search_budget"])
    if budget == 0:
        return (name, "search-disabled", float("nan"), float("nan"), 0.0, INCONCLUSIVE)
    settings = SearchSettings(stationarity_tol=ctx.tol["stationarity_tol"])
    kappa = 2.0
    phi, _ = hjb.rate_probe_instance(bf)
    g = Test2Function(RADIAL_QUADRATIC, 0.25)

    def candidate(x: GridFunction) -> float:
        # synthetic certified weak-norm-Lipschitz candidate, constant kappa
        return kappa * bf.norm(x)

    def objective(x: GridFunction) -> float:
        return candidate(x) - phi.value(x) - g.value(x)

    seed = hjb.seed_states(bf, 1, settings, seed=ctx.cfg.seed + 303)[0]
    ext = hjb.locate_extremum(bf, objective, seed, settings)
    if ext.evaluations > budget:
        return (name, "search-over-budget", float("nan"), float("nan"), 0.0, INCONCLUSIVE)
    if not ext.converged:
        return (name, "search-not-stationary", float("nan"), float("nan"), 0.0, INCONCLUSIVE)
    gradient = phi.gradient(ext.point) + g.gradient(ext.point)
    directions = hjb.default_directions(bf, count=8, seed=ctx.cfg.seed + 304)
    slack = ctx.tol["gradient_range_slack"]
    report = hjb.gradient_range_check(bf, gradient, kappa, directions, slack=slack)
    tight = max(
        report.rows,
        key=lambda row: row.pairing - report.lipschitz * row.weak_norm,
    )
    return (
        name,
        "searched-extremum",
        tight.pairing,
        report.lipschitz * tight.weak_norm,
        slack,
        PASS if report.passed else FAIL,
    )


def check_adjoint_domination_row(ctx: PropsContext) -> Row:
    tol = ctx.tol["domination_tol"]
    report = check_adjoint_domination(ctx.bf, tol=tol)
    return (
        "adjoint-domination",
        f"lambda-{ctx.problem.lambda_b:g}",
        report.min_eigenvalue,
        -tol,
        0.0,
        PASS if report.passed else FAIL,
    )


def check_trace_mollifier_gap(ctx: PropsContext) -> Row:
    p = ctx.problem
    name = "trace-mollifier-gap"
    n = 16
    while n > 1 and (1.0 / n < 2.0 * p.grid.dr or 1.0 / n > p.sbar):
        n //= 2
    if 1.0 / n < 2.0 * p.grid.dr or 1.0 / n > p.sbar:
        return (name, "grid-cannot-resolve-layer", float("nan"), float("nan"), 0.0, INCONCLUSIVE)
    x = GridFunction(p.grid, p.grid.nodes.copy())
    gap = abs(mollified_trace(x, n) - float(x.values[0]))
    lhs = abs(gap - 1.0 / (3.0 * n))
    tol = ctx.tol["trace_gap_tol"]
    return (
        name,
        f"linear-profile-n{n}",
        float(lhs),
        tol,
        0.0,
        PASS if lhs <= tol else FAIL,
    )


CHECKS: tuple[tuple[str, Callable[[PropsContext], Row]], ...] = (
    ("difference-energy-rate", check_difference_energy_rate),
    ("difference-pairing-rate", check_difference_pairing_rate),
    ("small-time-uniform-bound", check_small_time_uniform_bound),
    ("mollifier-state-convergence", check_mollifier_state_convergence),
    ("chain-rule-identity", check_chain_rule_identity),
    ("trajectory-stability", check_trajectory_stability),
    ("value-lipschitz", check_value_lipschitz),
    ("radial-rate", check_radial_rate),
    ("smooth-rate", check_smooth_rate),
    ("gradient-range", check_gradient_range),
    ("adjoint-domination", check_adjoint_domination_row),
    ("trace-mollifier-gap", check_trace_mollifier_gap),
)

_CTX_CACHE: dict[str, PropsContext] = {}


def _cached_context(cfg: ExperimentConfig) -> PropsContext:
    key = cfg.digest()
    if key not in _CTX_CACHE:
        _CTX_CACHE.clear()  # one config per process is the common case
        _CTX_CACHE[key] = build_context(cfg)
    return _CTX_CACHE[key]


def _run_one(values: dict[str, dict[str, Any]], index: int) -> Row:
    ctx = _cached_context(ExperimentConfig(values=values))
    return CHECKS[index][1](ctx)


def run_props(cfg: ExperimentConfig, workers: int = 1) -> list[Row]:
    """All twelve rows, in registry order, independent of the worker count."""
    indices = range(len(CHECKS))
    if workers <= 1:
        ctx = _cached_context(cfg)
        return [fn(ctx) for _, fn in CHECKS]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_run_one, cfg.values, i) for i in indices]
        return [f.result() for f in futures]
