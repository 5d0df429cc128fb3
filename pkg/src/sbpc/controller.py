"""Closed-loop shrinking-horizon blocked predictive control.

Three engines share one loop: at every step ``k`` the controller measures the
state, solves a finite-horizon problem from it, applies the first input of the
optimized plan and lets the plant evolve under ``u + d``.

* ``nominal`` -- hard terminal constraint; aborts if a solve becomes
  infeasible (possible only under disturbance).
* ``relaxed`` -- two solves per step: the smallest reachable terminal distance
  ``gamma_lb``, then the cheapest plan whose terminal distance does not exceed
  it.
* ``multiobjective`` -- one solve of ``cost + omega * distance``.

Each solve is warm-started with the tail of the previous plan.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .blocking import BlockedSequence, warm_start_tail
from .dynamics import ModelEvaluationError, step, stage_cost
from .ocp import (
    HardInfeasibleError,
    OcpProblem,
    SolveResult,
    distance_to_set,
    solve_min_gamma,
    solve_multiobjective,
    solve_nominal,
    solve_relaxed,
)

__all__ = [
    "ClosedLoopLog",
    "DisturbanceSpec",
    "StepRecord",
    "LOG_COLUMNS",
    "read_log_csv",
    "replay",
    "run_multiobjective",
    "run_nominal",
    "run_relaxed",
    "sample_disturbance",
    "simulate",
]

LOG_COLUMNS = ("k", "x1", "x2", "u_cmd", "u_applied", "d", "gamma_lb", "solve_cost", "nodes", "wall_ms")


@dataclass(frozen=True)
class DisturbanceSpec:
    """Bounded additive input disturbance ``|d| <= d_bar``.

    ``distribution`` is ``uniform`` on ``[-d_bar, d_bar]``, ``extreme``
    (``+-d_bar`` with random sign) or ``fixed`` (``sequence[k]``).
    """

    d_bar: float = 0.0
    distribution: str = "uniform"
    seed: int = 0
    sequence: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.d_bar >= 0:
            raise ValueError("d_bar must be >= 0")
        if self.distribution not in ("uniform", "extreme", "fixed"):
            raise ValueError(f"unknown disturbance distribution {self.distribution!r}")
        if any(abs(d) > self.d_bar for d in self.sequence):
            raise ValueError("fixed disturbance sequence exceeds d_bar")


def sample_disturbance(spec: DisturbanceSpec, k: int, run_index: int = 0) -> float:
    """Draw ``d(k)``; the stream depends only on ``(seed, run_index, k)``."""
    if spec.distribution == "fixed":
        return float(spec.sequence[k])
    if spec.d_bar == 0.0:
        return 0.0
    rng = np.random.default_rng([spec.seed, run_index, k])
    if spec.distribution == "uniform":
        return float(rng.uniform(-spec.d_bar, spec.d_bar))
    return spec.d_bar if rng.random() < 0.5 else -spec.d_bar


@dataclass
class StepRecord:
    k: int
    x: tuple[float, float]
    u_cmd: float
    u_applied: float
    d: float
    gamma_lb: float
    solve_cost: float
    nodes: int
    wall_ms: float
    feasible: bool


@dataclass
class ClosedLoopLog:
    """Trajectory and solver statistics of one closed-loop run.

    ``states`` has ``k_f + 1`` entries when the run completed. ``plans`` keeps
    the blocked sequence applied at each step.
    """

    algorithm: str
    run_index: int
    states: list[tuple[float, float]] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    plans: list[BlockedSequence] = field(default_factory=list)
    status: str = "completed"
    message: str = ""
    terminal_delta: float = math.nan
    total_cost: float = 0.0

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    @property
    def feasible_steps(self) -> int:
        return sum(1 for s in self.steps if s.feasible)

    def to_csv(self, timing: bool = False) -> str:
        """Per-step log. Wall times are written as 0 unless ``timing`` is set,
        keeping the file deterministic for a given scenario and seed."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for s in self.steps:
            w.writerow([
                s.k, repr(s.x[0]), repr(s.x[1]), repr(s.u_cmd), repr(s.u_applied), repr(s.d),
                repr(s.gamma_lb), repr(s.solve_cost), s.nodes,
                f"{s.wall_ms:.3f}" if timing else "0",
            ])
        if len(self.states) > len(self.steps):
            x = self.states[-1]
            w.writerow([len(self.steps), repr(x[0]), repr(x[1])] + [""] * 7)
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "run_index": self.run_index,
            "status": self.status,
            "message": self.message,
            "steps": len(self.steps),
            "feasible_steps": self.feasible_steps,
            "terminal_delta": self.terminal_delta,
            "total_cost": self.total_cost,
        }


def read_log_csv(text: str) -> tuple[list[tuple[float, float]], list[float]]:
    """States and applied inputs from a per-step log."""
    rows = list(csv.DictReader(io.StringIO(text)))
    states = [(float(r["x1"]), float(r["x2"])) for r in rows]
    applied = [float(r["u_applied"]) for r in rows if r["u_applied"] != ""]
    return states, applied


def replay(model, x0, applied) -> list[tuple[float, float]]:
    """Re-run the plant on logged applied inputs."""
    xs = [tuple(float(v) for v in x0)]
    for u in applied:
        xs.append(tuple(float(v) for v in step(model, xs[-1], u)))
    return xs


def _problem(scenario, model, k: int, x) -> OcpProblem:
    return OcpProblem(
        model, k, scenario.k_f, x, scenario.policy, scenario.inputs, scenario.terminal, cap=scenario.cap,
    )


def simulate(scenario, algorithm: str | None = None, *, run_index: int = 0, omega: float | None = None,
             disturbance: DisturbanceSpec | None = None) -> ClosedLoopLog:
    """Run one closed loop from ``scenario.x0`` up to ``k_f``.

    ``algorithm``, ``omega`` and ``disturbance`` default to the scenario's.
    """
    algorithm = algorithm or scenario.algorithm
    if algorithm not in ("nominal", "relaxed", "multiobjective"):
        raise ValueError(f"unknown algorithm {algorithm!r}")
    omega = scenario.omega if omega is None else omega
    if not omega > 0:
        raise ValueError("omega must be > 0")
    dist = disturbance if disturbance is not None else scenario.disturbance
    model = scenario.built_model
    backend = scenario.backend
    log = ClosedLoopLog(algorithm, run_index)
    x = tuple(float(v) for v in scenario.x0)
    log.states.append(x)
    warm: BlockedSequence | None = None

    for k in range(scenario.k_f):
        p = _problem(scenario, model, k, x)
        t0 = time.perf_counter()
        try:
            res, gamma_lb = _solve_step(p, algorithm, omega, warm, backend)
        except HardInfeasibleError as exc:
            log.status, log.message = "aborted", f"k={k}: {exc}"
            break
        wall_ms = (time.perf_counter() - t0) * 1e3
        if not res.feasible:
            log.status = "initial_infeasible" if k == 0 else "aborted"
            log.message = f"k={k}: finite-horizon problem infeasible from x={x}"
            break
        u = res.u_traj[0]
        d = sample_disturbance(dist, k, run_index)
        applied = u + d
        try:
            x_next = tuple(float(v) for v in step(model, x, applied))
        except ModelEvaluationError as exc:
            log.status, log.message = "aborted", f"k={k}: {exc}"
            break
        log.total_cost += stage_cost(model, x, applied)
        log.steps.append(StepRecord(k, x, u, applied, d, gamma_lb, res.cost, res.nodes_explored,
                                    wall_ms, res.feasible))
        log.plans.append(res.v_opt)
        x = x_next
        log.states.append(x)
        warm = warm_start_tail(res.v_opt) if k + 1 < scenario.k_f else None

    log.terminal_delta = distance_to_set(log.states[-1], scenario.terminal)
    return log


def _solve_step(p: OcpProblem, algorithm: str, omega: float, warm, backend) -> tuple[SolveResult, float]:
    if algorithm == "nominal":
        res = solve_nominal(p, warm, backend=backend)
        return res, res.gamma if res.feasible else math.nan
    if algorithm == "relaxed":
        first = solve_min_gamma(p, warm, backend=backend)
        res = solve_relaxed(p, first.gamma, first.v_opt, backend=backend)
        return res, first.gamma
    res = solve_multiobjective(p, omega, warm, backend=backend)
    return res, res.gamma


def run_nominal(scenario, run_index: int = 0, **kw) -> ClosedLoopLog:
    return simulate(scenario, "nominal", run_index=run_index, **kw)


def run_relaxed(scenario, run_index: int = 0, **kw) -> ClosedLoopLog:
    return simulate(scenario, "relaxed", run_index=run_index, **kw)


def run_multiobjective(scenario, omega: float, run_index: int = 0, **kw) -> ClosedLoopLog:
    return simulate(scenario, "multiobjective", run_index=run_index, omega=omega, **kw)
