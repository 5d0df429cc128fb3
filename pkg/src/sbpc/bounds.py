"""Worst-case terminal accuracy under bounded input disturbances.

If the model satisfies ``|f(x1,u) - f(x2,u)| <= a_x(|x1 - x2|)`` and
``|f(x,u1) - f(x,u2)| <= a_u(|u1 - u2|)``, a disturbance ``|d| <= d_bar``
moves an open-loop trajectory by at most ``beta_{j-1}`` after ``j`` steps,
with

    beta_0 = a_u(d_bar),   beta_k = a_u(d_bar) + a_x(beta_{k-1}).

Summing the per-step contributions over the horizon gives the bound on the
terminal-set distance reached by the relaxed closed loop.

State norms are the weighted infinity norm of the terminal set; input norms
are absolute values (scalar inputs).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegratorModel, TrainModel

__all__ = [
    "BoundReport",
    "KFunction",
    "ModuliPair",
    "analytic_integrator_moduli",
    "beta_sequence",
    "cumulative_bound",
    "estimate_moduli",
    "propagate_perturbation_bound",
    "scenario_moduli",
    "verify_bound",
]


@dataclass(frozen=True)
class KFunction:
    """Class-K function: linear ``K*s`` or piecewise-linear through a table.

    Tabulated functions need ``grid[0] == 0 == values[0]`` and strictly
    increasing values; beyond the last grid point the last slope is extended.
    """

    slope: float | None = None
    grid: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.slope is not None:
            if not self.slope >= 0:
                raise ValueError("linear K-function slope must be >= 0")
            return
        g, v = self.grid, self.values
        if len(g) < 2 or len(g) != len(v):
            raise ValueError("tabulated K-function needs matching grid/value tables of length >= 2")
        if g[0] != 0 or v[0] != 0:
            raise ValueError("K-function must vanish at 0")
        if any(b <= a for a, b in zip(g, g[1:])) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("K-function table must be strictly increasing")

    @classmethod
    def linear(cls, slope: float) -> "KFunction":
        return cls(slope=float(slope))

    def __call__(self, s: float) -> float:
        if self.slope is not None:
            return self.slope * s
        g, v = self.grid, self.values
        if s <= g[-1]:
            return float(np.interp(s, g, v))
        return v[-1] + (v[-1] - v[-2]) / (g[-1] - g[-2]) * (s - g[-1])


@dataclass(frozen=True)
class ModuliPair:
    a_x: KFunction
    a_u: KFunction
    note: str = ""
    raw: tuple[float, float] | None = field(default=None, compare=False)


def beta_sequence(moduli: ModuliPair, d_bar: float, k_f: int) -> list[float]:
    """``[beta_0, ..., beta_{k_f-1}]``."""
    if d_bar < 0:
        raise ValueError("d_bar must be >= 0")
    if k_f < 1:
        raise ValueError("k_f must be >= 1")
    base = moduli.a_u(d_bar)
    out = [base]
    for _ in range(1, k_f):
        out.append(base + moduli.a_x(out[-1]))
    return out


def cumulative_bound(moduli: ModuliPair, d_bar: float, k_f: int) -> float:
    """Bound on the closed-loop terminal distance, ``sum_k beta_{k_f-k-1}``."""
    return math.fsum(beta_sequence(moduli, d_bar, k_f))


def propagate_perturbation_bound(moduli: ModuliPair, d_bar: float, steps: int) -> float:
    """Worst-case open-loop state deviation after ``steps`` disturbed moves."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return beta_sequence(moduli, d_bar, steps)[-1]


def _wnorm(dx: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.max(np.abs(dx) * weights, axis=-1)


def analytic_integrator_moduli(model: IntegratorModel, weights=(1.0, 1.0)) -> ModuliPair:
    """Exact Lipschitz constants of the double integrator under the weighted max norm."""
    w0, w1 = (float(w) for w in weights)
    k_x = max(1.0 + model.dt * w0 / w1, 1.0)
    k_u = w1 * model.dt
    return ModuliPair(KFunction.linear(k_x), KFunction.linear(k_u), "analytic", raw=(k_x, k_u))


def estimate_moduli(model, state_box, input_box, samples: int = 4000, *, weights=(1.0, 1.0),
                    seed: int = 0, safety: float = 1.2) -> ModuliPair:
    """Sampled Lipschitz constants inflated by ``safety``.

    Draws ``samples`` pairs differing in the state and ``samples`` pairs
    differing in the input, uniformly in the given boxes, and takes the
    largest difference quotient of each kind. A sampled maximum can only
    under-estimate the true supremum; the safety factor compensates. The raw
    maxima are kept in ``raw``.
    """
    sb = np.asarray(state_box, dtype=float).reshape(2, 2)
    ib = np.asarray(input_box, dtype=float).reshape(2)
    if np.any(sb[:, 1] <= sb[:, 0]) or ib[1] <= ib[0]:
        raise ValueError("state and input boxes must have positive width along every axis")
    if samples < 1000:
        raise ValueError("estimate_moduli needs at least 1000 samples")
    w = np.asarray(weights, dtype=float)
    rng = np.random.default_rng(seed)
    xa = rng.uniform(sb[:, 0], sb[:, 1], size=(samples, 2))
    xb = rng.uniform(sb[:, 0], sb[:, 1], size=(samples, 2))
    us = rng.uniform(ib[0], ib[1], size=samples)
    ua = rng.uniform(ib[0], ib[1], size=samples)
    ub = rng.uniform(ib[0], ib[1], size=samples)
    f = model.step_scalar

    k_x = 0.0
    for i in range(samples):
        den = _wnorm(xa[i] - xb[i], w)
        if den > 0.0:
            fa = np.array(f(xa[i, 0], xa[i, 1], us[i]))
            fb = np.array(f(xb[i, 0], xb[i, 1], us[i]))
            k_x = max(k_x, float(_wnorm(fa - fb, w) / den))
    k_u = 0.0
    for i in range(samples):
        den = abs(ua[i] - ub[i])
        if den > 0.0:
            fa = np.array(f(xa[i, 0], xa[i, 1], ua[i]))
            fb = np.array(f(xa[i, 0], xa[i, 1], ub[i]))
            k_u = max(k_u, float(_wnorm(fa - fb, w) / den))
    note = f"estimated from {samples} samples, inflated x{safety:g}"
    return ModuliPair(KFunction.linear(safety * k_x), KFunction.linear(safety * k_u), note, raw=(k_x, k_u))


def scenario_moduli(scenario) -> ModuliPair:
    """Moduli for a scenario as configured in its ``[bound]`` section.

    ``auto`` picks the exact constants for the integrator and a sampled
    estimate for the train.
    """
    model = scenario.built_model
    weights = scenario.terminal_weights
    kind = scenario.moduli
    if kind == "linear":
        return ModuliPair(KFunction.linear(scenario.k_x), KFunction.linear(scenario.k_u), "supplied")
    if kind == "analytic" or (kind == "auto" and isinstance(model, IntegratorModel)):
        if not isinstance(model, IntegratorModel):
            raise ValueError("analytic moduli are only available for the integrator model")
        return analytic_integrator_moduli(model, weights)
    return estimate_moduli(model, _state_box(scenario), _input_box(scenario), scenario.moduli_samples,
                           weights=weights, seed=scenario.seed, safety=scenario.safety)


def _input_box(scenario) -> tuple[float, float]:
    if scenario.input_mode == "continuous":
        lo, hi = scenario.u_lower, scenario.u_upper
    else:
        lo, hi = min(scenario.alphabet), max(scenario.alphabet)
        if scenario.input_mode == "discrete+cruise":
            lo, hi = min(lo, -1.0), max(hi, 1.0)
    return lo - scenario.d_bar, hi + scenario.d_bar


def _state_box(scenario):
    model = scenario.built_model
    if isinstance(model, TrainModel):
        track = model.track
        end = max(scenario.terminal_center[0] + scenario.terminal_half_widths[0], track.starts[-1])
        return ((min(0.0, scenario.x0[0]), end), (0.0, max(track.speed_limits)))
    span = max(abs(c) for c in (*scenario.x0, *scenario.terminal_center)) + 1.0
    return ((-span, span), (-span, span))


@dataclass
class BoundReport:
    d_bar: float
    k_f: int
    beta_total: float
    max_delta_observed: float
    violations: int
    runs: int
    completed_runs: int
    moduli_note: str
    bound_scale: float = 1.0
    deltas: list[float] = field(default_factory=list, repr=False)

    @property
    def margin(self) -> float:
        return self.beta_total - self.max_delta_observed

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.completed_runs == self.runs

    def to_text(self) -> str:
        lines = [
            f"d_bar = {self.d_bar!r}",
            f"k_f = {self.k_f}",
            f"beta_total = {self.beta_total!r}",
            f"bound_scale = {self.bound_scale!r}",
            f"max_delta_observed = {self.max_delta_observed!r}",
            f"margin = {self.margin!r}",
            f"violations = {self.violations}",
            f"runs = {self.runs}",
            f"completed_runs = {self.completed_runs}",
            f"moduli = {self.moduli_note}",
        ]
        return "\n".join(lines) + "\n"


def _one_run(args):
    from .controller import simulate

    scenario, algorithm, run_index = args
    log = simulate(scenario, algorithm, run_index=run_index)
    return log.completed, log.terminal_delta


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("SBPC_WORKERS", "1")))
    except ValueError:
        return 1


def verify_bound(scenario, runs: int | None = None, *, moduli: ModuliPair | None = None,
                 bound_scale: float = 1.0, workers: int | None = None) -> BoundReport:
    """Monte Carlo check of the terminal-distance bound.

    Runs ``runs`` closed loops (relaxed unless the scenario asks for
    multiobjective) with independent disturbance streams and counts terminal
    distances above ``bound_scale * beta(d_bar)``. ``bound_scale < 1`` is a
    falsification aid. Runs are distributed over ``workers`` processes
    (default ``$SBPC_WORKERS``) and merged in run order.
    """
    runs = scenario.runs if runs is None else runs
    moduli = moduli or scenario_moduli(scenario)
    algorithm = "multiobjective" if scenario.algorithm == "multiobjective" else "relaxed"
    beta = bound_scale * cumulative_bound(moduli, scenario.d_bar, scenario.k_f)
    jobs = [(scenario, algorithm, i) for i in range(runs)]
    workers = worker_count() if workers is None else workers
    if workers > 1 and runs > 1:
        with ProcessPoolExecutor(workers) as pool:
            outcomes = list(pool.map(_one_run, jobs, chunksize=max(1, runs // (4 * workers))))
    else:
        outcomes = [_one_run(j) for j in jobs]
    deltas = [d for ok, d in outcomes]
    completed = sum(1 for ok, _ in outcomes if ok)
    violations = sum(1 for ok, d in outcomes if not ok or d > beta)
    return BoundReport(scenario.d_bar, scenario.k_f, beta, max(deltas, default=0.0), violations, runs,
                       completed, moduli.note, bound_scale, deltas)
