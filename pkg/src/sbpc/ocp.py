"""Finite-horizon optimal control over blocked inputs.

Four problem variants share one set of constraints (dynamics, input set,
state constraints) and differ in how the terminal set enters:

``nominal``
    minimize accumulated stage cost subject to ``dist(x_end, X_f) == 0``;
``min_gamma``
    minimize ``dist(x_end, X_f)`` (the smallest achievable terminal distance);
``relaxed``
    minimize stage cost subject to ``dist(x_end, X_f) <= gamma_bar``;
``multiobjective``
    minimize ``stage cost + omega * dist(x_end, X_f)``.

Discrete input alphabets are solved exactly by depth-first branch-and-bound
over the blocked sequence (see :mod:`sbpc.kernels`); continuous input boxes go
to a local multi-start coordinate-descent solver.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from . import kernels
from .blocking import BlockedSequence, BlockingPolicy, block_lengths, expand_values, num_blocks
from .dynamics import (
    CRUISE,
    CruiseUndefinedError,
    EPS_V,
    IntegratorModel,
    TerminalSet,
    TrainModel,
    resolve_action,
)

__all__ = [
    "CandidateCapError",
    "CandidateReport",
    "DistanceSpec",
    "HardInfeasibleError",
    "InputSpec",
    "OcpProblem",
    "SolveResult",
    "TOL_GAMMA",
    "check_candidate",
    "continuous_backend",
    "distance_to_set",
    "enumerate_backend",
    "naive_enumerate",
    "penalized_objective",
    "solve",
    "solve_min_gamma",
    "solve_multiobjective",
    "solve_nominal",
    "solve_relaxed",
]

#: Slack added to the terminal bound in the relaxed problem so that the
#: minimizer of the min-distance problem stays admissible.
TOL_GAMMA = 1e-9
DEFAULT_CAP = 10**6
VARIANTS = ("nominal", "min_gamma", "relaxed", "multiobjective")


class CandidateCapError(RuntimeError):
    """Too many blocked sequences for exhaustive search."""


class HardInfeasibleError(RuntimeError):
    """No candidate satisfies the (hard) state and input constraints."""


@dataclass(frozen=True)
class DistanceSpec:
    weights: tuple[float, ...]

    def __post_init__(self):
        if any(not w > 0 for w in self.weights):
            raise ValueError("distance weights must be > 0")


def distance_to_set(x, X_f: TerminalSet, spec: DistanceSpec | None = None) -> float:
    """Weighted infinity-norm distance from ``x`` to the box ``X_f``."""
    weights = spec.weights if spec is not None else X_f.weights
    d = 0.0
    for xi, c, h, w in zip(x, X_f.center, X_f.half_widths, weights):
        e = abs(float(xi) - c) - h
        if e > 0.0:
            v = w * e
            if v > d:
                d = v
    return d


@dataclass(frozen=True)
class InputSpec:
    """Admissible inputs: a finite alphabet (optionally plus cruise) or a box."""

    alphabet: tuple[float, ...] | None = None
    lower: float = -1.0
    upper: float = 1.0
    cruise: bool = False

    def __post_init__(self):
        if self.alphabet is not None:
            object.__setattr__(self, "alphabet", tuple(float(a) for a in self.alphabet))
            if not self.alphabet and not self.cruise:
                raise ValueError("discrete input alphabet is empty")
        elif self.cruise:
            raise ValueError("cruise action requires a discrete alphabet")
        if not self.lower <= self.upper:
            raise ValueError("input box lower bound exceeds upper bound")

    @property
    def discrete(self) -> bool:
        return self.alphabet is not None

    @property
    def actions(self) -> tuple[Any, ...]:
        if self.alphabet is None:
            raise ValueError("continuous input spec has no action list")
        return self.alphabet + ((CRUISE,) if self.cruise else ())

    def admits(self, action) -> bool:
        if action is CRUISE:
            return self.cruise
        if self.alphabet is not None:
            return float(action) in self.alphabet
        return self.lower <= float(action) <= self.upper


@dataclass(frozen=True)
class OcpProblem:
    model: Any
    k: int
    k_f: int
    x_init: tuple[float, float]
    policy: BlockingPolicy
    inputs: InputSpec
    terminal: TerminalSet
    variant: str = "nominal"
    gamma_bar: float = 0.0
    omega: float = 1.0
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        object.__setattr__(self, "x_init", tuple(float(v) for v in self.x_init))
        if not 0 <= self.k <= self.k_f - 1:
            raise ValueError(f"k={self.k} outside [0, {self.k_f - 1}]")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.gamma_bar >= 0:
            raise ValueError("gamma_bar must be >= 0")
        if not self.omega > 0:
            raise ValueError("omega must be > 0")
        if self.inputs.cruise and not isinstance(self.model, TrainModel):
            raise ValueError("cruise action is only legal for the train model")
        self.policy.validate(self.k_f)

    @property
    def horizon(self) -> int:
        return self.k_f - self.k

    @property
    def n_blocks(self) -> int:
        return num_blocks(self.k, self.k_f, self.policy)

    @property
    def lengths(self) -> tuple[int, ...]:
        return block_lengths(self.k, self.k_f, self.policy)

    @property
    def gamma_limit(self) -> float:
        """Largest terminal distance admitted by the nominal/relaxed variants."""
        if self.variant == "nominal":
            return 0.0
        if self.variant == "relaxed":
            return self.gamma_bar + TOL_GAMMA
        return math.inf


@dataclass
class CandidateReport:
    x_traj: list[tuple[float, float]]
    u_traj: list[float]
    cost: float
    delta: float
    state_violations: list[tuple[int, float]]
    input_violations: list[int]

    @property
    def complete(self) -> bool:
        return not self.input_violations

    @property
    def constraints_ok(self) -> bool:
        return not self.state_violations and not self.input_violations


@dataclass
class SolveResult:
    """Outcome of one finite-horizon solve.

    ``x_traj``/``u_traj`` are empty when no admissible candidate exists.
    ``local`` marks results from the continuous backend, which carries no
    global optimality claim.
    """

    v_opt: BlockedSequence | None
    u_traj: list[float]
    x_traj: list[tuple[float, float]]
    cost: float
    gamma: float
    feasible: bool
    objective: float = math.inf
    indices: tuple[int, ...] | None = None
    nodes_explored: int = 0
    restarts: int = 0
    local: bool = False
    backend: str = ""


def _values_of(p: OcpProblem, v) -> tuple:
    if isinstance(v, BlockedSequence):
        if v.k_origin != p.k or v.k_f != p.k_f or v.policy != p.policy:
            raise ValueError("blocked sequence does not match the problem's blocking structure")
        return v.values
    values = tuple(v)
    if len(values) != p.n_blocks:
        raise ValueError(f"expected {p.n_blocks} free values, got {len(values)}")
    return values


def check_candidate(p: OcpProblem, v) -> CandidateReport:
    """Roll the dynamics for a blocked sequence and evaluate every constraint.

    ``state_violations`` lists ``(j, magnitude)`` for each predicted state
    ``x(j|k)``, ``j >= 1``, outside the state constraint set. If an action
    cannot be evaluated (cruise at non-positive speed) the rollout stops and
    the offending offset is listed in ``input_violations``.
    """
    values = _values_of(p, v)
    actions = expand_values(values, p.lengths)
    model = p.model
    x1, x2 = p.x_init
    xs = [(x1, x2)]
    us: list[float] = []
    cost = 0.0
    state_viol: list[tuple[int, float]] = []
    input_viol: list[int] = []
    for j, a in enumerate(actions):
        if not p.inputs.admits(a):
            input_viol.append(j)
        try:
            u = resolve_action(model, x1, x2, a)
        except CruiseUndefinedError:
            input_viol.append(j)
            break
        cost += model.cost_scalar(x1, x2, u)
        x1, x2 = model.step_scalar(x1, x2, u)
        us.append(u)
        xs.append((x1, x2))
        mag = model.violation_scalar(x1, x2)
        if mag > 0.0:
            state_viol.append((j + 1, mag))
    if input_viol:
        return CandidateReport(xs, us, math.inf, math.inf, state_viol, sorted(set(input_viol)))
    cost += model.cost_scalar(x1, x2, 0.0)
    delta = distance_to_set((x1, x2), p.terminal)
    return CandidateReport(xs, us, cost, delta, state_viol, [])


def _objective(p: OcpProblem, rep: CandidateReport) -> float:
    """Variant objective of a candidate, ``inf`` when inadmissible."""
    if not rep.constraints_ok:
        return math.inf
    if p.variant == "min_gamma":
        return rep.delta
    if p.variant == "multiobjective":
        return rep.cost + p.omega * rep.delta
    return rep.cost if rep.delta <= p.gamma_limit else math.inf


def _result(p: OcpProblem, values, *, backend: str, nodes=0, restarts=0, local=False,
            indices=None, feasible=None) -> SolveResult:
    rep = check_candidate(p, values)
    obj = _objective(p, rep)
    if feasible is None:
        feasible = math.isfinite(obj)
    seq = BlockedSequence(tuple(values), p.k, p.policy, p.k_f)
    return SolveResult(seq, rep.u_traj, rep.x_traj, rep.cost, rep.delta, feasible, obj,
                       indices, nodes, restarts, local, backend)


def _infeasible(p: OcpProblem, *, backend: str, nodes=0, restarts=0, local=False) -> SolveResult:
    return SolveResult(None, [], [], math.inf, math.inf, False, math.inf, None,
                       nodes, restarts, local, backend)


# ---------------------------------------------------------------------------
# exhaustive search


def _check_cap(p: OcpProblem) -> int:
    n_act = len(p.inputs.actions)
    count = n_act ** p.n_blocks
    if count > p.cap:
        raise CandidateCapError(
            f"{n_act}^{p.n_blocks} = {count} candidates exceeds cap {p.cap}; "
            "use the continuous backend or a larger block length L"
        )
    return count


@dataclass
class SearchSpec:
    """Flat description of a discrete problem consumed by the search kernels."""

    model: Any
    model_code: int
    fparams: np.ndarray
    starts: np.ndarray
    rg: np.ndarray
    limits: np.ndarray
    x0: tuple[float, float]
    center: np.ndarray
    halfw: np.ndarray
    weights: np.ndarray
    actions: np.ndarray
    action_objs: tuple
    lengths: np.ndarray
    mode: int
    gamma_limit: float
    omega: float
    inc_seq: tuple[int, ...] | None = None
    inc_obj: float = math.inf


MODE_COST, MODE_MIN_GAMMA, MODE_MULTI = 0, 1, 2


def search_spec(p: OcpProblem) -> SearchSpec:
    model = p.model
    empty = np.zeros(0)
    if isinstance(model, IntegratorModel):
        code = 0
        fparams = np.array([model.dt, 1.0 if model.cost == "quad" else 0.0, model.v_max])
        starts = rg = limits = empty
    elif isinstance(model, TrainModel):
        code = 1
        q = model.params
        fparams = np.array([q.dt, q.mass, q.A, q.B, q.C, q.ft_max, q.p_max, q.fb_max, EPS_V])
        starts = np.array(model.track.starts, dtype=float)
        rg = np.array(model.grade_resistance, dtype=float)
        limits = np.array(model.track.speed_limits, dtype=float)
    else:
        raise TypeError(f"no search kernel for model {type(model).__name__}")
    acts = p.inputs.actions
    actions = np.array([math.nan if a is CRUISE else float(a) for a in acts])
    mode = {"min_gamma": MODE_MIN_GAMMA, "multiobjective": MODE_MULTI}.get(p.variant, MODE_COST)
    return SearchSpec(
        model, code, fparams, starts, rg, limits, p.x_init,
        np.array(p.terminal.center), np.array(p.terminal.half_widths), np.array(p.terminal.weights),
        actions, acts, np.array(p.lengths, dtype=np.int64), mode, p.gamma_limit, p.omega,
    )


def _incumbent(p: OcpProblem, warm) -> tuple[tuple[int, ...], float] | None:
    if warm is None:
        return None
    values = _values_of(p, warm)
    acts = p.inputs.actions
    try:
        idx = tuple(acts.index(v) for v in values)
    except ValueError:
        return None
    obj = _objective(p, check_candidate(p, values))
    return (idx, obj) if math.isfinite(obj) else None


def enumerate_backend(p: OcpProblem, warm=None, *, impl=None) -> SolveResult:
    """Exact solve over a discrete alphabet by branch-and-bound.

    Interval values are explored depth-first in alphabet order. A branch is
    cut when a predicted state leaves the state constraint set, or when its
    accumulated stage cost (a lower bound, since stage costs are nonnegative)
    cannot beat the incumbent. Among equal objectives the lexicographically
    smallest index sequence wins. ``warm`` seeds the incumbent.
    """
    if not p.inputs.discrete:
        raise ValueError("enumerate_backend needs a discrete input alphabet")
    _check_cap(p)
    spec = search_spec(p)
    inc = _incumbent(p, warm)
    if inc is not None:
        spec.inc_seq, spec.inc_obj = inc
    search = impl or kernels.bnb_search
    best_obj, best_seq, nodes = search(spec)
    if best_seq is None:
        if p.variant == "min_gamma":
            raise HardInfeasibleError(
                f"no blocked sequence satisfies the state constraints from x={p.x_init} at k={p.k}"
            )
        return _infeasible(p, backend="bnb", nodes=nodes)
    acts = p.inputs.actions
    values = tuple(acts[i] for i in best_seq)
    return _result(p, values, backend="bnb", nodes=nodes, indices=tuple(best_seq))


def naive_enumerate(p: OcpProblem) -> SolveResult:
    """Score every blocked sequence with :func:`check_candidate` (no pruning)."""
    _check_cap(p)
    acts = p.inputs.actions
    best = math.inf
    best_idx = None
    count = 0
    for idx in itertools.product(range(len(acts)), repeat=p.n_blocks):
        count += 1
        obj = _objective(p, check_candidate(p, [acts[i] for i in idx]))
        if obj < best:
            best, best_idx = obj, idx
    if best_idx is None:
        if p.variant == "min_gamma":
            raise HardInfeasibleError("no blocked sequence satisfies the state constraints")
        return _infeasible(p, backend="naive", nodes=count)
    return _result(p, tuple(acts[i] for i in best_idx), backend="naive", nodes=count,
                   indices=best_idx)


# ---------------------------------------------------------------------------
# continuous inputs


def _rollout_terms(p: OcpProblem, z) -> tuple[float, float, list[float], list[float]]:
    """Stage cost, state-violation squares, terminal per-axis weighted excess."""
    model = p.model
    x1, x2 = p.x_init
    cost = 0.0
    viol = 0.0
    for u in expand_values([float(v) for v in z], p.lengths):
        cost += model.cost_scalar(x1, x2, u)
        x1, x2 = model.step_scalar(x1, x2, u)
        mag = model.violation_scalar(x1, x2)
        viol += mag * mag
    cost += model.cost_scalar(x1, x2, 0.0)
    exc = []
    for xi, c, h, w in zip((x1, x2), p.terminal.center, p.terminal.half_widths, p.terminal.weights):
        e = abs(xi - c) - h
        exc.append(w * e if e > 0.0 else 0.0)
    return cost, viol, exc, [x1, x2]


def penalized_objective(p: OcpProblem, z, rho: float) -> float:
    """Smooth penalty objective minimized by :func:`continuous_backend`.

    The min-distance variant uses the sum of squared per-axis terminal excess
    as a differentiable surrogate for the max-norm distance.
    """
    cost, viol, exc, _ = _rollout_terms(p, z)
    if not math.isfinite(cost):
        return math.inf
    if p.variant == "min_gamma":
        return sum(e * e for e in exc) + rho * viol
    if p.variant == "multiobjective":
        return cost + p.omega * max(exc) + rho * viol
    lim = p.gamma_bar if p.variant == "relaxed" else 0.0
    term = sum((e - lim) ** 2 for e in exc if e > lim)
    return cost + rho * (viol + term)


def _coordinate_descent(f, z, lo, hi, *, h, max_sweeps, tol):
    z = list(z)
    fz = f(z)
    for _ in range(max_sweeps):
        f_start = fz
        for i in range(len(z)):
            zi = z[i]
            zp, zm = z.copy(), z.copy()
            zp[i] = min(hi, zi + h)
            zm[i] = max(lo, zi - h)
            span = zp[i] - zm[i]
            if span <= 0.0:
                continue
            fp, fm = f(zp), f(zm)
            g = (fp - fm) / span
            curv = (fp - 2.0 * fz + fm) / (0.25 * span * span) if zp[i] - zi == zi - zm[i] else 0.0
            if g == 0.0:
                continue
            t = -g / curv if curv > 0.0 else -math.copysign(0.25 * (hi - lo), g)
            for _ in range(60):
                cand = min(hi, max(lo, zi + t))
                if cand == zi:
                    break
                zc = z.copy()
                zc[i] = cand
                fc = f(zc)
                if fc < fz:
                    z, fz = zc, fc
                    break
                t *= 0.5
        if f_start - fz <= tol * (1.0 + abs(fz)):
            break
    return z, fz


def continuous_backend(p: OcpProblem, warm=None, *, n_random: int = 3, seed: int = 0,
                       rho_schedule: Sequence[float] = (1e2, 1e4, 1e6), max_sweeps: int = 400,
                       fd_step: float = 1e-6, feas_tol: float = 1e-4) -> SolveResult:
    """Local multi-start projected coordinate descent over the free inputs.

    Constraints enter through a quadratic penalty whose weight is raised along
    ``rho_schedule``. Derivatives are central finite differences; each
    coordinate move is a projected Newton step with backtracking. The best
    start (by penalized objective) is returned and flagged ``local``; it counts
    as feasible when its constraint excess is below ``feas_tol``.
    """
    if p.inputs.discrete:
        raise ValueError("continuous_backend needs a continuous input box")
    lo, hi = p.inputs.lower, p.inputs.upper
    n = p.n_blocks
    starts = []
    if warm is not None:
        starts.append([min(hi, max(lo, float(v))) for v in _values_of(p, warm)])
    mid = 0.5 * (lo + hi)
    starts.append([mid] * n)
    rng = np.random.default_rng(seed)
    starts += [list(rng.uniform(lo, hi, size=n)) for _ in range(n_random)]

    best_z, best_f = None, math.inf
    rho_final = rho_schedule[-1]
    for z in starts:
        for rho in rho_schedule:
            z, fz = _coordinate_descent(
                lambda zz, r=rho: penalized_objective(p, zz, r), z, lo, hi,
                h=fd_step * max(1.0, hi - lo), max_sweeps=max_sweeps, tol=1e-15,
            )
        fz = penalized_objective(p, z, rho_final)
        if fz < best_f:
            best_z, best_f = z, fz
    if best_z is None:
        return _infeasible(p, backend="continuous", restarts=len(starts), local=True)
    rep = check_candidate(p, best_z)
    worst_state = max((m for _, m in rep.state_violations), default=0.0)
    lim = p.gamma_limit if p.variant in ("nominal", "relaxed") else math.inf
    feasible = worst_state <= feas_tol and rep.delta <= lim + feas_tol
    if p.variant in ("min_gamma", "multiobjective"):
        feasible = worst_state <= feas_tol
    res = _result(p, tuple(best_z), backend="continuous", restarts=len(starts), local=True,
                  feasible=feasible)
    res.objective = best_f
    return res


# ---------------------------------------------------------------------------
# variant entry points


def solve(p: OcpProblem, warm=None, *, backend: str = "auto") -> SolveResult:
    """Dispatch ``p`` to a backend: ``auto``, ``bnb``, ``naive`` or ``continuous``."""
    if backend == "auto":
        backend = "bnb" if p.inputs.discrete else "continuous"
    if backend == "bnb":
        return enumerate_backend(p, warm)
    if backend == "naive":
        return naive_enumerate(p)
    if backend == "continuous":
        return continuous_backend(p, warm)
    raise ValueError(f"unknown backend {backend!r}")


def solve_nominal(p: OcpProblem, warm=None, *, backend: str = "auto") -> SolveResult:
    return solve(replace(p, variant="nominal"), warm, backend=backend)


def solve_min_gamma(p: OcpProblem, warm=None, *, backend: str = "auto") -> SolveResult:
    """Smallest achievable terminal distance; the result's ``gamma`` is that minimum."""
    res = solve(replace(p, variant="min_gamma"), warm, backend=backend)
    if not res.feasible:
        raise HardInfeasibleError(f"state constraints infeasible from x={p.x_init} at k={p.k}")
    return res


def solve_relaxed(p: OcpProblem, gamma_bar: float, warm=None, *, backend: str = "auto") -> SolveResult:
    return solve(replace(p, variant="relaxed", gamma_bar=gamma_bar), warm, backend=backend)


def solve_multiobjective(p: OcpProblem, omega: float, warm=None, *, backend: str = "auto") -> SolveResult:
    return solve(replace(p, variant="multiobjective", omega=omega), warm, backend=backend)
