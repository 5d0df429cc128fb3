"""Shrinking-horizon blocked predictive control with exact discrete search."""
from .blocking import BlockedSequence, BlockingPolicy, block_lengths, num_blocks, warm_start_tail
from .bounds import (
    KFunction,
    ModuliPair,
    beta_sequence,
    cumulative_bound,
    estimate_moduli,
    propagate_perturbation_bound,
    verify_bound,
)
from .controller import ClosedLoopLog, run_multiobjective, run_nominal, run_relaxed, simulate
from .dynamics import CRUISE, IntegratorModel, TerminalSet, TrackProfile, TrainModel, TrainParams, step
from .kernels import BACKEND
from .ocp import (
    InputSpec,
    OcpProblem,
    SolveResult,
    distance_to_set,
    solve_min_gamma,
    solve_multiobjective,
    solve_nominal,
    solve_relaxed,
)
from .scenario import Scenario, ScenarioError, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CRUISE", "BlockedSequence", "BlockingPolicy", "ClosedLoopLog", "InputSpec",
    "IntegratorModel", "KFunction", "ModuliPair", "OcpProblem", "Scenario", "ScenarioError", "SolveResult",
    "TerminalSet", "TrackProfile", "TrainModel", "TrainParams", "beta_sequence", "block_lengths",
    "cumulative_bound", "distance_to_set", "estimate_moduli", "num_blocks", "parse_scenario",
    "propagate_perturbation_bound", "run_multiobjective", "run_nominal", "run_relaxed", "simulate",
    "solve_min_gamma", "solve_multiobjective", "solve_nominal", "solve_relaxed", "step", "verify_bound",
    "warm_start_tail",
]
