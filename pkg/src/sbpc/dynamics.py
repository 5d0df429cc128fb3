"""Plant models, stage costs and constraint sets.

Two discrete-time models are provided, both with a two-dimensional state
``(position, speed)`` and a scalar input:

* :class:`TrainModel` -- point-mass train driven by a normalized traction
  command ``u`` in ``[-1, 1]``, integrated with forward Euler.
* :class:`IntegratorModel` -- a double integrator whose update is linear and
  exactly solvable, used as an oracle in tests.

Traction and braking curves of real rolling stock are proprietary; the train
model uses a synthetic constant-force / constant-power traction envelope and a
linear braking curve instead.
"""
from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "CRUISE",
    "Action",
    "CruiseUndefinedError",
    "IntegratorModel",
    "ModelEvaluationError",
    "TerminalSet",
    "TrackProfile",
    "TrainModel",
    "TrainParams",
    "braking_force",
    "check_state_constraints",
    "cruise_input",
    "load_track",
    "resistive_force",
    "stage_cost",
    "step",
    "traction_force",
]

# Floor on speed inside the power-limited traction branch.
EPS_V = 0.1


class ModelEvaluationError(ArithmeticError):
    """Raised when a model update produces a non-finite state."""


class CruiseUndefinedError(ValueError):
    """Raised when the cruise action is requested at non-positive speed."""


class Action(enum.Enum):
    CRUISE = "cruise"

    def __repr__(self) -> str:
        return "CRUISE"


#: Sentinel action: hold speed through the inner cruise loop (train only).
CRUISE = Action.CRUISE


@dataclass(frozen=True)
class TrainParams:
    """Physical parameters of the train.

    Units are SI. ``A``, ``B``, ``C`` are the coefficients of the speed
    dependent running resistance ``A + B*v + C*v**2`` and ``D`` the curve
    resistance coefficient. ``ft_max``, ``p_max`` and ``fb_max`` shape the
    synthetic traction/braking curves.
    """

    mass: float
    static_mass: float
    A: float
    B: float
    C: float
    D: float
    dt: float
    ft_max: float
    p_max: float
    fb_max: float
    g_grav: float = 9.81

    def __post_init__(self):
        positive = ("mass", "static_mass", "A", "dt", "ft_max", "p_max", "fb_max", "g_grav")
        bad = [n for n in positive if not getattr(self, n) > 0]
        bad += [n for n in ("B", "C", "D") if not getattr(self, n) >= 0]
        if bad:
            raise ValueError(f"invalid train parameters: {', '.join(bad)}")
        if self.mass < self.static_mass:
            raise ValueError("mass must be >= static_mass")


@dataclass(frozen=True)
class TrackProfile:
    """Piecewise-constant track description indexed by position.

    Segment ``i`` covers ``[starts[i], starts[i+1])``. Positions before the
    first breakpoint use the first segment, positions past the last use the
    last one.
    """

    starts: tuple[float, ...]
    slopes: tuple[float, ...]
    radii: tuple[float, ...]
    speed_limits: tuple[float, ...]

    def __post_init__(self):
        n = len(self.starts)
        if n == 0:
            raise ValueError("track profile needs at least one breakpoint")
        if not (len(self.slopes) == len(self.radii) == len(self.speed_limits) == n):
            raise ValueError("track profile columns have different lengths")
        if any(b <= a for a, b in zip(self.starts, self.starts[1:])):
            raise ValueError("track breakpoints must be strictly increasing")
        if any(not r > 0 for r in self.radii):
            raise ValueError("curve radius must be > 0 (use a large value for straight track)")
        if any(not v > 0 for v in self.speed_limits):
            raise ValueError("speed limits must be > 0")

    @classmethod
    def straight(cls, speed_limit: float = 1e3, slope: float = 0.0) -> "TrackProfile":
        return cls((0.0,), (slope,), (math.inf,), (speed_limit,))

    def segment(self, position: float) -> int:
        i = bisect.bisect_right(self.starts, position) - 1
        return i if i > 0 else 0

    def slope(self, position: float) -> float:
        return self.slopes[self.segment(position)]

    def radius(self, position: float) -> float:
        return self.radii[self.segment(position)]

    def speed_limit(self, position: float) -> float:
        return self.speed_limits[self.segment(position)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["start_pos_m", "slope_rad", "curve_radius_m", "speed_limit_mps"])
            for row in zip(self.starts, self.slopes, self.radii, self.speed_limits):
                w.writerow([repr(float(v)) for v in row])


def load_track(path) -> TrackProfile:
    """Read a track profile from a delimited text file with a header row."""
    text = Path(path).read_text()
    dialect = csv.Sniffer().sniff(text.splitlines()[0], delimiters=",;\t")
    rows = list(csv.reader(text.splitlines(), dialect))
    header = [h.strip() for h in rows[0]]
    expected = ["start_pos_m", "slope_rad", "curve_radius_m", "speed_limit_mps"]
    if header != expected:
        raise ValueError(f"{path}: expected header {expected}, got {header}")
    cols: list[list[float]] = [[], [], [], []]
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
        for col, cell in zip(cols, row):
            col.append(float(cell))
    return TrackProfile(*(tuple(c) for c in cols))


@dataclass(frozen=True)
class TerminalSet:
    """Axis-aligned box ``|x_i - center_i| <= half_widths_i``.

    A zero half-width encodes an equality. ``weights`` scale the per-axis
    excess in the distance function.
    """

    center: tuple[float, ...]
    half_widths: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_widths", tuple(float(h) for h in self.half_widths))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not len(self.center) == len(self.half_widths) == len(self.weights):
            raise ValueError("terminal set fields must have equal length")
        if any(h < 0 for h in self.half_widths):
            raise ValueError("terminal half widths must be >= 0")
        if any(not w > 0 for w in self.weights):
            raise ValueError("terminal weights must be > 0")

    @classmethod
    def singleton(cls, center, weights=None) -> "TerminalSet":
        n = len(center)
        return cls(tuple(center), (0.0,) * n, tuple(weights) if weights else (1.0,) * n)

    def contains(self, x) -> bool:
        return all(abs(xi - c) <= h for xi, c, h in zip(x, self.center, self.half_widths))


# ---------------------------------------------------------------------------
# train force curves


def resistive_force(params: TrainParams, profile: TrackProfile, x) -> float:
    """Running plus grade/curve resistance at state ``x`` [N]."""
    x2 = float(x[1])
    seg = profile.segment(float(x[0]))
    return params.A + params.B * x2 + params.C * x2 * x2 + _grade_resistance(params, profile, seg)


def _grade_resistance(params: TrainParams, profile: TrackProfile, seg: int) -> float:
    return params.static_mass * (
        params.g_grav * math.tan(profile.slopes[seg]) + params.D / profile.radii[seg]
    )


def _traction(params: TrainParams, x2: float, u: float) -> float:
    if u > 0.0:
        return u * min(params.ft_max, params.p_max / (x2 if x2 > EPS_V else EPS_V))
    return 0.0


def _braking(params: TrainParams, x2: float, u: float) -> float:
    if u < 0.0 and x2 > 0.0:
        return -u * params.fb_max
    return 0.0


def traction_force(params: TrainParams, x, u) -> float:
    """Synthetic traction curve: constant force up to the base speed, then constant power."""
    return _traction(params, float(x[1]), _scalar(u))


def braking_force(params: TrainParams, x, u) -> float:
    """Linear braking curve; no braking force at standstill."""
    return _braking(params, float(x[1]), _scalar(u))


def _cruise(params: TrainParams, x2: float, fr: float) -> float:
    # Bisection on the monotone force curve; runs until the bracket collapses
    # to adjacent doubles, so the 1e-9 input tolerance is always met.
    if fr == 0.0:
        return 0.0
    if fr > 0.0:
        if _traction(params, x2, 1.0) <= fr:
            return 1.0
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _traction(params, x2, mid) < fr:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)
    target = -fr
    if _braking(params, x2, -1.0) <= target:
        return -1.0
    lo, hi = -1.0, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _braking(params, x2, mid) < target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def cruise_input(params: TrainParams, profile: TrackProfile, x) -> float:
    """Input that balances traction (or braking) against total resistance.

    Saturates at ``+1``/``-1`` when the required force exceeds what the curves
    can deliver at the current speed.
    """
    x2 = float(x[1])
    if not x2 > 0.0:
        raise CruiseUndefinedError(f"cruise requires positive speed, got x2={x2}")
    return _cruise(params, x2, resistive_force(params, profile, x))


def _scalar(u) -> float:
    if isinstance(u, (int, float)):
        return float(u)
    arr = np.asarray(u, dtype=float).reshape(-1)
    if arr.size != 1:
        raise ValueError(f"expected a scalar input, got shape {np.shape(u)}")
    return float(arr[0])


# ---------------------------------------------------------------------------
# models


@dataclass(frozen=True)
class IntegratorModel:
    """Double integrator ``p+ = p + dt*v``, ``v+ = v + dt*u``.

    ``cost`` selects the stage cost, ``"abs"`` for ``|u|`` and ``"quad"`` for
    ``u**2``. An optional symmetric speed bound ``|v| <= v_max`` acts as the
    state constraint set.
    """

    dt: float = 1.0
    cost: str = "abs"
    v_max: float = math.inf

    n = 2
    m = 1
    kind = "integrator"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.cost not in ("abs", "quad"):
            raise ValueError(f"unknown integrator cost {self.cost!r}")
        if not self.v_max > 0:
            raise ValueError("v_max must be > 0")

    def step_scalar(self, x1: float, x2: float, u: float) -> tuple[float, float]:
        return x1 + self.dt * x2, x2 + self.dt * u

    def cost_scalar(self, x1: float, x2: float, u: float) -> float:
        return abs(u) if self.cost == "abs" else u * u

    def violation_scalar(self, x1: float, x2: float) -> float:
        excess = abs(x2) - self.v_max
        return excess if excess > 0.0 else 0.0

    def cruise_scalar(self, x1: float, x2: float) -> float:
        raise CruiseUndefinedError("cruise is only defined for the train model")


@dataclass(frozen=True)
class TrainModel:
    """Forward-Euler point-mass train on a given track.

    State constraints are ``0 <= speed <= speed_limit(position)``.
    """

    params: TrainParams
    track: TrackProfile
    _rg: tuple[float, ...] = field(init=False, repr=False, compare=False)

    n = 2
    m = 1
    kind = "train"

    def __post_init__(self):
        rg = tuple(_grade_resistance(self.params, self.track, i) for i in range(len(self.track.starts)))
        object.__setattr__(self, "_rg", rg)

    @property
    def dt(self) -> float:
        return self.params.dt

    @property
    def grade_resistance(self) -> tuple[float, ...]:
        return self._rg

    def _resistance(self, x1: float, x2: float) -> float:
        p = self.params
        return p.A + p.B * x2 + p.C * x2 * x2 + self._rg[self.track.segment(x1)]

    def step_scalar(self, x1: float, x2: float, u: float) -> tuple[float, float]:
        p = self.params
        ft = _traction(p, x2, u)
        fb = _braking(p, x2, u)
        fr = self._resistance(x1, x2)
        return x1 + p.dt * x2, x2 + p.dt * (ft - fb - fr) / p.mass

    def cost_scalar(self, x1: float, x2: float, u: float) -> float:
        return abs(_traction(self.params, x2, u) * x2)

    def violation_scalar(self, x1: float, x2: float) -> float:
        if x2 < 0.0:
            return -x2
        excess = x2 - self.track.speed_limit(x1)
        return excess if excess > 0.0 else 0.0

    def cruise_scalar(self, x1: float, x2: float) -> float:
        if not x2 > 0.0:
            raise CruiseUndefinedError(f"cruise requires positive speed, got x2={x2}")
        return _cruise(self.params, x2, self._resistance(x1, x2))


def _as_pair(x) -> tuple[float, float]:
    x1, x2 = (float(v) for v in np.asarray(x, dtype=float).reshape(-1))
    return x1, x2


def step(model, x, u) -> np.ndarray:
    """One model update ``f(x, u)``.

    Raises :class:`ModelEvaluationError` if the result is not finite.
    """
    x1, x2 = _as_pair(x)
    out = model.step_scalar(x1, x2, _scalar(u))
    if not (math.isfinite(out[0]) and math.isfinite(out[1])):
        raise ModelEvaluationError(f"non-finite state {out} from x=({x1}, {x2}), u={u}")
    return np.array(out)


def stage_cost(model, x, u) -> float:
    x1, x2 = _as_pair(x)
    return model.cost_scalar(x1, x2, _scalar(u))


def check_state_constraints(model, x) -> tuple[bool, float]:
    """Return ``(satisfied, violation_magnitude)`` for the state constraint set."""
    x1, x2 = _as_pair(x)
    v = model.violation_scalar(x1, x2)
    return v == 0.0, v


def resolve_action(model, x1: float, x2: float, action) -> float:
    """Map an action (number or :data:`CRUISE`) to the numeric input at a state."""
    if action is CRUISE:
        return model.cruise_scalar(x1, x2)
    return float(action)


def states_as_array(states: Sequence[Sequence[float]]) -> np.ndarray:
    return np.asarray(states, dtype=float).reshape(-1, 2)
