"""Scenario files: parsing, validation and serialization.

A scenario is an INI-style text file with one section per concern::

    [model]
    kind = integrator          ; or train
    dt = 1.0

    [horizon]
    k_f = 12
    L = 3
    blocking = shrinking       ; or constant

    [inputs]
    mode = discrete            ; continuous | discrete | discrete+cruise
    alphabet = {-1, 0, 1}

    [initial]
    state = 0, 0

    [terminal]
    center = 18, 0
    half_widths = 0, 0
    weights = 1, 1

    [disturbance]
    d_bar = 0.05
    distribution = uniform     ; uniform | extreme | fixed
    seed = 0

    [algorithm]
    kind = relaxed             ; nominal | relaxed | multiobjective
    omega = 1e6
    runs = 1000

Train scenarios add a ``[train]`` section with the physical parameters and a
``track`` path (relative paths resolve against the scenario file).
``[solver]`` (``backend``, ``cap``) and ``[bound]`` (``moduli``, ``k_x``,
``k_u``, ``safety``, ``samples``) are optional.
"""
from __future__ import annotations

import configparser
import functools
import io
import math
import re
from dataclasses import dataclass, fields
from pathlib import Path

from .blocking import BlockingPolicy
from .dynamics import IntegratorModel, TerminalSet, TrainModel, TrainParams, load_track
from .ocp import DEFAULT_CAP, InputSpec

__all__ = ["Scenario", "ScenarioError", "parse_scenario", "parse_scenario_text", "serialize_scenario"]

TRAIN_KEYS = ("mass", "static_mass", "A", "B", "C", "D", "ft_max", "p_max", "fb_max", "g_grav")


class ScenarioError(ValueError):
    """Validation failure; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Scenario:
    model: str
    dt: float
    k_f: int
    L: int
    x0: tuple[float, float]
    terminal_center: tuple[float, float]
    terminal_half_widths: tuple[float, float] = (0.0, 0.0)
    terminal_weights: tuple[float, float] = (1.0, 1.0)
    blocking: str = "shrinking"
    input_mode: str = "discrete"
    alphabet: tuple[float, ...] = ()
    u_lower: float = -1.0
    u_upper: float = 1.0
    integrator_cost: str = "abs"
    v_max: float = math.inf
    train: tuple[tuple[str, float], ...] = ()
    track_path: str | None = None
    d_bar: float = 0.0
    distribution: str = "uniform"
    seed: int = 0
    d_sequence: tuple[float, ...] = ()
    backend: str = "auto"
    cap: int = DEFAULT_CAP
    algorithm: str = "relaxed"
    omega: float = 1e6
    runs: int = 1
    moduli: str = "auto"
    k_x: float | None = None
    k_u: float | None = None
    safety: float = 1.2
    moduli_samples: int = 4000

    # -- builders ----------------------------------------------------------

    @functools.cached_property
    def built_model(self):
        if self.model == "integrator":
            return IntegratorModel(self.dt, self.integrator_cost, self.v_max)
        params = TrainParams(dt=self.dt, **dict(self.train))
        return TrainModel(params, load_track(self.track_path))

    @property
    def policy(self) -> BlockingPolicy:
        return BlockingPolicy(self.L, self.blocking)

    @property
    def inputs(self) -> InputSpec:
        if self.input_mode == "continuous":
            return InputSpec(None, self.u_lower, self.u_upper)
        return InputSpec(self.alphabet, self.u_lower, self.u_upper, cruise=self.input_mode == "discrete+cruise")

    @property
    def terminal(self) -> TerminalSet:
        return TerminalSet(self.terminal_center, self.terminal_half_widths, self.terminal_weights)

    @property
    def disturbance(self):
        from .controller import DisturbanceSpec

        return DisturbanceSpec(self.d_bar, self.distribution, self.seed, self.d_sequence)

    def with_(self, **changes) -> "Scenario":
        """Copy with fields replaced (cached model is not carried over)."""
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return Scenario(**kw)


# ---------------------------------------------------------------------------
# parsing

_SET_RE = re.compile(r"^\s*[\{\[\(]?(.*?)[\}\]\)]?\s*$")


def _floats(text: str) -> tuple[float, ...]:
    inner = _SET_RE.match(text).group(1)
    inner = inner.replace("−", "-")
    parts = [s for s in re.split(r"[,\s]+", inner.strip()) if s]
    return tuple(float(s) for s in parts)


class _Reader:
    def __init__(self, cp: configparser.ConfigParser):
        self.cp = cp
        self.errors: list[str] = []

    def get(self, section, key, conv, default=..., required=False):
        name = f"{section}.{key}"
        if not self.cp.has_option(section, key):
            if required or default is ...:
                self.errors.append(f"{name}: missing required field")
                return None
            return default
        raw = self.cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            self.errors.append(f"{name}: cannot parse {raw!r} ({exc})")
            return None

    def check(self, cond, msg):
        if not cond:
            self.errors.append(msg)


def _int(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise ValueError("expected an integer")
    return int(v)


def _choice(*options):
    def conv(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return t

    return conv


def parse_scenario_text(text: str, base_dir: Path | str = ".") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError([f"syntax: {exc}"]) from None
    r = _Reader(cp)
    kw: dict = {}
    kw["model"] = r.get("model", "kind", _choice("integrator", "train"), required=True)
    kw["dt"] = r.get("model", "dt", float, required=True)
    kw["integrator_cost"] = r.get("model", "cost", _choice("abs", "quad"), "abs")
    kw["v_max"] = r.get("model", "v_max", float, math.inf)
    kw["k_f"] = r.get("horizon", "k_f", _int, required=True)
    kw["L"] = r.get("horizon", "L", _int, required=True)
    kw["blocking"] = r.get("horizon", "blocking", _choice("shrinking", "constant"), "shrinking")
    kw["input_mode"] = r.get("inputs", "mode", _choice("continuous", "discrete", "discrete+cruise"), "discrete")
    kw["alphabet"] = r.get("inputs", "alphabet", _floats, ())
    kw["u_lower"] = r.get("inputs", "lower", float, -1.0)
    kw["u_upper"] = r.get("inputs", "upper", float, 1.0)
    kw["x0"] = r.get("initial", "state", _floats, required=True)
    kw["terminal_center"] = r.get("terminal", "center", _floats, required=True)
    kw["terminal_half_widths"] = r.get("terminal", "half_widths", _floats, (0.0, 0.0))
    kw["terminal_weights"] = r.get("terminal", "weights", _floats, (1.0, 1.0))
    kw["d_bar"] = r.get("disturbance", "d_bar", float, 0.0)
    kw["distribution"] = r.get("disturbance", "distribution", _choice("uniform", "extreme", "fixed"), "uniform")
    kw["seed"] = r.get("disturbance", "seed", _int, 0)
    kw["d_sequence"] = r.get("disturbance", "sequence", _floats, ())
    kw["backend"] = r.get("solver", "backend", _choice("auto", "bnb", "naive", "continuous"), "auto")
    kw["cap"] = r.get("solver", "cap", _int, DEFAULT_CAP)
    kw["algorithm"] = r.get("algorithm", "kind", _choice("nominal", "relaxed", "multiobjective"), "relaxed")
    kw["omega"] = r.get("algorithm", "omega", float, 1e6)
    kw["runs"] = r.get("algorithm", "runs", _int, 1)
    kw["moduli"] = r.get("bound", "moduli", _choice("auto", "analytic", "estimate", "linear"), "auto")
    kw["k_x"] = r.get("bound", "k_x", float, None)
    kw["k_u"] = r.get("bound", "k_u", float, None)
    kw["safety"] = r.get("bound", "safety", float, 1.2)
    kw["moduli_samples"] = r.get("bound", "samples", _int, 4000)

    if kw["model"] == "train":
        train = []
        for key in TRAIN_KEYS:
            default = 9.81 if key == "g_grav" else ...
            v = r.get("train", key, float, default)
            if v is not None:
                train.append((key, v))
        kw["train"] = tuple(train)
        track = r.get("train", "track", str, required=True)
        if track is not None:
            path = Path(track)
            if not path.is_absolute():
                path = Path(base_dir) / path
            kw["track_path"] = str(path.resolve())
            r.check(Path(kw["track_path"]).is_file(), f"train.track: file not found: {kw['track_path']}")

    _validate(r, kw)
    if r.errors:
        raise ScenarioError(r.errors)
    scen = Scenario(**kw)
    if scen.model == "train":
        try:
            scen.built_model
        except (ValueError, OSError) as exc:
            raise ScenarioError([f"train: {exc}"]) from None
    return scen


def _validate(r: _Reader, kw: dict) -> None:
    def ok(*names):
        return all(kw.get(n) is not None for n in names)

    if ok("dt"):
        r.check(kw["dt"] > 0, "model.dt: must be > 0")
    if ok("v_max"):
        r.check(kw["v_max"] > 0, "model.v_max: must be > 0")
    if ok("k_f"):
        r.check(kw["k_f"] >= 1, "horizon.k_f: must be >= 1")
    if ok("L"):
        r.check(kw["L"] >= 1, "horizon.L: must be a positive integer")
        if ok("k_f"):
            r.check(kw["L"] <= kw["k_f"], "horizon.L: must not exceed k_f")
    if ok("input_mode", "alphabet") and kw["input_mode"] != "continuous":
        r.check(len(kw["alphabet"]) > 0, "inputs.alphabet: must be nonempty for discrete input mode")
    if ok("u_lower", "u_upper"):
        r.check(kw["u_lower"] <= kw["u_upper"], "inputs.lower: must not exceed inputs.upper")
    if ok("input_mode", "model") and kw["input_mode"] == "discrete+cruise":
        r.check(kw["model"] == "train", "inputs.mode: cruise is only available for the train model")
    for name in ("x0", "terminal_center", "terminal_half_widths", "terminal_weights"):
        if ok(name):
            r.check(len(kw[name]) == 2, f"{name}: expected 2 entries, got {len(kw[name])}")
    if ok("terminal_half_widths"):
        r.check(all(h >= 0 for h in kw["terminal_half_widths"]), "terminal.half_widths: must be >= 0")
    if ok("terminal_weights"):
        r.check(all(w > 0 for w in kw["terminal_weights"]), "terminal.weights: must be > 0")
    if ok("d_bar"):
        r.check(kw["d_bar"] >= 0, "disturbance.d_bar: must be >= 0")
    if ok("distribution", "d_sequence", "d_bar", "k_f") and kw["distribution"] == "fixed":
        seq = kw["d_sequence"]
        r.check(len(seq) >= kw["k_f"], "disturbance.sequence: needs at least k_f entries")
        r.check(all(abs(d) <= kw["d_bar"] for d in seq), "disturbance.sequence: entries exceed d_bar")
    if ok("cap"):
        r.check(kw["cap"] >= 1, "solver.cap: must be >= 1")
    if ok("backend", "input_mode"):
        if kw["backend"] in ("bnb", "naive"):
            r.check(kw["input_mode"] != "continuous", "solver.backend: exhaustive search needs a discrete alphabet")
        if kw["backend"] == "continuous":
            r.check(kw["input_mode"] == "continuous", "solver.backend: continuous backend needs continuous inputs")
    if ok("omega"):
        r.check(kw["omega"] > 0, "algorithm.omega: must be > 0")
    if ok("runs"):
        r.check(kw["runs"] >= 1, "algorithm.runs: must be >= 1")
    if ok("safety"):
        r.check(kw["safety"] >= 1.0, "bound.safety: must be >= 1")
    if ok("moduli_samples"):
        r.check(kw["moduli_samples"] >= 1000, "bound.samples: must be >= 1000")
    if kw.get("moduli") == "linear":
        r.check(kw.get("k_x") is not None and kw.get("k_u") is not None,
                "bound.k_x: linear moduli need both k_x and k_u")
    for name in ("k_x", "k_u"):
        if kw.get(name) is not None:
            r.check(kw[name] >= 0, f"bound.{name}: must be >= 0")


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file; raises :class:`ScenarioError` listing all problems."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([f"{path}: {exc.strerror or exc}"]) from None
    return parse_scenario_text(text, path.parent)


# ---------------------------------------------------------------------------
# serialization


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _fmt_list(vals, braces=False) -> str:
    body = ", ".join(repr(float(v)) for v in vals)
    return "{" + body + "}" if braces else body


def serialize_scenario(s: Scenario) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["model"] = {"kind": s.model, "dt": _fmt(s.dt), "cost": s.integrator_cost, "v_max": _fmt(s.v_max)}
    if s.model == "train":
        cp["train"] = {k: _fmt(v) for k, v in s.train}
        cp["train"]["track"] = s.track_path or ""
    cp["horizon"] = {"k_f": str(s.k_f), "L": str(s.L), "blocking": s.blocking}
    cp["inputs"] = {"mode": s.input_mode, "lower": _fmt(s.u_lower), "upper": _fmt(s.u_upper)}
    if s.alphabet:
        cp["inputs"]["alphabet"] = _fmt_list(s.alphabet, braces=True)
    cp["initial"] = {"state": _fmt_list(s.x0)}
    cp["terminal"] = {
        "center": _fmt_list(s.terminal_center),
        "half_widths": _fmt_list(s.terminal_half_widths),
        "weights": _fmt_list(s.terminal_weights),
    }
    cp["disturbance"] = {"d_bar": _fmt(s.d_bar), "distribution": s.distribution, "seed": str(s.seed)}
    if s.d_sequence:
        cp["disturbance"]["sequence"] = _fmt_list(s.d_sequence)
    cp["solver"] = {"backend": s.backend, "cap": str(s.cap)}
    cp["algorithm"] = {"kind": s.algorithm, "omega": _fmt(s.omega), "runs": str(s.runs)}
    cp["bound"] = {"moduli": s.moduli, "safety": _fmt(s.safety), "samples": str(s.moduli_samples)}
    if s.k_x is not None:
        cp["bound"]["k_x"] = _fmt(s.k_x)
    if s.k_u is not None:
        cp["bound"]["k_u"] = _fmt(s.k_u)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
