"""Scenario configuration: strict YAML schema with unit-checked model parameters.

A scenario file has the sections ``name``, ``model``, ``chain``,
``controller``, ``sim``, ``verify``, ``boundary_grid`` and ``output``; only
``model`` and ``chain`` are required.  Unknown keys anywhere are errors.

Model parameters may be plain numbers (in the documented unit) or strings
such as ``"0.25 kN"`` or ``"0.6 deg/s"``, which are converted to the
documented unit after a dimension check.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import yaml

from iccbf.chain import BarrierChain, ClassKappa
from iccbf.controller import KINDS, ControllerSpec
from iccbf.system import MODELS, builtin


class ConfigError(ValueError):
    """The scenario file is malformed or inconsistent."""


# unit -> (dimension, factor to the SI unit of that dimension)
UNITS = {
    "": ("1", 1.0),
    "m": ("L", 1.0), "km": ("L", 1e3),
    "s": ("T", 1.0),
    "kg": ("M", 1.0),
    "N": ("F", 1.0), "kN": ("F", 1e3),
    "m/s": ("L/T", 1.0), "km/s": ("L/T", 1e3),
    "m/s^2": ("L/T^2", 1.0), "m/s2": ("L/T^2", 1.0),
    "rad": ("A", 1.0), "deg": ("A", math.pi / 180),
    "rad/s": ("A/T", 1.0), "deg/s": ("A/T", math.pi / 180),
    "km^3/s^2": ("L^3/T^2", 1e9), "m^3/s^2": ("L^3/T^2", 1.0),
    "N*s/m": ("F*T/L", 1.0), "N*s^2/m^2": ("F*T^2/L^2", 1.0),
}

# documented unit of every model parameter
PARAM_UNITS = {
    "scalar-example": {"u_max": ""},
    "double-integrator": {"u_max": ""},
    "acc": {"f0": "N", "f1": "N*s/m", "f2": "N*s^2/m^2", "mass": "kg", "g0": "m/s^2",
            "v0": "m/s", "v_max": "m/s", "headway": "s", "u_max": ""},
    "rendezvous": {"orbit_radius": "m", "mu": "m^3/s^2", "omega": "rad/s",
                   "chaser_mass": "kg", "thrust_bound": "N", "port_radius": "m",
                   "los_half_angle": "rad", "clf_time_constant": "s", "literal_rc": "bool"},
}

_QUANTITY = re.compile(r"^\s*([-+0-9.eE]+)\s*(\S*)\s*$")


def parse_quantity(value, unit: str, where: str) -> Any:
    """Convert ``value`` to ``unit``; numbers are taken as already in ``unit``."""
    if unit == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number or a quantity string")
    mt = _QUANTITY.match(value)
    if not mt:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    num, u = mt.groups()
    if u not in UNITS:
        raise ConfigError(f"{where}: unknown unit {u!r}")
    dim, fac = UNITS[u]
    want_dim, want_fac = UNITS[unit]
    if dim != want_dim:
        raise ConfigError(f"{where}: unit {u!r} is not compatible with {unit!r}")
    return float(num) * fac / want_fac


def _take(d: dict, where: str, allowed: dict) -> dict:
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    out = {}
    for key, (typ, default) in allowed.items():
        if key in d:
            val = d[key]
            if typ is float and isinstance(val, str):
                # YAML 1.1 reads "1e6" as a string
                try:
                    val = float(val)
                except ValueError:
                    raise ConfigError(f"{where}.{key}: expected a number") from None
            if typ is float and isinstance(val, (int, float)) and not isinstance(val, bool):
                val = float(val)
            elif typ is int and isinstance(val, bool):
                raise ConfigError(f"{where}.{key}: expected an integer")
            elif typ not in (None,) and not isinstance(val, typ):
                raise ConfigError(f"{where}.{key}: expected {typ.__name__}")
            out[key] = val
        elif default is _REQUIRED:
            raise ConfigError(f"{where}: missing key {key!r}")
        else:
            out[key] = default() if callable(default) else default
    return out


_REQUIRED = object()


@dataclass
class ModelConfig:
    name: str
    params: dict = field(default_factory=dict)


@dataclass
class AlphaConfig:
    kind: str = "linear"
    gain: float = 1.0
    exponent: float = 1.0


@dataclass
class ChainConfig:
    alphas: list
    derivative_cap: float = 1e6
    margin: float = 0.0
    max_depth: int = 4


@dataclass
class ControllerConfig:
    kind: str = "iccbf-qp"
    clf_rate: float = 10.0
    cbf_gain: float = 2.0
    delta_weight: float = 0.1
    k_weight: float = 50.0
    barrier_gain: float = 0.05
    input_scale: float = 1.0


@dataclass
class GoalConfig:
    kind: str
    value: float


@dataclass
class SimConfig:
    x0: list
    t_end: float
    dt: float
    goal: Optional[GoalConfig] = None
    per_stage_control: bool = False


@dataclass
class VerifyConfig:
    lower: list
    upper: list
    budget: int = 100_000
    starts: int = 50
    max_iter: int = 500
    seed: int = 0
    check_simple: bool = False


@dataclass
class AxisConfig:
    start: float
    stop: float
    num: int


@dataclass
class GridConfig:
    axis1: AxisConfig
    axis2: AxisConfig
    dims: list = field(default_factory=lambda: [0, 1])
    base_state: Optional[list] = None


@dataclass
class ScenarioConfig:
    name: str
    model: ModelConfig
    chain: ChainConfig
    controller: Optional[ControllerConfig] = None
    sim: Optional[SimConfig] = None
    verify: Optional[VerifyConfig] = None
    boundary_grid: Optional[GridConfig] = None
    output: str = "out"

    # -- construction of runtime objects ----------------------------------
    def build_model(self):
        return builtin(self.model.name, **self.model.params)

    def build_chain(self) -> BarrierChain:
        sys, U = self.build_model()
        alphas = [ClassKappa(a.kind, a.gain, a.exponent, self.chain.derivative_cap)
                  for a in self.chain.alphas]
        return BarrierChain(sys, U, alphas, max_depth=self.chain.max_depth,
                            margin=self.chain.margin)

    def build_controller(self, chain: Optional[BarrierChain] = None) -> ControllerSpec:
        if self.controller is None:
            raise ConfigError("scenario has no controller section")
        c = self.controller
        return ControllerSpec(kind=c.kind, chain=chain or self.build_chain(),
                              clf_rate=c.clf_rate, cbf_gain=c.cbf_gain,
                              delta_weight=c.delta_weight, k_weight=c.k_weight,
                              barrier_gain=c.barrier_gain, input_scale=c.input_scale)

    def to_dict(self) -> dict:
        return _prune(dataclasses.asdict(self))


def _prune(d):
    # optional sections and keys left unset are omitted on output
    if isinstance(d, dict):
        return {k: _prune(v) for k, v in d.items() if v is not None}
    if isinstance(d, list):
        return [_prune(v) for v in d]
    return d


def _num_list(v, where: str, n: Optional[int] = None) -> list:
    if not isinstance(v, list) or not all(
            isinstance(e, (int, float)) and not isinstance(e, bool) for e in v):
        raise ConfigError(f"{where}: expected a list of numbers")
    if n is not None and len(v) != n:
        raise ConfigError(f"{where}: expected {n} entries, got {len(v)}")
    return [float(e) for e in v]


def from_dict(raw: dict) -> ScenarioConfig:
    top = _take(raw, "config", {
        "name": (str, "scenario"), "model": (dict, _REQUIRED), "chain": (dict, _REQUIRED),
        "controller": (dict, None), "sim": (dict, None), "verify": (dict, None),
        "boundary_grid": (dict, None), "output": (str, "out")})

    m = _take(top["model"], "model", {"name": (str, _REQUIRED), "params": (dict, dict)})
    if m["name"] not in MODELS:
        raise ConfigError(f"model.name: unknown model {m['name']!r}")
    units = PARAM_UNITS[m["name"]]
    params = {}
    for k, v in m["params"].items():
        if k not in units:
            raise ConfigError(f"model.params: unknown parameter {k!r} for {m['name']}")
        params[k] = parse_quantity(v, units[k], f"model.params.{k}")
    model = ModelConfig(m["name"], params)
    n_state = builtin(model.name, **params)[0].n

    c = _take(top["chain"], "chain", {
        "alphas": (list, _REQUIRED), "derivative_cap": (float, 1e6),
        "margin": (float, 0.0), "max_depth": (int, 4)})
    alphas = []
    for i, a in enumerate(c["alphas"]):
        a = _take(a, f"chain.alphas[{i}]", {"kind": (str, "linear"), "gain": (float, _REQUIRED),
                                           "exponent": (float, 1.0)})
        if a["kind"] not in ("linear", "sqrt", "power"):
            raise ConfigError(f"chain.alphas[{i}].kind: unsupported {a['kind']!r}")
        if a["gain"] <= 0:
            raise ConfigError(f"chain.alphas[{i}].gain must be positive")
        alphas.append(AlphaConfig(**a))
    if not alphas:
        raise ConfigError("chain.alphas: need at least one class-K function")
    chain = ChainConfig(alphas=alphas, derivative_cap=c["derivative_cap"],
                        margin=c["margin"], max_depth=c["max_depth"])

    controller = None
    if top["controller"] is not None:
        ctl = _take(top["controller"], "controller", {
            f.name: (str if f.name == "kind" else float, f.default)
            for f in dataclasses.fields(ControllerConfig)})
        if ctl["kind"] not in KINDS:
            raise ConfigError(f"controller.kind: unknown {ctl['kind']!r}")
        controller = ControllerConfig(**ctl)

    sim = None
    if top["sim"] is not None:
        s = _take(top["sim"], "sim", {"x0": (list, _REQUIRED), "t_end": (float, _REQUIRED),
                                     "dt": (float, _REQUIRED), "goal": (dict, None),
                                     "per_stage_control": (bool, False)})
        if s["dt"] <= 0 or s["t_end"] <= 0:
            raise ConfigError("sim: dt and t_end must be positive")
        goal = None
        if s["goal"] is not None:
            gd = _take(s["goal"], "sim.goal", {"kind": (str, _REQUIRED), "value": (float, _REQUIRED)})
            if gd["kind"] != "docking-range":
                raise ConfigError(f"sim.goal.kind: unknown {gd['kind']!r}")
            goal = GoalConfig(**gd)
        sim = SimConfig(x0=_num_list(s["x0"], "sim.x0", n_state), t_end=s["t_end"],
                        dt=s["dt"], goal=goal, per_stage_control=s["per_stage_control"])

    verify = None
    if top["verify"] is not None:
        v = _take(top["verify"], "verify", {
            "lower": (list, _REQUIRED), "upper": (list, _REQUIRED), "budget": (int, 100_000),
            "starts": (int, 50), "max_iter": (int, 500), "seed": (int, 0),
            "check_simple": (bool, False)})
        verify = VerifyConfig(**{**v, "lower": _num_list(v["lower"], "verify.lower", n_state),
                                 "upper": _num_list(v["upper"], "verify.upper", n_state)})

    grid = None
    if top["boundary_grid"] is not None:
        g = _take(top["boundary_grid"], "boundary_grid", {
            "axis1": (dict, _REQUIRED), "axis2": (dict, _REQUIRED), "dims": (list, lambda: [0, 1]),
            "base_state": (list, None)})
        axes = []
        for key in ("axis1", "axis2"):
            a = _take(g[key], f"boundary_grid.{key}", {
                "start": (float, _REQUIRED), "stop": (float, _REQUIRED), "num": (int, _REQUIRED)})
            if a["num"] < 2:
                raise ConfigError(f"boundary_grid.{key}.num must be at least 2")
            axes.append(AxisConfig(**a))
        base = None if g["base_state"] is None else _num_list(
            g["base_state"], "boundary_grid.base_state", n_state)
        if n_state != 2 and base is None:
            raise ConfigError("boundary_grid.base_state is required for models with n != 2")
        grid = GridConfig(axes[0], axes[1], dims=[int(d) for d in g["dims"]], base_state=base)

    return ScenarioConfig(name=top["name"], model=model, chain=chain, controller=controller,
                          sim=sim, verify=verify, boundary_grid=grid, output=top["output"])


def loads(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    return from_dict(raw)


def load(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def bundled_configs() -> dict:
    """Name -> path of the scenario files shipped with the package."""
    root = resources.files("iccbf") / "configs"
    return {p.name.rsplit(".", 1)[0]: Path(str(p)) for p in root.iterdir()
            if p.name.endswith(".yaml")}
