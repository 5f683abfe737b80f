"""TOML experiment configuration: model tree, run block and sweep axes.

All frequencies are numbers in one declared unit frequency. Temperatures are
given as ``beta`` or as ``kT`` in units of ``kT_unit``; interaction times as
``tau`` in units of 1/``tau_unit`` (``tau_unit = "gamma"`` means gamma*tau).
"""
from __future__ import annotations

import copy
import itertools
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .model import (
    CompositeLocal, LinearSpin, Measurement, ProbeSpec, SingleSpin, TwoSpin,
    beta_from_temperature, build_model,
)

MODES = ("evolve", "steady", "sweep", "montecarlo", "compare")

_SCHEMA = {
    "units": {"frequency", "time"},
    "system": {"type", "J", "omega_s", "omega_1", "omega_2", "J1", "J2", "G_x", "G_y", "G_z"},
    "probe": {"j", "omega_p", "omega_p_over_omega_s", "beta", "kT", "kT_unit", "state", "ensemble"},
    "interaction": {"type", "g_x", "g_y", "g_z", "gy_over_gx", "g", "theta", "theta_over_pi",
                    "tau", "tau_unit"},
    "stream": {"gamma"},
    "run": {"mode", "kind", "method", "initial", "t_max", "t_min", "n_times", "spacing", "times",
            "n_trajectories", "seed", "threads", "convention", "recording"},
}
# setting one key of a group through a sweep or override removes its alternatives
_ALTERNATIVES = [{"omega_p", "omega_p_over_omega_s"}, {"g_y", "gy_over_gx"},
                 {"theta", "theta_over_pi"}, {"beta", "kT"}]


@dataclass(frozen=True)
class SweepAxis:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class RunSpec:
    mode: str | None = None
    kind: str = "scattering"
    method: str = "rk4"
    initial: str = "ground"
    times: tuple[float, ...] = ()
    n_trajectories: int = 1000
    seed: int = 0
    threads: int = 1
    convention: str = "centered"
    recording: str = "kick"


@dataclass(frozen=True)
class ExperimentConfig:
    tree: dict
    run: RunSpec
    sweep: tuple[SweepAxis, ...] = ()
    text: str = ""
    source: str = "<string>"
    overrides: dict = field(default_factory=dict)


def _where(source, section, key=None):
    return f"{source}: [{section}]" + (f" {key}" if key else "")


def _num(tree, section, key, source, default=None, required=False, nonneg=False):
    sec = tree.get(section, {})
    if key not in sec:
        if required:
            raise ConfigError(f"{_where(source, section, key)}: missing required value")
        return default
    v = sec[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{_where(source, section, key)}: expected a number, got {v!r}")
    if not math.isfinite(v) and key != "beta":
        raise ConfigError(f"{_where(source, section, key)}: must be finite, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(f"{_where(source, section, key)}: must be >= 0, got {v!r}")
    return float(v)


def _str(tree, section, key, source, default, choices=None):
    v = tree.get(section, {}).get(key, default)
    if not isinstance(v, str):
        raise ConfigError(f"{_where(source, section, key)}: expected a string, got {v!r}")
    if choices is not None and v not in choices:
        raise ConfigError(f"{_where(source, section, key)}: {v!r} is not one of {sorted(choices)}")
    return v


def _check_schema(tree, source):
    for section, body in tree.items():
        if section == "sweep":
            continue
        if section not in _SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: [{section}] must be a table")
        for key in body:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{_where(source, section, key)}: unknown key")
        for group in _ALTERNATIVES:
            both = group & set(body)
            if len(both) > 1:
                raise ConfigError(f"{source}: [{section}] keys {sorted(both)} are mutually exclusive")


def _time_grid(run: dict, source) -> tuple[float, ...]:
    if "times" in run:
        t = run["times"]
        if not isinstance(t, list) or not all(isinstance(x, (int, float)) for x in t):
            raise ConfigError(f"{_where(source, 'run', 'times')}: expected a list of numbers")
        return tuple(float(x) for x in t)
    if "t_max" not in run:
        return ()
    tree = {"run": run}
    t_max = _num(tree, "run", "t_max", source)
    n = run.get("n_times", 101)
    if not isinstance(n, int) or n < 2:
        raise ConfigError(f"{_where(source, 'run', 'n_times')}: expected an integer >= 2")
    spacing = _str(tree, "run", "spacing", source, "linear", {"linear", "log"})
    if spacing == "linear":
        return tuple(np.linspace(0.0, t_max, n).tolist())
    t_min = _num(tree, "run", "t_min", source, required=True)
    if not 0 < t_min < t_max:
        raise ConfigError(f"{_where(source, 'run', 't_min')}: need 0 < t_min < t_max")
    return (0.0, *np.geomspace(t_min, t_max, n - 1).tolist())


def check_param(param, source="<config>"):
    section, _, key = str(param).partition(".")
    if section not in _SCHEMA or key not in _SCHEMA[section] or section == "run":
        raise ConfigError(f"{source}: {param!r} is not a model parameter (section.key)")


def _axis(item, source) -> SweepAxis:
    if not isinstance(item, dict) or "param" not in item:
        raise ConfigError(f"{source}: every [[sweep]] entry needs a 'param'")
    param = item["param"]
    unknown = set(item) - {"param", "values", "start", "stop", "num", "spacing"}
    if unknown:
        raise ConfigError(f"{source}: [[sweep]] {param}: unknown keys {sorted(unknown)}")
    check_param(param, source)
    if "values" in item:
        vals = item["values"]
        if not isinstance(vals, list) or not vals or not all(isinstance(v, (int, float)) for v in vals):
            raise ConfigError(f"{source}: [[sweep]] {param}: 'values' must be a non-empty list of numbers")
        return SweepAxis(param, tuple(float(v) for v in vals))
    try:
        start, stop, num = float(item["start"]), float(item["stop"]), int(item["num"])
    except (KeyError, TypeError, ValueError):
        raise ConfigError(f"{source}: [[sweep]] {param}: give 'values' or numeric start/stop/num") from None
    spacing = item.get("spacing", "linear")
    if spacing == "linear":
        vals = np.linspace(start, stop, num)
    elif spacing == "log":
        if start <= 0 or stop <= 0:
            raise ConfigError(f"{source}: [[sweep]] {param}: log spacing needs positive bounds")
        vals = np.geomspace(start, stop, num)
    else:
        raise ConfigError(f"{source}: [[sweep]] {param}: spacing must be 'linear' or 'log'")
    return SweepAxis(param, tuple(vals.tolist()))


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        tree = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    _check_schema(tree, source)
    run = tree.get("run", {})
    mode = run.get("mode")
    if mode is not None and mode not in MODES:
        raise ConfigError(f"{_where(source, 'run', 'mode')}: {mode!r} is not one of {MODES}")
    ints = {}
    for key, default in (("n_trajectories", 1000), ("seed", 0), ("threads", 1)):
        v = run.get(key, default)
        if isinstance(v, bool) or not isinstance(v, int) or v < (1 if key != "seed" else 0):
            raise ConfigError(f"{_where(source, 'run', key)}: expected a non-negative integer, got {v!r}")
        ints[key] = v
    spec = RunSpec(
        mode=mode,
        kind=_str(tree, "run", "kind", source, "scattering", {"scattering", "bare-unitary", "eikonal"}),
        method=_str(tree, "run", "method", source, "rk4", {"rk4", "exact"}),
        initial=_str(tree, "run", "initial", source, "ground",
                     {"ground", "excited", "plus", "maximally-mixed"}),
        times=_time_grid(run, source),
        convention=_str(tree, "run", "convention", source, "centered", {"centered", "verbatim"}),
        recording=_str(tree, "run", "recording", source, "kick", {"kick", "pre-window"}),
        **ints,
    )
    sweep = tree.get("sweep", [])
    if not isinstance(sweep, list):
        raise ConfigError(f"{source}: 'sweep' must be an array of tables ([[sweep]])")
    axes = tuple(_axis(item, source) for item in sweep)
    model_tree = {k: v for k, v in tree.items() if k not in ("run", "sweep")}
    cfg = ExperimentConfig(model_tree, spec, axes, text, source)
    build_from_tree(model_tree, source)   # fail early on model errors
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(p))


def preset_names() -> list[str]:
    return sorted(f.name[:-5] for f in resources.files("repint.presets").iterdir()
                  if f.name.endswith(".toml"))


def load_preset(name: str) -> ExperimentConfig:
    f = resources.files("repint.presets") / f"{name}.toml"
    if not f.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_config(f.read_text(), f"preset:{name}")


def set_param(tree: dict, param: str, value) -> dict:
    """Copy of ``tree`` with dotted ``param`` set, dropping alternative spellings."""
    out = copy.deepcopy(tree)
    section, _, key = param.partition(".")
    sec = out.setdefault(section, {})
    for group in _ALTERNATIVES:
        if key in group:
            for alt in group - {key}:
                sec.pop(alt, None)
    sec[key] = value
    return out


def sweep_points(cfg: ExperimentConfig) -> list[dict]:
    if not cfg.sweep:
        return [{}]
    names = [a.param for a in cfg.sweep]
    return [dict(zip(names, combo)) for combo in itertools.product(*(a.values for a in cfg.sweep))]


def tree_at(cfg: ExperimentConfig, point: dict) -> dict:
    tree = cfg.tree
    for k, v in point.items():
        tree = set_param(tree, k, v)
    return tree


def _reference(unit, source, section, key, freqs):
    if unit == "unit":
        return 1.0
    if unit not in freqs:
        raise ConfigError(f"{_where(source, section, key)}: unit {unit!r} is not one of "
                          f"{sorted(['unit', *freqs])}")
    f = freqs[unit]
    if f == 0:
        raise ConfigError(f"{_where(source, section, key)}: reference frequency {unit} is zero")
    return abs(f)


def build_from_tree(tree: dict, source: str = "<config>"):
    """Model from a parsed configuration tree, with field-level diagnostics."""
    t = {"run": {}, **tree}
    stype = _str(t, "system", "type", source, "single-spin", {"single-spin", "two-spin"})
    if stype == "single-spin":
        J = _num(t, "system", "J", source, 0.5, nonneg=True)
        omega_s = _num(t, "system", "omega_s", source, required=True)
        system = SingleSpin(J, omega_s)
    else:
        omega_s = _num(t, "system", "omega_1", source, required=True)
        system = TwoSpin(omega_s, _num(t, "system", "omega_2", source, required=True),
                         _num(t, "system", "J1", source, 0.5), _num(t, "system", "J2", source, 0.5),
                         _num(t, "system", "G_x", source, 0.0), _num(t, "system", "G_y", source, 0.0),
                         _num(t, "system", "G_z", source, 0.0))
    if "omega_p_over_omega_s" in t.get("probe", {}):
        omega_p = omega_s * _num(t, "probe", "omega_p_over_omega_s", source)
    else:
        omega_p = _num(t, "probe", "omega_p", source, required=True)

    itype = _str(t, "interaction", "type", source, "linear-spin",
                 {"linear-spin", "measurement", "composite-local"})
    if itype == "measurement":
        g = _num(t, "interaction", "g", source, required=True)
        if "theta_over_pi" in t.get("interaction", {}):
            theta = math.pi * _num(t, "interaction", "theta_over_pi", source)
        else:
            theta = _num(t, "interaction", "theta", source, 0.0)
        inter = Measurement(g, theta)
        g_ref = g
    else:
        gx = _num(t, "interaction", "g_x", source, 0.0)
        if "gy_over_gx" in t.get("interaction", {}):
            gy = gx * _num(t, "interaction", "gy_over_gx", source)
        else:
            gy = _num(t, "interaction", "g_y", source, 0.0)
        gz = _num(t, "interaction", "g_z", source, 0.0)
        inter = (LinearSpin if itype == "linear-spin" else CompositeLocal)(gx, gy, gz)
        g_ref = gx
    gamma = _num(t, "stream", "gamma", source, required=True, nonneg=True)
    freqs = {"omega_s": omega_s, "omega_p": omega_p, "g": g_ref, "g_x": g_ref, "gamma": gamma}

    kT_unit = _str(t, "probe", "kT_unit", source, "unit")
    if "kT" in t.get("probe", {}):
        kT = _num(t, "probe", "kT", source) * _reference(kT_unit, source, "probe", "kT_unit", freqs)
        beta = beta_from_temperature(kT) if kT >= 0 else -1.0
    else:
        beta = _num(t, "probe", "beta", source, math.inf)
    if not beta >= 0:
        raise ConfigError(f"{_where(source, 'probe', 'beta')}: temperature must be >= 0")
    state = _str(t, "probe", "state", source, "thermal", {"thermal", "ground"})
    ens = t.get("probe", {}).get("ensemble", [])
    try:
        freq_list = tuple((float(w), float(f)) for w, f in ens)
    except (TypeError, ValueError):
        raise ConfigError(f"{_where(source, 'probe', 'ensemble')}: expected [[weight, omega_p], ...]") from None
    probe = ProbeSpec(_num(t, "probe", "j", source, 0.5, nonneg=True), omega_p, beta, state, freq_list)

    tau_unit = _str(t, "interaction", "tau_unit", source, "unit")
    tau_val = _num(t, "interaction", "tau", source, required=True, nonneg=True)
    tau = tau_val / _reference(tau_unit, source, "interaction", "tau_unit", freqs)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = build_model(system, probe, inter, tau, gamma)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: invalid model: {exc}") from None
    return model
