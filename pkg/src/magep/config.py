"""Simulation configuration: INI-style ``key = value`` files with sections.

Example::

    [simulation]
    scenario = diocotron
    t_final = 1.0

    [mesh]
    refinement = 5

    [diocotron]
    mode = 3
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


SCENARIOS = ("vortex", "diocotron")
RESTARTS = ("none", "full", "relaxation")
PRECONDITIONERS = ("lu", "amg", "sgs", "jacobi")


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _float_list(text: str):
    return tuple(float(x) for x in text.replace(",", " ").split())


def _bool(text: str):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _item(section, default, parse=None, **kw):
    meta = {"section": section}
    if parse is not None:
        meta["parse"] = parse
    if isinstance(default, (list, dict, tuple)) and not isinstance(default, tuple):
        return field(default_factory=lambda: default, metadata=meta, **kw)
    return field(default=default, metadata=meta, **kw)


@dataclass
class SimulationConfig:
    """All run parameters.

    ``alpha`` and ``omega`` default to None, meaning the scenario's own
    values (1 and 0 for the vortex; beta^2/rho_max and beta^2 for the
    diocotron).
    """

    scenario: str | None = _item("simulation", None, str)
    t_final: float = _item("simulation", 1.0)
    output_dir: str = _item("simulation", "output")
    csv_every: int = _item("simulation", 1)
    snapshot_times: tuple = _item("simulation", (), _float_list)
    threads: int = _item("simulation", 1)
    seed: int = _item("simulation", 0)

    refinement: int = _item("mesh", 5)

    eos: str | None = _item("physics", None, str)
    gamma: float = _item("physics", 1.4)
    covolume: float = _item("physics", 0.0)
    temperature: float = _item("physics", 1e-4)
    alpha: float | None = _item("physics", None, _opt_float)
    omega: float | None = _item("physics", None, _opt_float)

    theta: float | None = _item("numerics", None, _opt_float)
    cfl: float | None = _item("numerics", None, _opt_float)
    restart: str = _item("numerics", "none")
    time_integrator: str = _item("numerics", "euler")
    tolerance: float = _item("numerics", 1e-12)
    preconditioner: str = _item("numerics", "lu")

    mode: int = _item("diocotron", 3)
    delta: float = _item("diocotron", 0.1)
    r0: float = _item("diocotron", 6.0)
    r1: float = _item("diocotron", 8.0)
    radius: float = _item("diocotron", 16.0)
    rho_min: float = _item("diocotron", 1e-6)
    rho_max: float = _item("diocotron", 1.0)
    beta: float = _item("diocotron", 1e6)
    sample_radius: float | None = _item("diocotron", None, _opt_float)
    samples: int = _item("diocotron", 256)

    vortex_beta: float = _item("vortex", 5.0)
    vortex_speed: tuple = _item("vortex", (1.0, 1.0), _float_list)
    vortex_center: tuple = _item("vortex", (-1.0, -1.0), _float_list)

    # ------------------------------------------------------------ resolved
    def resolved(self) -> "SimulationConfig":
        """Copy with scenario defaults filled in for every None entry."""
        self.validate()
        c = dataclasses.replace(self)
        if c.scenario == "vortex":
            c.eos = c.eos or "covolume"
            c.alpha = 1.0 if c.alpha is None else c.alpha
            c.omega = 0.0 if c.omega is None else c.omega
            c.theta = 1.0 if c.theta is None else c.theta
            c.cfl = 0.1 if c.cfl is None else c.cfl
        else:
            c.eos = c.eos or "isothermal"
            c.alpha = c.beta**2 / c.rho_max if c.alpha is None else c.alpha
            c.omega = c.beta**2 if c.omega is None else c.omega
            c.theta = 1.0 if c.theta is None else c.theta
            c.cfl = 0.25 if c.cfl is None else c.cfl
            c.sample_radius = c.r0 if c.sample_radius is None else c.sample_radius
        c.validate()
        return c

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(key, msg)

        need(self.scenario is not None, "scenario", "a scenario is required (vortex or diocotron)")
        need(self.scenario in SCENARIOS, "scenario", f"must be one of {SCENARIOS}")
        need(self.t_final >= 0.0 and math.isfinite(self.t_final), "t_final", "must be >= 0")
        need(self.csv_every >= 1, "csv_every", "must be >= 1")
        need(self.threads >= 1, "threads", "must be >= 1")
        need(0 <= self.refinement <= 12, "refinement", "must lie in [0, 12]")
        need(self.eos in (None, "covolume", "isothermal"), "eos", "covolume or isothermal")
        need(1.0 < self.gamma <= 5.0 / 3.0, "gamma", "must lie in (1, 5/3]")
        need(self.covolume >= 0.0, "covolume", "must be >= 0")
        need(self.temperature >= 0.0, "temperature", "must be >= 0")
        need(self.alpha is None or self.alpha > 0.0, "alpha", "must be > 0")
        need(self.theta is None or 0.0 < self.theta <= 1.0, "theta", "must lie in (0, 1]")
        need(self.cfl is None or 0.0 < self.cfl < 1.0, "cfl", "must lie in (0, 1)")
        need(self.restart in RESTARTS, "restart", f"must be one of {RESTARTS}")
        need(self.time_integrator in ("euler", "ssprk3"), "time_integrator", "euler or ssprk3")
        need(0.0 < self.tolerance < 1.0, "tolerance", "must lie in (0, 1)")
        need(self.preconditioner in PRECONDITIONERS, "preconditioner",
             f"must be one of {PRECONDITIONERS}")
        need(self.mode >= 1, "mode", "must be >= 1")
        need(0.0 <= self.delta < 0.5, "delta", "must lie in [0, 1/2)")
        need(0.0 < self.r0 < self.r1 < self.radius, "r0", "radii must satisfy 0 < r0 < r1 < radius")
        need(0.0 < self.rho_min < self.rho_max, "rho_min", "must satisfy 0 < rho_min < rho_max")
        need(self.beta > 0.0, "beta", "must be > 0")
        need(self.samples >= 2 * self.mode + 1, "samples", "too few samples for the mode")
        need(self.vortex_beta > 0.0, "vortex_beta", "must be > 0")
        need(len(self.vortex_speed) == 2, "vortex_speed", "needs two components")
        need(len(self.vortex_center) == 2, "vortex_center", "needs two components")

    # ------------------------------------------------------------ text form
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for f in fields(self):
            sec = f.metadata["section"]
            if not cp.has_section(sec):
                cp.add_section(sec)
            val = getattr(self, f.name)
            if val is None:
                text = "none"
            elif isinstance(val, tuple):
                text = " ".join(repr(float(v)) for v in val)
            elif isinstance(val, float):
                text = repr(val)
            else:
                text = str(val)
            cp.set(sec, f.name, text)
        out = []
        for sec in cp.sections():
            out.append(f"[{sec}]")
            out += [f"{k} = {v}" for k, v in cp.items(sec)]
            out.append("")
        return "\n".join(out)

    def save(self, path) -> None:
        from .io import atomic_write

        with atomic_write(path) as fh:
            fh.write(self.to_ini())


_FIELDS = {f.name: f for f in fields(SimulationConfig)}


def _convert(f, text: str):
    parse = f.metadata.get("parse")
    if parse is not None:
        return parse(text)
    default = f.default
    if isinstance(default, bool):
        return _bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text.strip()


def parse_config_text(text: str, overrides: dict | None = None, validate=True) -> SimulationConfig:
    """Parse INI text; ``overrides`` (already typed) win over file values."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from exc
    values = {}
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            f = _FIELDS.get(key)
            if f is None or f.metadata["section"] != sec:
                raise ConfigError(f"{sec}.{key}", "unknown key")
            try:
                values[key] = _convert(f, raw)
            except ValueError as exc:
                raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from exc
            if f.default is None and isinstance(values[key], str) and values[key].lower() == "none":
                values[key] = None
    for key, val in (overrides or {}).items():
        if key not in _FIELDS:
            raise ConfigError(key, "unknown key")
        if val is not None:
            values[key] = val
    cfg = SimulationConfig(**values)
    if validate:
        cfg.validate()
    return cfg


def parse_config(path=None, overrides: dict | None = None, validate=True) -> SimulationConfig:
    text = ""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, overrides, validate)


def preset(name: str, **overrides) -> SimulationConfig:
    """Parameter sets of the two reference experiments."""
    if name == "vortex":
        cfg = SimulationConfig(scenario="vortex", t_final=1.0, refinement=5)
    elif name == "diocotron":
        cfg = SimulationConfig(scenario="diocotron", t_final=1.0, refinement=5)
    else:
        raise ConfigError("scenario", f"unknown preset {name!r}")
    cfg = dataclasses.replace(cfg, **overrides)
    return cfg.resolved()
