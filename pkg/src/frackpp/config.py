"""Sectioned TOML experiment files: parsing with defaults, validation and emission."""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import tomli
import tomli_w

from .errors import ConfigError
from .evolve import GridSpec, SimulationConfig

__all__ = ["FrontsSpec", "ChecksSpec", "ExperimentConfig", "parse_config", "loads_config", "emit_config"]


@dataclass(frozen=True)
class FrontsSpec:
    """How level-set traces are fitted."""

    model: str = "exponential"
    side: str = "plus"
    fit_level: float = 0.5
    window: tuple[float, float] | None = None

    def validate(self, levels):
        if self.model not in ("exponential", "linear"):
            raise ConfigError(f"fronts.model must be 'exponential' or 'linear', got {self.model!r}")
        if self.side not in ("plus", "minus"):
            raise ConfigError(f"fronts.side must be 'plus' or 'minus', got {self.side!r}")
        if self.fit_level not in levels:
            raise ConfigError(f"fronts.fit_level {self.fit_level} is not among the levels {list(levels)}")
        if self.window is not None and not (len(self.window) == 2 and self.window[0] < self.window[1]):
            raise ConfigError("fronts.window must be [t1, t2] with t1 < t2")


@dataclass(frozen=True)
class ChecksSpec:
    """Acceptance checks evaluated after a run; unset entries are skipped."""

    expected_rate: float | None = None
    rate_tolerance: float = 0.05
    sandwich_band: float | None = None
    sandwich_window: tuple[float, float] | None = None
    widening_window: tuple[float, float] | None = None
    widening_slack: float = 0.05
    invasion_rates: tuple[float, ...] = ()
    invasion_threshold: float = 0.05
    stretch_rate: float | None = None
    stretch_tolerance: float = 0.1
    supersolution: bool = False
    lower_bound_sigma: float | None = None
    lower_bound_epsilon: float = 0.1

    def validate(self):
        for name in ("rate_tolerance", "stretch_tolerance", "invasion_threshold", "widening_slack"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"checks.{name} must be positive")
        if self.sandwich_band is not None and not self.sandwich_band >= 1.0:
            raise ConfigError("checks.sandwich_band must be >= 1")
        for w in ("sandwich_window", "widening_window"):
            win = getattr(self, w)
            if win is not None and not (len(win) == 2 and win[0] < win[1]):
                raise ConfigError(f"checks.{w} must be [t1, t2] with t1 < t2")
        if any(not c > 0 for c in self.invasion_rates):
            raise ConfigError("checks.invasion_rates must be positive")
        if not 0.0 < self.lower_bound_epsilon < 1.0:
            raise ConfigError("checks.lower_bound_epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class ExperimentConfig:
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    fronts: FrontsSpec = field(default_factory=FrontsSpec)
    checks: ChecksSpec = field(default_factory=ChecksSpec)
    name: str = "experiment"

    def validate(self):
        try:
            self.simulation.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        self.fronts.validate(self.simulation.levels)
        self.checks.validate()
        return self


# TOML section -> {toml key: (target, attribute)}
_LAYOUT = {
    "kernel": {"alpha": ("sim", "alpha"), "mode": ("sim", "kernel_mode")},
    "reaction": {"name": ("sim", "reaction"), "growth_rate": ("sim", "growth_rate")},
    "initial": {"kind": ("sim", "initial"), "radius": ("sim", "initial_radius")},
    "time": {"dt": ("sim", "dt"), "t_final": ("sim", "t_final"), "snapshot_every": ("sim", "snapshot_every")},
    "grid": {f.name: ("grid", f.name) for f in fields(GridSpec)},
    "fronts": {"levels": ("sim", "levels"), **{f.name: ("fronts", f.name) for f in fields(FrontsSpec)}},
    "checks": {f.name: ("checks", f.name) for f in fields(ChecksSpec)},
}
_TOP = {"name", "alpha", "reaction"}
_FLOATS = {"alpha", "growth_rate", "initial_radius", "dt", "t_final", "snapshot_every", "core_half_width",
           "core_spacing", "stretch", "half_width", "fit_level", "expected_rate", "rate_tolerance",
           "sandwich_band", "widening_slack", "invasion_threshold", "stretch_rate", "stretch_tolerance",
           "lower_bound_sigma", "lower_bound_epsilon"}
_STRINGS = {"kernel_mode", "reaction", "initial", "model", "side"}
_FLOAT_TUPLES = {"levels", "invasion_rates", "window", "sandwich_window", "widening_window"}


def _coerce(attr: str, value, where: str):
    try:
        if attr in _FLOATS:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if attr in _STRINGS:
            if not isinstance(value, str):
                raise TypeError
            return value
        if attr in _FLOAT_TUPLES:
            if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value):
                raise TypeError
            return tuple(float(v) for v in value)
        if attr == "supersolution":
            if not isinstance(value, bool):
                raise TypeError
            return value
    except TypeError:
        raise ConfigError(f"{where} has the wrong type: {value!r}") from None
    raise ConfigError(f"unhandled key {where}")  # pragma: no cover


def loads_config(text: str) -> ExperimentConfig:
    """Parse TOML text; every key must be known (fail closed)."""
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    parts = {"sim": {}, "grid": {}, "fronts": {}, "checks": {}}
    name = "experiment"
    for key, value in data.items():
        if key in _LAYOUT and isinstance(value, dict):
            table = _LAYOUT[key]
            for sub, v in value.items():
                if sub not in table:
                    raise ConfigError(f"unknown key '{sub}' in section [{key}]")
                target, attr = table[sub]
                parts[target][attr] = _coerce(attr, v, f"{key}.{sub}")
        elif key in _TOP:
            if key == "name":
                if not isinstance(value, str):
                    raise ConfigError("name must be a string")
                name = value
            elif key == "alpha":
                parts["sim"]["alpha"] = _coerce("alpha", value, "alpha")
            else:
                parts["sim"]["reaction"] = _coerce("reaction", value, "reaction")
        else:
            raise ConfigError(f"unknown key '{key}'")
    sim = SimulationConfig(**parts["sim"], grid=GridSpec(**parts["grid"]))
    exp = ExperimentConfig(sim, FrontsSpec(**parts["fronts"]), ChecksSpec(**parts["checks"]), name)
    return exp.validate()


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return loads_config(p.read_text())


def config_dict(exp: ExperimentConfig) -> dict:
    """Sectioned plain-data form of ``exp`` (None entries omitted)."""
    objs = {"sim": exp.simulation, "grid": exp.simulation.grid, "fronts": exp.fronts, "checks": exp.checks}
    out: dict = {"name": exp.name}
    for section, table in _LAYOUT.items():
        sec = {}
        for key, (target, attr) in table.items():
            v = getattr(objs[target], attr)
            if v is None:
                continue
            sec[key] = list(v) if isinstance(v, tuple) else v
        out[section] = sec
    return out


def emit_config(exp: ExperimentConfig) -> str:
    return tomli_w.dumps(config_dict(exp))


def with_overrides(exp: ExperimentConfig, **sim_changes) -> ExperimentConfig:
    return replace(exp, simulation=replace(exp.simulation, **sim_changes))
