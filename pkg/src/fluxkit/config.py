"""JSON configuration documents.

Top-level sections: design, noise, sweep, optimize, targets. Every section
is optional at load time; each command checks for the ones it needs.

    {
      "design":   {"ic_na": 40, "csh_ff": 20, "cj_ff": 1, "n": 8, "gamma_over_n": 1.0},
      "noise":    {"flux_noise_amplitude": 2e-6, "dielectric_loss_tangent": 1e-6,
                   "qp_density": 1e-7, "temperature": 0.02},
      "sweep":    {"axis": "gamma_over_n", "range": [0.8, 1.3], "points": 21,
                   "outputs": ["omega01", "anharmonicity"]},
      "targets":  {"omega01_ghz": 3.5, "anharmonicity_ghz": 1.17, "weights": [1, 1],
                   "max_dispersion_ghz": null, "max_curvature": null},
      "optimize": {"seed": 0, "n_set": [2, 4, 6, 8, 12, 16], "ic_bounds_na": [5, 100],
                   "csh_bounds_ff": [5, 100], "gamma_over_n_bounds": [0.7, 1.5],
                   "omega01_box_ghz": [2, 6], "cj_ff": 1, "cg_ff": 0, "grid_points": 5}
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .circuit import CircuitDesign, design_from_dict
from .errors import ConfigError, FluxkitError
from .noise import NoiseModel, noise_from_dict
from .sweep import DEFAULT_N_SET, OUTPUTS, DesignTargets, SweepSpec

SECTIONS = ("design", "noise", "sweep", "optimize", "targets")
SWEEP_KEYS = {"axis", "range", "points", "outputs"}
TARGET_KEYS = {"omega01_ghz", "anharmonicity_ghz", "weights", "max_dispersion_ghz", "max_curvature"}
OPTIMIZE_KEYS = {"seed", "n_set", "ic_bounds_na", "csh_bounds_ff", "gamma_over_n_bounds",
                 "omega01_box_ghz", "cj_ff", "cg_ff", "grid_points"}


@dataclass
class Config:
    raw: dict
    design: CircuitDesign | None = None
    noise: NoiseModel | None = None

    def section(self, name: str) -> dict:
        if name not in self.raw:
            raise ConfigError(f"config has no '{name}' section")
        return self.raw[name]


def _check_keys(section: str, data, allowed: set):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be an object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")


def parse_config(raw: dict, overrides: dict | None = None) -> Config:
    """Validate a config document. ``overrides`` maps section -> {key: value}
    and wins over the file (flags override config)."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    raw = {k: dict(v) if isinstance(v, dict) else v for k, v in raw.items()}
    for section, values in (overrides or {}).items():
        values = {k: v for k, v in values.items() if v is not None}
        if values:
            raw.setdefault(section, {}).update(values)
    cfg = Config(raw)
    if "design" in raw:
        cfg.design = design_from_dict(raw["design"])
    if "noise" in raw:
        try:
            cfg.noise = noise_from_dict(raw["noise"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"noise: {exc}") from exc
    if "sweep" in raw:
        _check_keys("sweep", raw["sweep"], SWEEP_KEYS)
    if "targets" in raw:
        _check_keys("targets", raw["targets"], TARGET_KEYS)
    if "optimize" in raw:
        _check_keys("optimize", raw["optimize"], OPTIMIZE_KEYS)
    return cfg


def load_config(path, overrides: dict | None = None) -> Config:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, overrides)


def sweep_spec(cfg: Config) -> SweepSpec:
    if cfg.design is None:
        raise ConfigError("sweep needs a 'design' section for the base design")
    s = cfg.section("sweep")
    try:
        lo, hi = (float(x) for x in s["range"])
        outputs = tuple(s.get("outputs", ("omega01", "anharmonicity")))
        return SweepSpec(s["axis"], lo, hi, s.get("points", 11), cfg.design, outputs)
    except KeyError as exc:
        raise ConfigError(f"sweep section is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FluxkitError):
            raise
        raise ConfigError(f"bad sweep section: {exc}") from exc


def design_targets(cfg: Config) -> DesignTargets:
    t = cfg.section("targets")
    o = cfg.raw.get("optimize", {})
    try:
        return DesignTargets(
            target_omega01=float(t["omega01_ghz"]),
            target_anharmonicity=float(t["anharmonicity_ghz"]),
            weights=tuple(float(w) for w in t.get("weights", (1.0, 1.0))),
            ic_bounds=tuple(float(x) for x in o.get("ic_bounds_na", (5.0, 100.0))),
            csh_bounds=tuple(float(x) for x in o.get("csh_bounds_ff", (5.0, 100.0))),
            gamma_over_n_bounds=tuple(float(x) for x in o.get("gamma_over_n_bounds", (0.7, 1.5))),
            n_set=tuple(int(n) for n in o.get("n_set", DEFAULT_N_SET)),
            junction_capacitance=float(o.get("cj_ff", 1.0)),
            ground_capacitance=float(o.get("cg_ff", 0.0)),
            omega01_box=tuple(float(x) for x in o.get("omega01_box_ghz", (2.0, 6.0))),
            max_dispersion=_optional(t.get("max_dispersion_ghz")),
            max_curvature=_optional(t.get("max_curvature")),
            grid_points=int(o.get("grid_points", 5)),
        )
    except KeyError as exc:
        raise ConfigError(f"targets section is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, FluxkitError):
            raise
        raise ConfigError(f"bad targets/optimize section: {exc}") from exc


def _optional(value):
    return None if value is None else float(value)


def seed(cfg: Config) -> int:
    value = cfg.raw.get("optimize", {}).get("seed", 0)
    if isinstance(value, bool) or int(value) != value:
        raise ConfigError("seed must be an integer")
    return int(value)


__all__ = ["Config", "SECTIONS", "OUTPUTS", "design_targets", "load_config", "parse_config",
           "seed", "sweep_spec"]
