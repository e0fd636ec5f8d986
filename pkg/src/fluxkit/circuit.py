"""Circuit parameters, energy scales and regime classification for the
generalized flux qubit: a principal junction (I_c, C_J) shunted by a
capacitor C_sh and by an array of N junctions that are gamma times larger.

Units throughout the package: energies as frequencies in GHz (E/h),
capacitances in fF, currents in nA, phases in rad.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

from .errors import InvalidDesignError, WorkingPointError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants. Defaults are the exact CODATA 2018 values."""

    electron_charge: float = 1.602176634e-19  # C
    planck: float = 6.62607015e-34  # J s

    def __post_init__(self):
        if not (self.electron_charge > 0 and self.planck > 0):
            raise ValueError("physical constants must be positive")

    @property
    def flux_quantum(self) -> float:
        return self.planck / (2.0 * self.electron_charge)


CODATA2018 = PhysicalConstants()


@dataclass(frozen=True)
class CircuitDesign:
    critical_current: float  # nA
    shunt_capacitance: float  # fF
    junction_capacitance: float  # fF
    ground_capacitance: float = 0.0  # fF
    array_size: int = 8
    size_ratio: float = 8.0  # gamma
    external_phase: float = math.pi  # rad, stored in [0, 2pi)

    def __post_init__(self):
        n = self.array_size
        if isinstance(n, float) and n.is_integer():
            object.__setattr__(self, "array_size", int(n))
        elif not isinstance(n, int) or isinstance(n, bool):
            raise InvalidDesignError(f"array size must be an integer, got {n!r}")
        if self.array_size < 1:
            raise InvalidDesignError("array size N must be >= 1")
        for name in ("critical_current", "shunt_capacitance", "junction_capacitance",
                     "ground_capacitance", "size_ratio", "external_phase"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidDesignError(f"{name} must be finite")
        if self.critical_current <= 0:
            raise InvalidDesignError("critical current must be > 0")
        if self.junction_capacitance <= 0:
            raise InvalidDesignError("junction capacitance C_J must be > 0")
        if self.shunt_capacitance < 0 or self.ground_capacitance < 0:
            raise InvalidDesignError("capacitances must be non-negative")
        if self.size_ratio <= 0:
            raise InvalidDesignError("size ratio gamma must be > 0")
        phase = math.fmod(self.external_phase, TWO_PI)
        if phase < 0:
            phase += TWO_PI
        if phase >= TWO_PI:
            phase = 0.0
        object.__setattr__(self, "external_phase", phase)

    @classmethod
    def from_ratio(cls, critical_current, shunt_capacitance, junction_capacitance,
                   array_size, gamma_over_n, ground_capacitance=0.0,
                   external_phase=math.pi) -> "CircuitDesign":
        return cls(critical_current, shunt_capacitance, junction_capacitance,
                   ground_capacitance, array_size, gamma_over_n * array_size,
                   external_phase)

    @property
    def gamma_over_n(self) -> float:
        return self.size_ratio / self.array_size

    def replace(self, **changes) -> "CircuitDesign":
        """Copy with changes; ``gamma_over_n=`` is accepted and keeps N as given."""
        gn = changes.pop("gamma_over_n", None)
        new = dataclasses.replace(self, **changes)
        if gn is not None:
            new = dataclasses.replace(new, size_ratio=gn * new.array_size)
        return new

    def to_dict(self) -> dict:
        return {
            "ic_na": self.critical_current,
            "csh_ff": self.shunt_capacitance,
            "cj_ff": self.junction_capacitance,
            "cg_ff": self.ground_capacitance,
            "n": self.array_size,
            "gamma": self.size_ratio,
            "phie_rad": self.external_phase,
        }


DESIGN_KEYS = ("ic_na", "csh_ff", "cj_ff", "cg_ff", "n", "gamma", "phie_rad")


def design_from_dict(data: dict) -> CircuitDesign:
    """Build a design from the flat key-value form. Unknown keys are rejected.

    ``gamma_over_n`` may be given instead of ``gamma``. ``cg_ff`` defaults
    to 0 and ``phie_rad`` to pi.
    """
    if not isinstance(data, dict):
        raise InvalidDesignError("design must be a JSON object")
    unknown = set(data) - set(DESIGN_KEYS) - {"gamma_over_n"}
    if unknown:
        raise InvalidDesignError(f"unknown design keys: {sorted(unknown)}")
    missing = [k for k in ("ic_na", "csh_ff", "cj_ff", "n") if k not in data]
    if missing:
        raise InvalidDesignError(f"missing design keys: {missing}")
    if ("gamma" in data) == ("gamma_over_n" in data):
        raise InvalidDesignError("give exactly one of 'gamma' or 'gamma_over_n'")
    try:
        n = data["n"]
        if isinstance(n, bool) or not float(n).is_integer():
            raise InvalidDesignError(f"n must be an integer, got {n!r}")
        n = int(n)
        gamma = float(data["gamma"]) if "gamma" in data else float(data["gamma_over_n"]) * n
        return CircuitDesign(
            critical_current=float(data["ic_na"]),
            shunt_capacitance=float(data["csh_ff"]),
            junction_capacitance=float(data["cj_ff"]),
            ground_capacitance=float(data.get("cg_ff", 0.0)),
            array_size=n,
            size_ratio=gamma,
            external_phase=float(data.get("phie_rad", math.pi)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidDesignError):
            raise
        raise InvalidDesignError(f"bad design value: {exc}") from exc


def load_design(path) -> CircuitDesign:
    return design_from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class EnergyScales:
    josephson_energy: float  # GHz
    charging_energy: float  # GHz
    total_capacitance: float  # fF

    @property
    def ej_ec_ratio(self) -> float:
        return self.josephson_energy / self.charging_energy


def total_capacitance(design: CircuitDesign) -> float:
    d = design
    return (d.shunt_capacitance + d.junction_capacitance
            + d.size_ratio * d.junction_capacitance / d.array_size
            + d.ground_capacitance)


def josephson_energy_ghz(critical_current_na: float,
                         constants: PhysicalConstants = CODATA2018) -> float:
    return critical_current_na * 1e-9 * constants.flux_quantum / (TWO_PI * constants.planck) / 1e9


def charging_energy_ghz(capacitance_ff: float,
                        constants: PhysicalConstants = CODATA2018) -> float:
    e = constants.electron_charge
    return e * e / (2.0 * capacitance_ff * 1e-15 * constants.planck) / 1e9


def derive_energies(design: CircuitDesign,
                    constants: PhysicalConstants = CODATA2018) -> EnergyScales:
    c_sigma = total_capacitance(design)
    if not math.isfinite(c_sigma) or c_sigma <= 0:
        raise InvalidDesignError(f"total capacitance must be positive, got {c_sigma}")
    return EnergyScales(
        josephson_energy=josephson_energy_ghz(design.critical_current, constants),
        charging_energy=charging_energy_ghz(c_sigma, constants),
        total_capacitance=c_sigma,
    )


class ExpansionValidityWarning(UserWarning):
    pass


def at_sweet_spot(design: CircuitDesign, atol: float = 1e-12) -> bool:
    return abs(design.external_phase - math.pi) <= atol


def expansion_coefficients(design: CircuitDesign, energies: EnergyScales) -> tuple[float, float]:
    """Quadratic and quartic coefficients (GHz) of the potential expanded
    about phi = 0 at the sweet spot: V ~ c2 phi^2 + c4 phi^4."""
    if not at_sweet_spot(design):
        raise WorkingPointError(
            f"expansion is taken at phi_e = pi, design has {design.external_phase:.6g}")
    n, gamma = design.array_size, design.size_ratio
    if n ** 3 < 50 * gamma:
        warnings.warn(f"N^3 = {n ** 3} is not >> gamma = {gamma:g}; quartic expansion "
                      "neglects a gamma/N^3 correction", ExpansionValidityWarning, stacklevel=2)
    ej = energies.josephson_energy
    return ej * (design.gamma_over_n - 1.0) / 2.0, ej / 24.0


class RegimeTag(str, enum.Enum):
    FLUXON = "Fluxon"
    PLASMON = "Plasmon"
    QUARTON = "Quarton"
    SINGLE_JUNCTION = "SingleJunctionDominated"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    quarton_tolerance: float


def classify_regime(design: CircuitDesign, tolerance: float = 0.05) -> Regime:
    if not 0.0 < tolerance < 0.5:
        raise ValueError("quarton tolerance must lie in (0, 0.5)")
    gn = design.gamma_over_n
    if design.size_ratio <= 1.0:
        tag = RegimeTag.SINGLE_JUNCTION
    elif abs(gn - 1.0) <= tolerance:
        tag = RegimeTag.QUARTON
    elif gn < 1.0:
        tag = RegimeTag.FLUXON
    else:
        tag = RegimeTag.PLASMON
    return Regime(tag, tolerance)
