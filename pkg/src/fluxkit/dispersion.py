"""Charge dispersion: Bloch sweeps of the one-mode model, the empirical
N-scaling fit for quartons and the single-junction scaling check.

The offset charge n_g enters the one-mode model as the Bloch angle
theta = 2 pi n_g on one array period (width 2 pi N). The one-mode estimate
misses phase slips across individual array junctions, so it is labeled
low fidelity; the full circuit model is the reference (see ``fullmodel``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .circuit import CODATA2018, CircuitDesign, EnergyScales, PhysicalConstants, derive_energies
from .errors import FitFailure
from .spectral import (
    Bloch, GridSpec, SchrodingerProblem, bloch_bandwidth, build_operator, converge, solve_lowest,
)
from .spectrum import ground_width_estimate, gfq_potential, _start_points

Level = Union[int, tuple]
DEFAULT_SAMPLES = 17
# eigenvalue noise is ~eps * ||H||; sweep amplitudes are trusted above this multiple
RESOLUTION_FACTOR = 1e4


def offset_samples(samples: int) -> np.ndarray:
    """n_g values k/(samples-1) on [0, 1]; an odd count hits 0 and 0.5, and
    the endpoint 1 repeats 0 as a periodicity check."""
    if samples < 2:
        raise ValueError("need at least 2 offset samples")
    return np.linspace(0.0, 1.0, samples)


@dataclass
class DispersionResult:
    """Band E(n_g) (or transition E_j - E_i when ``level`` is a pair) and its
    peak-to-peak size. Amplitudes below double-precision resolution are
    taken from the transfer-matrix band width instead; ``log10_amplitude``
    stays finite even when ``amplitude`` underflows to 0."""

    level: Level
    amplitude: float  # GHz
    offsets: np.ndarray
    band: np.ndarray  # GHz
    log10_amplitude: float
    method: str = "bloch-sweep"
    model: str = "1d"
    resolution: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def level_label(self) -> str:
        if isinstance(self.level, tuple):
            return f"{self.level[0]}-{self.level[1]}"
        return str(self.level)


def _levels_needed(level: Level) -> int:
    return (max(level) if isinstance(level, tuple) else level) + 1


def _pick(values: np.ndarray, level: Level) -> float:
    if isinstance(level, tuple):
        i, j = level
        return float(values[j] - values[i])
    return float(values[level])


def _log_transition_width(log_wi: float, log_wj: float) -> float:
    # adjacent tight-binding bands disperse in opposite directions, so the
    # transition width is the sum of the two band widths
    hi, lo = max(log_wi, log_wj), min(log_wi, log_wj)
    return hi + math.log1p(math.exp(lo - hi))


def bloch_band(potential, kinetic: float, half_width: float, level: Level,
               samples: int = DEFAULT_SAMPLES, tolerance: float = 1e-4,
               start_spacing: float | None = None) -> DispersionResult:
    """Sweep n_g over one periodic cell of width 2*half_width."""
    k = max(_levels_needed(level) + 1, 3)
    spacing = start_spacing if start_spacing is not None else 2 * half_width / 256
    pts = _start_points(half_width, spacing) - 1
    grid0 = GridSpec(half_width, pts, Bloch(0.0))
    conv = converge(SchrodingerProblem(potential, kinetic, grid0), tolerance, k)
    grid = conv.grid
    offsets = offset_samples(samples)
    band = []
    scale = 0.0
    for ng in offsets:
        op = build_operator(potential, kinetic, grid.with_boundary(Bloch(2 * math.pi * ng)), levels=k)
        scale = max(scale, op.scale())
        band.append(_pick(solve_lowest(op, k).values, level))
    band = np.array(band)
    amplitude = float(band.max() - band.min())
    resolution = RESOLUTION_FACTOR * np.finfo(float).eps * scale
    meta = {"points": grid.points, "half_width_rad": half_width, "refinements": conv.refinements}
    if amplitude > resolution:
        return DispersionResult(level, amplitude, offsets, band, math.log10(amplitude),
                                "bloch-sweep", resolution=resolution, meta=meta)
    raw0 = conv.solution.values
    if isinstance(level, tuple):
        i, j = level
        log_w = _log_transition_width(bloch_bandwidth(potential, kinetic, grid, raw0[i])[1],
                                      bloch_bandwidth(potential, kinetic, grid, raw0[j])[1])
    else:
        log_w = bloch_bandwidth(potential, kinetic, grid, raw0[level])[1]
    log10_w = log_w / math.log(10.0)
    amp = 10.0 ** log10_w if log10_w > -300 else 0.0
    return DispersionResult(level, amp, offsets, band, log10_w, "transfer-matrix",
                            resolution=resolution, meta=meta)


def charge_dispersion_1d(design: CircuitDesign, level: Level = 0,
                         samples: int = DEFAULT_SAMPLES, tolerance: float = 1e-4,
                         constants: PhysicalConstants = CODATA2018) -> DispersionResult:
    """One-mode (low-fidelity) dispersion on the 2 pi N cell."""
    if samples < 8:
        raise ValueError("need at least 8 offset samples")
    energies = derive_energies(design, constants)
    result = bloch_band(gfq_potential(design, energies), 4.0 * energies.charging_energy,
                        math.pi * design.array_size, level, samples, tolerance,
                        start_spacing=ground_width_estimate(design, energies) / 4.0)
    result.model = "1d"
    return result


def dispersion_empirical(energies: EnergyScales, n: int) -> float:
    """sqrt(16 E_J E_C) exp(-sqrt(N^2.5 E_J / (7 E_C))) in GHz."""
    if n < 1:
        raise ValueError("N must be >= 1")
    ej, ec = energies.josephson_energy, energies.charging_energy
    return math.sqrt(16.0 * ej * ec) * math.exp(-math.sqrt(n ** 2.5 * ej / (7.0 * ec)))


def single_junction_dispersion(ej: float, ec: float, level: Level = 0,
                               samples: int = DEFAULT_SAMPLES,
                               tolerance: float | None = None) -> DispersionResult:
    """-4 E_C d^2 - E_J cos(phi) on a 2 pi cell."""
    tol = tolerance if tolerance is not None else 1e-5 * ec
    return bloch_band(lambda x: -ej * np.cos(x), 4.0 * ec, math.pi, level, samples, tol,
                      start_spacing=(2.0 * ec / ej) ** 0.25 / 4.0)


@dataclass
class ScalingCheck:
    ratios: np.ndarray
    amplitudes: np.ndarray  # GHz
    slope: float  # d ln(dispersion) / d sqrt(E_J/E_C)
    intercept: float
    expected_slope: float = -math.sqrt(8.0)

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.expected_slope) / abs(self.expected_slope)


def transmon_dispersion_oracle(ratios: Sequence[float] = tuple(np.linspace(20, 80, 7)),
                               charging_energy: float = 1.0, level: int = 0,
                               samples: int = 9) -> ScalingCheck:
    """Fit ln(dispersion) against sqrt(E_J/E_C) for a single junction.

    The fitted slope should sit near -sqrt(8); the (E_J/E_C)^(3/4)
    prefactor of the asymptotic band width pulls it slightly above that.
    """
    ratios = np.asarray(ratios, dtype=float)
    if len(ratios) < 4:
        raise FitFailure(f"need at least 4 E_J/E_C points, got {len(ratios)}")
    if np.any(ratios < 10) or np.any(ratios > 100):
        raise ValueError("E_J/E_C ratios must lie in [10, 100]")
    amps = np.array([single_junction_dispersion(r * charging_energy, charging_energy, level,
                                                samples).amplitude for r in ratios])
    if np.any(amps <= 0):
        raise FitFailure("non-positive dispersion in fit data")
    slope, intercept = np.polyfit(np.sqrt(ratios), np.log(amps), 1)
    return ScalingCheck(ratios, amps, float(slope), float(intercept))
