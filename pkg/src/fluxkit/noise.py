"""Noise sensitivities and golden-rule figures of merit.

Rates here are figures of merit for comparing designs, not predictions of
measured coherence: loss in real devices is dominated by surface
participation, which a lumped-element model does not see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .circuit import CODATA2018, CircuitDesign, PhysicalConstants, RegimeTag, classify_regime, derive_energies
from .dispersion import charge_dispersion_1d, dispersion_empirical
from .errors import WorkingPointError
from .spectrum import compute_spectrum, matrix_elements, spectrum_on_grid

TWO_PI = 2.0 * math.pi
BOLTZMANN = 1.380649e-23  # J/K, exact
# 2 Delta / h for aluminium (Delta ~ 180 ueV), GHz
ALUMINIUM_GAP_GHZ = 87.05
DEFAULT_STEP = 1e-3  # rad


@dataclass(frozen=True)
class NoiseModel:
    flux_noise_amplitude: float = 2e-6  # Phi_0, 1/f amplitude at 1 Hz
    dielectric_loss_tangent: float = 1e-6
    qp_density: float = 1e-7
    temperature: float = 0.02  # K
    spectral_exponent: float = 1.0  # dielectric S(w) ~ w^d; d = 1 is Ohmic
    gap_ghz: float = ALUMINIUM_GAP_GHZ

    def __post_init__(self):
        for name in ("flux_noise_amplitude", "dielectric_loss_tangent", "qp_density"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and non-negative")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError("temperature must be > 0")
        if self.spectral_exponent < 1:
            raise ValueError("spectral exponent d must be >= 1")
        if self.gap_ghz <= 0:
            raise ValueError("superconducting gap must be positive")


def noise_from_dict(data: dict) -> NoiseModel:
    keys = {
        "flux_noise_amplitude": "flux_noise_amplitude",
        "a_phi": "flux_noise_amplitude",
        "dielectric_loss_tangent": "dielectric_loss_tangent",
        "tan_delta": "dielectric_loss_tangent",
        "qp_density": "qp_density",
        "x_qp": "qp_density",
        "temperature": "temperature",
        "temperature_k": "temperature",
        "spectral_exponent": "spectral_exponent",
        "gap_ghz": "gap_ghz",
    }
    unknown = set(data) - set(keys)
    if unknown:
        raise ValueError(f"unknown noise keys: {sorted(unknown)}")
    return NoiseModel(**{keys[k]: float(v) for k, v in data.items()})


@dataclass
class SensitivityReport:
    flux_slope: float  # GHz / Phi_0
    flux_curvature: float  # GHz / Phi_0^2
    dipole: float
    charge_element: float
    qp_element_array: float
    qp_element_principal: float
    omega01: float  # GHz
    dispersion_dephasing_scale: float | None = None  # GHz
    dispersion_model: str | None = None
    external_phase: float = math.pi


def flux_sensitivity(design: CircuitDesign, step: float = DEFAULT_STEP,
                     constants: PhysicalConstants = CODATA2018) -> tuple[float, float]:
    """d omega01 / d Phi_e and d^2 omega01 / d Phi_e^2 at the design's phi_e.

    Central differences with one Richardson step, all on the grid that
    converges the unperturbed spectrum, so discretization error cancels in
    the differences. Phi_e = phi_e Phi_0 / 2 pi, hence the 2 pi factors.
    """
    if not 1e-4 <= step <= 1e-1:
        raise ValueError("finite-difference step must lie in [1e-4, 0.1] rad")
    grid = compute_spectrum(design, constants=constants).solution.grid
    phie = design.external_phase
    cache = {}

    def omega(offset):
        if offset not in cache:
            vals = spectrum_on_grid(design.replace(external_phase=phie + offset), grid, 3, constants)
            cache[offset] = float(vals[1] - vals[0])
        return cache[offset]

    def first(h):
        return (omega(h) - omega(-h)) / (2 * h)

    def second(h):
        return (omega(h) - 2 * omega(0.0) + omega(-h)) / (h * h)

    slope = (4 * first(step / 2) - first(step)) / 3
    curvature = (4 * second(step / 2) - second(step)) / 3
    return slope * TWO_PI, curvature * TWO_PI ** 2


def dispersion_scale(design: CircuitDesign, constants: PhysicalConstants = CODATA2018):
    """Conservative charge-dispersion scale (GHz) and the model it came from.

    The empirical quarton fit is used inside the quarton band; elsewhere the
    one-mode Bloch estimate of the 0-1 transition.
    """
    if classify_regime(design).tag is RegimeTag.QUARTON:
        return dispersion_empirical(derive_energies(design, constants), design.array_size), "empirical"
    result = charge_dispersion_1d(design, level=(0, 1), constants=constants)
    return result.amplitude, "1d"


def sensitivity_report(design: CircuitDesign, step: float = DEFAULT_STEP,
                       dispersion: float | None | str = "auto",
                       constants: PhysicalConstants = CODATA2018) -> SensitivityReport:
    """Sensitivities at the design's working point.

    ``dispersion`` is either a precomputed scale in GHz, ``"auto"`` or None
    (skip; the rate table is then flagged incomplete).
    """
    spec = compute_spectrum(design, constants=constants)
    elements = matrix_elements(design, spec.solution, levels=2)
    slope, curvature = flux_sensitivity(design, step, constants)
    model = None
    if dispersion == "auto":
        dispersion, model = dispersion_scale(design, constants)
    elif dispersion is not None:
        dispersion, model = float(dispersion), "given"
    return SensitivityReport(
        flux_slope=slope,
        flux_curvature=curvature,
        dipole=elements.magnitude("dipole", 0, 1),
        charge_element=elements.magnitude("charge", 0, 1),
        qp_element_array=elements.magnitude("qp_array", 0, 1),
        qp_element_principal=elements.magnitude("qp_principal", 0, 1),
        omega01=spec.qubit_frequency,
        dispersion_dephasing_scale=dispersion,
        dispersion_model=model,
        external_phase=design.external_phase,
    )


@dataclass
class RateContribution:
    name: str
    channel: str  # "T1" or "Tphi"
    rate: float  # 1/s
    formula: str
    constants: dict = field(default_factory=dict)

    @property
    def time(self) -> float:
        return math.inf if self.rate == 0 else 1.0 / self.rate


@dataclass
class RateTable:
    contributions: list
    incomplete: bool = False
    notes: list = field(default_factory=list)
    label: str = "figures of merit (not predictions)"

    def by_name(self, name: str) -> RateContribution:
        for row in self.contributions:
            if row.name == name:
                return row
        raise KeyError(name)

    def total(self, channel: str) -> float:
        return sum(r.rate for r in self.contributions if r.channel == channel)


def estimate_rates(design: CircuitDesign, noise: NoiseModel, report: SensitivityReport,
                   constants: PhysicalConstants = CODATA2018) -> RateTable:
    if abs(report.external_phase - design.external_phase) > 1e-12:
        raise WorkingPointError("sensitivity report was computed at a different phi_e")
    energies = derive_energies(design, constants)
    ghz = TWO_PI * 1e9  # GHz -> angular rate in 1/s
    f01 = report.omega01
    a_phi = noise.flux_noise_amplitude
    rows = []

    # 1/f flux noise, echo convention
    echo = math.sqrt(math.log(2.0))
    rows.append(RateContribution(
        "flux_first_order", "Tphi", ghz * a_phi * abs(report.flux_slope) * echo,
        "2pi*1e9 * A_phi * |d omega01/d Phi_e| * sqrt(ln 2)", {"sqrt_ln2": echo}))
    rows.append(RateContribution(
        "flux_second_order", "Tphi", ghz * a_phi ** 2 * abs(report.flux_curvature),
        "2pi*1e9 * A_phi^2 * |d^2 omega01/d Phi_e^2| * c2", {"c2": 1.0}))

    # dielectric loss on the total capacitance
    x = constants.planck * f01 * 1e9 / (2 * BOLTZMANN * noise.temperature)
    thermal = 1.0 / math.tanh(x)
    colour = f01 ** (noise.spectral_exponent - 1.0)  # relative to 1 GHz
    rows.append(RateContribution(
        "dielectric", "T1",
        ghz * 16.0 * energies.charging_energy * noise.dielectric_loss_tangent
        * report.charge_element ** 2 * thermal * colour,
        "2pi*1e9 * 16 E_C * tan_delta * |<0|n|1>|^2 * coth(h f01 / 2 k T) * (f01 / 1 GHz)^(d-1)",
        {"prefactor": 16.0, "reference_ghz": 1.0, "coth": thermal, "d": noise.spectral_exponent}))

    # quasiparticle tunnelling, omega << 2 Delta limit; per-junction prefactor held at E_J
    qp_pref = 8.0 / math.pi
    gap = math.sqrt(noise.gap_ghz / f01)
    ej = energies.josephson_energy
    n = design.array_size
    rows.append(RateContribution(
        "qp_array", "T1",
        ghz * n * qp_pref * ej * noise.qp_density * gap * report.qp_element_array ** 2,
        "2pi*1e9 * N * (8/pi) E_J * x_qp * sqrt(2Delta/h f01) * |<0|sin(phi/2N)|1>|^2",
        {"prefactor": qp_pref, "two_delta_ghz": noise.gap_ghz}))
    rows.append(RateContribution(
        "qp_principal", "T1",
        ghz * qp_pref * ej * noise.qp_density * gap * report.qp_element_principal ** 2,
        "2pi*1e9 * (8/pi) E_J * x_qp * sqrt(2Delta/h f01) * |<0|sin((phi+phi_e)/2)|1>|^2",
        {"prefactor": qp_pref, "two_delta_ghz": noise.gap_ghz}))

    incomplete = report.dispersion_dephasing_scale is None
    notes = []
    if incomplete:
        notes.append("no dispersion data: charge dephasing omitted")
    else:
        rows.append(RateContribution(
            "charge_dispersion", "Tphi", math.pi * 1e9 * report.dispersion_dephasing_scale,
            "2pi*1e9 * delta_epsilon / 2 (worst-case offset-charge switch)",
            {"dispersion_ghz": report.dispersion_dephasing_scale, "model": report.dispersion_model}))
    return RateTable(rows, incomplete, notes)
