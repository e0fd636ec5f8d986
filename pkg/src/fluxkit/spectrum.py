"""Qubit spectrum of the one-mode Hamiltonian

    H = -4 E_C d^2/dphi^2 + E_J ( -gamma N cos(phi/N) - cos(phi + phi_e) ),

the closed-form quartic limit at gamma/N = 1, and transition matrix elements.

Anharmonicity is signed: A = omega_12 - omega_01.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import CODATA2018, CircuitDesign, EnergyScales, PhysicalConstants, derive_energies
from .spectral import (
    DIRICHLET, ConvergedSolution, EigenSolution, GridSpec, SchrodingerProblem, converge,
)

DEFAULT_LEVELS = 5
DEFAULT_TOLERANCE = 1e-4  # GHz


def gfq_potential(design: CircuitDesign, energies: EnergyScales):
    ej = energies.josephson_energy
    n, gamma, phie = design.array_size, design.size_ratio, design.external_phase

    def potential(phi):
        return ej * (-gamma * n * np.cos(phi / n) - np.cos(phi + phie))

    return potential


def ground_width_estimate(design: CircuitDesign, energies: EnergyScales) -> float:
    """Lower bound on the ground-state width in phi, used to pick a starting grid."""
    ratio = energies.charging_energy / energies.josephson_energy
    stiffest = design.gamma_over_n + 1.0
    harmonic = (2.0 * ratio / stiffest) ** 0.25
    quartic = (96.0 * ratio) ** (1.0 / 6.0)
    return min(harmonic, quartic)


def _start_points(half_width: float, spacing: float) -> int:
    intervals = max(256, 2 ** math.ceil(math.log2(2.0 * half_width / spacing)))
    return intervals + 1


@dataclass
class Spectrum:
    levels: np.ndarray  # GHz
    grid_meta: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    solution: EigenSolution | None = field(default=None, repr=False)

    @property
    def qubit_frequency(self) -> float:
        return float(self.levels[1] - self.levels[0])

    @property
    def second_transition(self) -> float:
        return float(self.levels[2] - self.levels[1])

    @property
    def anharmonicity(self) -> float:
        return self.second_transition - self.qubit_frequency

    @property
    def ratio(self) -> float:
        """A / omega_01."""
        return self.anharmonicity / self.qubit_frequency


def spectrum_problem(design: CircuitDesign, energies: EnergyScales,
                     grid: GridSpec | None = None) -> SchrodingerProblem:
    """Dirichlet problem on one array period [-pi N, pi N].

    The box is not widened: beyond one period the potential repeats and the
    extra wells would hybridize the low levels (that physics belongs to the
    dispersion calculation).
    """
    half = math.pi * design.array_size
    if grid is None:
        spacing = ground_width_estimate(design, energies) / 4.0
        grid = GridSpec(half, _start_points(half, spacing), DIRICHLET)
    return SchrodingerProblem(gfq_potential(design, energies), 4.0 * energies.charging_energy,
                              grid, enlarge=False)


def _grid_meta(conv: ConvergedSolution, model: str) -> dict:
    return {
        "model": model,
        "points": conv.grid.points,
        "half_width_rad": conv.grid.half_width,
        "refinements": conv.refinements,
        "boundary_amplitude": conv.boundary_amplitude,
        "tolerance_ghz": conv.tolerance,
    }


@functools.lru_cache(maxsize=256)
def _cached_spectrum(design: CircuitDesign, k: int, tolerance: float,
                     constants: PhysicalConstants) -> Spectrum:
    energies = derive_energies(design, constants)
    conv = converge(spectrum_problem(design, energies), tolerance, k)
    notes = []
    if conv.boundary_amplitude > 1e-6:
        notes.append(f"wavefunction amplitude {conv.boundary_amplitude:.2g} at the cell edge: "
                     "low levels are not confined to one array period")
    return Spectrum(levels=conv.levels, grid_meta=_grid_meta(conv, "1d"), warnings=notes,
                    solution=conv.solution)


def compute_spectrum(design: CircuitDesign, k: int = DEFAULT_LEVELS,
                     tolerance: float = DEFAULT_TOLERANCE,
                     constants: PhysicalConstants = CODATA2018) -> Spectrum:
    """The k lowest levels of the one-mode Hamiltonian, converged to ``tolerance`` GHz.

    Results are cached per (design, k, tolerance); treat them as read-only.
    """
    if k < 3:
        raise ValueError("need k >= 3 levels for omega_12")
    return _cached_spectrum(design, int(k), float(tolerance), constants)


def spectrum_on_grid(design: CircuitDesign, grid: GridSpec, k: int = DEFAULT_LEVELS,
                     constants: PhysicalConstants = CODATA2018) -> np.ndarray:
    """Raw eigenvalues on a fixed grid (no refinement). Used for finite
    differences, where a fixed discretization keeps the error smooth."""
    from .spectral import build_operator, solve_lowest

    energies = derive_energies(design, constants)
    prob = spectrum_problem(design, energies, grid)
    return solve_lowest(build_operator(prob.potential, prob.kinetic, grid, levels=k), k).values


@functools.lru_cache(maxsize=16)
def _quartic_lambdas(k: int, tolerance: float) -> tuple:
    prob = SchrodingerProblem(lambda x: x ** 4, 1.0, GridSpec(5.0, 257), enlarge=True,
                              boundary_tol=1e-8)
    conv = converge(prob, tolerance, k)
    return tuple(float(x) for x in conv.levels), conv


def solve_quartic_dimensionless(k: int = 3, tolerance: float = 1e-7) -> np.ndarray:
    """Eigenvalues lambda_n of -d^2/dx^2 + x^4."""
    if k < 3:
        raise ValueError("need k >= 3")
    return np.array(_quartic_lambdas(int(k), float(tolerance))[0])


def quartic_solution(k: int = 3, tolerance: float = 1e-7) -> ConvergedSolution:
    return _quartic_lambdas(int(k), float(tolerance))[1]


def quartic_energy_unit(energies: EnergyScales) -> float:
    """(2/3 E_J E_C^2)^(1/3) in GHz."""
    return (2.0 / 3.0 * energies.josephson_energy * energies.charging_energy ** 2) ** (1.0 / 3.0)


def quartic_spectrum(energies: EnergyScales, k: int = DEFAULT_LEVELS) -> Spectrum:
    """E_n = lambda_n (2/3 E_J E_C^2)^(1/3); meaningful at gamma/N = 1, phi_e = pi.

    With phi = (96 E_C / E_J)^(1/6) x the quartic Hamiltonian becomes the
    dimensionless -d^2/dx^2 + x^4 times that energy unit.
    """
    lam = solve_quartic_dimensionless(max(k, 3))[:k]
    return Spectrum(levels=lam * quartic_energy_unit(energies), grid_meta={"model": "quartic"})


@dataclass
class MatrixElements:
    """k x k matrices between the lowest eigenstates."""

    dipole: np.ndarray  # <i|phi|j>
    charge: np.ndarray  # <i|n|j>, n = -i d/dphi
    qp_array: np.ndarray  # <i|sin(phi/2N)|j>
    qp_principal: np.ndarray  # <i|sin((phi+phi_e)/2)|j>

    def magnitude(self, name: str, i: int, j: int) -> float:
        return float(abs(getattr(self, name)[i, j]))


def _derivative(vectors: np.ndarray, sol: EigenSolution) -> np.ndarray:
    h = sol.grid.spacing
    padded = np.zeros((vectors.shape[0] + 2, vectors.shape[1]), dtype=vectors.dtype)
    padded[1:-1] = vectors
    if sol.grid.periodic:
        phase = np.exp(1j * sol.grid.boundary.angle)
        padded = padded.astype(complex)
        padded[0] = vectors[-1] * np.conj(phase)
        padded[-1] = vectors[0] * phase
    return (padded[2:] - padded[:-2]) / (2.0 * h)


def matrix_elements(design: CircuitDesign, solution: EigenSolution,
                    levels: int = 3) -> MatrixElements:
    """Grid quadrature of phi, n, sin(phi/2N) and sin((phi+phi_e)/2) between eigenvectors."""
    if solution.grid is None:
        raise ValueError("matrix elements need a grid-based solution")
    k = min(levels, solution.vectors.shape[1])
    v = solution.vectors[:, :k]
    x = solution.nodes
    h = solution.grid.spacing

    def sandwich(weighted):
        return (v.conj().T @ weighted) * h

    n = design.array_size
    return MatrixElements(
        dipole=sandwich(x[:, None] * v),
        charge=sandwich(-1j * _derivative(v, solution)),
        qp_array=sandwich(np.sin(x / (2 * n))[:, None] * v),
        qp_principal=sandwich(np.sin((x + design.external_phase) / 2.0)[:, None] * v),
    )
