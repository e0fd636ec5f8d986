"""Generalized flux qubit design toolkit: one-mode spectra, charge dispersion,
a full charge-basis circuit model, noise figures of merit, sweeps and a
two-stage design optimizer."""

from .circuit import (
    CODATA2018, CircuitDesign, EnergyScales, PhysicalConstants, Regime, RegimeTag,
    classify_regime, derive_energies, design_from_dict, expansion_coefficients, load_design,
)
from .dispersion import (
    DispersionResult, charge_dispersion_1d, dispersion_empirical, transmon_dispersion_oracle,
)
from .errors import (
    BasisGrowthFailure, BasisTooSmallError, BudgetError, ConfigError, ConvergenceFailure,
    FitFailure, FluxkitError, InvalidDesignError, NoFeasibleDesign, NumericalFailure,
    SweepFailure, WorkingPointError,
)
from .fullmodel import (
    FullCircuitSpec, MultiModeBasis, build_full_circuit, charge_dispersion_full, full_spectrum,
    solve_full,
)
from .noise import NoiseModel, SensitivityReport, estimate_rates, flux_sensitivity, sensitivity_report
from .spectral import Bloch, Dirichlet, GridSpec, SchrodingerProblem, converge, solve_lowest
from .spectrum import (
    Spectrum, compute_spectrum, matrix_elements, quartic_spectrum, solve_quartic_dimensionless,
)
from .sweep import (
    DesignTargets, SweepSpec, optimize_design, run_sweep, verify_table_designs,
)

__version__ = "0.1.0"
