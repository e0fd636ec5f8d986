"""Full N-mode circuit in the charge basis.

Node layout: ground, then islands 0..N-1 along the array. Array junction k
joins island k-1 (ground for k = 0) to island k; the principal junction
with the shunt capacitor closes the loop from island N-1 to ground. Each
Josephson term is -E cos(phi_a - phi_b + offset), oriented consistently
around the loop so the offsets sum to phi_e.

    H = 4 sum_ij E_C[i,j] (n_i - ng_i)(n_j - ng_j) - sum_terms E cos(...)
    E_C = (e^2 / 2) C^-1

Offset charges are in units of 2e. The lowest eigenpairs come from ARPACK
Lanczos on the sparse Hamiltonian; N = 4 at cutoff 6 already has 28,561
states, far past what a dense solve handles comfortably.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from .circuit import CODATA2018, CircuitDesign, PhysicalConstants, josephson_energy_ghz
from .dispersion import DEFAULT_SAMPLES, DispersionResult, Level, offset_samples
from .errors import BasisGrowthFailure, BudgetError, NumericalFailure
from .spectral import EigenSolution

GROUND = -1
DEFAULT_MAX_MODES = 4
DEFAULT_MAX_DIM = 60_000
DEFAULT_CUTOFF = 6


def max_dimension() -> int:
    value = os.environ.get("FLUXKIT_MAX_DIM")
    if value is None:
        return DEFAULT_MAX_DIM
    try:
        dim = int(value)
    except ValueError:
        raise BudgetError(f"FLUXKIT_MAX_DIM must be an integer, got {value!r}") from None
    if dim < 1:
        raise BudgetError("FLUXKIT_MAX_DIM must be positive")
    return dim


@dataclass(frozen=True)
class MultiModeBasis:
    modes: int
    charge_cutoff: int  # per-mode charge states -m..m

    @property
    def dimension(self) -> int:
        return (2 * self.charge_cutoff + 1) ** self.modes

    def check_budget(self, limit: int | None = None):
        limit = max_dimension() if limit is None else limit
        if self.dimension > limit:
            raise BudgetError(
                f"{self.modes} modes at cutoff {self.charge_cutoff} need {self.dimension} states, "
                f"budget is {limit}; use the one-mode model for larger N")


@dataclass(frozen=True)
class JosephsonTerm:
    a: int
    b: int  # GROUND for a node-to-ground junction
    energy: float  # GHz
    offset: float = 0.0  # rad
    label: str = ""


@dataclass
class FullCircuitSpec:
    capacitance: np.ndarray  # fF, islands x islands
    junctions: list
    offset_charges: np.ndarray
    external_phase: float
    ground_capacitance: float = 0.0
    constants: PhysicalConstants = CODATA2018

    @property
    def modes(self) -> int:
        return self.capacitance.shape[0]

    @property
    def principal_island(self) -> int:
        return self.modes - 1

    def charging_matrix(self) -> np.ndarray:
        """E_C = e^2/2 C^-1 in GHz."""
        e, h = self.constants.electron_charge, self.constants.planck
        return e * e / 2.0 * np.linalg.inv(self.capacitance * 1e-15) / h / 1e9

    def with_offsets(self, offsets) -> "FullCircuitSpec":
        return replace(self, offset_charges=np.asarray(offsets, dtype=float))

    def loop_offset(self) -> float:
        return float(sum(j.offset for j in self.junctions))


def build_full_circuit(design: CircuitDesign, max_modes: int = DEFAULT_MAX_MODES,
                       constants: PhysicalConstants = CODATA2018) -> FullCircuitSpec:
    n = design.array_size
    if n > max_modes:
        raise BudgetError(f"full model is limited to N <= {max_modes} (got N = {n}); "
                          "use the one-mode model for larger arrays")
    gamma, cj = design.size_ratio, design.junction_capacitance
    ej = josephson_energy_ghz(design.critical_current, constants)
    cap = np.zeros((n, n))
    for k in range(n):
        cap[k, k] += gamma * cj
        if k > 0:
            cap[k - 1, k - 1] += gamma * cj
            cap[k - 1, k] -= gamma * cj
            cap[k, k - 1] -= gamma * cj
    cap[n - 1, n - 1] += cj + design.shunt_capacitance
    cap[np.diag_indices(n)] += design.ground_capacitance
    # loop order: principal (N-1 -> ground), then array junctions ground -> 0 -> ... -> N-1
    junctions = [JosephsonTerm(n - 1, GROUND, ej, design.external_phase, "principal")]
    for k in range(n):
        junctions.append(JosephsonTerm(k - 1 if k > 0 else GROUND, k, gamma * ej, 0.0,
                                       f"array{k}"))
    return FullCircuitSpec(cap, junctions, np.zeros(n), design.external_phase,
                           design.ground_capacitance, constants)


def _charge_states(basis: MultiModeBasis) -> np.ndarray:
    d = 2 * basis.charge_cutoff + 1
    grid = np.indices((d,) * basis.modes).reshape(basis.modes, -1).T
    return grid - basis.charge_cutoff


def hamiltonian(spec: FullCircuitSpec, basis: MultiModeBasis) -> sparse.csr_matrix:
    if basis.modes != spec.modes:
        raise ValueError("basis and circuit disagree on the number of modes")
    m = basis.charge_cutoff
    d = 2 * m + 1
    states = _charge_states(basis)
    dim = states.shape[0]
    shifted = states - spec.offset_charges
    ec = spec.charging_matrix()
    diag = 4.0 * np.einsum("ai,ij,aj->a", shifted, ec, shifted)
    strides = d ** np.arange(basis.modes - 1, -1, -1)
    index = np.arange(dim)
    rows, cols, vals = [], [], []
    for term in spec.junctions:
        step = np.zeros(basis.modes, dtype=int)
        if term.a != GROUND:
            step[term.a] += 1
        if term.b != GROUND:
            step[term.b] -= 1
        target = states + step
        ok = np.all(np.abs(target) <= m, axis=1)
        rows.append((target[ok] + m) @ strides)
        cols.append(index[ok])
        vals.append(np.full(ok.sum(), -0.5 * term.energy * np.exp(1j * term.offset)))
    raising = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                shape=(dim, dim))
    return (sparse.diags(diag.astype(complex)) + raising + raising.conj().T).tocsr()


def solve_full(spec: FullCircuitSpec, basis: MultiModeBasis, k: int = 4) -> EigenSolution:
    basis.check_budget()
    ham = hamiltonian(spec, basis)
    dim = ham.shape[0]
    if k >= dim:
        values, vectors = np.linalg.eigh(ham.toarray())
        values, vectors = values[:k], vectors[:, :k]
    else:
        v0 = np.random.default_rng(20200101).standard_normal(dim).astype(complex)
        try:
            values, vectors = eigsh(ham, k=k, which="SA", v0=v0, tol=0)
        except (ArpackNoConvergence, ArpackError) as exc:
            raise NumericalFailure(f"Lanczos failed in the charge basis: {exc}") from exc
        order = np.argsort(values)
        values, vectors = values[order], vectors[:, order]
    residuals = np.linalg.norm(ham @ vectors - vectors * values, axis=0)
    return EigenSolution(values=values, vectors=vectors, residuals=residuals)


@dataclass
class FullSolution:
    solution: EigenSolution
    basis: MultiModeBasis
    history: list = field(default_factory=list)  # (cutoff, lowest values)

    @property
    def levels(self) -> np.ndarray:
        return self.solution.values

    @property
    def qubit_frequency(self) -> float:
        v = self.levels
        return float(v[1] - v[0])

    @property
    def anharmonicity(self) -> float:
        v = self.levels
        return float(v[2] - 2 * v[1] + v[0])


def _next_cutoff(modes: int, cutoff: int, limit: int) -> int:
    best = cutoff
    for m in range(cutoff + 1, 2 * cutoff + 1):
        if (2 * m + 1) ** modes <= limit:
            best = m
    return best


def converge_full(spec: FullCircuitSpec, k: int = 4, tolerance: float = 1e-4,
                  start_cutoff: int = DEFAULT_CUTOFF) -> FullSolution:
    """Grow the charge cutoff (doubling, clipped to the dimension budget)
    until the lowest three eigenvalues move by less than ``tolerance``."""
    limit = max_dimension()
    basis = MultiModeBasis(spec.modes, start_cutoff)
    basis.check_budget(limit)
    sol = solve_full(spec, basis, k)
    history = [(basis.charge_cutoff, sol.values.copy())]
    while True:
        nxt = _next_cutoff(spec.modes, basis.charge_cutoff, limit)
        if nxt == basis.charge_cutoff:
            raise BasisGrowthFailure(
                f"cannot certify cutoff {basis.charge_cutoff} for {spec.modes} modes within "
                f"the {limit}-state budget")
        new_basis = MultiModeBasis(spec.modes, nxt)
        new_sol = solve_full(spec, new_basis, k)
        history.append((nxt, new_sol.values.copy()))
        change = float(np.max(np.abs(new_sol.values[:3] - sol.values[:3])))
        if change < tolerance:
            # report the certified smaller basis: it is what later sweeps reuse
            return FullSolution(sol, basis, history)
        basis, sol = new_basis, new_sol


@dataclass
class FullDispersion:
    """Principal-island sweep and the worst case over single-island sweeps,
    for each requested level (int) or transition (pair)."""

    principal: dict
    worst: dict
    worst_island: dict
    basis: MultiModeBasis
    ground_capacitance: float
    island_amplitudes: dict = field(default_factory=dict)


def _sweep_island(spec: FullCircuitSpec, basis: MultiModeBasis, island: int,
                  offsets: np.ndarray, k: int) -> np.ndarray:
    rows = []
    for ng in offsets:
        charges = np.zeros(spec.modes)
        charges[island] = ng
        rows.append(solve_full(spec.with_offsets(charges), basis, k).values)
    return np.array(rows)


def _band(values: np.ndarray, level: Level) -> np.ndarray:
    if isinstance(level, tuple):
        return values[:, level[1]] - values[:, level[0]]
    return values[:, level]


def _result(level, offsets, band) -> DispersionResult:
    amp = float(band.max() - band.min())
    return DispersionResult(level, amp, offsets, band,
                            math.log10(amp) if amp > 0 else -math.inf, "charge-basis", "full")


def charge_dispersion_full(design: CircuitDesign, levels: Sequence[Level] = (0, (0, 1)),
                           samples: int = DEFAULT_SAMPLES, worst_case: bool = True,
                           tolerance: float = 1e-4, max_modes: int = DEFAULT_MAX_MODES,
                           constants: PhysicalConstants = CODATA2018) -> FullDispersion:
    spec = build_full_circuit(design, max_modes, constants)
    k = max(max(lv) if isinstance(lv, tuple) else lv for lv in levels) + 2
    k = max(k, 3)
    conv = converge_full(spec, k, tolerance)
    offsets = offset_samples(samples)
    islands = range(spec.modes) if worst_case else [spec.principal_island]
    bands = {i: _sweep_island(spec, conv.basis, i, offsets, k) for i in islands}
    principal, worst, worst_island, per_island = {}, {}, {}, {}
    for lv in levels:
        key = lv if not isinstance(lv, list) else tuple(lv)
        results = {i: _result(key, offsets, _band(vals, key)) for i, vals in bands.items()}
        principal[key] = results[spec.principal_island]
        best = max(results, key=lambda i: results[i].amplitude)
        worst[key], worst_island[key] = results[best], best
        per_island[key] = {i: r.amplitude for i, r in results.items()}
    return FullDispersion(principal, worst, worst_island, conv.basis, design.ground_capacitance,
                          per_island)


def full_spectrum(design: CircuitDesign, k: int = 4, tolerance: float = 1e-4,
                  max_modes: int = DEFAULT_MAX_MODES,
                  constants: PhysicalConstants = CODATA2018) -> FullSolution:
    """Spectrum of the full circuit at zero offset charge."""
    return converge_full(build_full_circuit(design, max_modes, constants), k, tolerance)
