import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fluxkit.circuit import CircuitDesign, derive_energies
from fluxkit.errors import BasisGrowthFailure, BudgetError
from fluxkit.fullmodel import (
    GROUND, MultiModeBasis, build_full_circuit, charge_dispersion_full, converge_full,
    full_spectrum, hamiltonian, solve_full,
)
from fluxkit.spectral import Bloch, GridSpec, SchrodingerProblem, converge
from fluxkit.spectrum import compute_spectrum, gfq_potential
from oracles import hermitian_eigenvalues

N2 = CircuitDesign.from_ratio(40.0, 20.0, 1.0, 2, 1.0)


def test_two_island_capacitance():
    spec = build_full_circuit(N2.replace(ground_capacitance=0.5))
    g = N2.size_ratio
    expected = np.array([[2 * g + 0.5, -g], [-g, g + 1 + 20 + 0.5]])
    assert np.allclose(spec.capacitance, expected)
    assert spec.principal_island == 1


def test_loop_offsets_sum_to_external_phase():
    for n in (1, 2, 3, 4):
        spec = build_full_circuit(CircuitDesign.from_ratio(40, 20, 1, n, 1.0, external_phase=2.0))
        assert spec.loop_offset() == pytest.approx(2.0)
        assert len(spec.junctions) == n + 1


def test_hamiltonian_exactly_hermitian():
    spec = build_full_circuit(N2).with_offsets([0.13, 0.41])
    h = hamiltonian(spec, MultiModeBasis(2, 3)).toarray()
    assert np.array_equal(h, h.conj().T)


def test_small_basis_against_dense_oracle():
    spec = build_full_circuit(N2).with_offsets([0.2, -0.1])
    basis = MultiModeBasis(2, 3)
    sol = solve_full(spec, basis, k=4)
    ref = hermitian_eigenvalues(hamiltonian(spec, basis).toarray())[:4]
    assert np.allclose(sol.values, ref, atol=1e-9)


def test_single_island_matches_one_mode_bloch():
    d = CircuitDesign.from_ratio(10.0, 20.0, 1.0, 1, 1.5)
    e = derive_energies(d)
    full = converge_full(build_full_circuit(d), k=3, tolerance=1e-9)
    conv = converge(SchrodingerProblem(gfq_potential(d, e), 4 * e.charging_energy,
                                       GridSpec(math.pi, 256, Bloch(0.0))), 2e-7, 3)
    assert np.allclose(full.levels[:3], conv.levels, atol=1e-6)


def test_gauge_invariance():
    d = CircuitDesign.from_ratio(30.0, 20.0, 1.0, 3, 1.0, external_phase=2.5)
    spec = build_full_circuit(d)
    moved = [dataclasses.replace(j, offset=0.0) for j in spec.junctions]
    moved[2] = dataclasses.replace(moved[2], offset=2.5)
    other = dataclasses.replace(spec, junctions=moved)
    basis = MultiModeBasis(3, 6)
    a = solve_full(spec, basis).values
    b = solve_full(other, basis).values
    assert np.allclose(a, b, atol=1e-8)


def test_ground_junction_orientation():
    spec = build_full_circuit(N2)
    assert spec.junctions[0].b == GROUND and spec.junctions[0].a == 1
    assert spec.junctions[1].a == GROUND and spec.junctions[1].b == 0


def test_offset_charge_period():
    spec = build_full_circuit(N2)
    basis = converge_full(spec).basis
    a = solve_full(spec.with_offsets([0.0, 0.3]), basis).values
    b = solve_full(spec.with_offsets([0.0, 1.3]), basis).values
    assert np.allclose(a, b, atol=1e-6)


@settings(max_examples=6)
@given(ng=st.floats(0.0, 0.5))
def test_band_symmetric_at_half_flux(ng):
    spec = build_full_circuit(N2)
    basis = MultiModeBasis(2, 8)
    a = solve_full(spec.with_offsets([0.0, ng]), basis).values
    b = solve_full(spec.with_offsets([0.0, 1.0 - ng]), basis).values
    assert np.allclose(a, b, atol=1e-6)


def test_array_limit():
    with pytest.raises(BudgetError):
        build_full_circuit(CircuitDesign.from_ratio(40, 20, 1, 5, 1.0))


def test_dimension_budget_from_environment(monkeypatch):
    monkeypatch.setenv("FLUXKIT_MAX_DIM", "100")
    with pytest.raises(BudgetError):
        full_spectrum(N2)
    monkeypatch.setenv("FLUXKIT_MAX_DIM", "lots")
    with pytest.raises(BudgetError):
        full_spectrum(N2)


def test_basis_growth_failure(monkeypatch):
    monkeypatch.setenv("FLUXKIT_MAX_DIM", "170")  # 13^2 fits, 15^2 does not
    with pytest.raises(BasisGrowthFailure):
        full_spectrum(N2)


def test_cutoff_certified():
    sol = full_spectrum(N2)
    cutoffs = [c for c, _ in sol.history]
    assert cutoffs[0] == 6 and sol.basis.charge_cutoff == cutoffs[-2]
    assert np.max(np.abs(sol.history[-1][1][:3] - sol.history[-2][1][:3])) < 1e-4


def test_plasmon_regime_agrees_with_one_mode():
    d = CircuitDesign.from_ratio(40.0, 20.0, 1.0, 2, 3.0)
    full = full_spectrum(d)
    one = compute_spectrum(d)
    assert abs(full.qubit_frequency - one.qubit_frequency) / one.qubit_frequency < 0.05


def test_dispersion_two_vs_three_islands():
    two = charge_dispersion_full(N2, levels=((0, 1),), samples=9, worst_case=False)
    three = charge_dispersion_full(CircuitDesign.from_ratio(40.0, 20.0, 1.0, 3, 1.0),
                                   levels=((0, 1),), samples=9, worst_case=False)
    a, b = two.principal[(0, 1)], three.principal[(0, 1)]
    assert a.model == "full" and a.method == "charge-basis"
    assert b.amplitude < a.amplitude
    assert a.band[0] == pytest.approx(a.band[-1], abs=1e-6)


def test_worst_case_covers_principal():
    fd = charge_dispersion_full(N2, levels=(0,), samples=9)
    assert fd.worst[0].amplitude >= fd.principal[0].amplitude
    assert set(fd.island_amplitudes[0]) == {0, 1}
