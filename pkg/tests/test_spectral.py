import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fluxkit.errors import BasisTooSmallError, ConvergenceFailure
from fluxkit.spectral import (
    DIRICHLET, Bloch, GridSpec, SchrodingerProblem, bloch_bandwidth, build_operator, converge,
    solve_lowest,
)
from oracles import hermitian_eigenvalues, jacobi_eigenvalues


def test_grid_spacing():
    assert GridSpec(2.0, 101).spacing == pytest.approx(4.0 / 100)
    assert GridSpec(2.0, 100, Bloch(0.3)).spacing == pytest.approx(4.0 / 100)
    assert GridSpec(2.0, 101).size == 99
    assert GridSpec(2.0, 100, Bloch(0.3)).size == 100


def test_grid_rejects_coarse_grids():
    with pytest.raises(BasisTooSmallError):
        GridSpec(1.0, 10)


def test_bloch_angle_wrapped():
    assert Bloch(2 * math.pi + 0.5).angle == pytest.approx(0.5)


def test_free_particle_in_box():
    grid = GridSpec(1.5, 257)
    op = build_operator(lambda x: np.zeros_like(x), 2.0, grid)
    conv = converge(SchrodingerProblem(lambda x: np.zeros_like(x), 2.0, grid, enlarge=False), 1e-6, 4)
    n = np.arange(1, 5)
    assert np.allclose(conv.levels, 2.0 * (n * math.pi / 3.0) ** 2, atol=1e-6)
    assert op.shape == (255, 255)


def test_harmonic_level_spacing():
    ec, k = 0.5, 3.0
    prob = SchrodingerProblem(lambda x: 0.5 * k * x ** 2, 4 * ec, GridSpec(4.0, 257))
    conv = converge(prob, 1e-7, 4)
    omega = math.sqrt(8 * ec * k)
    assert np.allclose(np.diff(conv.levels), omega, atol=1e-6)
    assert conv.levels[0] == pytest.approx(omega / 2, abs=1e-6)


def test_bloch_constant_potential():
    grid = GridSpec(math.pi, 128, Bloch(0.0))
    sol = solve_lowest(build_operator(lambda x: np.full_like(x, 3.25), 1.0, grid), 3)
    assert sol.values[0] == pytest.approx(3.25, abs=1e-12)


def test_bloch_free_particle_bands():
    # free particle on a ring of length 2L with twist theta: k = (2 pi m + theta) / 2L
    theta, half = 1.1, math.pi
    grid = GridSpec(half, 512, Bloch(theta))
    sol = solve_lowest(build_operator(lambda x: np.zeros_like(x), 1.0, grid), 4)
    h = grid.spacing
    m = np.arange(-3, 4)
    q = (2 * math.pi * m + theta) / (2 * half)
    exact = np.sort(4 * np.sin(q * h / 2) ** 2 / h ** 2)[:4]  # discrete dispersion
    assert np.allclose(sol.values, exact, atol=1e-9)


def test_bloch_operator_is_hermitian_and_matches_oracle():
    grid = GridSpec(math.pi, 64, Bloch(1.3))
    op = build_operator(lambda x: np.cos(x) + 0.3 * np.cos(2 * x), 0.7, grid)
    dense = op.to_dense()
    assert np.array_equal(dense, dense.conj().T)
    assert dense[-1, 0] == pytest.approx(op.hopping * np.exp(1j * 1.3))
    sol = solve_lowest(op, 5)
    assert np.allclose(sol.values, hermitian_eigenvalues(dense)[:5], atol=1e-10)


def test_bloch_requires_periodic_potential():
    with pytest.raises(ValueError):
        build_operator(lambda x: x ** 3, 1.0, GridSpec(1.0, 128, Bloch(0.0)))


def test_nonfinite_potential_rejected():
    with pytest.raises(ValueError):
        build_operator(lambda x: np.full_like(x, np.inf), 1.0, GridSpec(1.0, 65))


def test_too_many_levels():
    op = build_operator(lambda x: x ** 2, 1.0, GridSpec(1.0, 65))
    with pytest.raises(BasisTooSmallError):
        solve_lowest(op, 20)


def test_diagonal_matrix():
    sol = solve_lowest(np.diag([1.0, 2.0]), 2)
    assert np.allclose(sol.values, [1.0, 2.0])


def test_random_symmetric_against_jacobi():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((50, 50))
    a = (a + a.T) / 2
    sol = solve_lowest(a, 50)
    assert np.allclose(sol.values, jacobi_eigenvalues(a), atol=1e-10)


def test_quartic_ground_state_limit():
    prob = SchrodingerProblem(lambda x: x ** 4, 1.0, GridSpec(5.0, 257), boundary_tol=1e-8)
    conv = converge(prob, 1e-7, 3)
    assert conv.levels[0] == pytest.approx(1.0604, abs=1e-4)
    assert conv.levels[1] - conv.levels[0] == pytest.approx(3.7997 - 1.0604, abs=1e-4)


def test_converge_enlarges_small_box():
    prob = SchrodingerProblem(lambda x: x ** 2, 1.0, GridSpec(1.0, 129))
    conv = converge(prob, 1e-6, 3)
    assert conv.grid.half_width > 1.0
    assert conv.boundary_amplitude < 1e-6
    assert np.allclose(conv.levels, [1, 3, 5], atol=1e-5)


def test_converge_idempotent():
    prob = SchrodingerProblem(lambda x: x ** 4, 1.0, GridSpec(5.0, 257))
    first = converge(prob, 1e-6, 3)
    again = converge(SchrodingerProblem(lambda x: x ** 4, 1.0, first.grid, enlarge=False), 1e-6, 3)
    assert np.all(np.abs(again.levels - first.levels) < 1e-6)


def test_converge_reports_failure():
    prob = SchrodingerProblem(lambda x: x ** 4, 1.0, GridSpec(5.0, 257), max_points=600)
    with pytest.raises(ConvergenceFailure):
        converge(prob, 1e-12, 3)


def test_residuals_and_orthonormality():
    conv = converge(SchrodingerProblem(lambda x: x ** 4 - 3 * x ** 2, 1.0, GridSpec(4.0, 513)),
                    1e-6, 4)
    sol = conv.solution
    gram = sol.vectors.conj().T @ sol.vectors * sol.weight
    assert np.allclose(gram, np.eye(4), atol=1e-8)
    assert np.all(np.diff(sol.values) > 0)
    assert np.all(sol.residuals < 1e-8 * 1e6)


def test_definite_parity():
    conv = converge(SchrodingerProblem(lambda x: x ** 4 - 2 * x ** 2, 1.0, GridSpec(4.0, 513)),
                    1e-7, 4)
    v = conv.solution.vectors
    for n in range(4):
        mirrored = v[::-1, n]
        assert np.linalg.norm(v[:, n] - (-1) ** n * mirrored) * math.sqrt(conv.solution.weight) < 1e-6


def test_deep_double_well_pairs_even_first():
    # tunnel splitting far below the grid resolution: ordering falls back to parity
    grid = GridSpec(6.0, 1025)
    sol = solve_lowest(build_operator(lambda x: 400 * (x ** 2 - 16) ** 2 / 256, 0.05, grid), 2)
    for n in range(2):
        parity = np.vdot(sol.vectors[::-1, n], sol.vectors[:, n]).real * sol.weight
        assert parity == pytest.approx((-1) ** n, abs=1e-6)


def test_transfer_matrix_width_matches_sweep():
    pot = lambda x: -8.0 * np.cos(x)
    grid = GridSpec(math.pi, 256, Bloch(0.0))
    widths = []
    for theta in (0.0, math.pi):
        widths.append(solve_lowest(build_operator(pot, 1.0, grid.with_boundary(Bloch(theta))), 2).values)
    swept = abs(widths[1][0] - widths[0][0])
    centre, log_w = bloch_bandwidth(pot, 1.0, grid, widths[0][0])
    assert math.exp(log_w) == pytest.approx(swept, rel=1e-3)


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), points=st.integers(64, 300))
def test_second_difference_exact_on_linear(a, b, points):
    grid = GridSpec(2.0, points)
    op = build_operator(lambda x: np.zeros_like(x), 1.0, grid)
    x = grid.nodes()
    f = a * x + b
    d2 = op.matvec(f[:, None])[:, 0]
    assert np.allclose(d2[1:-1], 0.0, atol=1e-9 * (1 + abs(a) + abs(b)) / grid.spacing ** 2)


@given(n=st.integers(4, 14), seed=st.integers(0, 10_000))
def test_dense_path_matches_jacobi(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    a = a + a.T
    sol = solve_lowest(a, n)
    assert np.allclose(sol.values, jacobi_eigenvalues(a), atol=1e-10)


@given(half=st.floats(2.0, 4.0), extra=st.floats(0.2, 2.0))
def test_dirichlet_levels_fall_as_box_grows(half, extra):
    pot = lambda x: x ** 2
    h = 0.05
    small = GridSpec(half, int(round(2 * half / h)) + 1)
    large = GridSpec(half + extra, int(round(2 * (half + extra) / h)) + 1)
    e_small = solve_lowest(build_operator(pot, 1.0, small), 3).values
    e_large = solve_lowest(build_operator(pot, 1.0, large), 3).values
    # spacings differ slightly after rounding, so compare with a discretization margin
    assert np.all(e_large <= e_small + 1e-3)


def test_dirichlet_nodes_symmetric():
    x = GridSpec(3.0, 129, DIRICHLET).nodes()
    assert np.array_equal(x, -x[::-1])
