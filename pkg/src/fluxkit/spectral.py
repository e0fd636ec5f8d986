"""Finite-difference kernel for 1D Schroedinger operators

    H = -kinetic * d^2/dphi^2 + V(phi)

on a uniform grid with either hard-wall (Dirichlet) or Bloch-periodic
boundaries, plus the eigensolvers and grid-refinement loop used by the
spectrum and dispersion code.

The LAPACK drivers behind the solve paths are bisection + inverse
iteration for the real tridiagonal case (``stebz``/``stein``), a banded
Hermitian solver for the Bloch case, and a dense Hermitian solver for
explicit matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from .errors import BasisTooSmallError, ConvergenceFailure, NumericalFailure

MIN_POINTS = 64
MAX_POINTS = 2 ** 20
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class Dirichlet:
    pass


@dataclass(frozen=True)
class Bloch:
    angle: float = 0.0  # theta in [0, 2pi)

    def __post_init__(self):
        object.__setattr__(self, "angle", float(self.angle) % (2 * math.pi))


DIRICHLET = Dirichlet()
Boundary = Union[Dirichlet, Bloch]


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on [-L, L].

    Dirichlet grids have ``points`` nodes including both walls, so the
    spacing is 2L/(M-1) and the unknowns are the M-2 interior nodes. Bloch
    grids treat [-L, L) as one periodic cell of M nodes with spacing 2L/M.
    """

    half_width: float
    points: int
    boundary: Boundary = DIRICHLET

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("grid half width must be positive")
        if int(self.points) != self.points or self.points < MIN_POINTS:
            raise BasisTooSmallError(f"grid needs at least {MIN_POINTS} points, got {self.points}")
        object.__setattr__(self, "points", int(self.points))

    @property
    def periodic(self) -> bool:
        return isinstance(self.boundary, Bloch)

    @property
    def spacing(self) -> float:
        if self.periodic:
            return 2.0 * self.half_width / self.points
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def size(self) -> int:
        """Number of unknowns."""
        return self.points if self.periodic else self.points - 2

    def nodes(self) -> np.ndarray:
        h = self.spacing
        if self.periodic:
            return -self.half_width + h * np.arange(self.points)
        # built symmetrically so that mirrored potentials see mirrored nodes
        j = np.arange(1, self.points - 1)
        return h * (j - (self.points - 1) / 2.0)

    def refined(self) -> "GridSpec":
        """Same cell, half the spacing."""
        if self.periodic:
            return GridSpec(self.half_width, 2 * self.points, self.boundary)
        return GridSpec(self.half_width, 2 * (self.points - 1) + 1, self.boundary)

    def with_boundary(self, boundary: Boundary) -> "GridSpec":
        return GridSpec(self.half_width, self.points, boundary)


@dataclass
class GridOperator:
    """Discretized -kinetic*D2 + diag(V). Tridiagonal, plus two corner
    entries carrying exp(+-i theta) for Bloch boundaries."""

    grid: GridSpec
    nodes: np.ndarray
    potential: np.ndarray
    kinetic: float

    @property
    def hopping(self) -> float:
        return -self.kinetic / self.grid.spacing ** 2

    @property
    def diagonal(self) -> np.ndarray:
        return self.potential + 2.0 * self.kinetic / self.grid.spacing ** 2

    @property
    def shape(self):
        n = self.grid.size
        return (n, n)

    def scale(self) -> float:
        """Gershgorin bound on the spectral radius."""
        return float(np.max(np.abs(self.diagonal)) + 2.0 * abs(self.hopping))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        t = self.hopping
        out = self.diagonal[:, None] * v if v.ndim == 2 else self.diagonal * v
        out = np.array(out, dtype=np.result_type(out, v, complex if self.grid.periodic else float))
        out[1:] += t * v[:-1]
        out[:-1] += t * v[1:]
        if self.grid.periodic:
            phase = np.exp(1j * self.grid.boundary.angle)
            out[-1] += t * phase * v[0]
            out[0] += t * np.conj(phase) * v[-1]
        return out

    def to_sparse(self):
        n = self.grid.size
        dtype = complex if self.grid.periodic else float
        mat = sparse.diags([np.full(n - 1, self.hopping), self.diagonal, np.full(n - 1, self.hopping)],
                           [-1, 0, 1], shape=(n, n), dtype=dtype, format="lil")
        if self.grid.periodic:
            phase = np.exp(1j * self.grid.boundary.angle)
            mat[n - 1, 0] += self.hopping * phase
            mat[0, n - 1] += self.hopping * np.conj(phase)
        return mat.tocsr()

    def to_dense(self) -> np.ndarray:
        n = self.grid.size
        dtype = complex if self.grid.periodic else float
        mat = np.diag(self.diagonal.astype(dtype))
        idx = np.arange(n - 1)
        mat[idx, idx + 1] = self.hopping
        mat[idx + 1, idx] = self.hopping
        if self.grid.periodic:
            phase = np.exp(1j * self.grid.boundary.angle)
            mat[n - 1, 0] += self.hopping * phase
            mat[0, n - 1] += self.hopping * np.conj(phase)
        return mat


def build_operator(potential: Callable[[np.ndarray], np.ndarray], kinetic_coefficient: float,
                   grid: GridSpec, levels: int | None = None) -> GridOperator:
    """Discretize -kinetic*d2/dphi2 + V(phi) with the central second-difference stencil."""
    if levels is not None and levels > grid.size // 4:
        raise BasisTooSmallError(
            f"{grid.size} unknowns cannot resolve {levels} eigenpairs (need k <= M/4)")
    x = grid.nodes()
    v = np.asarray(potential(x), dtype=float)
    if v.shape != x.shape or not np.all(np.isfinite(v)):
        raise ValueError("potential must be finite on the grid")
    if grid.periodic:
        ends = np.asarray(potential(np.array([-grid.half_width, grid.half_width])), dtype=float)
        vmax = max(float(np.max(np.abs(v))), 1e-300)
        if abs(ends[0] - ends[1]) >= 1e-9 * vmax:
            raise ValueError("Bloch boundary needs a potential periodic on the cell")
    return GridOperator(grid=grid, nodes=x, potential=v, kinetic=float(kinetic_coefficient))


@dataclass
class EigenSolution:
    """Lowest eigenpairs, ascending. For grid operators the vectors are
    normalized so that sum |v|^2 * h = 1; for explicit matrices they have
    unit Euclidean norm. ``residuals`` are ||Hv - Ev|| for unit-norm v."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    grid: GridSpec | None = None
    nodes: np.ndarray | None = None

    @property
    def weight(self) -> float:
        return self.grid.spacing if self.grid is not None else 1.0

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.vdot(a, b) * self.weight)


def _ring_order(m: int) -> np.ndarray:
    """Permutation 0, m-1, 1, m-2, ... turning a cyclic tridiagonal matrix
    into a band matrix with two sub-diagonals."""
    perm = np.empty(m, dtype=int)
    perm[0::2] = np.arange((m + 1) // 2)
    perm[1::2] = m - 1 - np.arange(m // 2)
    return perm


def _solve_bloch(op: GridOperator, k: int):
    m = op.grid.size
    perm = _ring_order(m)
    pos = np.empty(m, dtype=int)
    pos[perm] = np.arange(m)
    band = np.zeros((3, m), dtype=complex)
    band[0] = op.diagonal[perm]
    rows = np.arange(m)
    cols = (rows + 1) % m
    vals = np.full(m, op.hopping, dtype=complex)
    vals[-1] *= np.exp(1j * op.grid.boundary.angle)
    # vals[i] = H[i, (i+1) % m]; keep the lower triangle of the permuted matrix
    pi, pj = pos[rows], pos[cols]
    lower_val = np.where(pi > pj, vals, np.conj(vals))
    hi, lo = np.maximum(pi, pj), np.minimum(pi, pj)
    band[hi - lo, lo] = lower_val
    w = linalg.eig_banded(band, lower=True, eigvals_only=True, select="i",
                          select_range=(0, k - 1))
    return w, _inverse_iteration(op, w)


def _inverse_iteration(op: GridOperator, values: np.ndarray, sweeps: int = 3) -> np.ndarray:
    """Eigenvectors for known eigenvalues by shifted inverse iteration on the
    sparse cyclic matrix; members of a degenerate cluster are orthogonalized."""
    m = op.grid.size
    mat = sparse.csc_matrix(op.to_sparse())
    eye = sparse.identity(m, dtype=complex, format="csc")
    rng = np.random.default_rng(0)
    scale = op.scale()
    vectors = np.zeros((m, len(values)), dtype=complex)
    for i, lam in enumerate(values):
        # nudge the shift off the eigenvalue so the factorization stays regular
        shift = lam - 1e-10 * scale
        lu = sparse_linalg.splu(mat - shift * eye)
        cluster = [j for j in range(i) if abs(values[j] - lam) < 1e-8 * scale]
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        for _ in range(sweeps):
            x = lu.solve(x)
            for j in cluster:
                x -= vectors[:, j] * np.vdot(vectors[:, j], x)
            x /= np.linalg.norm(x)
        vectors[:, i] = x
    return vectors


def _fix_phase(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    pivots = vectors[idx, np.arange(vectors.shape[1])]
    phase = np.conj(pivots) / np.abs(pivots)
    if np.isrealobj(vectors):
        phase = np.sign(phase.real)
    return vectors * phase


def _order_degenerate(values, vectors, tol):
    """Rotate (near-)degenerate pairs onto definite parity, even state first.

    Below roundoff the eigensolver returns an arbitrary mix of the pair."""
    k = len(values)
    i = 0
    while i < k - 1:
        if abs(values[i + 1] - values[i]) > tol:
            i += 1
            continue
        pair = vectors[:, i:i + 2]
        parity = pair.conj().T @ pair[::-1]
        w, u = np.linalg.eigh((parity + parity.conj().T) / 2)
        vectors[:, i:i + 2] = pair @ u[:, ::-1]
        values[i:i + 2] = np.mean(values[i:i + 2])
        i += 2
    return values, vectors


def solve_lowest(matrix, k: int) -> EigenSolution:
    """The k smallest eigenpairs of a GridOperator or an explicit Hermitian matrix."""
    n = matrix.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(matrix, GridOperator):
        if k > n // 4:
            raise BasisTooSmallError(f"{n} unknowns cannot resolve {k} eigenpairs (need k <= M/4)")
        try:
            if matrix.grid.periodic:
                values, vectors = _solve_bloch(matrix, k)
            else:
                values, vectors = linalg.eigh_tridiagonal(
                    matrix.diagonal, np.full(n - 1, matrix.hopping),
                    select="i", select_range=(0, k - 1))
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"eigensolver failed: {exc}") from exc
        scale = matrix.scale()
        if not matrix.grid.periodic:
            values, vectors = _order_degenerate(values, vectors, 1e-12 * scale)
        applied = matrix.matvec(vectors)
    else:
        mat = np.asarray(matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("matrix must be square")
        if k > n:
            raise BasisTooSmallError(f"matrix of size {n} has fewer than {k} eigenpairs")
        try:
            values, vectors = linalg.eigh(mat, subset_by_index=(0, k - 1))
        except linalg.LinAlgError as exc:
            raise NumericalFailure(f"eigensolver failed: {exc}") from exc
        scale = float(np.max(np.sum(np.abs(mat), axis=1)))
        applied = mat @ vectors
    residuals = np.linalg.norm(applied - vectors * values, axis=0)
    worst = float(np.max(residuals))
    if worst > RESIDUAL_TOL * max(scale, 1e-300):
        raise NumericalFailure(f"eigenpair residual {worst:.3g} exceeds tolerance", worst)
    vectors = _fix_phase(vectors)
    if isinstance(matrix, GridOperator):
        return EigenSolution(values=values, vectors=vectors / math.sqrt(matrix.grid.spacing),
                             residuals=residuals, grid=matrix.grid, nodes=matrix.nodes)
    return EigenSolution(values=values, vectors=vectors, residuals=residuals)


@dataclass(frozen=True)
class SchrodingerProblem:
    """-kinetic*d2 + V on a starting grid. With ``enlarge`` the Dirichlet
    box is widened until the eigenvectors are negligible at the walls."""

    potential: Callable[[np.ndarray], np.ndarray]
    kinetic: float
    grid: GridSpec
    enlarge: bool = True
    boundary_tol: float = 1e-6
    max_points: int = MAX_POINTS


@dataclass
class ConvergedSolution:
    """Richardson-extrapolated ``levels`` plus the finest-grid solution.

    ``history`` holds (points, half_width, raw eigenvalues) per solve.
    """

    levels: np.ndarray
    solution: EigenSolution
    grid: GridSpec
    history: list = field(default_factory=list)
    boundary_amplitude: float = 0.0
    tolerance: float = 0.0

    @property
    def refinements(self) -> int:
        return len(self.history)


def boundary_amplitude(sol: EigenSolution) -> float:
    v = np.abs(sol.vectors)
    peak = np.max(v, axis=0)
    edge = np.maximum(v[0], v[-1])
    return float(np.max(edge / peak))


def converge(problem: SchrodingerProblem, tolerance: float, k: int) -> ConvergedSolution:
    """Halve the grid spacing until the Richardson-extrapolated k lowest
    eigenvalues move by less than ``tolerance`` between refinements."""
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    grid = problem.grid
    while grid.size < 4 * k:
        grid = grid.refined()
    history = []
    prev_raw = prev_rich = None
    while True:
        if grid.points > problem.max_points:
            last = history[-1][2] if history else None
            raise ConvergenceFailure(
                f"no convergence to {tolerance:g} below {problem.max_points} grid points; "
                f"last levels {last}")
        op = build_operator(problem.potential, problem.kinetic, grid, levels=k)
        floor = 100.0 * np.finfo(float).eps * op.scale()
        if floor > tolerance:
            # eigenvalue roundoff grows like 1/h^2; refining further cannot help
            raise ConvergenceFailure(
                f"tolerance {tolerance:g} is below the roundoff floor {floor:.2g} at "
                f"{grid.points} points", worst_residual=floor)
        sol = solve_lowest(op, k)
        history.append((grid.points, grid.half_width, sol.values.copy()))
        edge = 0.0
        if not grid.periodic:
            edge = boundary_amplitude(sol)
            if problem.enlarge and edge > problem.boundary_tol:
                # wider box at the same spacing, then keep refining from there
                pts = int(round(1.5 * (grid.points - 1))) + 1
                grid = GridSpec(grid.half_width * 1.5, pts, grid.boundary)
                prev_raw = prev_rich = None
                continue
        rich = None
        if prev_raw is not None:
            rich = (4.0 * sol.values - prev_raw) / 3.0
            if prev_rich is not None and np.max(np.abs(rich - prev_rich)) < tolerance:
                return ConvergedSolution(levels=rich, solution=sol, grid=grid, history=history,
                                         boundary_amplitude=edge, tolerance=tolerance)
        prev_raw, prev_rich = sol.values, rich
        grid = grid.refined()


def bloch_bandwidth(potential: Callable[[np.ndarray], np.ndarray], kinetic: float,
                    grid: GridSpec, energy_guess: float, iterations: int = 40):
    """Width of a narrow Bloch band of the discretized operator from the
    monodromy (transfer) matrix over one periodic cell.

    The band is where |Tr(P(E))/2| <= 1. For a band much narrower than the
    gap, Tr(P)/2 is linear across it and the peak-to-peak width is
    2 / |d/dE Tr(P)/2| at its zero. The product is accumulated with running
    rescaling so that exponentially small widths come out as logarithms.

    Returns (band_centre, natural log of the width).
    """
    if not grid.periodic:
        raise ValueError("bandwidth needs a periodic cell")
    v = np.asarray(potential(grid.nodes()), dtype=float).tolist()
    t = kinetic / grid.spacing ** 2
    inv_t = 1.0 / t

    def trace(energy):
        p11, p12, p21, p22 = 1.0, 0.0, 0.0, 1.0
        d11 = d12 = d21 = d22 = 0.0
        log_scale = 0.0
        for vj in v:
            a = (vj - energy) * inv_t + 2.0
            # T = [[a, -1], [1, 0]], dT/dE = [[-1/t, 0], [0, 0]]
            n11 = a * d11 - d21 - inv_t * p11
            n12 = a * d12 - d22 - inv_t * p12
            d21, d22 = d11, d12
            d11, d12 = n11, n12
            q11 = a * p11 - p21
            q12 = a * p12 - p22
            p21, p22 = p11, p12
            p11, p12 = q11, q12
            big = max(abs(p11), abs(p12), abs(p21), abs(p22))
            if big > 1e100:
                p11 /= big; p12 /= big; p21 /= big; p22 /= big
                d11 /= big; d12 /= big; d21 /= big; d22 /= big
                log_scale += math.log(big)
        return 0.5 * (p11 + p22), 0.5 * (d11 + d22), log_scale

    energy = float(energy_guess)
    for _ in range(iterations):
        f, df, _ = trace(energy)
        if df == 0.0:
            raise NumericalFailure("flat monodromy trace; band is not narrow")
        step = f / df
        energy -= step
        if abs(step) <= 1e-14 * max(1.0, abs(energy)):
            break
    _, df, log_scale = trace(energy)
    return energy, math.log(2.0) - math.log(abs(df)) - log_scale
