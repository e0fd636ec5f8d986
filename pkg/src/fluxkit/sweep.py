"""Parameter sweeps, the two-stage design optimizer and the measured-device check."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.optimize import minimize

from .circuit import CODATA2018, CircuitDesign, RegimeTag, classify_regime, derive_energies
from .dispersion import charge_dispersion_1d, dispersion_empirical
from .errors import ConfigError, FluxkitError, NoFeasibleDesign, SweepFailure
from .fullmodel import DEFAULT_MAX_MODES, charge_dispersion_full
from .noise import sensitivity_report
from .spectrum import compute_spectrum

AXES = {
    "gamma_over_n": "gamma_over_n",
    "n": "n",
    "ic": "ic_na",
    "csh": "csh_ff",
    "phie": "phie_rad",
}
OUTPUTS = ("omega01", "anharmonicity", "dispersion", "sensitivities")
DEFAULT_N_SET = (2, 4, 6, 8, 12, 16)


def _parallel_map(func, items, jobs: int):
    # executor.map keeps input order, so results do not depend on scheduling
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    lo: float
    hi: float
    points: int
    base_design: CircuitDesign
    outputs: tuple = ("omega01", "anharmonicity")

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; choose from {sorted(AXES)}")
        if not self.lo < self.hi:
            raise ConfigError(f"sweep range needs lo < hi, got [{self.lo}, {self.hi}]")
        if isinstance(self.points, bool) or int(self.points) != self.points or self.points < 2:
            raise ConfigError("sweep needs an integer number of points >= 2")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ConfigError(f"unknown sweep outputs {sorted(bad)}")
        if self.axis == "n" and not (float(self.lo).is_integer() and float(self.hi).is_integer()):
            raise ConfigError("n sweep bounds must be integers")

    def values(self) -> list:
        grid = np.linspace(self.lo, self.hi, int(self.points))
        if self.axis != "n":
            return [float(v) for v in grid]
        # integer N only; duplicates from rounding are dropped
        return sorted({int(round(v)) for v in grid})

    def design_at(self, value) -> CircuitDesign:
        d = self.base_design
        if self.axis == "gamma_over_n":
            return d.replace(gamma_over_n=value)
        if self.axis == "n":
            return d.replace(array_size=int(value), size_ratio=d.gamma_over_n * int(value))
        if self.axis == "ic":
            return d.replace(critical_current=value)
        if self.axis == "csh":
            return d.replace(shunt_capacitance=value)
        return d.replace(external_phase=value)

    def columns(self) -> list:
        cols = [AXES[self.axis]]
        if "omega01" in self.outputs:
            cols.append("omega01_ghz")
        if "anharmonicity" in self.outputs:
            cols += ["anharmonicity_ghz", "ratio"]
        if "dispersion" in self.outputs:
            cols += ["dispersion_ghz", "dispersion_log10", "dispersion_model"]
        if "sensitivities" in self.outputs:
            cols += ["flux_slope_ghz_per_phi0", "flux_curvature_ghz_per_phi0sq", "dipole",
                     "charge_element", "qp_element_array"]
        return cols + ["status", "message"]


def row_dispersion(design: CircuitDesign, max_modes: int = DEFAULT_MAX_MODES):
    """(amplitude GHz, log10, model label) of the 0-1 transition.

    Full circuit for N <= max_modes; otherwise the empirical fit inside the
    quarton band and the one-mode Bloch estimate outside it.
    """
    if design.array_size <= max_modes:
        res = charge_dispersion_full(design, levels=((0, 1),), worst_case=False,
                                     max_modes=max_modes).principal[(0, 1)]
        return res.amplitude, res.log10_amplitude, "full"
    if classify_regime(design).tag is RegimeTag.QUARTON:
        amp = dispersion_empirical(derive_energies(design), design.array_size)
        return amp, math.log10(amp) if amp > 0 else -math.inf, "empirical"
    res = charge_dispersion_1d(design, level=(0, 1))
    return res.amplitude, res.log10_amplitude, "1d"


def _evaluate_row(args):
    spec, value = args
    row = {AXES[spec.axis]: value}
    stage = "design"
    try:
        design = spec.design_at(value)
        stage = "spectrum"
        s = compute_spectrum(design)
        if "omega01" in spec.outputs:
            row["omega01_ghz"] = s.qubit_frequency
        if "anharmonicity" in spec.outputs:
            row["anharmonicity_ghz"] = s.anharmonicity
            row["ratio"] = s.ratio
        if "dispersion" in spec.outputs:
            stage = "dispersion"
            amp, log10, model = row_dispersion(design)
            row.update(dispersion_ghz=amp, dispersion_log10=log10, dispersion_model=model)
        if "sensitivities" in spec.outputs:
            stage = "sensitivities"
            rep = sensitivity_report(design, dispersion=None)
            row.update(flux_slope_ghz_per_phi0=rep.flux_slope,
                       flux_curvature_ghz_per_phi0sq=rep.flux_curvature, dipole=rep.dipole,
                       charge_element=rep.charge_element, qp_element_array=rep.qp_element_array)
        row["status"] = "ok"
        row["message"] = "; ".join(s.warnings)
    except (FluxkitError, ValueError) as exc:
        row["status"] = "failed"
        row["message"] = f"{stage}: {exc}"
    return row


@dataclass
class SweepResult:
    spec: SweepSpec
    columns: list
    rows: list

    def column(self, name: str) -> np.ndarray:
        return np.array([r.get(name, math.nan) for r in self.rows], dtype=float)

    @property
    def failures(self) -> int:
        return sum(r["status"] != "ok" for r in self.rows)


def run_sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    rows = _parallel_map(_evaluate_row, [(spec, v) for v in spec.values()], jobs)
    cols = spec.columns()
    for r in rows:
        for c in cols:
            r.setdefault(c, math.nan)
    if all(r["status"] != "ok" for r in rows):
        raise SweepFailure(f"all {len(rows)} sweep rows failed; first: {rows[0]['message']}")
    return SweepResult(spec, cols, rows)


# ---------------------------------------------------------------- optimizer

@dataclass(frozen=True)
class DesignTargets:
    target_omega01: float  # GHz
    target_anharmonicity: float  # GHz
    weights: tuple = (1.0, 1.0)
    ic_bounds: tuple = (5.0, 100.0)  # nA
    csh_bounds: tuple = (5.0, 100.0)  # fF
    gamma_over_n_bounds: tuple = (0.7, 1.5)
    n_set: tuple = DEFAULT_N_SET
    junction_capacitance: float = 1.0  # fF
    ground_capacitance: float = 0.0  # fF
    omega01_box: tuple = (2.0, 6.0)  # GHz
    max_dispersion: float | None = None  # GHz
    max_curvature: float | None = None  # GHz / Phi_0^2
    grid_points: int = 5

    def __post_init__(self):
        if self.target_omega01 <= 0:
            raise ConfigError("target omega01 must be positive")
        if self.target_anharmonicity == 0:
            raise ConfigError("target anharmonicity must be non-zero")
        if len(self.weights) != 2 or any(w < 0 for w in self.weights) or max(self.weights) <= 0:
            raise ConfigError("weights must be two non-negative numbers, at least one positive")
        for name in ("ic_bounds", "csh_bounds", "gamma_over_n_bounds", "omega01_box"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ConfigError(f"{name} must satisfy lo < hi, got {(lo, hi)}")
        if self.ic_bounds[0] <= 0 or self.csh_bounds[0] < 0 or self.gamma_over_n_bounds[0] <= 0:
            raise ConfigError("bounds must stay in the physical range")
        if not self.n_set or any(int(n) != n or n < 1 for n in self.n_set):
            raise ConfigError("admissible N set must be non-empty positive integers")
        if self.grid_points < 2:
            raise ConfigError("coarse grid needs at least 2 points per axis")

    @property
    def target_ratio(self) -> float:
        return self.target_anharmonicity / self.target_omega01


@dataclass
class Evaluation:
    index: int
    stage: str
    n: int
    ic: float
    csh: float
    gamma_over_n: float
    omega01: float
    anharmonicity: float
    objective: float
    penalty: float
    best_so_far: float


@dataclass
class RatioCurve:
    gamma_over_n: np.ndarray
    ratio: np.ndarray
    checksum: str

    def select(self, target_ratio: float) -> float:
        """Invert the monotone (decreasing) ratio curve; clips to the band."""
        g, r = self.gamma_over_n, self.ratio
        if target_ratio >= r[0]:
            return float(g[0])
        if target_ratio <= r[-1]:
            return float(g[-1])
        return float(np.interp(target_ratio, r[::-1], g[::-1]))


def ratio_curve(n: int, ic: float, csh: float, targets: DesignTargets, points: int = 41,
                jobs: int = 1) -> RatioCurve:
    lo, hi = targets.gamma_over_n_bounds
    grid = np.linspace(lo, hi, points)
    base = CircuitDesign.from_ratio(ic, csh, targets.junction_capacitance, n, lo,
                                    targets.ground_capacitance)
    spec = SweepSpec("gamma_over_n", lo, hi, points, base, ("omega01", "anharmonicity"))
    result = run_sweep(spec, jobs)
    ratio = result.column("ratio")
    ok = np.isfinite(ratio)
    g, ratio = grid[ok], ratio[ok]
    if len(ratio) < 2 or np.any(np.diff(ratio) >= 0):
        raise FluxkitError("A/omega01 is not monotone decreasing over the gamma/N band "
                           f"at N={n}, I_c={ic:g}, C_sh={csh:g}")
    digest = hashlib.sha256(np.round(np.concatenate([g, ratio]), 9).tobytes()).hexdigest()[:16]
    return RatioCurve(g, ratio, digest)


class _Objective:
    """Weighted squared relative error plus hinge penalties; records a trace."""

    def __init__(self, targets: DesignTargets, trace: list):
        self.targets = targets
        self.trace = trace
        self.best = math.inf
        self.best_eval: Evaluation | None = None

    def design(self, n, ic, csh, gn) -> CircuitDesign:
        t = self.targets
        return CircuitDesign.from_ratio(ic, csh, t.junction_capacitance, n, gn, t.ground_capacitance)

    def penalty(self, design, omega) -> float:
        t = self.targets
        lo, hi = t.omega01_box
        pen = (max(0.0, lo - omega) / lo) ** 2 + (max(0.0, omega - hi) / hi) ** 2
        if t.max_dispersion is not None:
            amp, _, _ = row_dispersion(design, max_modes=0)
            if amp > t.max_dispersion:
                pen += math.log10(amp / t.max_dispersion) ** 2
        if t.max_curvature is not None:
            curv = abs(sensitivity_report(design, dispersion=None).flux_curvature)
            if curv > t.max_curvature:
                pen += (curv / t.max_curvature - 1.0) ** 2
        return pen

    def __call__(self, stage, n, ic, csh, gn) -> float:
        return self.score(stage, n, ic, csh, gn, *_grid_point((self.targets, n, ic, csh, gn)))

    def score(self, stage, n, ic, csh, gn, omega, anh) -> float:
        t = self.targets
        pen = math.inf
        value = math.inf
        if math.isfinite(omega) and math.isfinite(anh):
            err = (t.weights[0] * ((omega - t.target_omega01) / t.target_omega01) ** 2
                   + t.weights[1] * ((anh - t.target_anharmonicity) / t.target_anharmonicity) ** 2)
            try:
                pen = self.penalty(self.design(n, ic, csh, gn), omega)
                value = err + pen
            except (FluxkitError, ValueError):
                pass
        ev = Evaluation(len(self.trace), stage, n, ic, csh, gn, omega, anh, value, pen,
                        min(self.best, value))
        self.trace.append(ev)
        if value < self.best:
            self.best, self.best_eval = value, ev
        return value


@dataclass
class OptimizationResult:
    design: CircuitDesign
    objective: float
    evaluation: Evaluation
    trace: list
    ratio_curves: list = field(default_factory=list)  # (n, ic, csh, checksum, gamma_over_n)
    restarts: int = 0


def _to_unit(value, bounds):
    return (value - bounds[0]) / (bounds[1] - bounds[0])


def _from_unit(u, bounds):
    return bounds[0] + float(np.clip(u, 0.0, 1.0)) * (bounds[1] - bounds[0])


def _refine_n(obj: _Objective, n: int, gn: float, targets: DesignTargets, rng, jobs: int,
              start=None):
    """Coarse (I_c, C_sh) grid then bounded Nelder-Mead in unit coordinates."""
    ib, cb = targets.ic_bounds, targets.csh_bounds
    if start is None:
        axis = np.linspace(0.0, 1.0, targets.grid_points)
        cells = [(u, v) for u in axis for v in axis]
        params = [(_from_unit(u, ib), _from_unit(v, cb)) for u, v in cells]
        values = _parallel_map(_grid_point, [(targets, n, ic, csh, gn) for ic, csh in params], jobs)
        # scored in cell order, so the trace does not depend on the pool
        scores = [obj.score("grid", n, ic, csh, gn, omega, anh)
                  for (ic, csh), (omega, anh) in zip(params, values)]
        start = np.array(cells[int(np.argmin(scores))])
    simplex = [start]
    for dim in range(2):
        step = np.zeros(2)
        step[dim] = 0.1 + 0.05 * rng.random()
        cand = start + step if start[dim] + step[dim] <= 1.0 else start - step
        simplex.append(cand)
    res = minimize(lambda u: obj("simplex", n, _from_unit(u[0], ib), _from_unit(u[1], cb), gn),
                   start, method="Nelder-Mead", bounds=[(0.0, 1.0), (0.0, 1.0)],
                   options={"initial_simplex": np.array(simplex), "xatol": 1e-7, "fatol": 1e-12,
                            "maxfev": 400})
    return res.x


def _grid_point(args):
    targets, n, ic, csh, gn = args
    try:
        s = compute_spectrum(CircuitDesign.from_ratio(ic, csh, targets.junction_capacitance, n,
                                                      gn, targets.ground_capacitance))
        return s.qubit_frequency, s.anharmonicity
    except (FluxkitError, ValueError):
        return math.nan, math.nan


MAX_RESTARTS = 3


def optimize_design(targets: DesignTargets, seed: int = 0, jobs: int = 1,
                    tolerance: float = 1e-10) -> OptimizationResult:
    """Stage 1 fixes gamma/N from the target A/omega01; stage 2 fits (I_c, C_sh)
    for every admissible N. Restarts re-read gamma/N from a ratio curve taken
    at the current best (N, I_c, C_sh)."""
    rng = np.random.default_rng(seed)
    trace: list = []
    obj = _Objective(targets, trace)
    ic0 = math.sqrt(targets.ic_bounds[0] * targets.ic_bounds[1])
    csh0 = math.sqrt(targets.csh_bounds[0] * targets.csh_bounds[1])
    ref_n = 8 if 8 in targets.n_set else sorted(targets.n_set)[len(targets.n_set) // 2]
    curve = ratio_curve(ref_n, ic0, csh0, targets, jobs=jobs)
    gn = curve.select(targets.target_ratio)
    curves = [(ref_n, ic0, csh0, curve.checksum, gn)]
    starts = {}
    for n in sorted(int(x) for x in targets.n_set):
        starts[n] = _refine_n(obj, n, gn, targets, rng, jobs)
    restarts = 0
    while obj.best > tolerance and restarts < MAX_RESTARTS and obj.best_eval is not None:
        b = obj.best_eval
        if not math.isfinite(b.objective):
            break
        curve = ratio_curve(b.n, b.ic, b.csh, targets, jobs=jobs)
        new_gn = curve.select(targets.target_ratio)
        curves.append((b.n, b.ic, b.csh, curve.checksum, new_gn))
        restarts += 1
        if abs(new_gn - b.gamma_over_n) < 1e-9:
            start = np.array([_to_unit(b.ic, targets.ic_bounds), _to_unit(b.csh, targets.csh_bounds)])
            _refine_n(obj, b.n, b.gamma_over_n, targets, rng, jobs, start=start)
            continue
        _refine_n(obj, b.n, new_gn, targets, rng, jobs)
    best = obj.best_eval
    if best is None or not math.isfinite(best.objective):
        raise NoFeasibleDesign("no candidate design could be evaluated", nearest_miss=None)
    if best.penalty > 0:
        raise NoFeasibleDesign(
            f"no design satisfies the constraints; nearest miss N={best.n}, I_c={best.ic:.6g} nA, "
            f"C_sh={best.csh:.6g} fF, gamma/N={best.gamma_over_n:.6g} with penalty {best.penalty:.3g}",
            nearest_miss=best)
    return OptimizationResult(obj.design(best.n, best.ic, best.csh, best.gamma_over_n),
                              best.objective, best, trace, curves, restarts)


# ---------------------------------------------------------------- measured devices

@dataclass
class TableRow:
    device: str
    design: CircuitDesign
    omega01: float  # measured, GHz
    anharmonicity: float  # measured, GHz


def load_table(path=None, junction_capacitance: float | None = None) -> list:
    if path is None:
        text = resources.files("fluxkit").joinpath("data/devices.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    data = json.loads(text)
    cj = junction_capacitance if junction_capacitance is not None else data.get("cj_ff_assumed", 1.0)
    rows = []
    for r in data["rows"]:
        design = CircuitDesign.from_ratio(r["ic_na"], r["csh_ff"], r.get("cj_ff", cj), r["n"],
                                          r["gamma_over_n"], r.get("cg_ff", 0.0))
        rows.append(TableRow(r["device"], design, r["omega01_ghz"], r["anharmonicity_ghz"]))
    return rows


def _predict(design):
    try:
        s = compute_spectrum(design)
        return s.qubit_frequency, s.anharmonicity, "ok"
    except FluxkitError as exc:
        return math.nan, math.nan, f"spectrum: {exc}"


def verify_table_designs(rows: list, ic_scale: float = 1.0, jobs: int = 1) -> list:
    """Predicted omega01 and A at nominal and scaled I_c against the measured values."""
    if not ic_scale > 0:
        raise ConfigError("ic_scale must be positive")
    designs = []
    for r in rows:
        designs.append(r.design)
        designs.append(r.design.replace(critical_current=r.design.critical_current * ic_scale))
    preds = _parallel_map(_predict, designs, jobs)
    out = []
    for i, r in enumerate(rows):
        (w0, a0, st0), (w1, a1, st1) = preds[2 * i], preds[2 * i + 1]
        dev0 = (w0 - r.omega01) / r.omega01
        dev1 = (w1 - r.omega01) / r.omega01
        out.append({
            "device": r.device,
            "n": r.design.array_size,
            "ic_na": r.design.critical_current,
            "csh_ff": r.design.shunt_capacitance,
            "gamma_over_n": r.design.gamma_over_n,
            "ic_scale": ic_scale,
            "measured_omega01_ghz": r.omega01,
            "measured_anharmonicity_ghz": r.anharmonicity,
            "nominal_omega01_ghz": w0,
            "nominal_anharmonicity_ghz": a0,
            "scaled_omega01_ghz": w1,
            "scaled_anharmonicity_ghz": a1,
            "nominal_omega01_deviation": dev0,
            "scaled_omega01_deviation": dev1,
            "nominal_anharmonicity_deviation": (a0 - r.anharmonicity) / r.anharmonicity,
            "scaled_anharmonicity_deviation": (a1 - r.anharmonicity) / r.anharmonicity,
            "scaled_improves": bool(abs(dev1) < abs(dev0)),
            "status": "ok" if st0 == st1 == "ok" else "failed",
            "message": "" if st0 == st1 == "ok" else f"{st0}; {st1}",
        })
    return out


def table_summary(rows: list) -> dict:
    nominal = [abs(r["nominal_omega01_deviation"]) for r in rows if r["status"] == "ok"]
    scaled = [abs(r["scaled_omega01_deviation"]) for r in rows if r["status"] == "ok"]
    return {
        "rows": len(rows),
        "median_abs_nominal_deviation": float(np.median(nominal)) if nominal else math.nan,
        "median_abs_scaled_deviation": float(np.median(scaled)) if scaled else math.nan,
        "rows_improved": sum(r["scaled_improves"] for r in rows),
    }
