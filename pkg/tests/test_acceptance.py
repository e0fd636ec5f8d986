"""Acceptance gate. Each test records PASS/FAIL with a detail line before it
asserts; the lines are printed in the terminal summary (see conftest)."""

import json
import math
import subprocess
import sys
import time

import numpy as np

from conftest import ACCEPTANCE
from fluxkit.circuit import CircuitDesign, EnergyScales, derive_energies
from fluxkit.dispersion import dispersion_empirical, transmon_dispersion_oracle
from fluxkit.fullmodel import charge_dispersion_full, full_spectrum
from fluxkit.noise import flux_sensitivity, sensitivity_report
from fluxkit.spectrum import (
    _cached_spectrum, _quartic_lambdas, compute_spectrum, quartic_spectrum,
    solve_quartic_dimensionless,
)
from fluxkit.sweep import (
    DesignTargets, SweepSpec, load_table, optimize_design, run_sweep, table_summary,
    verify_table_designs,
)

REF = CircuitDesign.from_ratio(40.0, 20.0, 1.0, 8, 1.0)


def record(number: int, ok: bool, detail: str):
    ACCEPTANCE[number] = (bool(ok), detail)
    assert ok, detail


def test_criterion_01_quartic_eigenvalues():
    _quartic_lambdas.cache_clear()
    t0 = time.perf_counter()
    lam = solve_quartic_dimensionless(3)
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(lam - [1.0604, 3.7997, 7.4557])))
    record(1, err < 1e-3 and elapsed < 5.0,
           f"lambda = {np.round(lam, 5).tolist()}, max error {err:.1e}, {elapsed:.2f} s")


def test_criterion_02_quarton_ratio():
    worst = 0.0
    for ej in np.linspace(5, 50, 5):
        for ec in np.linspace(0.2, 2.0, 5):
            e = EnergyScales(float(ej), float(ec), 0.0)
            worst = max(worst, abs(quartic_spectrum(e).ratio - 0.3346))
    ref = compute_spectrum(REF).ratio
    record(2, worst < 1e-3 and 0.28 <= ref <= 0.38,
           f"quartic |A/w - 0.3346| <= {worst:.1e} over 5x5 (E_J, E_C); reference design A/w = {ref:.4f}")


def test_criterion_03_gamma_sweep_monotone():
    _cached_spectrum.cache_clear()
    t0 = time.perf_counter()
    res = run_sweep(SweepSpec("gamma_over_n", 0.8, 1.3, 21, REF))
    elapsed = time.perf_counter() - t0
    w, a = res.column("omega01_ghz"), res.column("anharmonicity_ghz")
    bad = int(np.sum(np.diff(w) <= 0) + np.sum(np.diff(a) >= 0))
    record(3, bad == 0 and res.failures == 0 and elapsed < 60.0,
           f"21 points, {bad} violations, omega01 {w[0]:.3f}->{w[-1]:.3f} GHz, "
           f"A {a[0]:.3f}->{a[-1]:.3f} GHz, {elapsed:.1f} s")


def test_criterion_04_transmon_scaling():
    check = transmon_dispersion_oracle(ratios=np.linspace(20, 80, 7))
    record(4, check.relative_error < 0.10,
           f"slope {check.slope:.4f} vs -sqrt(8) = {-math.sqrt(8):.4f} "
           f"({100 * check.relative_error:.1f}% off)")


def test_criterion_05_full_model_n_suppression():
    amps, ratios, times = [], [], []
    for n in (2, 3, 4):
        d = CircuitDesign.from_ratio(40.0, 20.0, 1.0, n, 1.0)
        t0 = time.perf_counter()
        fd = charge_dispersion_full(d, levels=((0, 1),), worst_case=False)
        times.append(time.perf_counter() - t0)
        amp = fd.principal[(0, 1)].amplitude
        amps.append(amp)
        if n < 4:
            ratios.append(amp / dispersion_empirical(derive_energies(d), n))
    decreasing = all(b < a for a, b in zip(amps, amps[1:]))
    within = all(0.2 <= r <= 5.0 for r in ratios)
    record(5, decreasing and within and times[-1] < 600.0,
           f"0-1 dispersion N=2,3,4: {', '.join(f'{x:.3g}' for x in amps)} GHz; "
           f"full/empirical at N=2,3: {', '.join(f'{r:.2f}' for r in ratios)}; "
           f"N=4 took {times[-1]:.0f} s")


def test_criterion_06_one_mode_reduction():
    # expected to fail: see the analysis recorded with the design notes
    worst, detail = 0.0, []
    for n in (2, 3):
        for gn in (0.9, 1.0, 1.1):
            d = CircuitDesign.from_ratio(40.0, 20.0, 1.0, n, gn)
            full, one = full_spectrum(d), compute_spectrum(d)
            dw = abs(full.qubit_frequency - one.qubit_frequency) / one.qubit_frequency
            da = abs(full.anharmonicity - one.anharmonicity) / abs(one.anharmonicity)
            worst = max(worst, dw, da)
            detail.append(f"N={n} g/N={gn}: w {full.qubit_frequency:.2f}/{one.qubit_frequency:.2f}")
    record(6, worst <= 0.10, f"worst relative deviation {100 * worst:.0f}% (full/1d: "
                             + "; ".join(detail) + ")")


def test_criterion_07_sweet_spot():
    rows = load_table()
    slopes = [abs(flux_sensitivity(r.design)[0]) for r in rows]
    worst = max(slopes)
    record(7, worst < 1e-3, f"max |d omega01/d Phi_e| over {len(rows)} tabulated designs "
                            f"= {worst:.1e} GHz/Phi0")


def test_criterion_08_quasiparticle_scaling():
    elems = {}
    for n in (8, 16):
        rep = sensitivity_report(CircuitDesign.from_ratio(40.0, 20.0, 1.0, n, 1.0), dispersion=None)
        elems[n] = rep
    ratio = elems[16].qp_element_array / elems[8].qp_element_array
    principal = max(r.qp_element_principal for r in elems.values())
    record(8, abs(ratio - 0.5) <= 0.1 and principal < 1e-4,
           f"|<0|sin(phi/2N)|1>| N=16/N=8 = {ratio:.3f}; principal element {principal:.1e}")


def test_criterion_09_table_verification():
    rows = load_table()
    nominal = table_summary(verify_table_designs(rows, 1.0))["median_abs_nominal_deviation"]
    scaled = {s: table_summary(verify_table_designs(rows, s))["median_abs_scaled_deviation"]
              for s in (0.6, 0.65, 0.7)}
    record(9, all(v < nominal for v in scaled.values()),
           f"median |dw/w| at ic_scale 1: {nominal:.3f}; "
           + ", ".join(f"{s}: {v:.3f}" for s, v in scaled.items()))


def test_criterion_10_identity_recovery():
    rng = np.random.default_rng(2020)
    designs = []
    while len(designs) < 10:
        d = CircuitDesign.from_ratio(float(rng.uniform(10, 60)), float(rng.uniform(10, 60)), 1.0,
                                     int(rng.choice([2, 4, 6, 8, 12, 16])),
                                     float(rng.uniform(0.8, 1.3)))
        s = compute_spectrum(d)
        if 2.2 < s.qubit_frequency < 5.8:
            designs.append((d, s.qubit_frequency, s.anharmonicity))
    t0 = time.perf_counter()
    worst = 0.0
    for i, (d, w, a) in enumerate(designs):
        res = optimize_design(DesignTargets(w, a), seed=i)
        worst = max(worst, res.objective)
    elapsed = time.perf_counter() - t0
    record(10, worst < 1e-4 and elapsed < 600.0,
           f"worst objective {worst:.1e} over 10 designs, {elapsed:.0f} s")


def _cli(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "fluxkit.cli", *args], cwd=cwd,
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def test_criterion_11_determinism(tmp_path):
    cfg = {
        "design": {"ic_na": 40, "csh_ff": 20, "cj_ff": 1, "n": 8, "gamma_over_n": 1.0},
        "noise": {"flux_noise_amplitude": 2e-6},
        "sweep": {"axis": "gamma_over_n", "range": [0.8, 1.3], "points": 6,
                  "outputs": ["omega01", "anharmonicity", "dispersion"]},
        "targets": {"omega01_ghz": 3.5, "anharmonicity_ghz": 1.17},
        "optimize": {"seed": 5, "n_set": [6, 8]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    same = {}
    for cmd, extra in (("solve", []), ("sweep", ["--jobs", "2"]), ("optimize", ["--jobs", "1"])):
        outs = []
        for run in range(2):
            out = tmp_path / f"{cmd}{run}.out"
            trace = ["--trace", str(tmp_path / f"trace{run}.csv")] if cmd == "optimize" else []
            _cli([cmd, str(path), "--out", str(out), *extra, *trace], tmp_path)
            outs.append(out.read_bytes())
        same[cmd] = outs[0] == outs[1] and len(outs[0]) > 0
    same["trace"] = (tmp_path / "trace0.csv").read_bytes() == (tmp_path / "trace1.csv").read_bytes()
    record(11, all(same.values()),
           "byte-identical reruns: " + ", ".join(f"{k} {'yes' if v else 'NO'}" for k, v in same.items()))
