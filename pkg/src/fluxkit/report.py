"""Design reports and output files.

Numbers in serialized reports are {"value": ..., "unit": ...} pairs. CSV
files use 9 significant digits, '\\n' line endings and minimal quoting, and
are written atomically (temporary file, then rename).
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field

from .circuit import (
    CODATA2018, CircuitDesign, ExpansionValidityWarning, PhysicalConstants, RegimeTag,
    classify_regime, derive_energies, expansion_coefficients, at_sweet_spot,
)
from .dispersion import charge_dispersion_1d, dispersion_empirical
from .fullmodel import DEFAULT_MAX_MODES, charge_dispersion_full
from .noise import NoiseModel, estimate_rates, sensitivity_report
from .spectrum import compute_spectrum

SIG_DIGITS = 9


@contextlib.contextmanager
def stage(name: str):
    """Tag any exception raised inside with the pipeline stage it came from."""
    try:
        yield
    except Exception as exc:
        if getattr(exc, "stage", None) is None:
            try:
                exc.stage = name
            except AttributeError:
                pass
        raise


def quantity(value, unit: str) -> dict:
    return {"value": _json_number(value), "unit": unit}


def _json_number(value):
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


@dataclass
class DesignReport:
    design: CircuitDesign
    energies: dict
    regime: str
    levels: list
    omega01: float
    anharmonicity: float
    ratio: float
    dispersion: dict = field(default_factory=dict)  # model -> (amplitude GHz, log10, extra)
    sensitivity: dict = field(default_factory=dict)
    rates: list = field(default_factory=list)
    rates_incomplete: bool = False
    grid: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = self.design
        out = {
            "design": {
                "ic": quantity(d.critical_current, "nA"),
                "csh": quantity(d.shunt_capacitance, "fF"),
                "cj": quantity(d.junction_capacitance, "fF"),
                "cg": quantity(d.ground_capacitance, "fF"),
                "n": d.array_size,
                "gamma": quantity(d.size_ratio, "1"),
                "gamma_over_n": quantity(d.gamma_over_n, "1"),
                "phie": quantity(d.external_phase, "rad"),
            },
            "energies": {k: quantity(v, u) for k, (v, u) in self.energies.items()},
            "regime": self.regime,
            "spectrum": {
                "levels": {"value": [_json_number(x) for x in self.levels], "unit": "GHz"},
                "omega01": quantity(self.omega01, "GHz"),
                "anharmonicity": quantity(self.anharmonicity, "GHz"),
                "ratio": quantity(self.ratio, "1"),
                "grid": self.grid,
            },
            "dispersion": {
                model: {"amplitude": quantity(amp, "GHz"), "log10_amplitude": quantity(lg, "log10 GHz"),
                        **extra}
                for model, (amp, lg, extra) in self.dispersion.items()
            },
            "sensitivity": {k: quantity(v, u) for k, (v, u) in self.sensitivity.items()},
            "warnings": list(self.warnings),
        }
        if self.rates:
            out["rates"] = {
                "label": "figures of merit (not predictions)",
                "incomplete": self.rates_incomplete,
                "contributions": [
                    {"name": r.name, "channel": r.channel, "rate": quantity(r.rate, "1/s"),
                     "formula": r.formula,
                     "constants": {k: _json_number(v) if isinstance(v, (int, float)) else v
                                   for k, v in r.constants.items()}}
                    for r in self.rates
                ],
            }
        return out

    def to_json(self) -> str:
        return dumps(self.to_dict())


def dumps(data) -> str:
    return json.dumps(data, indent=2, allow_nan=False) + "\n"


def build_report(design: CircuitDesign, noise: NoiseModel | None = None,
                 dispersion: bool = True, full_model: bool = False,
                 max_modes: int = DEFAULT_MAX_MODES,
                 constants: PhysicalConstants = CODATA2018) -> DesignReport:
    """derive -> classify -> spectrum -> matrix elements/sensitivities -> dispersion."""
    notes = []
    with stage("derive"):
        energies = derive_energies(design, constants)
    with stage("classify"):
        regime = classify_regime(design)
        if at_sweet_spot(design):
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always", ExpansionValidityWarning)
                expansion_coefficients(design, energies)
            notes += [f"expansion validity: {w.message}" for w in caught]
    with stage("spectrum"):
        spec = compute_spectrum(design, constants=constants)
        notes += spec.warnings
    disp = {}
    if dispersion:
        with stage("dispersion"):
            res = charge_dispersion_1d(design, level=(0, 1), constants=constants)
            disp["1d"] = (res.amplitude, res.log10_amplitude,
                          {"method": res.method, "fidelity": "low"})
            notes.append("model fidelity: 1d dispersion misses phase slips across single "
                         "array junctions; treat it as a lower bound")
            amp = dispersion_empirical(energies, design.array_size)
            disp["empirical"] = (amp, math.log10(amp) if amp > 0 else -math.inf,
                                 {"fidelity": "fit"})
            if regime.tag is not RegimeTag.QUARTON:
                notes.append("model fidelity: empirical dispersion fit applies to quartons only")
            if full_model:
                fd = charge_dispersion_full(design, levels=(0, (0, 1)), max_modes=max_modes,
                                            constants=constants)
                r = fd.principal[(0, 1)]
                w = fd.worst[(0, 1)]
                disp["full"] = (r.amplitude, r.log10_amplitude, {
                    "fidelity": "high",
                    "level": "0-1",
                    "ground_band_ghz": fd.principal[0].amplitude,
                    "worst_island": fd.worst_island[(0, 1)],
                    "worst_island_ghz": w.amplitude,
                    "charge_cutoff": fd.basis.charge_cutoff,
                    "cg_ff": design.ground_capacitance,
                })
    with stage("sensitivities"):
        scale = None
        if disp:
            model = "full" if "full" in disp else max(("1d", "empirical"), key=lambda m: disp[m][0])
            scale = disp[model][0]
        rep = sensitivity_report(design, dispersion=scale, constants=constants)
        if scale is not None:
            rep.dispersion_model = model
        sens = {
            "flux_slope": (rep.flux_slope, "GHz/Phi0"),
            "flux_curvature": (rep.flux_curvature, "GHz/Phi0^2"),
            "dipole": (rep.dipole, "1"),
            "charge_element": (rep.charge_element, "1"),
            "qp_element_array": (rep.qp_element_array, "1"),
            "qp_element_principal": (rep.qp_element_principal, "1"),
        }
        if scale is not None:
            sens["dispersion_dephasing_scale"] = (scale, "GHz")
    rates, incomplete = [], False
    if noise is not None:
        with stage("rates"):
            table = estimate_rates(design, noise, rep, constants)
            rates, incomplete = table.contributions, table.incomplete
            notes += table.notes
    return DesignReport(
        design=design,
        energies={"ej": (energies.josephson_energy, "GHz"), "ec": (energies.charging_energy, "GHz"),
                  "c_sigma": (energies.total_capacitance, "fF"),
                  "ej_over_ec": (energies.ej_ec_ratio, "1")},
        regime=regime.tag.value,
        levels=[float(x) for x in spec.levels],
        omega01=spec.qubit_frequency,
        anharmonicity=spec.anharmonicity,
        ratio=spec.ratio,
        dispersion=disp,
        sensitivity=sens,
        rates=rates,
        rates_incomplete=incomplete,
        grid=spec.grid_meta,
        warnings=notes,
    )


# ---------------------------------------------------------------- files

def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.{SIG_DIGITS}g}"
    # a bare \r is written unquoted and would end the record
    return str(value).replace("\r\n", "\n").replace("\r", "\n")


def csv_text(columns: list, rows: list) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(path) -> tuple[list, list]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [dict(zip(columns, r)) for r in reader]
    return columns, rows


def write_atomic(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fluxkit-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_csv(path, columns: list, rows: list):
    write_atomic(path, csv_text(columns, rows))


def write_json(path, data):
    write_atomic(path, dumps(data))
