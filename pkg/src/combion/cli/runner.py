"""Run a validated experiment config and write results plus a manifest.

Every run writes ``<out>`` (CSV or JSON) and ``<out>.manifest.json``. The
result file is byte-for-byte reproducible from the config; wall time and
timestamp live only in the manifest.

CSV columns per task:

    rabi      time_s, n_pulses, p_up
    spectrum  delta_omega_hz, p_flip, branch
    cool      cycle, nbar
    msgate    method, time_s, n_pulses, p_dd, p_du, p_ud, p_uu, coherence_abs, bell_phase, purity, fidelity
    parity    phi_rad, parity
"""
import csv
import io
import json
import os
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .. import __version__
from ..comb import q_parameter, raman_rabi_frequency
from ..errors import CutoffTooSmall
from ..msgate import (
    DD,
    UU,
    GateConfig,
    bell_phase,
    gate_parameters,
    ms_evolve_analytic,
    ms_propagate_numeric,
    overlap_fidelity,
    witness,
)
from ..spectroscopy import (
    CoolingConfig,
    SpectrumScanConfig,
    carrier_rabi_scan,
    feature_offsets,
    sideband_cool,
    sideband_spectrum,
)
from ..units import TWO_PI
from .config import expand

THREADS_ENV = "COMBION_THREADS"
COOLING_TARGET = 0.03


@dataclass
class TaskResult:
    columns: tuple
    rows: list
    summary: dict = field(default_factory=dict)
    leakage: float = 0.0


@dataclass
class RunOutcome:
    output: Path
    manifest_path: Path
    manifest: dict


def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _num(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def _rabi(cfg, opts):
    block = cfg.block
    omega = block.get("rabi_frequency")
    omega = None if omega is None else TWO_PI * omega
    q = q_parameter(cfg.ion, cfg.laser, cfg.tol_q)
    points = carrier_rabi_scan(
        cfg.ion, cfg.laser, expand(block["durations"]), block.get("lock_to_resonance", True), omega, cfg.tol_q
    )
    if omega is None:
        omega = raman_rabi_frequency(cfg.ion, cfg.laser, require_resonance=False).omega
    rows = [(p.time, p.n_pulses, p.p_up) for p in points]
    summary = {"q": q.value, "q_class": q.kind.value, "rabi_frequency_hz": omega / TWO_PI}
    return TaskResult(("time_s", "n_pulses", "p_up"), rows, summary)


def _spectrum(cfg, opts):
    block = cfg.block
    theta_p = block.get("theta_p")
    if theta_p is None:
        theta_p = raman_rabi_frequency(cfg.ion, cfg.laser, require_resonance=False).omega * cfg.laser.period
    scan = SpectrumScanConfig(
        tuple(expand(block["offsets"])),
        block["probe_duration"],
        cfg.ion.modes,
        theta_p,
        cfg.ion.qubit_splitting,
        cfg.laser.period,
        tuple(block.get("initial_nbar") or ()),
    )
    exact = opts["exact"] or block.get("exact", False)
    result = sideband_spectrum(scan, exact=exact, threads=opts["threads"])
    rows = [(r.delta_omega, r.flip_probability, ";".join(r.branch_labels)) for r in result.rows]
    center = scan.delta_omega_grid[len(scan.delta_omega_grid) // 2]
    summary = {
        "n_pulses": result.n_pulses,
        "theta_p": result.theta_p,
        "engine": "exact" if exact else "lineshape",
        "features_hz": feature_offsets(scan, center),
    }
    return TaskResult(("delta_omega_hz", "p_flip", "branch"), rows, summary, result.leakage)


def _cool(cfg, opts):
    block = cfg.block
    schedule = CoolingConfig(
        block["cycles"],
        block.get("pulses_per_cycle", 5),
        block["initial_nbar"],
        block.get("recoil_heating_per_cycle", 0.0),
    )
    result = sideband_cool(cfg.ion, schedule, block.get("mode", 0), block.get("cutoff"))
    rows = [(r.cycle, r.nbar) for r in result.rows]
    summary = {
        "final_nbar": result.final_nbar,
        f"cycles_to_nbar_{COOLING_TARGET}": result.cycles_to_reach(COOLING_TARGET),
    }
    return TaskResult(("cycle", "nbar"), rows, summary)


def _gate_config(cfg):
    block = cfg.block
    mode = cfg.ion.modes[block.get("mode", 0)]
    omega = TWO_PI * block["rabi_frequency"]
    delta, t_g = gate_parameters(mode.lamb_dicke, omega)
    if "detuning" in block:
        delta = TWO_PI * block["detuning"]
    return GateConfig(
        mode.lamb_dicke,
        omega,
        delta,
        block.get("duration", t_g),
        TWO_PI * mode.trap_frequency,
        block.get("initial_nbar", 0.0),
        cfg.laser.period,
    )


def _gate_states(cfg):
    gate = _gate_config(cfg)
    method = cfg.block.get("method", "analytic")
    out, leakage = [], 0.0
    if method in ("analytic", "both"):
        out.append(("analytic", ms_evolve_analytic(gate)))
    if method in ("numeric", "both"):
        rho, leakage = ms_propagate_numeric(gate, cfg.block.get("cutoff", 20))
        out.append(("numeric", rho))
    return gate, out, leakage


def _msgate(cfg, opts):
    gate, states, leakage = _gate_states(cfg)
    rows = []
    for method, rho in states:
        p = rho.populations()
        rows.append(
            (
                method,
                gate.n_pulses * gate.period,
                gate.n_pulses,
                *p,
                abs(rho.entries[UU, DD]),
                bell_phase(rho),
                rho.purity(),
                overlap_fidelity(rho),
            )
        )
    columns = ("method", "time_s", "n_pulses", "p_dd", "p_du", "p_ud", "p_uu",
               "coherence_abs", "bell_phase", "purity", "fidelity")
    summary = {"delta_rad_s": gate.delta, "duration_s": gate.duration}
    return TaskResult(columns, rows, summary, leakage)


def _parity(cfg, opts):
    block = cfg.block
    gate, states, leakage = _gate_states(cfg)
    method, rho = states[-1]
    phi = expand(block["phases"]) if "phases" in block else np.linspace(0.0, np.pi, 64, endpoint=False)
    error = block.get("detection_error")
    report, scan = witness(rho, phi, tuple(error) if error else None)
    rows = list(zip(scan.phi, scan.parity))
    summary = {
        "state": method,
        "phase_offset": scan.phase_offset,
        "overlap_fidelity": overlap_fidelity(rho),
        **report._asdict(),
    }
    return TaskResult(("phi_rad", "parity"), rows, summary, leakage)


TASK_RUNNERS = {"rabi": _rabi, "spectrum": _spectrum, "cool": _cool, "msgate": _msgate, "parity": _parity}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _num(obj)


def render_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in map(_num, row)])
    return buf.getvalue()


def render_json(result, manifest):
    doc = {
        "columns": list(result.columns),
        "rows": _clean(result.rows),
        "summary": _clean(result.summary),
        "manifest": {k: v for k, v in manifest.items() if k not in ("timestamp", "wall_time_s")},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(cfg, out=None, fmt=None, threads=None, exact=False):
    """Execute ``cfg``; returns a RunOutcome or re-raises CutoffTooSmall after writing a partial manifest."""
    fmt = fmt or cfg.output.get("format", "csv")
    out = Path(out or cfg.output.get("path") or f"{cfg.task}.{fmt}")
    manifest_path = out.with_name(out.name + ".manifest.json")
    opts = {"threads": threads or default_threads(), "exact": exact}
    manifest = {
        "task": cfg.task,
        "config_hash": cfg.config_hash(),
        "tool_version": __version__,
        "seed": cfg.seed,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "output": out.name,
        "format": fmt,
    }
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            result = TASK_RUNNERS[cfg.task](cfg, opts)
        except CutoffTooSmall as exc:
            manifest.update(
                status="failed",
                error=f"CutoffTooSmall: {exc}",
                leakage_max=exc.leakage,
                warnings=sorted({str(w.message) for w in caught}),
                wall_time_s=time.perf_counter() - start,
            )
            _write(manifest_path, json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
            raise
    manifest.update(
        status="ok",
        leakage_max=result.leakage,
        warnings=sorted({str(w.message) for w in caught}),
        summary=_clean(result.summary),
    )
    text = render_csv(result) if fmt == "csv" else render_json(result, manifest)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, text)
    manifest["wall_time_s"] = time.perf_counter() - start
    _write(manifest_path, json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n")
    return RunOutcome(out, manifest_path, manifest)
