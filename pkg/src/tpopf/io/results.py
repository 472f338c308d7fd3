"""Deterministic result documents and CSV outputs.

Documents carry no timestamps or absolute paths, so the same inputs, options
and seed always produce byte-identical files. Floats are written with
``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..network import PHASES, NetworkModel
from .network_io import network_from_dict, network_to_dict

RESULT_FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def versions() -> dict:
    return {
        "tpopf": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": platform.python_version(),
    }


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def result_document(
    command: str,
    config: dict,
    status: str,
    objective: float | None = None,
    iterations: int | None = None,
    error_report: dict | None = None,
    seed: int | None = None,
    payload: dict | None = None,
) -> dict:
    doc = {
        "format_version": RESULT_FORMAT_VERSION,
        "command": command,
        "status": status,
        "objective": objective,
        "iterations": iterations,
        "error_report": error_report,
        "seed": seed,
        "config": config,
        "config_hash": config_hash(_jsonable(config)),
        "versions": versions(),
    }
    if payload:
        doc.update(payload)
    return _jsonable(doc)


def write_json(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def network_digest(net: NetworkModel) -> str:
    return config_hash(_jsonable(network_to_dict(net)))


def solution_payload(net: NetworkModel, sol) -> dict:
    """Everything needed to replay an OPF result without re-solving."""
    return {
        "network": network_to_dict(net),
        "solution": {
            "formulation": sol.formulation,
            "voltage_re": sol.voltages.real,
            "voltage_im": sol.voltages.imag,
            "pv_p_kw": sol.pv_p_kw,
            "pv_q_kvar": sol.pv_q_kvar,
            "capacity_kw": sol.capacity_kw,
        },
    }


def solution_from_document(doc: dict):
    """(network, OpfSolution) reconstructed from :func:`solution_payload` output."""
    from ..opf import OpfSolution
    from ..powerflow import bus_vuf

    if "solution" not in doc or "network" not in doc:
        raise ValueError("result document does not contain an OPF solution")
    net = network_from_dict(doc["network"])
    s = doc["solution"]
    volts = np.asarray(s["voltage_re"], dtype=float) + 1j * np.asarray(s["voltage_im"], dtype=float)
    cap = None if s.get("capacity_kw") is None else np.asarray(s["capacity_kw"], dtype=float)
    sol = OpfSolution(
        s["formulation"], doc["status"], doc.get("objective") or 0.0, volts,
        np.asarray(s["pv_p_kw"], dtype=float), np.asarray(s["pv_q_kvar"], dtype=float), cap,
        bus_vuf(volts), {},
    )
    return net, sol


def _fmt(v) -> str:
    return repr(float(v))


def write_pf_csv(net: NetworkModel, voltages, vuf, path) -> None:
    """Columns: period, bus, phase, v_magnitude_pu, v_angle_deg, vuf_bus."""
    lines = ["period,bus,phase,v_magnitude_pu,v_angle_deg,vuf_bus"]
    for t in range(voltages.shape[0]):
        for n, bus in enumerate(net.sorted_buses):
            for p in range(3):
                v = voltages[t, n, p]
                lines.append(
                    f"{t},{bus.id},{PHASES[p]},{_fmt(abs(v))},{_fmt(np.degrees(np.angle(v)))},{_fmt(vuf[t, n])}"
                )
    Path(path).write_text("\n".join(lines) + "\n")


def write_production_csv(production_kw, path) -> None:
    """Aggregate PV output per period and phase. Columns: period, phase, kW."""
    lines = ["period,phase,kW"]
    for t in range(production_kw.shape[0]):
        for p in range(3):
            lines.append(f"{t},{PHASES[p]},{_fmt(production_kw[t, p])}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_iteration_log(report, path) -> None:
    rows = report.log_rows()
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    lines = [",".join(keys)]
    for row in rows:
        lines.append(",".join(_fmt(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys))
    Path(path).write_text("\n".join(lines) + "\n")
