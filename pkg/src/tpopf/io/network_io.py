"""JSON network files (format version 1).

Load and PV series may be given inline or as ``{"csv": "relative/path.csv"}``.
CSV files have a header row; the first column is the period index (0..T-1)
and the remaining columns hold one value per phase (three columns for load
series, one column for a PV profile).
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema
import numpy as np

from ..network import (
    Bus,
    Line,
    Load,
    NetworkModel,
    OperatingLimits,
    PvUnit,
    Transformer,
    validate,
)

FORMAT_VERSION = 1

_number = {"type": "number"}
_positive = {"type": "number", "exclusiveMinimum": 0}
_non_negative = {"type": "number", "minimum": 0}
_csv_ref = {
    "type": "object",
    "properties": {"csv": {"type": "string"}},
    "required": ["csv"],
    "additionalProperties": False,
}
_phase_series = {
    "oneOf": [
        {"type": "array", "items": {"type": "array", "items": _number}, "minItems": 3, "maxItems": 3},
        _csv_ref,
    ]
}
_profile = {
    "oneOf": [
        {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        _csv_ref,
    ]
}

NETWORK_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format_version", "base_mva", "horizon", "buses"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "base_mva": _positive,
        "horizon": {"type": "integer", "minimum": 1},
        "slack_voltage_pu": _positive,
        "buses": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "kind", "base_kv"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "integer"},
                    "kind": {"enum": ["slack", "pq"]},
                    "base_kv": _positive,
                    "name": {"type": "string"},
                },
            },
        },
        "lines": {
            "type": "array",
            "items": {
                "type": "object",
                "required": [
                    "from_bus", "to_bus", "length_km", "r_ohm_per_km", "x_ohm_per_km",
                    "r0_ohm_per_km", "x0_ohm_per_km",
                ],
                "additionalProperties": False,
                "properties": {
                    "from_bus": {"type": "integer"},
                    "to_bus": {"type": "integer"},
                    "length_km": _positive,
                    "r_ohm_per_km": _non_negative,
                    "x_ohm_per_km": _number,
                    "r0_ohm_per_km": _non_negative,
                    "x0_ohm_per_km": _number,
                    "max_i_ka": {"oneOf": [_positive, {"type": "null"}]},
                    "c_nf_per_km": {"const": 0},
                    "name": {"type": "string"},
                },
            },
        },
        "transformers": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["hv_bus", "lv_bus", "s_rated_mva", "vk_percent", "vkr_percent", "hv_kv", "lv_kv"],
                "additionalProperties": False,
                "properties": {
                    "hv_bus": {"type": "integer"},
                    "lv_bus": {"type": "integer"},
                    "s_rated_mva": _positive,
                    "vk_percent": _positive,
                    "vkr_percent": _positive,
                    "hv_kv": _positive,
                    "lv_kv": _positive,
                    "name": {"type": "string"},
                },
            },
        },
        "loads": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["bus", "p_kw", "q_kvar"],
                "additionalProperties": False,
                "properties": {
                    "bus": {"type": "integer"},
                    "p_kw": _phase_series,
                    "q_kvar": _phase_series,
                    "name": {"type": "string"},
                },
            },
        },
        "pv_units": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["bus", "p_max_kw", "profile"],
                "additionalProperties": False,
                "properties": {
                    "bus": {"type": "integer"},
                    "p_max_kw": _non_negative,
                    "connection": {"enum": ["a", "b", "c", "abc"]},
                    "profile": _profile,
                    "name": {"type": "string"},
                },
            },
        },
        "limits": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "u_min": _positive,
                "u_max": _positive,
                "vuf_max": _positive,
                "vuf_buses": {"oneOf": [{"type": "array", "items": {"type": "integer"}}, {"type": "null"}]},
            },
        },
    },
}


class NetworkFormatError(ValueError):
    """Schema violations; ``errors`` holds (json_pointer, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        lines = [f"{ptr or '/'}: {msg}" for ptr, msg in errors]
        super().__init__("network file does not match the schema:\n  " + "\n  ".join(lines))


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def schema_errors(doc) -> list[tuple[str, str]]:
    validator = jsonschema.Draft202012Validator(NETWORK_SCHEMA)
    found = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    return [(_pointer(e.absolute_path), e.message) for e in found]


def _read_csv(path: Path, n_values: int, horizon: int, where: str) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise NetworkFormatError([(where, f"cannot read {path}: {exc.strerror}")]) from exc
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise NetworkFormatError([(where, f"{path}: non-numeric value")]) from exc
    if data.shape != (horizon, n_values + 1):
        raise NetworkFormatError([(where, f"{path}: expected {horizon} rows of {n_values + 1} columns")])
    if not np.array_equal(data[:, 0], np.arange(horizon)):
        raise NetworkFormatError([(where, f"{path}: period column must run 0..{horizon - 1}")])
    return data[:, 1:]


def _series(value, base: Path, horizon: int, where: str) -> np.ndarray:
    if isinstance(value, dict):
        return _read_csv(base / value["csv"], 3, horizon, where).T
    return np.asarray(value, dtype=float)


def _profile_values(value, base: Path, horizon: int, where: str) -> tuple[float, ...]:
    if isinstance(value, dict):
        return tuple(float(v) for v in _read_csv(base / value["csv"], 1, horizon, where)[:, 0])
    return tuple(float(v) for v in value)


def network_from_dict(doc: dict, base_dir: Path | str = ".", check: bool = True) -> NetworkModel:
    errors = schema_errors(doc)
    if errors:
        raise NetworkFormatError(errors)
    base = Path(base_dir)
    horizon = doc["horizon"]
    buses = [Bus(b["id"], b["kind"], float(b["base_kv"]), b.get("name", "")) for b in doc["buses"]]
    lines = [
        Line(
            l["from_bus"], l["to_bus"], float(l["length_km"]),
            float(l["r_ohm_per_km"]), float(l["x_ohm_per_km"]),
            float(l["r0_ohm_per_km"]), float(l["x0_ohm_per_km"]),
            None if l.get("max_i_ka") is None else float(l["max_i_ka"]),
            float(l.get("c_nf_per_km", 0.0)), l.get("name", ""),
        )
        for l in doc.get("lines", [])
    ]
    trafos = [
        Transformer(
            t["hv_bus"], t["lv_bus"], float(t["s_rated_mva"]), float(t["vk_percent"]),
            float(t["vkr_percent"]), float(t["hv_kv"]), float(t["lv_kv"]), t.get("name", ""),
        )
        for t in doc.get("transformers", [])
    ]
    loads = []
    for k, l in enumerate(doc.get("loads", [])):
        p = _series(l["p_kw"], base, horizon, f"/loads/{k}/p_kw")
        q = _series(l["q_kvar"], base, horizon, f"/loads/{k}/q_kvar")
        if any(len(row) != horizon for row in list(p) + list(q)):
            raise NetworkFormatError([(f"/loads/{k}", f"series length differs from horizon {horizon}")])
        loads.append(Load.from_arrays(l["bus"], p, q, l.get("name", "")))
    pvs = [
        PvUnit(
            v["bus"], float(v["p_max_kw"]),
            _profile_values(v["profile"], base, horizon, f"/pv_units/{k}/profile"),
            v.get("connection", "abc"), v.get("name", ""),
        )
        for k, v in enumerate(doc.get("pv_units", []))
    ]
    lim = doc.get("limits", {})
    limits = OperatingLimits(
        float(lim.get("u_min", 0.9)),
        float(lim.get("u_max", 1.1)),
        float(lim.get("vuf_max", 0.02)),
        None if lim.get("vuf_buses") is None else tuple(lim["vuf_buses"]),
    )
    net = NetworkModel(
        tuple(buses), tuple(lines), tuple(trafos), tuple(loads), tuple(pvs), limits,
        float(doc["base_mva"]), int(horizon), float(doc.get("slack_voltage_pu", 1.0)), doc.get("name", ""),
    )
    return validate(net) if check else net


def load_network(path, check: bool = True) -> NetworkModel:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise NetworkFormatError([("", f"invalid JSON: {exc}")]) from exc
    return network_from_dict(doc, path.parent, check)


def network_to_dict(net: NetworkModel) -> dict:
    """Inline JSON representation (series are always written inline)."""
    doc: dict = {
        "format_version": FORMAT_VERSION,
        "name": net.name,
        "base_mva": net.base_mva,
        "horizon": net.horizon,
        "slack_voltage_pu": net.slack_voltage_pu,
        "buses": [{"id": b.id, "kind": b.kind, "base_kv": b.base_kv, "name": b.name} for b in net.buses],
        "lines": [
            {
                "from_bus": l.from_bus, "to_bus": l.to_bus, "length_km": l.length_km,
                "r_ohm_per_km": l.r_ohm_per_km, "x_ohm_per_km": l.x_ohm_per_km,
                "r0_ohm_per_km": l.r0_ohm_per_km, "x0_ohm_per_km": l.x0_ohm_per_km,
                "max_i_ka": l.max_i_ka, "name": l.name,
            }
            for l in net.lines
        ],
        "transformers": [
            {
                "hv_bus": t.hv_bus, "lv_bus": t.lv_bus, "s_rated_mva": t.s_rated_mva,
                "vk_percent": t.vk_percent, "vkr_percent": t.vkr_percent,
                "hv_kv": t.hv_kv, "lv_kv": t.lv_kv, "name": t.name,
            }
            for t in net.transformers
        ],
        "loads": [
            {"bus": l.bus, "p_kw": [list(r) for r in l.p_kw], "q_kvar": [list(r) for r in l.q_kvar], "name": l.name}
            for l in net.loads
        ],
        "pv_units": [
            {"bus": v.bus, "p_max_kw": v.p_max_kw, "connection": v.connection, "profile": list(v.profile), "name": v.name}
            for v in net.pv_units
        ],
        "limits": {
            "u_min": net.limits.u_min,
            "u_max": net.limits.u_max,
            "vuf_max": net.limits.vuf_max,
            "vuf_buses": None if net.limits.vuf_buses is None else list(net.limits.vuf_buses),
        },
    }
    return doc


def save_network(net: NetworkModel, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")
