"""Invariant checks for :class:`NetworkModel`."""

from __future__ import annotations

import math

import numpy as np

from .admittance import DisconnectedNetwork, check_connected
from .model import PHASES, THREE_PHASE, Line, NetworkModel, Transformer


class NetworkValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid network:\n  " + "\n  ".join(self.errors))


def _finite(*values) -> bool:
    return all(v is not None and math.isfinite(v) for v in values)


def validation_errors(net: NetworkModel) -> list[str]:
    """Return one diagnostic per violated invariant (empty when valid)."""
    errors: list[str] = []
    ids = [b.id for b in net.buses]
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})
        errors.append(f"duplicate bus ids: {dup}")
    slack = [b.id for b in net.buses if b.is_slack]
    if not slack:
        errors.append("no slack bus")
    elif len(slack) > 1:
        errors.append(f"multiple slack buses: {slack}")
    for b in net.buses:
        if b.kind not in ("slack", "pq"):
            errors.append(f"bus {b.id}: unknown kind {b.kind!r}")
        if not _finite(b.base_kv) or b.base_kv <= 0:
            errors.append(f"bus {b.id}: base_kv must be positive")
    known = set(ids)

    def check_bus(what: str, bus_id: int) -> bool:
        if bus_id not in known:
            errors.append(f"{what}: bus {bus_id} does not exist")
            return False
        return True

    for k, line in enumerate(net.lines):
        tag = f"line {k} ({line.from_bus}-{line.to_bus})"
        ok = check_bus(tag, line.from_bus) & check_bus(tag, line.to_bus)
        if line.from_bus == line.to_bus:
            errors.append(f"{tag}: from_bus equals to_bus")
        if not _finite(line.length_km) or line.length_km <= 0:
            errors.append(f"{tag}: length_km must be positive")
        values = (line.r_ohm_per_km, line.x_ohm_per_km, line.r0_ohm_per_km, line.x0_ohm_per_km)
        if not _finite(*values):
            errors.append(f"{tag}: impedance must be finite")
        elif line.r_ohm_per_km < 0 or line.r0_ohm_per_km < 0:
            errors.append(f"{tag}: resistance must be non-negative")
        if line.max_i_ka is not None and (not _finite(line.max_i_ka) or line.max_i_ka <= 0):
            errors.append(f"{tag}: max_i_ka must be positive")
        if line.c_nf_per_km != 0.0:
            errors.append(f"{tag}: shunt capacitance is not supported")
        if ok and line.from_bus != line.to_bus:
            kv_from, kv_to = net.bus(line.from_bus).base_kv, net.bus(line.to_bus).base_kv
            if not math.isclose(kv_from, kv_to, rel_tol=1e-9):
                errors.append(f"{tag}: connects buses with different base_kv")
    for k, tr in enumerate(net.transformers):
        tag = f"transformer {k} ({tr.hv_bus}-{tr.lv_bus})"
        ok = check_bus(tag, tr.hv_bus) & check_bus(tag, tr.lv_bus)
        if tr.hv_bus == tr.lv_bus:
            errors.append(f"{tag}: hv_bus equals lv_bus")
        if not _finite(tr.s_rated_mva) or tr.s_rated_mva <= 0:
            errors.append(f"{tag}: s_rated_mva must be positive")
        if not (_finite(tr.vk_percent, tr.vkr_percent) and 0 < tr.vkr_percent <= tr.vk_percent):
            errors.append(f"{tag}: need 0 < vkr_percent <= vk_percent")
        if ok and tr.hv_bus != tr.lv_bus:
            for side, bus_id, kv in (("hv", tr.hv_bus, tr.hv_kv), ("lv", tr.lv_bus, tr.lv_kv)):
                if not math.isclose(net.bus(bus_id).base_kv, kv, rel_tol=1e-9):
                    errors.append(f"{tag}: {side}_kv {kv} differs from bus {bus_id} base_kv (off-nominal ratios unsupported)")
    horizon = net.horizon
    if not isinstance(horizon, int) or horizon < 1:
        errors.append("horizon must be a positive integer")
        horizon = None
    for k, load in enumerate(net.loads):
        tag = f"load {k} (bus {load.bus})"
        check_bus(tag, load.bus)
        for name, series in (("p_kw", load.p_kw), ("q_kvar", load.q_kvar)):
            arr = np.asarray(series, dtype=float)
            if arr.ndim != 2 or arr.shape[0] != 3:
                errors.append(f"{tag}: {name} must have one series per phase")
            elif horizon is not None and arr.shape[1] != horizon:
                errors.append(f"{tag}: {name} length {arr.shape[1]} != horizon {horizon}")
            elif not np.all(np.isfinite(arr)):
                errors.append(f"{tag}: {name} must be finite")
    pv_buses: list[int] = []
    for k, pv in enumerate(net.pv_units):
        tag = f"pv {k} (bus {pv.bus})"
        if check_bus(tag, pv.bus):
            if net.bus(pv.bus).is_slack:
                errors.append(f"{tag}: PV units cannot sit on the slack bus")
        pv_buses.append(pv.bus)
        if pv.connection not in PHASES and pv.connection != THREE_PHASE:
            errors.append(f"{tag}: connection must be a, b, c or abc")
        if not _finite(pv.p_max_kw) or pv.p_max_kw < 0:
            errors.append(f"{tag}: p_max_kw must be non-negative")
        prof = np.asarray(pv.profile, dtype=float)
        if horizon is not None and prof.shape != (horizon,):
            errors.append(f"{tag}: profile length {prof.size} != horizon {horizon}")
        elif not np.all(np.isfinite(prof)) or np.any(prof < 0) or np.any(prof > 1):
            errors.append(f"{tag}: profile values must lie in [0, 1]")
    if len(set(pv_buses)) != len(pv_buses):
        errors.append("at most one PV unit per bus")
    lim = net.limits
    if not (_finite(lim.u_min, lim.u_max) and 0 < lim.u_min < lim.u_max):
        errors.append("limits: need 0 < u_min < u_max")
    if not _finite(lim.vuf_max) or lim.vuf_max <= 0:
        errors.append("limits: vuf_max must be positive")
    if lim.vuf_buses is not None:
        for bus_id in lim.vuf_buses:
            check_bus("limits.vuf_buses", bus_id)
    if not _finite(net.base_mva) or net.base_mva <= 0:
        errors.append("base_mva must be positive")
    if not _finite(net.slack_voltage_pu) or net.slack_voltage_pu <= 0:
        errors.append("slack_voltage_pu must be positive")
    if not errors:
        try:
            check_connected(net)
        except DisconnectedNetwork as exc:
            errors.append(str(exc))
    return errors


def validate(net: NetworkModel) -> NetworkModel:
    """Return ``net`` unchanged if valid, else raise with every diagnostic."""
    errors = validation_errors(net)
    if errors:
        raise NetworkValidationError(errors)
    return net
