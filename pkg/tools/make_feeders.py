"""Regenerate the synthetic test feeders shipped in ``src/tpopf/data``.

Run from the repository root:  python3 tools/make_feeders.py
The output is deterministic.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from tpopf.io import network_to_dict
from tpopf.network import Bus, Line, Load, NetworkModel, OperatingLimits, PvUnit, Transformer, validate

DATA = Path(__file__).resolve().parents[1] / "src" / "tpopf" / "data"

# LV conductor data (ohm/km, kA)
CABLE = dict(r_ohm_per_km=0.206, x_ohm_per_km=0.080, r0_ohm_per_km=0.824, x0_ohm_per_km=0.320, max_i_ka=0.27)
OVERHEAD = dict(r_ohm_per_km=0.642, x_ohm_per_km=0.083, r0_ohm_per_km=2.568, x0_ohm_per_km=0.332, max_i_ka=0.17)


def pv_profile(hours: np.ndarray) -> np.ndarray:
    """Clear-sky shape: zero before 06:00 and after 19:00, peak 1 at midday."""
    shape = np.clip(np.sin(np.pi * (hours - 6.0) / 13.0), 0.0, None) ** 1.2
    shape[(hours <= 6) | (hours >= 19)] = 0.0
    return np.round(shape / shape.max(), 6)


def residential_profile(hours: np.ndarray) -> np.ndarray:
    """Normalized household demand with morning and evening peaks."""
    base = 0.3 + 0.35 * np.exp(-0.5 * ((hours - 7.5) / 1.2) ** 2) + 0.7 * np.exp(-0.5 * ((hours - 19.0) / 2.0) ** 2)
    return np.round(base / base.max(), 6)


def _load(bus, peak_kw, shape, pf=0.95, name=""):
    """Load with per-phase peaks ``peak_kw`` scaled by ``shape``."""
    p = np.round(np.outer(peak_kw, shape), 4)
    q = np.round(p * np.tan(np.arccos(pf)), 4)
    return Load.from_arrays(bus, p, q, name)


def two_bus() -> NetworkModel:
    T = 4
    profile = (0.0, 0.4, 1.0, 0.6)
    buses = (Bus(0, "slack", 0.4, "source"), Bus(1, "pq", 0.4, "house"))
    lines = (Line(0, 1, 0.4, **OVERHEAD, name="service"),)
    loads = (_load(1, [2.0, 1.0, 0.5], np.array([1.0, 0.8, 0.6, 0.9]), name="house"),)
    pvs = (PvUnit(1, 150.0, profile, "abc", "roof"),)
    return validate(NetworkModel(buses, lines, (), loads, pvs, OperatingLimits(), 1.0, T, 1.0, "two-bus"))


def four_bus() -> tuple[NetworkModel, np.ndarray]:
    T = 6
    hours = np.array([8.0, 10.0, 12.0, 14.0, 16.0, 18.0])
    profile = pv_profile(hours)
    shape = residential_profile(hours)
    buses = tuple(Bus(i, "slack" if i == 0 else "pq", 0.4) for i in range(4))
    lines = (
        Line(0, 1, 0.15, **CABLE, name="trunk"),
        Line(1, 2, 0.25, **OVERHEAD, name="branch-a"),
        Line(1, 3, 0.30, **OVERHEAD, name="branch-b"),
    )
    loads = (
        _load(1, [3.0, 2.0, 2.5], shape),
        _load(2, [4.0, 1.0, 2.0], shape),
        _load(3, [1.5, 3.5, 2.0], shape),
    )
    pvs = (PvUnit(3, 200.0, tuple(profile), "abc", "farm"),)
    net = NetworkModel(buses, lines, (), loads, pvs, OperatingLimits(), 1.0, T, 1.0, "four-bus")
    return validate(net), profile


def fifteen_bus() -> NetworkModel:
    T = 24
    hours = np.arange(T, dtype=float)
    profile = tuple(pv_profile(hours))
    shape = residential_profile(hours)
    buses = [Bus(0, "slack", 10.0, "mv")] + [Bus(i, "pq", 0.4) for i in range(1, 15)]
    trafo = (Transformer(0, 1, 0.4, 4.0, 1.0, 10.0, 0.4, "mv/lv"),)
    topology = [
        (1, 2, 0.08, CABLE), (2, 3, 0.10, CABLE), (3, 4, 0.12, CABLE), (4, 5, 0.10, CABLE),
        (5, 6, 0.12, OVERHEAD), (6, 7, 0.10, OVERHEAD),
        (3, 8, 0.15, OVERHEAD), (8, 9, 0.12, OVERHEAD),
        (4, 10, 0.10, OVERHEAD), (10, 11, 0.12, OVERHEAD), (11, 12, 0.10, OVERHEAD),
        (2, 13, 0.12, OVERHEAD), (13, 14, 0.15, OVERHEAD),
    ]
    lines = tuple(Line(f, t, length, **kind) for f, t, length, kind in topology)
    rng = np.random.default_rng(20240611)
    loads = tuple(
        _load(b, np.round(rng.uniform(0.5, 4.0, 3), 2), shape)
        for b in range(2, 15)
    )
    pv_buses = (6, 7, 9, 11, 12, 14)
    pvs = tuple(PvUnit(b, 30.0, profile, "abc", f"pv{b}") for b in pv_buses)
    net = NetworkModel(tuple(buses), lines, trafo, loads, pvs, OperatingLimits(vuf_max=0.015), 1.0, T, 1.0, "fifteen-bus")
    return validate(net)


def _write(net: NetworkModel, name: str, doc=None) -> None:
    doc = doc or network_to_dict(net)
    (DATA / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")


def main() -> None:
    _write(two_bus(), "feeder_2bus")
    net4, profile = four_bus()
    doc = network_to_dict(net4)
    doc["pv_units"][0]["profile"] = {"csv": "feeder_4bus_pv.csv"}
    rows = ["period,profile"] + [f"{t},{v!r}" for t, v in enumerate(profile.tolist())]
    (DATA / "feeder_4bus_pv.csv").write_text("\n".join(rows) + "\n")
    _write(net4, "feeder_4bus", doc)
    _write(fifteen_bus(), "feeder_15bus")


if __name__ == "__main__":
    main()
