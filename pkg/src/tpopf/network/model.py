"""Feeder data model.

All element data is stored in physical units (kV, kW, ohm/km, ...) exactly as
read from a network file. Per-unit conversion happens on demand in
:mod:`tpopf.network.admittance` and in the solvers.

Per-unit convention: one system power base ``base_mva`` and a line-to-line
voltage base per bus. Per-phase powers are normalised by ``base_mva / 3`` so
that ``Z_base = V_LL**2 / S_base`` and ``|V| = 1`` p.u. at nominal
phase-to-neutral voltage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

PHASES = ("a", "b", "c")
PHASE_INDEX = {p: i for i, p in enumerate(PHASES)}
THREE_PHASE = "abc"


@dataclass(frozen=True)
class SequenceImpedance:
    """Zero, positive and negative sequence impedance in ohm (or p.u.)."""

    z0: complex
    z1: complex
    z2: complex | None = None

    @property
    def negative(self) -> complex:
        return self.z1 if self.z2 is None else self.z2

    def scaled(self, factor: float) -> "SequenceImpedance":
        z2 = None if self.z2 is None else self.z2 * factor
        return SequenceImpedance(self.z0 * factor, self.z1 * factor, z2)


@dataclass(frozen=True)
class Bus:
    id: int
    kind: str = "pq"  # "slack" | "pq"
    base_kv: float = 0.4
    name: str = ""

    @property
    def is_slack(self) -> bool:
        return self.kind == "slack"


@dataclass(frozen=True)
class Line:
    """Overhead line or cable between two buses.

    Impedances are per kilometre. ``max_i_ka`` of ``None`` leaves the line
    without a thermal rating. ``c_nf_per_km`` is reserved; only zero is
    supported since line shunt capacitance is not modelled.
    """

    from_bus: int
    to_bus: int
    length_km: float
    r_ohm_per_km: float
    x_ohm_per_km: float
    r0_ohm_per_km: float
    x0_ohm_per_km: float
    max_i_ka: float | None = None
    c_nf_per_km: float = 0.0
    name: str = ""

    @property
    def ends(self) -> tuple[int, int]:
        return self.from_bus, self.to_bus

    def sequence_impedance(self) -> SequenceImpedance:
        z1 = complex(self.r_ohm_per_km, self.x_ohm_per_km)
        z0 = complex(self.r0_ohm_per_km, self.x0_ohm_per_km)
        return SequenceImpedance(z0, z1).scaled(self.length_km)


@dataclass(frozen=True)
class Transformer:
    """Two-winding transformer, modelled as a series impedance.

    Zero-sequence impedance equals the positive-sequence one and no vector
    group phase shift is applied.
    """

    hv_bus: int
    lv_bus: int
    s_rated_mva: float
    vk_percent: float
    vkr_percent: float
    hv_kv: float
    lv_kv: float
    name: str = ""

    @property
    def ends(self) -> tuple[int, int]:
        return self.hv_bus, self.lv_bus


Branch = Line | Transformer


@dataclass(frozen=True)
class Load:
    """Constant-power load; ``p_kw[phase][period]`` and ``q_kvar[phase][period]``."""

    bus: int
    p_kw: tuple[tuple[float, ...], ...]
    q_kvar: tuple[tuple[float, ...], ...]
    name: str = ""

    @classmethod
    def from_arrays(cls, bus: int, p_kw, q_kvar, name: str = "") -> "Load":
        return cls(bus, _freeze_matrix(p_kw), _freeze_matrix(q_kvar), name)

    @classmethod
    def constant(cls, bus: int, p_kw, q_kvar, horizon: int = 1, name: str = "") -> "Load":
        """Per-phase powers held constant over ``horizon`` periods."""
        p = np.repeat(np.asarray(p_kw, float)[:, None], horizon, axis=1)
        q = np.repeat(np.asarray(q_kvar, float)[:, None], horizon, axis=1)
        return cls.from_arrays(bus, p, q, name)


@dataclass(frozen=True)
class PvUnit:
    """PV unit. ``connection`` is one of ``"a"``, ``"b"``, ``"c"`` or ``"abc"``."""

    bus: int
    p_max_kw: float
    profile: tuple[float, ...]
    connection: str = THREE_PHASE
    name: str = ""

    @property
    def phases(self) -> tuple[int, ...]:
        if self.connection == THREE_PHASE:
            return (0, 1, 2)
        return (PHASE_INDEX[self.connection],)

    @property
    def is_three_phase(self) -> bool:
        return self.connection == THREE_PHASE


@dataclass(frozen=True)
class OperatingLimits:
    """Voltage and unbalance limits.

    ``vuf_buses`` restricts the unbalance constraint to a subset of bus ids;
    ``None`` means every non-slack bus.
    """

    u_min: float = 0.9
    u_max: float = 1.1
    vuf_max: float = 0.02
    vuf_buses: tuple[int, ...] | None = None


@dataclass(frozen=True)
class NetworkModel:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...] = ()
    transformers: tuple[Transformer, ...] = ()
    loads: tuple[Load, ...] = ()
    pv_units: tuple[PvUnit, ...] = ()
    limits: OperatingLimits = field(default_factory=OperatingLimits)
    base_mva: float = 1.0
    horizon: int = 1
    slack_voltage_pu: float = 1.0
    name: str = ""

    def __post_init__(self):
        # accept lists from callers, store tuples so the model stays hashable
        for name in ("buses", "lines", "transformers", "loads", "pv_units"):
            value = getattr(self, name)
            if not isinstance(value, tuple):
                object.__setattr__(self, name, tuple(value))

    @cached_property
    def bus_index(self) -> dict[int, int]:
        """Map bus id to its position in sorted-id order."""
        return {bus_id: k for k, bus_id in enumerate(sorted(b.id for b in self.buses))}

    @cached_property
    def sorted_buses(self) -> tuple[Bus, ...]:
        return tuple(sorted(self.buses, key=lambda b: b.id))

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @cached_property
    def slack_position(self) -> int:
        for k, bus in enumerate(self.sorted_buses):
            if bus.is_slack:
                return k
        raise ValueError("network has no slack bus")

    @property
    def branches(self) -> tuple[Branch, ...]:
        return self.lines + self.transformers

    @property
    def kw_base(self) -> float:
        """Per-phase power base in kW."""
        return 1000.0 * self.base_mva / 3.0

    def bus(self, bus_id: int) -> Bus:
        return self.sorted_buses[self.bus_index[bus_id]]

    def branch_positions(self, branch: Branch) -> tuple[int, int]:
        i, j = branch.ends
        return self.bus_index[i], self.bus_index[j]

    def load_pu(self) -> np.ndarray:
        """Complex per-unit load per (period, bus position, phase)."""
        s = np.zeros((self.horizon, self.n_bus, 3), dtype=complex)
        for load in self.loads:
            k = self.bus_index[load.bus]
            p = np.asarray(load.p_kw, float).T
            q = np.asarray(load.q_kvar, float).T
            s[:, k, :] += (p + 1j * q) / self.kw_base
        return s

    def replace(self, **changes) -> "NetworkModel":
        return replace(self, **changes)


def _freeze_matrix(values) -> tuple[tuple[float, ...], ...]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise ValueError("expected a [phase][period] matrix")
    return tuple(tuple(float(v) for v in row) for row in arr)


def line_rating_pu(line: Line, base_kv: float, base_mva: float) -> float | None:
    """Per-phase apparent power (equivalently current) limit in p.u."""
    if line.max_i_ka is None:
        return None
    return math.sqrt(3.0) * base_kv * line.max_i_ka / base_mva


def transformer_rating_pu(trafo: Transformer, base_mva: float) -> float:
    return trafo.s_rated_mva / base_mva
