"""Branch admittance blocks and bus admittance matrix assembly."""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix

from .fortescue import sequence_to_phase
from .model import Line, NetworkModel, SequenceImpedance, Transformer

MAX_CONDITION = 1e12


class SingularImpedance(ValueError):
    pass


class DisconnectedNetwork(ValueError):
    pass


def transformer_sequence_impedance(trafo: Transformer, base_mva: float) -> SequenceImpedance:
    """Per-unit impedance on the system base from short-circuit voltages."""
    vk, vkr = trafo.vk_percent / 100.0, trafo.vkr_percent / 100.0
    z1 = complex(vkr, math.sqrt(vk**2 - vkr**2)) * (base_mva / trafo.s_rated_mva)
    return SequenceImpedance(z1, z1)


def branch_impedance(branch: Line | Transformer, base_kv: float, base_mva: float) -> np.ndarray:
    """3x3 per-unit phase impedance of a branch.

    ``base_kv`` is the line-to-line base of the voltage level the line sits
    on; it is ignored for transformers.
    """
    if isinstance(branch, Transformer):
        z = transformer_sequence_impedance(branch, base_mva)
    else:
        z_base = base_kv**2 / base_mva
        z = branch.sequence_impedance().scaled(1.0 / z_base)
    return sequence_to_phase(z)


def branch_admittance(branch: Line | Transformer, base_kv: float, base_mva: float) -> np.ndarray:
    z = branch_impedance(branch, base_kv, base_mva)
    if not np.all(np.isfinite(z)) or np.linalg.cond(z) > MAX_CONDITION:
        raise SingularImpedance(f"singular phase impedance for branch {branch.ends}")
    return np.linalg.inv(z)


def network_branch_admittances(net: NetworkModel) -> list[np.ndarray]:
    """Admittance block for every branch in ``net.branches`` order."""
    blocks = []
    for branch in net.branches:
        base_kv = net.bus(branch.ends[0]).base_kv
        blocks.append(branch_admittance(branch, base_kv, net.base_mva))
    return blocks


def check_connected(net: NetworkModel) -> None:
    n = net.n_bus
    if n == 0:
        raise DisconnectedNetwork("network has no buses")
    rows, cols = [], []
    for branch in net.branches:
        i, j = net.branch_positions(branch)
        rows.append(i)
        cols.append(j)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    if n_comp > 1:
        island = [b.id for b, lab in zip(net.sorted_buses, labels) if lab != labels[net.slack_position]]
        raise DisconnectedNetwork(f"buses not connected to the slack bus: {island}")


def assemble_ybus(net: NetworkModel) -> np.ndarray:
    """Dense 3N x 3N bus admittance matrix, row/column ``3*bus_pos + phase``."""
    check_connected(net)
    n = net.n_bus
    y = np.zeros((3 * n, 3 * n), dtype=complex)
    for branch, yb in zip(net.branches, network_branch_admittances(net)):
        i, j = net.branch_positions(branch)
        si, sj = slice(3 * i, 3 * i + 3), slice(3 * j, 3 * j + 3)
        y[si, si] += yb
        y[sj, sj] += yb
        y[si, sj] -= yb
        y[sj, si] -= yb
    return y


def slack_voltage(magnitude: float) -> np.ndarray:
    """Balanced phase voltages at the slack bus: ``m, m<-120, m<120``."""
    if magnitude <= 0:
        raise ValueError("slack voltage magnitude must be positive")
    angles = np.array([0.0, -2.0 * math.pi / 3.0, 2.0 * math.pi / 3.0])
    return magnitude * np.exp(1j * angles)
