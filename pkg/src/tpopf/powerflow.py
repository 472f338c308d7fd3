"""Three-phase Newton-Raphson power flow in rectangular coordinates.

State: real and imaginary voltage parts of every non-slack bus phase.
Mismatch: active and reactive power per non-slack bus phase. Loads are
constant power. Everything here works in per-unit on the network base.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .network import ALPHA, NetworkModel, assemble_ybus, network_branch_admittances, slack_voltage
from .network.model import Branch

DEGENERATE_TOL = 1e-9


class NotConverged(RuntimeError):
    def __init__(self, message: str, solution: "PfSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class SingularJacobian(RuntimeError):
    pass


class DegenerateSequence(ValueError):
    pass


@dataclass(frozen=True)
class PfOptions:
    tolerance: float = 1e-8
    max_iterations: int = 50
    flat_start: bool = True

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class PfSolution:
    """Per-period results. ``voltages`` has shape (T, N, 3).

    ``iterations[t]`` counts mismatch evaluations, so a network already in
    balance at the start point reports one iteration.
    """

    voltages: np.ndarray
    iterations: np.ndarray
    mismatch: np.ndarray
    converged: np.ndarray
    history: list[list[float]] = field(default_factory=list)

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def injections_from_network(net: NetworkModel, pv_p_kw=None, pv_q_kvar=None) -> np.ndarray:
    """Net complex injection (generation minus load) per (period, bus, phase), p.u.

    ``pv_p_kw``/``pv_q_kvar`` are arrays of shape (n_pv, 3, T) in kW/kvar.
    """
    inj = -net.load_pu()
    for arr, scale in ((pv_p_kw, 1.0), (pv_q_kvar, 1j)):
        if arr is None:
            continue
        arr = np.asarray(arr, dtype=float)
        for k, pv in enumerate(net.pv_units):
            inj[:, net.bus_index[pv.bus], :] += scale * arr[k].T / net.kw_base
    return inj


def _non_slack(net: NetworkModel) -> np.ndarray:
    s = net.slack_position
    return np.array([k for k in range(3 * net.n_bus) if k // 3 != s], dtype=int)


def calculated_power(ybus: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Complex power injected at every node ``V * conj(Y V)`` for flat ``v``."""
    return v * np.conj(ybus @ v)


def power_mismatch(net: NetworkModel, voltages, inj, ybus=None) -> np.ndarray:
    """Calculated minus specified injection per (bus, phase); slack rows are zero.

    ``voltages`` and ``inj`` are (N, 3) arrays for one period.
    """
    if ybus is None:
        ybus = assemble_ybus(net)
    v = np.asarray(voltages, dtype=complex).reshape(-1)
    res = (calculated_power(ybus, v) - np.asarray(inj, dtype=complex).reshape(-1)).reshape(-1, 3)
    res[net.slack_position] = 0.0
    return res


def mismatch_jacobian(ybus: np.ndarray, v: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Real Jacobian of [P; Q] mismatch wrt [e; f] restricted to nodes ``idx``."""
    cur = ybus @ v
    dv = np.diag(v) @ np.conj(ybus)
    ds_de = np.diag(np.conj(cur)) + dv
    ds_df = 1j * np.diag(np.conj(cur)) - 1j * dv
    ds_de = ds_de[np.ix_(idx, idx)]
    ds_df = ds_df[np.ix_(idx, idx)]
    return np.block([[ds_de.real, ds_df.real], [ds_de.imag, ds_df.imag]])


def _solve_period(ybus, v0, s_spec, idx, opts: PfOptions):
    v = v0.copy()
    m = idx.size
    history: list[float] = []
    best_v, best_norm = v.copy(), math.inf
    converged = False
    for _ in range(opts.max_iterations + 1):
        mis = calculated_power(ybus, v)[idx] - s_spec[idx]
        rhs = np.concatenate([mis.real, mis.imag])
        norm = float(np.max(np.abs(rhs))) if m else 0.0
        history.append(norm)
        if not math.isfinite(norm):
            break
        if norm < best_norm:
            best_v, best_norm = v.copy(), norm
        if norm <= opts.tolerance:
            converged = True
            break
        if len(history) > opts.max_iterations:
            break
        jac = mismatch_jacobian(ybus, v, idx)
        try:
            dx = np.linalg.solve(jac, -rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian("power flow Jacobian is singular") from exc
        v[idx] += dx[:m] + 1j * dx[m:]
    return best_v, best_norm, converged, history


def solve_pf(net: NetworkModel, inj=None, opts: PfOptions | None = None, ybus=None, initial=None) -> PfSolution:
    """Solve every period of ``inj`` (shape (T, N, 3) or (N, 3), p.u.).

    Non-converged periods keep their best iterate and are flagged in
    ``converged``; use :func:`require_converged` to turn that into an error.
    """
    opts = opts or PfOptions()
    if inj is None:
        inj = injections_from_network(net)
    inj = np.asarray(inj, dtype=complex)
    if inj.ndim == 2:
        inj = inj[None]
    if inj.shape[1:] != (net.n_bus, 3):
        raise ValueError(f"injection shape {inj.shape} does not match {net.n_bus} buses x 3 phases")
    if ybus is None:
        ybus = assemble_ybus(net)
    idx = _non_slack(net)
    slack = slack_voltage(net.slack_voltage_pu)
    n_t = inj.shape[0]
    volts = np.empty((n_t, net.n_bus, 3), dtype=complex)
    iters = np.zeros(n_t, dtype=int)
    norms = np.zeros(n_t)
    conv = np.zeros(n_t, dtype=bool)
    histories = []
    for t in range(n_t):
        if opts.flat_start or initial is None:
            v0 = np.tile(slack, net.n_bus)
        else:
            init = np.asarray(initial, dtype=complex)
            v0 = (init[t] if init.ndim == 3 else init).reshape(-1).copy()
            v0[3 * net.slack_position : 3 * net.slack_position + 3] = slack
        v, norm, ok, hist = _solve_period(ybus, v0, inj[t].reshape(-1), idx, opts)
        volts[t] = v.reshape(-1, 3)
        iters[t], norms[t], conv[t] = len(hist), norm, ok
        histories.append(hist)
    return PfSolution(volts, iters, norms, conv, histories)


def require_converged(sol: PfSolution) -> PfSolution:
    if not sol.all_converged:
        bad = [int(t) for t in np.flatnonzero(~sol.converged)]
        raise NotConverged(f"power flow did not converge in periods {bad}", sol)
    return sol


def flow_from_voltages(vi, vj, g, b):
    """Sending-end (P, Q) per phase from rectangular voltages and branch G/B.

    Written term by term in rectangular form; ``vi``/``vj`` are complex (3,)
    and ``g + jb`` is the branch admittance block.
    """
    ei, fi, ej, fj = vi.real, vi.imag, vj.real, vj.imag
    own_c = np.outer(ei, ei) + np.outer(fi, fi)
    own_s = np.outer(fi, ei) - np.outer(ei, fi)
    far_c = np.outer(ei, ej) + np.outer(fi, fj)
    far_s = np.outer(fi, ej) - np.outer(ei, fj)
    p = np.sum(own_c * g + own_s * b - far_c * g - far_s * b, axis=1)
    q = np.sum(-own_c * b + own_s * g + far_c * b - far_s * g, axis=1)
    return p, q


def branch_flow(net: NetworkModel, voltages, branch: Branch, y_block=None):
    """Complex power per phase entering the branch at each end.

    Returns ``(s_from, s_to)`` for a single period of (N, 3) voltages.
    """
    if y_block is None:
        y_block = network_branch_admittances(net)[net.branches.index(branch)]
    i, j = net.branch_positions(branch)
    v = np.asarray(voltages, dtype=complex)
    g, b = y_block.real, y_block.imag
    p_ij, q_ij = flow_from_voltages(v[i], v[j], g, b)
    p_ji, q_ji = flow_from_voltages(v[j], v[i], g, b)
    return p_ij + 1j * q_ij, p_ji + 1j * q_ji


def vuf(v) -> float:
    """Negative- over positive-sequence voltage magnitude."""
    ua, ub, uc = np.asarray(v, dtype=complex)
    a, a2 = ALPHA, ALPHA**2
    pos = abs(ua + a * ub + a2 * uc)
    if pos < DEGENERATE_TOL:
        raise DegenerateSequence("positive-sequence voltage is zero")
    return abs(ua + a2 * ub + a * uc) / pos


def bus_vuf(voltages) -> np.ndarray:
    """Vectorised :func:`vuf` over the last axis; NaN where degenerate."""
    v = np.asarray(voltages, dtype=complex)
    a, a2 = ALPHA, ALPHA**2
    pos = np.abs(v[..., 0] + a * v[..., 1] + a2 * v[..., 2])
    neg = np.abs(v[..., 0] + a2 * v[..., 1] + a * v[..., 2])
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pos < DEGENERATE_TOL, np.nan, neg / pos)


def total_losses(net: NetworkModel, voltages, ybus=None) -> complex:
    """Sum of complex branch losses for one period (equals sum of all injections)."""
    if ybus is None:
        ybus = assemble_ybus(net)
    v = np.asarray(voltages, dtype=complex).reshape(-1)
    return complex(np.sum(calculated_power(ybus, v)))
