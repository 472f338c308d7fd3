"""Mapping solver output back to named physical quantities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..network import slack_voltage
from ..nlp import SolveReport, SolverOptions, solve
from ..powerflow import bus_vuf
from .build import OpfOptions, OpfProblem, build_opf


@dataclass
class OpfSolution:
    """OPF result in physical units.

    ``voltages`` is (T, N, 3) complex p.u. including the slack bus,
    ``pv_p_kw``/``pv_q_kvar`` are (n_pv, 3, T), ``capacity_kw`` is set in
    capacity coupling. ``values`` keeps the raw per-unit blocks.
    """

    formulation: str
    status: str
    objective: float
    voltages: np.ndarray
    pv_p_kw: np.ndarray
    pv_q_kvar: np.ndarray
    capacity_kw: np.ndarray | None
    vuf: np.ndarray
    values: dict[str, np.ndarray]
    kkt: tuple[float, float, float] = (np.nan, np.nan, np.nan)
    iterations: int = 0
    report: SolveReport | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def production_kw(self) -> np.ndarray:
        """Aggregate PV output per (period, phase) in kW."""
        return self.pv_p_kw.sum(axis=0).T


def extract_solution(prob: OpfProblem, x, report: SolveReport | None = None) -> OpfSolution:
    net = prob.net
    x = np.asarray(x, dtype=float)
    values = prob.layout.unflatten(x)
    volts = values["v_re"] + 1j * values["v_im"]
    volts[:, net.slack_position, :] = slack_voltage(net.slack_voltage_pu)
    T, n_pv = net.horizon, len(net.pv_units)
    p_kw = np.zeros((n_pv, 3, T))
    q_kvar = np.zeros((n_pv, 3, T))
    capacity = None
    if "pv_p" in values:
        p_kw = np.nan_to_num(values["pv_p"]).transpose(1, 2, 0) * net.kw_base
    else:
        cap = values["pv_cap"]
        capacity = cap * net.kw_base
        for k, pv in enumerate(net.pv_units):
            share = np.asarray(pv.profile) * cap[k] / len(pv.phases)
            for p in pv.phases:
                p_kw[k, p, :] = share * net.kw_base
    if "pv_q" in values:
        q_kvar = np.nan_to_num(values["pv_q"]).transpose(1, 2, 0) * net.kw_base
    status = report.status if report is not None else "unknown"
    kkt = report.kkt if report is not None else (np.nan, np.nan, np.nan)
    iterations = report.iterations if report is not None else 0
    return OpfSolution(
        prob.formulation, status, prob.eval_objective(x), volts, p_kw, q_kvar, capacity,
        bus_vuf(volts), values, kkt, iterations, report,
    )


def flatten_solution(prob: OpfProblem, sol: OpfSolution) -> np.ndarray:
    return prob.layout.flatten(sol.values)


def solve_opf(net, options: OpfOptions | None = None, solver_options: SolverOptions | None = None) -> tuple[OpfProblem, OpfSolution]:
    prob = build_opf(net, options)
    report = solve(prob.to_nlp(), solver_options)
    return prob, extract_solution(prob, report.x, report)
