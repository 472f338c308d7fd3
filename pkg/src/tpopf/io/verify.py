"""PF-replay verification of OPF results.

The OPF dispatch is fixed as bus injections, an independent power flow is
solved for every period, and the voltage magnitudes of both solutions are
compared at every (period, non-slack bus, phase) sample.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..network import NetworkModel
from ..opf import OpfSolution
from ..powerflow import PfOptions, injections_from_network, solve_pf


class ReplayDiverged(RuntimeError):
    def __init__(self, periods):
        self.periods = list(periods)
        super().__init__(f"power flow replay did not converge in period(s) {self.periods}")


@dataclass(frozen=True)
class ErrorStats:
    max: float
    min: float
    average: float
    median: float
    rmse: float
    samples: int

    @classmethod
    def of(cls, errors) -> "ErrorStats":
        e = np.asarray(errors, dtype=float).ravel()
        if e.size == 0:
            return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0)
        return cls(
            float(e.max()), float(e.min()), float(e.mean()), float(np.median(e)),
            float(np.sqrt(np.mean(e**2))), int(e.size),
        )


@dataclass(frozen=True)
class ErrorReport:
    """Voltage-magnitude differences between OPF and PF replay, p.u.

    Aggregated over every (period, non-slack bus, phase) sample.
    ``angle`` (degrees) is only filled when angles are compared.
    """

    formulation: str
    max: float
    min: float
    average: float
    median: float
    rmse: float
    samples: int
    angle: ErrorStats | None = None

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.angle is None:
            out.pop("angle")
        return out


def replay_voltages(net: NetworkModel, sol: OpfSolution, pf_options: PfOptions | None = None) -> np.ndarray:
    """PF voltages (T, N, 3) with the OPF dispatch fixed."""
    opts = pf_options or PfOptions(tolerance=1e-11, max_iterations=50)
    inj = injections_from_network(net, sol.pv_p_kw, sol.pv_q_kvar)
    pf = solve_pf(net, inj, opts)
    if not pf.all_converged:
        raise ReplayDiverged(np.flatnonzero(~pf.converged).tolist())
    return pf.voltages


def sample_errors(net: NetworkModel, v_opf, v_pf, angles: bool = False) -> np.ndarray:
    keep = np.arange(net.n_bus) != net.slack_position
    a, b = np.asarray(v_opf)[:, keep, :], np.asarray(v_pf)[:, keep, :]
    if angles:
        return np.abs(np.degrees(np.angle(a * np.conj(b))))
    return np.abs(np.abs(a) - np.abs(b))


def verify_against_pf(
    net: NetworkModel,
    sol: OpfSolution,
    compare_angles: bool = False,
    pf_options: PfOptions | None = None,
) -> ErrorReport:
    if not sol.optimal:
        raise ValueError(f"cannot verify a non-optimal OPF result (status {sol.status!r})")
    v_pf = replay_voltages(net, sol, pf_options)
    mag = ErrorStats.of(sample_errors(net, sol.voltages, v_pf))
    angle = ErrorStats.of(sample_errors(net, sol.voltages, v_pf, angles=True)) if compare_angles else None
    return ErrorReport(sol.formulation, mag.max, mag.min, mag.average, mag.median, mag.rmse, mag.samples, angle)
