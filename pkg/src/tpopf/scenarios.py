"""PV hosting-capacity studies.

Two connection modes are compared on the same feeder:

* ``single``: every PV unit is pinned to one randomly drawn phase
  (reproducible through the seed) and may inject its whole rating there;
* ``three``: every unit is three-phase and its output is split equally over
  the phases.

The hosting objective maximizes total PV production over the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .network import PHASES, NetworkModel, NetworkValidationError, validate
from .nlp import SolverOptions, solve
from .opf import OpfOptions, OpfSolution, build_opf, extract_solution

SINGLE, THREE = "single", "three"
MODES = (SINGLE, THREE)

# an inequality counts as binding when its residual is within this of zero
# (squared-voltage units, i.e. p.u.^2)
ACTIVITY_TOL = 1e-5


@dataclass(frozen=True)
class HostingStudy:
    network: NetworkModel
    mode: str = THREE
    seed: int = 0
    export_cap_kw: float | None = None
    coupling: str = "capacity"
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class BalanceConstraint:
    """``P[unit, phases[0], period] == P[unit, phases[1], period]``."""

    unit: int
    period: int
    phases: tuple[int, int]


@dataclass
class HostingResult:
    study: HostingStudy
    formulation: str
    network: NetworkModel  # after phase assignment
    status: str
    objective: float
    capacity_kw: np.ndarray | None  # per unit, capacity coupling only
    dispatch_kw: np.ndarray  # (n_pv, 3, T)
    production_kw: np.ndarray  # (T, 3), sum of dispatch_kw over units
    binding: dict[str, list[tuple]]
    solution: OpfSolution = field(repr=False)

    @property
    def seed(self) -> int:
        return self.study.seed

    @property
    def total_production_kw(self) -> float:
        return float(self.production_kw.sum())

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def phase_assignment(self) -> list[str]:
        return [pv.connection for pv in self.network.pv_units]


def assign_phases(net: NetworkModel, seed: int) -> NetworkModel:
    """Pin every PV unit to one phase drawn uniformly and independently."""
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, 3, size=len(net.pv_units))
    units = tuple(replace(pv, connection=PHASES[d]) for pv, d in zip(net.pv_units, draws))
    return net.replace(pv_units=units)


def three_phase_constraints(net: NetworkModel) -> list[BalanceConstraint]:
    """Per-phase equality constraints for balanced three-phase units.

    Raises NetworkValidationError if any unit is single-phase.
    """
    single = [k for k, pv in enumerate(net.pv_units) if not pv.is_three_phase]
    if single:
        raise NetworkValidationError(
            [f"pv unit {k} at bus {net.pv_units[k].bus} is single-phase in three-phase mode" for k in single]
        )
    return [
        BalanceConstraint(k, t, (p, p + 1))
        for k in range(len(net.pv_units))
        for t in range(net.horizon)
        for p in range(2)
    ]


def prepare_network(study: HostingStudy) -> NetworkModel:
    net = validate(study.network)
    if study.mode == SINGLE:
        return assign_phases(net, study.seed)
    three_phase_constraints(net)
    return net


def binding_constraints(prob, x, tol: float = ACTIVITY_TOL) -> dict[str, list[tuple]]:
    """Active inequalities and PV units at their upper bound, grouped by kind."""
    out: dict[str, list[tuple]] = {}
    c = prob.inequalities(x)
    for value, tag in zip(c, prob.inequalities.tags):
        if value >= -tol:
            out.setdefault(tag[0], []).append(tag[1:])
    finite = np.isfinite(prob.upper) & (prob.upper > 0)
    upper = np.where(finite, prob.upper, 0.0)
    at_bound = finite & (x >= upper - tol * np.maximum(1.0, upper))
    for pos in np.flatnonzero(at_bound):
        name, index = prob.layout.describe(int(pos))
        if name.startswith("pv_"):
            out.setdefault("pv_max", []).append(index)
    return out


def run_hosting(study: HostingStudy, formulation: str = "power-voltage") -> HostingResult:
    net = prepare_network(study)
    options = OpfOptions(
        formulation=formulation,
        objective="hosting",
        coupling=study.coupling,
        balance_three_phase=study.mode == THREE,
        export_cap_kw=study.export_cap_kw,
    )
    prob = build_opf(net, options)
    report = solve(prob.to_nlp(), study.solver)
    sol = extract_solution(prob, report.x, report)
    return HostingResult(
        study=study,
        formulation=formulation,
        network=net,
        status=sol.status,
        objective=sol.objective,
        capacity_kw=sol.capacity_kw,
        dispatch_kw=sol.pv_p_kw,
        production_kw=sol.production_kw,
        binding=binding_constraints(prob, report.x),
        solution=sol,
    )


@dataclass
class ModeComparison:
    single: HostingResult
    three: HostingResult

    @property
    def ratio(self) -> float:
        """Three-phase over single-phase total production."""
        s = self.single.total_production_kw
        return np.inf if s == 0 else self.three.total_production_kw / s


def compare_modes(
    net: NetworkModel,
    seed: int = 0,
    formulation: str = "power-voltage",
    coupling: str = "capacity",
    solver: SolverOptions | None = None,
) -> ModeComparison:
    solver = solver or SolverOptions()
    single = run_hosting(HostingStudy(net, SINGLE, seed, coupling=coupling, solver=solver), formulation)
    three = run_hosting(HostingStudy(net, THREE, seed, coupling=coupling, solver=solver), formulation)
    return ModeComparison(single, three)
