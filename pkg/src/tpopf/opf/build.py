"""Multi-period three-phase OPF in power-voltage or current-voltage form.

Both formulations share the voltage variables (rectangular parts of every
non-slack bus phase and period), the voltage-magnitude and unbalance
constraints, and the PV dispatch model. They differ in how the network is
described:

* power-voltage: branch active/reactive flows at both ends are variables,
  defined from the voltages, and nodal balance is written in powers;
* current-voltage: series branch currents are variables with a linear
  definition, nodal balance is written in currents, and power enters only
  through the coupling ``P + jQ = V conj(I)`` at buses with injections.

All quantities are per-unit. Every constraint is at most quadratic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..network import ALPHA, NetworkModel, network_branch_admittances, slack_voltage, validate
from ..network.model import Transformer, line_rating_pu, transformer_rating_pu
from ..nlp import NlpProblem
from .layout import VariableLayout
from .quadratic import Affine, QuadraticBuilder, QuadraticMap, affine_sum

POWER_VOLTAGE = "power-voltage"
CURRENT_VOLTAGE = "current-voltage"
FORMULATIONS = (POWER_VOLTAGE, CURRENT_VOLTAGE)
OBJECTIVES = ("hosting", "losses", "feasibility")
COUPLINGS = ("dispatch", "capacity")

ZERO = Affine()


class MissingLimit(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class OpfOptions:
    """Problem options.

    ``coupling="dispatch"`` bounds each period's PV output by its profile
    independently. ``coupling="capacity"`` uses one installed-capacity
    variable per PV unit with output ``capacity * profile(t) / n_phases`` on
    every connected phase, so periods share the capacity.
    ``export_cap_kw`` caps the per-phase output of every unit.
    ``pv_q_ratio`` > 0 gives PVs reactive capability ``|Q| <= ratio * P_max``
    per phase; the default runs them at unity power factor.
    """

    formulation: str = POWER_VOLTAGE
    objective: str = "hosting"
    coupling: str = "capacity"
    thermal_limits: bool = True
    vuf_limit: bool = True
    balance_three_phase: bool = False
    export_cap_kw: float | None = None
    pv_q_ratio: float = 0.0

    def __post_init__(self):
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.coupling not in COUPLINGS:
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.export_cap_kw is not None and self.export_cap_kw < 0:
            raise ValueError("export_cap_kw must be non-negative")
        if self.pv_q_ratio < 0:
            raise ValueError("pv_q_ratio must be non-negative")


class OpfProblem:
    """Assembled OPF: layout, quadratic evaluators, bounds and start point."""

    def __init__(self, net, options, layout, objective, equalities, inequalities, lower, upper, x0, branch_y):
        self.net: NetworkModel = net
        self.options: OpfOptions = options
        self.layout: VariableLayout = layout
        self.objective: QuadraticMap = objective
        self.equalities: QuadraticMap = equalities
        self.inequalities: QuadraticMap = inequalities
        self.lower = lower
        self.upper = upper
        self.x0 = x0
        self.branch_y = branch_y

    @property
    def formulation(self) -> str:
        return self.options.formulation

    @property
    def n(self) -> int:
        return self.layout.size

    @property
    def m_eq(self) -> int:
        return self.equalities.m

    @property
    def m_ineq(self) -> int:
        return self.inequalities.m

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatch(f"expected x of length {self.n}, got shape {x.shape}")
        return x

    def eval_objective(self, x) -> float:
        return float(self.objective(self._check(x))[0])

    def eval_gradient(self, x) -> np.ndarray:
        return self.objective.jacobian(self._check(x)).toarray().ravel()

    def eval_constraints(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = self._check(x)
        return self.equalities(x), self.inequalities(x)

    def eval_jacobian(self, x):
        """Sparse equality and inequality Jacobians."""
        x = self._check(x)
        return self.equalities.jacobian(x), self.inequalities.jacobian(x)

    def eval_hessian(self, x, obj_factor, y_eq, y_ineq):
        self._check(x)
        return (
            self.objective.hessian([obj_factor])
            + self.equalities.hessian(y_eq)
            + self.inequalities.hessian(y_ineq)
        )

    def to_nlp(self) -> NlpProblem:
        return NlpProblem(
            n=self.n,
            objective=self.eval_objective,
            gradient=self.eval_gradient,
            eq_constraints=self.equalities,
            eq_jacobian=self.equalities.jacobian,
            ineq_constraints=self.inequalities,
            ineq_jacobian=self.inequalities.jacobian,
            m_eq=self.m_eq,
            m_ineq=self.m_ineq,
            lower=self.lower,
            upper=self.upper,
            hessian=self.eval_hessian,
            x0=self.x0,
        )


def branch_rating_pu(net: NetworkModel, branch) -> float | None:
    """Per-phase thermal limit in p.u. (apparent power, equally current at 1 p.u.)."""
    if isinstance(branch, Transformer):
        return transformer_rating_pu(branch, net.base_mva)
    return line_rating_pu(branch, net.bus(branch.from_bus).base_kv, net.base_mva)


class _Context:
    """Shared variables and expressions for both formulations."""

    def __init__(self, net: NetworkModel, opts: OpfOptions):
        validate(net)
        self.net, self.opts = net, opts
        self.T, self.N = net.horizon, net.n_bus
        self.n_br, self.n_pv = len(net.branches), len(net.pv_units)
        self.slack = net.slack_position
        self.branch_y = network_branch_admittances(net)
        self.branch_ends = [net.branch_positions(b) for b in net.branches]
        self.ratings = [branch_rating_pu(net, b) for b in net.branches]
        if opts.thermal_limits:
            missing = [k for k, r in enumerate(self.ratings) if r is None]
            if missing:
                raise MissingLimit(f"branches without thermal rating: {missing}")
        self.v_slack = slack_voltage(net.slack_voltage_pu)
        self.load = net.load_pu()
        self.layout = VariableLayout()
        self.lower: dict[str, np.ndarray] = {}
        self.upper: dict[str, np.ndarray] = {}

        mask = np.ones((self.T, self.N, 3), dtype=bool)
        mask[:, self.slack, :] = False
        self.v_re = self.layout.add("v_re", (self.T, self.N, 3), mask)
        self.v_im = self.layout.add("v_im", (self.T, self.N, 3), mask)

    def add_block(self, name, shape, mask=None, lower=-np.inf, upper=np.inf):
        idx = self.layout.add(name, shape, mask)
        self.lower[name] = np.broadcast_to(np.asarray(lower, float), shape).copy()
        self.upper[name] = np.broadcast_to(np.asarray(upper, float), shape).copy()
        return idx

    def voltage(self, t: int, n: int, p: int) -> tuple[Affine, Affine]:
        if n == self.slack:
            v = self.v_slack[p]
            return Affine.constant(v.real), Affine.constant(v.imag)
        return Affine.var(self.v_re[t, n, p]), Affine.var(self.v_im[t, n, p])

    def add_pv_blocks(self) -> None:
        net, opts = self.net, self.opts
        self.pv_mask = np.zeros((self.n_pv, 3), dtype=bool)
        self.pv_nph = np.ones(self.n_pv)
        phase_max = np.zeros(self.n_pv)
        self.profile = np.zeros((self.T, self.n_pv))
        for k, pv in enumerate(net.pv_units):
            self.pv_mask[k, list(pv.phases)] = True
            self.pv_nph[k] = len(pv.phases)
            cap = pv.p_max_kw / self.pv_nph[k]
            if opts.export_cap_kw is not None:
                cap = min(cap, opts.export_cap_kw)
            phase_max[k] = cap / net.kw_base
            self.profile[:, k] = pv.profile
        self.pv_phase_max = phase_max
        mask_tk = np.broadcast_to(self.pv_mask, (self.T, self.n_pv, 3))
        if opts.coupling == "dispatch":
            upper = self.profile[:, :, None] * phase_max[None, :, None] * np.ones(3)
            self.pv_p = self.add_block("pv_p", (self.T, self.n_pv, 3), mask_tk, 0.0, upper)
        else:
            self.pv_cap = self.add_block("pv_cap", (self.n_pv,), None, 0.0, phase_max * self.pv_nph)
        if opts.pv_q_ratio > 0:
            q_max = opts.pv_q_ratio * phase_max[None, :, None] * np.ones((self.T, 1, 3))
            self.pv_q = self.add_block("pv_q", (self.T, self.n_pv, 3), mask_tk, -q_max, q_max)
        self.pv_at_bus = {net.bus_index[pv.bus]: k for k, pv in enumerate(net.pv_units)}

    def pv_power(self, t: int, k: int, p: int) -> Affine:
        if not self.pv_mask[k, p]:
            return ZERO
        if self.opts.coupling == "dispatch":
            return Affine.var(self.pv_p[t, k, p])
        return Affine.var(self.pv_cap[k], self.profile[t, k] / self.pv_nph[k])

    def pv_reactive(self, t: int, k: int, p: int) -> Affine:
        if self.opts.pv_q_ratio <= 0 or not self.pv_mask[k, p]:
            return ZERO
        return Affine.var(self.pv_q[t, k, p])

    def bus_generation(self, t: int, n: int, p: int) -> tuple[Affine, Affine]:
        k = self.pv_at_bus.get(n)
        if k is None:
            return ZERO, ZERO
        return self.pv_power(t, k, p), self.pv_reactive(t, k, p)

    def has_injection(self, n: int) -> bool:
        return n == self.slack or n in self.pv_at_bus or bool(np.any(self.load[:, n, :] != 0))

    # constraint families shared by both formulations

    def voltage_rows(self, ineq: QuadraticBuilder) -> None:
        lim = self.net.limits
        for t in range(self.T):
            for n in range(self.N):
                if n == self.slack:
                    continue
                bus_id = self.net.sorted_buses[n].id
                for p in range(3):
                    e, f = self.voltage(t, n, p)
                    r = ineq.row(("v_min", t, bus_id, p))
                    ineq.add(r, Affine.constant(lim.u_min**2))
                    ineq.add_square(r, e, -1.0)
                    ineq.add_square(r, f, -1.0)
                    r = ineq.row(("v_max", t, bus_id, p))
                    ineq.add(r, Affine.constant(-lim.u_max**2))
                    ineq.add_square(r, e)
                    ineq.add_square(r, f)

    def vuf_rows(self, ineq: QuadraticBuilder) -> None:
        if not self.opts.vuf_limit:
            return
        lim = self.net.limits
        wanted = None if lim.vuf_buses is None else set(lim.vuf_buses)
        neg_w = (1.0, ALPHA**2, ALPHA)
        pos_w = (1.0, ALPHA, ALPHA**2)
        for t in range(self.T):
            for n in range(self.N):
                bus_id = self.net.sorted_buses[n].id
                if n == self.slack or (wanted is not None and bus_id not in wanted):
                    continue
                volts = [self.voltage(t, n, p) for p in range(3)]
                r = ineq.row(("vuf", t, bus_id, -1))
                for weights, scale in ((neg_w, 1.0), (pos_w, -(lim.vuf_max**2))):
                    re, im = _weighted_phasor(volts, weights)
                    ineq.add_square(r, re, scale)
                    ineq.add_square(r, im, scale)

    def balance_rows(self, eq: QuadraticBuilder) -> int:
        """Equal per-phase output for three-phase units (dispatch coupling only)."""
        if self.opts.coupling != "dispatch" or not self.opts.balance_three_phase:
            return 0
        count = 0
        for k, pv in enumerate(self.net.pv_units):
            if not pv.is_three_phase:
                continue
            for t in range(self.T):
                if self.profile[t, k] * self.pv_phase_max[k] <= 0:
                    continue  # all phases fixed at zero
                for p in range(2):
                    r = eq.row(("balance", t, pv.bus, p))
                    eq.add(r, self.pv_power(t, k, p) - self.pv_power(t, k, p + 1))
                    count += 1
        return count

    def finish(self, objective: QuadraticBuilder, eq: QuadraticBuilder, ineq: QuadraticBuilder, x0) -> OpfProblem:
        lower = np.full(self.layout.size, -np.inf)
        upper = np.full(self.layout.size, np.inf)
        for name, idx in self.layout.blocks.items():
            if name in self.lower:
                mask = idx >= 0
                lower[idx[mask]] = self.lower[name][mask]
                upper[idx[mask]] = self.upper[name][mask]
        return OpfProblem(
            self.net, self.opts, self.layout, objective.build(), eq.build(), ineq.build(),
            lower, upper, x0, self.branch_y,
        )

    def flat_start(self) -> np.ndarray:
        values = {name: np.zeros(idx.shape) for name, idx in self.layout.blocks.items()}
        values["v_re"] = np.broadcast_to(self.v_slack.real, (self.T, self.N, 3)).copy()
        values["v_im"] = np.broadcast_to(self.v_slack.imag, (self.T, self.N, 3)).copy()
        return self.layout.flatten(values)

    def hosting_objective(self, obj: QuadraticBuilder) -> None:
        r = obj.row(("objective",))
        if self.opts.objective != "hosting":
            return
        for t in range(self.T):
            for k in range(self.n_pv):
                for p in range(3):
                    obj.add(r, self.pv_power(t, k, p), -1.0)

    def load_and_generation(self, t, n, p):
        """(P_gen - P_load, Q_gen - Q_load) at a bus phase, excluding the slack source."""
        pg, qg = self.bus_generation(t, n, p)
        s = self.load[t, n, p]
        return pg - Affine.constant(s.real), qg - Affine.constant(s.imag)


def _weighted_phasor(volts, weights) -> tuple[Affine, Affine]:
    """Real and imaginary parts of ``sum_p w_p * U_p``."""
    re_terms, im_terms = [], []
    for (e, f), w in zip(volts, weights):
        w = complex(w)
        re_terms += [e * w.real, f * -w.imag]
        im_terms += [e * w.imag, f * w.real]
    return affine_sum(re_terms), affine_sum(im_terms)


def _flow_expression(builder: QuadraticBuilder, row: int, vi, vj, g, b, p: int, reactive: bool, scale: float):
    """Add ``scale * P_ij,p`` (or ``Q_ij,p``) written in rectangular voltages."""
    ei_p, fi_p = vi[p]
    for q in range(3):
        ei_q, fi_q = vi[q]
        ej_q, fj_q = vj[q]
        g_pq, b_pq = g[p, q], b[p, q]
        # (own_c, own_s, far_c, far_s) coefficients
        if reactive:
            c_own_c, c_own_s, c_far_c, c_far_s = -b_pq, g_pq, b_pq, -g_pq
        else:
            c_own_c, c_own_s, c_far_c, c_far_s = g_pq, b_pq, -g_pq, -b_pq
        builder.add_product(row, ei_p, ei_q, scale * c_own_c)
        builder.add_product(row, fi_p, fi_q, scale * c_own_c)
        builder.add_product(row, fi_p, ei_q, scale * c_own_s)
        builder.add_product(row, ei_p, fi_q, -scale * c_own_s)
        builder.add_product(row, ei_p, ej_q, scale * c_far_c)
        builder.add_product(row, fi_p, fj_q, scale * c_far_c)
        builder.add_product(row, fi_p, ej_q, scale * c_far_s)
        builder.add_product(row, ei_p, fj_q, -scale * c_far_s)


def build_power_voltage(net: NetworkModel, objective: str = "hosting", options: OpfOptions | None = None) -> OpfProblem:
    opts = _resolve(options, objective, POWER_VOLTAGE)
    ctx = _Context(net, opts)
    T, N, n_br = ctx.T, ctx.N, ctx.n_br
    p_flow = ctx.add_block("p_flow", (T, n_br, 2, 3))
    q_flow = ctx.add_block("q_flow", (T, n_br, 2, 3))
    p_slack = ctx.add_block("p_slack", (T, 3))
    q_slack = ctx.add_block("q_slack", (T, 3))
    ctx.add_pv_blocks()
    n = ctx.layout.size
    eq, ineq, obj = QuadraticBuilder(n), QuadraticBuilder(n), QuadraticBuilder(n)

    for t in range(T):
        volts = [[ctx.voltage(t, k, p) for p in range(3)] for k in range(N)]
        for b, (i, j) in enumerate(ctx.branch_ends):
            y = ctx.branch_y[b]
            for d, (s_end, r_end) in enumerate(((i, j), (j, i))):
                for p in range(3):
                    for reactive, block, kind in ((False, p_flow, "p_def"), (True, q_flow, "q_def")):
                        r = eq.row((kind, t, b, d, p))
                        eq.add(r, Affine.var(block[t, b, d, p]))
                        _flow_expression(eq, r, volts[s_end], volts[r_end], y.real, y.imag, p, reactive, -1.0)
        for k in range(N):
            bus_id = net.sorted_buses[k].id
            for p in range(3):
                rp = eq.row(("p_bal", t, bus_id, p))
                rq = eq.row(("q_bal", t, bus_id, p))
                for b, (i, j) in enumerate(ctx.branch_ends):
                    if k in (i, j):
                        d = 0 if k == i else 1
                        eq.add(rp, Affine.var(p_flow[t, b, d, p]))
                        eq.add(rq, Affine.var(q_flow[t, b, d, p]))
                if k == ctx.slack:
                    eq.add(rp, Affine.var(p_slack[t, p]), -1.0)
                    eq.add(rq, Affine.var(q_slack[t, p]), -1.0)
                net_p, net_q = ctx.load_and_generation(t, k, p)
                eq.add(rp, net_p, -1.0)
                eq.add(rq, net_q, -1.0)
        if opts.thermal_limits:
            for b in range(n_br):
                s_max = ctx.ratings[b]
                for d in range(2):
                    for p in range(3):
                        r = ineq.row(("thermal", t, b, d, p))
                        ineq.add_square(r, Affine.var(p_flow[t, b, d, p]))
                        ineq.add_square(r, Affine.var(q_flow[t, b, d, p]))
                        ineq.add(r, Affine.constant(-(s_max**2)))
    ctx.balance_rows(eq)
    ctx.voltage_rows(ineq)
    ctx.vuf_rows(ineq)

    ctx.hosting_objective(obj)
    if opts.objective == "losses":
        # losses = slack import + generation - load
        for t in range(T):
            for p in range(3):
                obj.add(0, Affine.var(p_slack[t, p]))
                for k in range(N):
                    obj.add(0, ctx.load_and_generation(t, k, p)[0])
    return ctx.finish(obj, eq, ineq, ctx.flat_start())


def build_current_voltage(net: NetworkModel, objective: str = "hosting", options: OpfOptions | None = None) -> OpfProblem:
    opts = _resolve(options, objective, CURRENT_VOLTAGE)
    ctx = _Context(net, opts)
    T, N, n_br = ctx.T, ctx.N, ctx.n_br
    i_re = ctx.add_block("i_re", (T, n_br, 3))
    i_im = ctx.add_block("i_im", (T, n_br, 3))
    inj_mask = np.zeros((T, N, 3), dtype=bool)
    ctx.add_pv_blocks()
    for k in range(N):
        inj_mask[:, k, :] = ctx.has_injection(k)
    inj_re = ctx.add_block("inj_re", (T, N, 3), inj_mask)
    inj_im = ctx.add_block("inj_im", (T, N, 3), inj_mask)
    n = ctx.layout.size
    eq, ineq, obj = QuadraticBuilder(n), QuadraticBuilder(n), QuadraticBuilder(n)

    for t in range(T):
        volts = [[ctx.voltage(t, k, p) for p in range(3)] for k in range(N)]
        for b, (i, j) in enumerate(ctx.branch_ends):
            g, bb = ctx.branch_y[b].real, ctx.branch_y[b].imag
            for p in range(3):
                r_re = eq.row(("i_re_def", t, b, p))
                r_im = eq.row(("i_im_def", t, b, p))
                eq.add(r_re, Affine.var(i_re[t, b, p]))
                eq.add(r_im, Affine.var(i_im[t, b, p]))
                for q in range(3):
                    de = volts[i][q][0] - volts[j][q][0]
                    df = volts[i][q][1] - volts[j][q][1]
                    eq.add(r_re, de, -g[p, q])
                    eq.add(r_re, df, bb[p, q])
                    eq.add(r_im, de, -bb[p, q])
                    eq.add(r_im, df, -g[p, q])
        for k in range(N):
            bus_id = net.sorted_buses[k].id
            for p in range(3):
                r_re = eq.row(("i_re_bal", t, bus_id, p))
                r_im = eq.row(("i_im_bal", t, bus_id, p))
                for b, (i, j) in enumerate(ctx.branch_ends):
                    if k in (i, j):
                        sign = 1.0 if k == i else -1.0
                        eq.add(r_re, Affine.var(i_re[t, b, p]), sign)
                        eq.add(r_im, Affine.var(i_im[t, b, p]), sign)
                if inj_mask[t, k, p]:
                    eq.add(r_re, Affine.var(inj_re[t, k, p]), -1.0)
                    eq.add(r_im, Affine.var(inj_im[t, k, p]), -1.0)
                if k != ctx.slack and inj_mask[t, k, p]:
                    e, f = volts[k][p]
                    ir, ii = Affine.var(inj_re[t, k, p]), Affine.var(inj_im[t, k, p])
                    net_p, net_q = ctx.load_and_generation(t, k, p)
                    rp = eq.row(("p_couple", t, bus_id, p))
                    eq.add_product(rp, e, ir)
                    eq.add_product(rp, f, ii)
                    eq.add(rp, net_p, -1.0)
                    rq = eq.row(("q_couple", t, bus_id, p))
                    eq.add_product(rq, f, ir)
                    eq.add_product(rq, e, ii, -1.0)
                    eq.add(rq, net_q, -1.0)
        if opts.thermal_limits:
            for b in range(n_br):
                i_max = ctx.ratings[b]
                for p in range(3):
                    r = ineq.row(("thermal", t, b, 0, p))
                    ineq.add_square(r, Affine.var(i_re[t, b, p]))
                    ineq.add_square(r, Affine.var(i_im[t, b, p]))
                    ineq.add(r, Affine.constant(-(i_max**2)))
    ctx.balance_rows(eq)
    ctx.voltage_rows(ineq)
    ctx.vuf_rows(ineq)

    ctx.hosting_objective(obj)
    if opts.objective == "losses":
        for t in range(T):
            for p in range(3):
                v = ctx.v_slack[p]
                obj.add(0, Affine.var(inj_re[t, ctx.slack, p], v.real))
                obj.add(0, Affine.var(inj_im[t, ctx.slack, p], v.imag))
                for k in range(N):
                    if k != ctx.slack:
                        obj.add(0, ctx.load_and_generation(t, k, p)[0])
    return ctx.finish(obj, eq, ineq, ctx.flat_start())


def _resolve(options: OpfOptions | None, objective: str, formulation: str) -> OpfOptions:
    from dataclasses import replace

    if options is None:
        return OpfOptions(formulation=formulation, objective=objective)
    return replace(options, formulation=formulation)


def build_opf(net: NetworkModel, options: OpfOptions | None = None) -> OpfProblem:
    options = options or OpfOptions()
    if options.formulation == POWER_VOLTAGE:
        return build_power_voltage(net, options.objective, options)
    return build_current_voltage(net, options.objective, options)
