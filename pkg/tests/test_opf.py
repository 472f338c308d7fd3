import numpy as np
import pytest

from oracles import random_interior_point, stamp_ybus
from tpopf.network import Line, OperatingLimits, PvUnit, slack_voltage
from tpopf.nlp import SolverOptions, check_derivatives
from tpopf.opf import (
    CURRENT_VOLTAGE,
    FORMULATIONS,
    POWER_VOLTAGE,
    DimensionMismatch,
    MissingLimit,
    OpfOptions,
    build_current_voltage,
    build_opf,
    build_power_voltage,
    extract_solution,
    flatten_solution,
    solve_opf,
)
from tpopf.powerflow import PfOptions, branch_flow, injections_from_network, solve_pf, total_losses


def test_two_bus_equality_count(make_radial):
    net = make_radial((0.2,))
    prob = build_power_voltage(net, "feasibility")
    # independent enumeration: per branch and direction 3 P + 3 Q definitions,
    # per bus and phase one P and one Q balance
    n_br, n_bus = 1, 2
    expected = n_br * 2 * (3 + 3) + n_bus * 3 * 2
    assert expected == 24
    assert prob.m_eq == expected
    kinds = [tag[0] for tag in prob.equalities.tags]
    assert kinds.count("p_def") == 6 and kinds.count("q_def") == 6
    assert kinds.count("p_bal") == 6 and kinds.count("q_bal") == 6


@pytest.mark.parametrize("formulation", FORMULATIONS)
def test_zero_load_flat_start_feasible(make_radial, formulation):
    net = make_radial((0.2, 0.1), load_kw=(0.0, 0.0, 0.0))
    prob = build_opf(net, OpfOptions(formulation=formulation, objective="feasibility"))
    c_eq, c_in = prob.eval_constraints(prob.x0)
    assert np.max(np.abs(c_eq)) < 1e-14  # zero up to rounding of the balanced phasors
    assert np.all(c_in <= 0)


def test_power_definitions_match_branch_flow(feeder4):
    prob = build_power_voltage(feeder4, "feasibility", OpfOptions(coupling="dispatch"))
    pf = solve_pf(feeder4, opts=PfOptions(tolerance=1e-12))
    values = {name: np.zeros(idx.shape) for name, idx in prob.layout.blocks.items()}
    values["v_re"], values["v_im"] = pf.voltages.real, pf.voltages.imag
    for t in range(feeder4.horizon):
        for b, br in enumerate(feeder4.branches):
            s_from, s_to = branch_flow(feeder4, pf.voltages[t], br)
            values["p_flow"][t, b] = [s_from.real, s_to.real]
            values["q_flow"][t, b] = [s_from.imag, s_to.imag]
    x = prob.layout.flatten(values)
    c_eq = prob.equalities(x)
    rows = [k for k, tag in enumerate(prob.equalities.tags) if tag[0] in ("p_def", "q_def")]
    assert np.max(np.abs(c_eq[rows])) < 1e-12


def test_currents_determined_by_voltages(feeder4):
    prob = build_current_voltage(feeder4, "feasibility", OpfOptions(coupling="dispatch"))
    pf = solve_pf(feeder4, opts=PfOptions(tolerance=1e-12))
    ybus = stamp_ybus(feeder4)
    values = {name: np.zeros(idx.shape) for name, idx in prob.layout.blocks.items()}
    values["v_re"], values["v_im"] = pf.voltages.real, pf.voltages.imag
    pos = feeder4.bus_index
    for t in range(feeder4.horizon):
        for b, br in enumerate(feeder4.branches):
            i, j = pos[br.from_bus], pos[br.to_bus]
            y = -ybus[3 * i : 3 * i + 3, 3 * j : 3 * j + 3]
            cur = y @ (pf.voltages[t, i] - pf.voltages[t, j])
            values["i_re"][t, b], values["i_im"][t, b] = cur.real, cur.imag
    x = prob.layout.flatten(values)
    c_eq = prob.equalities(x)
    rows = [k for k, tag in enumerate(prob.equalities.tags) if tag[0] in ("i_re_def", "i_im_def")]
    assert np.max(np.abs(c_eq[rows])) < 1e-12


@pytest.mark.parametrize("formulation", FORMULATIONS)
@pytest.mark.parametrize("coupling", ["dispatch", "capacity"])
def test_jacobians_match_finite_differences(feeder4, rng, formulation, coupling):
    prob = build_opf(feeder4, OpfOptions(formulation=formulation, coupling=coupling))
    nlp = prob.to_nlp()
    for _ in range(3):
        rep = check_derivatives(nlp, random_interior_point(prob, rng))
        assert rep.max_error <= 1e-5, str(rep)


@pytest.mark.parametrize("formulation", FORMULATIONS)
def test_exact_hessian_matches_finite_differences(feeder4, rng, formulation):
    prob = build_opf(feeder4, OpfOptions(formulation=formulation, objective="losses", coupling="dispatch"))
    x = random_interior_point(prob, rng)
    y_eq, y_in = rng.normal(size=prob.m_eq), rng.normal(size=prob.m_ineq)
    hess = prob.eval_hessian(x, 0.7, y_eq, y_in).toarray()

    def lagrangian_grad(z):
        jeq, jin = prob.eval_jacobian(z)
        return 0.7 * prob.eval_gradient(z) + jeq.T @ y_eq + jin.T @ y_in

    h = 1e-6
    cols = rng.choice(prob.n, size=15, replace=False)
    for c in cols:
        e = np.zeros(prob.n)
        e[c] = h
        fd = (lagrangian_grad(x + e) - lagrangian_grad(x - e)) / (2 * h)
        assert np.max(np.abs(hess[:, c] - fd)) < 1e-6


def test_hosting_objective_zero_without_dispatch(feeder4):
    prob = build_opf(feeder4, OpfOptions(formulation=POWER_VOLTAGE))
    assert prob.eval_objective(prob.x0) == 0.0


def test_evaluation_is_pure(feeder4, rng):
    prob = build_opf(feeder4, OpfOptions(formulation=CURRENT_VOLTAGE))
    x = random_interior_point(prob, rng)
    a = (prob.eval_objective(x), *prob.eval_constraints(x))
    b = (prob.eval_objective(x), *prob.eval_constraints(x))
    assert a[0] == b[0] and np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    ja, jb = prob.eval_jacobian(x), prob.eval_jacobian(x)
    assert (ja[0] != jb[0]).nnz == 0 and (ja[1] != jb[1]).nnz == 0


def test_dimension_mismatch(feeder4):
    prob = build_opf(feeder4)
    with pytest.raises(DimensionMismatch):
        prob.eval_objective(np.zeros(prob.n + 1))


def test_missing_thermal_rating(make_radial):
    net = make_radial((0.2,), max_i_ka=None)
    with pytest.raises(MissingLimit):
        build_opf(net)
    build_opf(net, OpfOptions(thermal_limits=False))


def test_vuf_row_is_cleared_ratio(feeder4, rng):
    prob = build_opf(feeder4, OpfOptions(coupling="dispatch"))
    x = random_interior_point(prob, rng, spread=0.1)
    values = prob.layout.unflatten(x)
    volts = values["v_re"] + 1j * values["v_im"]
    c_in = prob.inequalities(x)
    a = np.exp(2j * np.pi / 3)
    vmax = feeder4.limits.vuf_max
    for k, tag in enumerate(prob.inequalities.tags):
        if tag[0] != "vuf":
            continue
        _, t, bus_id, _ = tag
        ua, ub, uc = volts[t, feeder4.bus_index[bus_id]]
        num = ua + a * a * ub + a * uc
        den = ua + a * ub + a * a * uc
        assert abs(c_in[k] - (abs(num) ** 2 - vmax**2 * abs(den) ** 2)) < 1e-12


@pytest.fixture(scope="module")
def solved4(feeder4):
    return {f: solve_opf(feeder4, OpfOptions(formulation=f)) for f in FORMULATIONS}


def test_solution_round_trip_and_reported_objective(solved4):
    for prob, sol in solved4.values():
        assert sol.optimal
        x = flatten_solution(prob, sol)
        assert np.array_equal(x, sol.report.x)
        assert sol.objective == prob.eval_objective(x)
        again = extract_solution(prob, x)
        assert np.array_equal(again.voltages, sol.voltages)


def test_slack_voltage_in_output(solved4, feeder4):
    for _, sol in solved4.values():
        assert np.array_equal(sol.voltages[:, feeder4.slack_position], np.tile(slack_voltage(1.0), (feeder4.horizon, 1)))


def test_equality_residuals_small_at_optimum(solved4):
    for prob, sol in solved4.values():
        c_eq, c_in = prob.eval_constraints(sol.report.x)
        assert np.max(np.abs(c_eq)) <= 1e-6
        assert np.max(c_in) <= 1e-6


def test_formulations_agree_on_small_feeder(solved4):
    (_, a), (_, b) = solved4[POWER_VOLTAGE], solved4[CURRENT_VOLTAGE]
    assert abs(a.objective - b.objective) <= 1e-4 * abs(a.objective)
    assert np.max(np.abs(a.voltages - b.voltages)) <= 1e-4


def test_each_unit_hits_bound_or_network_limit(solved4, feeder4):
    prob, sol = solved4[POWER_VOLTAGE]
    x = sol.report.x
    c_in = prob.inequalities(x)
    at_bound = np.isclose(x, prob.upper, atol=1e-6, rtol=0)
    pv_at_bound = any(at_bound[i] for i in prob.layout["pv_cap"])
    active = np.any(c_in >= -1e-6)
    assert pv_at_bound or active


def test_losses_objective_without_pv_equals_pf_losses(make_radial):
    net = make_radial((0.2, 0.15), load_kw=(6.0, 3.0, 1.0))
    pf = solve_pf(net, opts=PfOptions(tolerance=1e-12))
    losses = total_losses(net, pf.voltages[0]).real
    for f in FORMULATIONS:
        _, sol = solve_opf(net, OpfOptions(formulation=f, objective="losses", coupling="dispatch"))
        assert sol.optimal
        assert abs(sol.objective - losses) < 1e-7


def test_dispatch_periods_decouple(feeder4):
    options = OpfOptions(formulation=POWER_VOLTAGE, coupling="dispatch")
    # tight tolerance: the residual barrier term is proportional to tol
    tight = SolverOptions(tol=1e-8)
    _, joint = solve_opf(feeder4, options, tight)
    separate = 0.0
    for t in range(feeder4.horizon):
        sub = feeder4.replace(
            horizon=1,
            loads=tuple(type(l).from_arrays(l.bus, [[r[t]] for r in l.p_kw], [[r[t]] for r in l.q_kvar]) for l in feeder4.loads),
            pv_units=tuple(PvUnit(pv.bus, pv.p_max_kw, (pv.profile[t],), pv.connection) for pv in feeder4.pv_units),
        )
        _, sol = solve_opf(sub, options, tight)
        assert sol.optimal
        separate += sol.objective
    assert abs(joint.objective - separate) <= 1e-6


def test_export_cap_limits_dispatch(make_radial, make_pv):
    # lightly loaded, short line: only the cap binds
    net = make_radial((0.05,), horizon=3, pv=make_pv(1, 30.0, (0.2, 1.0, 0.5)))
    _, sol = solve_opf(net, OpfOptions(coupling="dispatch", export_cap_kw=3.68))
    assert sol.optimal
    expected = 3.68 * np.array([0.2, 1.0, 0.5])
    for p in range(3):
        assert np.allclose(sol.pv_p_kw[0, p], expected, atol=1e-4, rtol=0)


def test_pv_reactive_capability(make_radial, make_pv):
    net = make_radial((0.4,), pv=make_pv(1, 1000.0, (1.0,)))
    _, plain = solve_opf(net, OpfOptions(coupling="dispatch"))
    _, with_q = solve_opf(net, OpfOptions(coupling="dispatch", pv_q_ratio=0.4))
    assert plain.optimal and with_q.optimal
    # the thermal limit binds; supplying the load's reactive power locally
    # frees apparent-power headroom for more active output
    assert with_q.objective < plain.objective - 1e-6
    assert np.all(np.abs(with_q.pv_q_kvar) <= 0.4 * 1000.0 / 3 + 1e-6)
    assert np.all(plain.pv_q_kvar == 0.0)


def test_infeasible_limits_not_optimal(make_radial):
    net = make_radial((0.5,), load_kw=(20.0, 20.0, 20.0), limits=OperatingLimits(u_min=0.999, u_max=1.1))
    _, sol = solve_opf(net, OpfOptions(objective="feasibility"), SolverOptions(max_iter=150))
    assert not sol.optimal
