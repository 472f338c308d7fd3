import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import phase_matrix, sequence_parts, stamp_ybus
from tpopf.network import (
    ALPHA,
    Bus,
    DisconnectedNetwork,
    Line,
    Load,
    NetworkModel,
    NetworkValidationError,
    OperatingLimits,
    PvUnit,
    SequenceImpedance,
    SingularImpedance,
    Transformer,
    assemble_ybus,
    branch_admittance,
    check_connected,
    fortescue_inverse,
    fortescue_matrix,
    phase_to_sequence,
    sequence_components,
    sequence_to_phase,
    slack_voltage,
    transformer_sequence_impedance,
    validate,
    validation_errors,
)
from tpopf.powerflow import PfOptions, solve_pf, vuf

finite = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)
reactance = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
impedance = st.builds(complex, finite, reactance)


# ---- Fortescue transform ---------------------------------------------------


def test_fortescue_first_row_is_ones():
    assert np.array_equal(fortescue_matrix()[0], np.ones(3, dtype=complex))


def test_fortescue_inverse_is_inverse():
    assert np.allclose(fortescue_matrix() @ fortescue_inverse(), np.eye(3), atol=1e-14, rtol=0)


def test_fortescue_a_squared_entry():
    # oracle: e^{j 4 pi / 3} evaluated with cmath
    expected = cmath.exp(4j * math.pi / 3)
    assert abs(fortescue_matrix()[1, 1] - expected) < 1e-15
    assert abs(fortescue_matrix()[1, 1] - complex(-0.5, -0.8660254037844386)) < 1e-15


def test_equal_sequences_collapse_to_scalar_identity():
    z = 1 + 1j
    assert np.allclose(sequence_to_phase(SequenceImpedance(z, z, z)), z * np.eye(3), atol=1e-15, rtol=0)


def test_sequence_to_phase_against_explicit_product():
    z0, z1 = 3 + 3j, 1 + 1j
    got = sequence_to_phase(SequenceImpedance(z0, z1))
    assert np.allclose(got, phase_matrix(z0, z1), atol=1e-14, rtol=0)
    assert abs(got[0, 0] - (1.6666666666666667 + 1.6666666666666667j)) < 1e-14
    assert abs(got[0, 1] - (0.6666666666666666 + 0.6666666666666666j)) < 1e-14


@settings(max_examples=200, deadline=None)
@given(impedance, impedance, impedance)
def test_sequence_round_trip(z0, z1, z2):
    back = phase_to_sequence(sequence_to_phase(SequenceImpedance(z0, z1, z2)))
    assert np.allclose([back.z0, back.z1, back.negative], [z0, z1, z2], atol=1e-12, rtol=0)


@settings(max_examples=100, deadline=None)
@given(impedance, impedance)
def test_phase_matrix_symmetric_when_z2_equals_z1(z0, z1):
    z = sequence_to_phase(SequenceImpedance(z0, z1))
    assert np.allclose(z, z.T, atol=1e-12, rtol=0)


def test_sequence_components_match_textbook_formulas(rng):
    v = rng.normal(size=3) + 1j * rng.normal(size=3)
    assert np.allclose(sequence_components(v), sequence_parts(*v), atol=1e-14, rtol=0)


# ---- branch admittances -----------------------------------------------------


def test_line_admittance_scalar_inverse():
    line = Line(0, 1, 1.0, 0.1, 0.1, 0.1, 0.1, 0.2)
    y = branch_admittance(line, 0.4, 1.0)
    # oracle: 1 / ((0.1 + 0.1j) / 0.16)
    assert np.allclose(y, (0.8 - 0.8j) * np.eye(3), atol=1e-12, rtol=0)


def test_doubling_length_halves_admittance():
    a = Line(0, 1, 0.3, 0.2, 0.08, 0.8, 0.3, 0.2)
    b = Line(0, 1, 0.6, 0.2, 0.08, 0.8, 0.3, 0.2)
    assert np.allclose(branch_admittance(b, 0.4, 1.0), 0.5 * branch_admittance(a, 0.4, 1.0), atol=1e-12, rtol=0)


def test_transformer_positive_sequence_impedance():
    trafo = Transformer(0, 1, 0.4, 4.0, 1.0, 10.0, 0.4)
    z = transformer_sequence_impedance(trafo, 0.4)
    # oracle: sqrt(0.04^2 - 0.01^2) = 0.03872983346207417
    assert abs(z.z1 - complex(0.01, 0.03872983346207417)) < 1e-15
    assert z.z0 == z.z1


def test_zero_impedance_is_singular():
    with pytest.raises(SingularImpedance):
        branch_admittance(Line(0, 1, 1.0, 0.0, 0.0, 0.0, 0.0, 0.2), 0.4, 1.0)


def test_singular_sequence_combination_rejected():
    # the phase matrix has eigenvalues z0, z1, z2; a zero z0 makes it singular
    with pytest.raises(SingularImpedance):
        branch_admittance(Line(0, 1, 1.0, 0.2, 0.1, 0.0, 0.0, 0.2), 0.4, 1.0)


# ---- admittance matrix ------------------------------------------------------


def test_two_bus_stamp(make_radial):
    net = make_radial((0.25,))
    y = assemble_ybus(net)
    yb = branch_admittance(net.lines[0], 0.4, 1.0)
    assert np.allclose(y[:3, :3], yb) and np.allclose(y[3:, 3:], yb)
    assert np.allclose(y[:3, 3:], -yb) and np.allclose(y[3:, :3], -yb)


def test_ybus_matches_stamp_oracle(suite):
    for net in suite.values():
        assert np.max(np.abs(assemble_ybus(net) - stamp_ybus(net))) < 1e-12


def test_ybus_zero_row_sums_and_symmetry(suite):
    for net in suite.values():
        y = assemble_ybus(net)
        assert np.max(np.abs(y.sum(axis=1))) < 1e-12
        assert np.allclose(y, y.T, atol=1e-12, rtol=0)


def test_diagonal_block_is_sum_of_incident_branches(feeder4):
    y = assemble_ybus(feeder4)
    pos = feeder4.bus_index[1]
    incident = [l for l in feeder4.lines if 1 in (l.from_bus, l.to_bus)]
    expected = sum(branch_admittance(l, 0.4, 1.0) for l in incident)
    assert np.allclose(y[3 * pos : 3 * pos + 3, 3 * pos : 3 * pos + 3], expected, atol=1e-12, rtol=0)


def test_disconnected_network_detected(make_radial):
    net = make_radial((0.2,))
    net = net.replace(buses=net.buses + (Bus(7, "pq", 0.4),))
    with pytest.raises(DisconnectedNetwork):
        check_connected(net)


# ---- slack voltage ----------------------------------------------------------


def test_slack_voltage_unit():
    expected = [1, cmath.exp(-2j * math.pi / 3), cmath.exp(2j * math.pi / 3)]
    assert np.allclose(slack_voltage(1.0), expected, atol=1e-15, rtol=0)


def test_slack_voltage_phase_b():
    v = slack_voltage(1.05)
    assert abs(v[1] - complex(-0.525, -0.9093266739736606)) < 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1e-3, max_value=10.0))
def test_slack_voltage_balanced(m):
    assert vuf(slack_voltage(m)) < 1e-12


def test_alpha_constant():
    assert abs(ALPHA - cmath.exp(2j * math.pi / 3)) < 1e-15


# ---- validation -------------------------------------------------------------


def test_well_formed_feeder_has_no_errors(feeder4):
    assert validation_errors(feeder4) == []


def test_two_slack_buses(make_radial):
    net = make_radial((0.2,))
    net = net.replace(buses=(Bus(0, "slack", 0.4), Bus(1, "slack", 0.4)))
    errors = validation_errors(net)
    assert any("multiple slack buses" in e for e in errors)


def test_load_at_missing_bus_names_bus(make_radial):
    net = make_radial((0.2,))
    net = net.replace(loads=(Load.constant(42, (1, 1, 1), (0, 0, 0)),))
    with pytest.raises(NetworkValidationError) as info:
        validate(net)
    assert any("42" in e for e in info.value.errors)


def test_profile_out_of_range_and_horizon_mismatch(make_radial):
    net = make_radial((0.2,), horizon=2, pv=PvUnit(1, 10.0, (0.5, 1.5)))
    assert any("profile" in e for e in validation_errors(net))
    net = make_radial((0.2,), horizon=2, pv=PvUnit(1, 10.0, (0.5,)))
    assert validation_errors(net)


def test_bad_limits(make_radial):
    net = make_radial((0.2,), limits=OperatingLimits(u_min=1.1, u_max=0.9))
    assert validation_errors(net)


def test_per_unit_base_invariance(feeder4):
    tight = PfOptions(tolerance=1e-12)
    a = solve_pf(feeder4, opts=tight).voltages
    b = solve_pf(feeder4.replace(base_mva=7.5), opts=tight).voltages
    assert np.max(np.abs(a - b)) < 1e-10


def test_network_model_is_frozen(feeder4):
    with pytest.raises(Exception):
        feeder4.base_mva = 2.0
    assert isinstance(feeder4, NetworkModel)
