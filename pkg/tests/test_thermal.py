import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadshift.thermal import (N_STATES, ROOM, Comfort, DisturbanceProfile, HvacParams, ModelError,
                               RoomThermalParams, build_room_model, default_thermal_params,
                               discretize, hvac_power, linearization_offset, linearize,
                               nonlinear_derivative, simulate_rule_based)
from oracles import rk4

HVAC = HvacParams()
THERMAL = default_thermal_params()
COMFORT = Comfort.room_band(20.0, 23.0)


def test_hvac_power_example():
    p_heat, p_fan = hvac_power(1.0, 20.0, HVAC)
    assert p_heat == pytest.approx(20100.0)
    assert p_fan == pytest.approx(500.0 / 1.2)


def test_hvac_power_linear_in_flow():
    base = np.array(hvac_power(0.07, 21.3, HVAC))
    for a in (0.0, 0.5, 2.0, 3.7):
        np.testing.assert_allclose(hvac_power(a * 0.07, 21.3, HVAC), a * base, rtol=1e-14)


def test_negative_flow_rejected():
    with pytest.raises(ModelError):
        hvac_power(-0.1, 20.0, HVAC)


def test_equilibrium_has_zero_derivative():
    x = np.full(N_STATES, 7.5)
    d = np.array([7.5, 0, 0, 0, 0, 0.0])
    np.testing.assert_allclose(nonlinear_derivative(x, 0.0, d, THERMAL, HVAC), 0.0, atol=1e-15)


def test_heating_raises_room_derivative():
    x = np.array([15.0, 16.0, 17.0, 18.0, 20.0])
    d = np.array([5.0, 100, 200, 300, 100, 150])
    off = nonlinear_derivative(x, 0.0, d, THERMAL, HVAC)
    on = nonlinear_derivative(x, 0.1, d, THERMAL, HVAC)
    assert on[ROOM] > off[ROOM]
    np.testing.assert_array_equal(on[:4], off[:4])


def test_input_jacobian_entry():
    _, B, _ = linearize(THERMAL, HVAC, 21.5, 0.1)
    assert B[ROOM, 0] == pytest.approx(HVAC.cp * (HVAC.T_in_heat - 21.5) / THERMAL.room_capacitance)
    assert np.count_nonzero(B) == 1


def test_linearization_matches_finite_differences():
    T_op, m_op = 21.5, 0.1
    A, B, E = linearize(THERMAL, HVAC, T_op, m_op)
    x = np.array([18.0, 19.0, 20.0, 19.5, T_op])
    d = np.array([4.0, 50, 120, 300, 80, 200])
    f0 = nonlinear_derivative(x, m_op, d, THERMAL, HVAC)
    h = 1e-4
    for j in range(N_STATES):
        e = np.zeros(N_STATES)
        e[j] = h
        fd = (nonlinear_derivative(x + e, m_op, d, THERMAL, HVAC)
              - nonlinear_derivative(x - e, m_op, d, THERMAL, HVAC)) / (2 * h)
        np.testing.assert_allclose(A[:, j], fd, rtol=1e-7, atol=1e-14)
    fd_u = (nonlinear_derivative(x, m_op + h, d, THERMAL, HVAC)
            - nonlinear_derivative(x, m_op - h, d, THERMAL, HVAC)) / (2 * h)
    np.testing.assert_allclose(B[:, 0], fd_u, rtol=1e-7)
    # the affine model reproduces the nonlinear derivative at the operating point
    from loadshift.thermal import nodal_heat
    d_in = nodal_heat(d, THERMAL) + linearization_offset(HVAC, T_op, m_op)
    np.testing.assert_allclose(A @ x + B[:, 0] * m_op + E @ d_in, f0, rtol=1e-12, atol=1e-15)


def test_zoh_against_rk4_on_room_model():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    x0 = np.array([18.0, 19.0, 20.0, 19.5, 21.0])
    u = 0.08
    d = np.array([4.0, 50, 120, 300, 80, 200])
    from loadshift.thermal import nodal_heat
    d_in = nodal_heat(d, THERMAL) + linearization_offset(HVAC, m.T_room_op, m.mdot_op)
    x1 = m.step(x0, u, d_in)
    ref = rk4(lambda x: m.A_c @ x + m.B_c[:, 0] * u + m.E_c @ d_in, x0, m.dt, 2000)
    np.testing.assert_allclose(x1, ref, rtol=1e-9)


def test_fixed_point_preserved():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    d_in = np.array([100.0, 150.0, 200.0, 150.0, 300.0])
    x_star = np.linalg.solve(m.A_c, -(m.B_c[:, 0] * m.mdot_op + m.E_c @ d_in))
    np.testing.assert_allclose(m.step(x_star, m.mdot_op, d_in), x_star, atol=1e-9)


def test_dissipative_model_is_stable():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    v = np.ones(N_STATES)
    for _ in range(500):
        v = m.A @ v
        v /= np.linalg.norm(v)
    rho = np.linalg.norm(m.A @ v)
    assert rho < 1.0
    assert np.max(np.abs(np.linalg.eigvals(m.A))) < 1.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ambient_increase_never_lowers_derivative(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(5, 30, N_STATES)
    d = np.concatenate(([rng.uniform(-10, 35)], rng.uniform(0, 800, 4), [rng.uniform(0, 500)]))
    mdot = rng.uniform(0, HVAC.mdot_max)
    d_hi = d.copy()
    d_hi[0] += 0.5
    diff = (nonlinear_derivative(x, mdot, d_hi, THERMAL, HVAC)
            - nonlinear_derivative(x, mdot, d, THERMAL, HVAC))
    assert np.all(diff >= 0)


def test_default_operating_point():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    assert m.T_room_op == 21.5
    assert m.mdot_op == HVAC.mdot_max / 2
    narrow = HvacParams(mdot_min=0.15, mdot_max=0.2)
    assert build_room_model(narrow, THERMAL, COMFORT).mdot_op == 0.15


def test_power_conversion():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    expected = 1005 * (40 - 21.5) / 1000 + 500 / 1200
    assert m.power_conversion == pytest.approx(expected)


def test_thermostat_idle_when_warm():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    prof = DisturbanceProfile(np.full(12, 22.0), np.zeros((12, 4)), np.zeros(12))
    tr = simulate_rule_based(m, prof, T_max_setpoint=18.0, rated_mdot=0.2,
                             x0=np.full(N_STATES, 22.0))
    assert np.all(tr.mdot == HVAC.mdot_min)
    assert np.all(tr.power == 0.0)


def test_thermostat_trace_against_nonlinear_rk4():
    m = build_room_model(HVAC, THERMAL, COMFORT)
    t = np.arange(24) * 0.5
    solar = np.outer(np.clip(np.sin(t / 4), 0, 1), [50.0, 100.0, 200.0, 100.0])
    prof = DisturbanceProfile(5 + 2 * np.sin(t / 4), solar, np.full(24, 200.0))
    tr = simulate_rule_based(m, prof, T_max_setpoint=21.5, rated_mdot=0.1)
    x = tr.temperatures[0].copy()
    for k in range(len(prof)):
        d = prof.sample(k)
        x = rk4(lambda s: nonlinear_derivative(s, tr.mdot[k], d, THERMAL, HVAC), x, m.dt, 100)
        assert abs(x[ROOM] - tr.temperatures[k + 1, ROOM]) < 0.1


def test_discretize_rejects_bad_dt():
    with pytest.raises(ModelError):
        discretize(np.eye(2), np.ones((2, 1)), np.eye(2), 0.0)


@pytest.mark.parametrize("kwargs", [
    dict(cp=0.0), dict(delta_p=-1.0), dict(mdot_min=0.3, mdot_max=0.2),
])
def test_invalid_hvac(kwargs):
    with pytest.raises(ModelError):
        HvacParams(**kwargs)


def test_invalid_thermal_and_comfort():
    with pytest.raises(ModelError):
        RoomThermalParams([1.0, 1.0, 1.0], 1.0, [1.0] * 4, [1.0] * 4, [0.0] * 4)
    with pytest.raises(ModelError):
        Comfort([22.0] * N_STATES, [20.0] * N_STATES)
    with pytest.raises(ModelError):
        DisturbanceProfile(np.zeros(3), -np.ones((3, 4)), np.zeros(3))


def test_profile_scaling_keeps_ambient():
    prof = DisturbanceProfile(np.arange(3.0), np.ones((3, 4)), np.full(3, 10.0))
    s = prof.scaled(1.5)
    np.testing.assert_array_equal(s.ambient_temp, prof.ambient_temp)
    np.testing.assert_array_equal(s.solar, 1.5 * prof.solar)
    np.testing.assert_array_equal(s.internal_gains, 15.0)
