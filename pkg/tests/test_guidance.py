import math

import pytest
from hypothesis import given, strategies as st

from fetced.engagement import MissileState, RelativeState, TargetState, relative_from_inertial
from fetced.guidance import (GuidanceParameterError, GuidanceSpec, Law, THETA_MIN, command,
                             estimate_impact_time, iacg_bias, iacg_command, impact_angle_error,
                             impact_time_error, impact_time_error_rate_approx,
                             impact_time_error_rate_full, itcg_bias, itcg_command, lacg_command,
                             oed_iacg_bias, oed_iacg_command, oed_itcg_bias, oed_itcg_command,
                             png_command, predict_terminal_angle, read_errors, time_to_go)
from fetced.simulator import _integrate

V = 500.0
Q0 = -math.pi / 4
START = RelativeState(r=20000.0, q=Q0, theta_m=math.pi / 4)
QDOT0 = -V * math.sin(math.pi / 4) / 20000.0
IACG = GuidanceSpec(Law.FETCED_IACG, N=4.0, K=3.0, T_s=20.0, phi_d=-math.pi / 2)
OED_IACG = GuidanceSpec(Law.OED_IACG, N=4.0, K=3.0, phi_d=-math.pi / 2)
ITCG = GuidanceSpec(Law.FETCED_ITCG, N=4.0, K=5.0, T_s=20.0, t_d=45.0)
OED_ITCG = GuidanceSpec(Law.OED_ITCG, N=4.0, K=5.0, t_d=45.0)


# --- specs -----------------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(law=Law.PNG),
    dict(law=Law.FETCED_LACG, K=3.0),
    dict(law=Law.FETCED_LACG, K=0.5, T_s=20.0),
    dict(law=Law.FETCED_IACG, N=1.0, K=3.0, T_s=20.0, phi_d=0.0),
    dict(law=Law.FETCED_IACG, N=4.0, K=3.0, T_s=20.0),
    dict(law=Law.FETCED_ITCG, N=4.0, K=5.0, T_s=20.0),
    dict(law=Law.OED_ITCG, N=4.0, t_d=45.0),
    dict(law=Law.FETCED_ITCG, N=4.0, K=5.0, T_s=-1.0, t_d=45.0),
])
def test_spec_rejects(kwargs):
    with pytest.raises(GuidanceParameterError):
        GuidanceSpec(**kwargs)


def test_spec_accepts_string_law():
    assert GuidanceSpec("PNG", N=3.0).law is Law.PNG


def test_law_flags():
    assert Law.FETCED_LACG.is_fetced and not Law.OED_IACG.is_fetced
    assert Law.OED_IACG.controls_angle and Law.FETCED_ITCG.controls_time
    assert not Law.PNG.controls_angle and not Law.PNG.controls_time


# --- PNG ---------------------------------------------------------------------

def test_png():
    assert png_command(V, 0.0, 4.0) == 0.0
    assert png_command(V, -0.0176777, 4.0) == pytest.approx(-35.355, abs=1e-3)
    assert png_command(V, 0.01, 1.0) == V * 0.01


# --- LACG --------------------------------------------------------------------

def test_lacg_examples():
    assert lacg_command(RelativeState(20000.0, 0.0, 0.0), V, 0.0, 3.0, 20.0) == 0.0
    assert lacg_command(START, V, 0.0, 3.0, 20.0) == pytest.approx(-49.6434752, abs=1e-6)
    assert lacg_command(START, V, 25.0, 3.0, 20.0) == 0.0


def test_lacg_guard():
    assert lacg_command(START, V, 20.0 - 0.005, 3.0, 20.0, guard=0.01) == 0.0
    assert lacg_command(START, V, 20.0 - 0.02, 3.0, 20.0, guard=0.01) != 0.0


@given(theta=st.floats(-0.05, 0.05).filter(lambda x: abs(x) > 1e-9), K=st.floats(1.0, 3.0),
       r=st.floats(500.0, 30000.0), t=st.floats(0.0, 50.0))
def test_lacg_reduces_to_png(theta, K, r, t):
    rel = RelativeState(r=r, q=0.0, theta_m=theta)
    T_s = t + time_to_go(r, V)
    q_dot = -V * math.sin(theta) / r
    ratio = lacg_command(rel, V, t, K, T_s) / png_command(V, q_dot, K + 1.0)
    assert 0.98 <= ratio <= 1.02


# --- impact angle -----------------------------------------------------------

def test_terminal_angle():
    assert predict_terminal_angle(-0.3, -0.3, 4.0) == pytest.approx(-0.3, abs=1e-15)
    assert predict_terminal_angle(Q0, 0.0, 4.0) == pytest.approx(math.radians(-60.0))
    assert predict_terminal_angle(math.radians(-30), math.radians(-30), 2.0) == pytest.approx(math.radians(-30))
    with pytest.raises(GuidanceParameterError):
        predict_terminal_angle(0.1, 0.0, 1.0)


def test_iacg_examples():
    eps = impact_angle_error(Q0, 0.0, IACG)
    assert eps == pytest.approx(-0.523599, abs=1e-6)
    bias = iacg_bias(eps, V, 0.0, IACG)
    assert bias == pytest.approx(154.8206539, abs=1e-6)
    # the bias drives the error toward zero
    assert bias / ((IACG.N - 1) * V) == pytest.approx(0.1032, abs=1e-4)
    assert iacg_bias(0.0, V, 0.0, IACG) == 0.0
    a = iacg_command(START, V, QDOT0, 0.0, 0.0, IACG)
    assert a == pytest.approx(png_command(V, QDOT0, 4.0) + 154.8206539, abs=1e-6)


def test_iacg_after_convergence_is_png_exactly():
    for t in (20.0, 25.0, 60.0):
        assert iacg_command(START, V, QDOT0, 0.0, t, IACG) == png_command(V, QDOT0, 4.0)


def test_oed_iacg_examples():
    assert oed_iacg_bias(-0.523599, V, 40.0, OED_IACG) == pytest.approx(58.905, abs=1e-3)
    assert oed_iacg_bias(0.0, V, 40.0, OED_IACG) == 0.0
    assert oed_iacg_bias(-0.5, V, 1e-4, OED_IACG) == 0.0
    eps = impact_angle_error(Q0, 0.0, OED_IACG)
    assert oed_iacg_command(START, V, QDOT0, 0.0, 40.0, OED_IACG) == pytest.approx(
        png_command(V, QDOT0, 4.0) + oed_iacg_bias(eps, V, 40.0, OED_IACG), rel=1e-15)


@given(eps=st.floats(-1e-3, 1e-3).filter(lambda e: abs(e) > 1e-12), t_go=st.floats(1.0, 60.0))
def test_iacg_linearizes_to_oed(eps, t_go):
    spec = GuidanceSpec(Law.FETCED_IACG, N=4.0, K=3.0, T_s=t_go, phi_d=0.0)
    ratio = iacg_bias(eps, V, 0.0, spec) / oed_iacg_bias(eps, V, t_go, OED_IACG)
    assert 0.999 <= ratio <= 1.001


# --- impact time --------------------------------------------------------------

def test_impact_time_estimate():
    assert estimate_impact_time(20000.0, V, 0.0, 3.0, 4.0) == 43.0
    assert estimate_impact_time(20000.0, V, math.pi / 4, 0.0, 4.0) == pytest.approx(41.76242936, abs=1e-7)
    assert estimate_impact_time(0.0, V, 0.3, 12.5, 4.0) == 12.5
    # the value quoted alongside the simulated scenario
    assert round(estimate_impact_time(20000.0, V, math.pi / 4, 0.0, 4.0), 1) == 41.8


def test_itcg_examples():
    eps = impact_time_error(START, V, 0.0, ITCG)
    assert eps == pytest.approx(3.237570643, abs=1e-8)
    assert itcg_bias(eps, START, V, 0.0, ITCG) == pytest.approx(26.75866457, abs=1e-6)
    assert itcg_bias(0.0, START, V, 0.0, ITCG) == 0.0
    for t in (20.0, 30.0):
        assert itcg_command(START, V, QDOT0, t, ITCG) == png_command(V, QDOT0, 4.0)


def test_itcg_singularity_guard():
    small = RelativeState(20000.0, 0.0, THETA_MIN / 2)
    assert itcg_bias(1.0, small, V, 0.0, ITCG) == 0.0
    assert oed_itcg_bias(1.0, small, V, 40.0, OED_ITCG) == 0.0
    edge = RelativeState(20000.0, 0.0, THETA_MIN * 1.01)
    assert itcg_bias(1.0, edge, V, 0.0, ITCG) > 0.0


def test_oed_itcg_examples():
    assert oed_itcg_bias(0.01, START, V, 40.0, OED_ITCG) == pytest.approx(0.13926, abs=1e-5)
    assert oed_itcg_bias(0.0, START, V, 40.0, OED_ITCG) == 0.0
    assert oed_itcg_bias(0.01, START, V, 1e-4, OED_ITCG) == 0.0
    t_go = time_to_go(START.r, V)
    assert t_go == 40.0
    eps = impact_time_error(START, V, 0.0, OED_ITCG)
    assert oed_itcg_command(START, V, QDOT0, t_go, 0.0, OED_ITCG) == pytest.approx(
        png_command(V, QDOT0, 4.0) + oed_itcg_bias(eps, START, V, t_go, OED_ITCG), rel=1e-15)


@given(eps=st.floats(-1e-3, 1e-3).filter(lambda e: abs(e) > 1e-12), t_go=st.floats(1.0, 60.0),
       theta=st.floats(0.05, 1.0))
def test_itcg_linearizes_to_oed(eps, t_go, theta):
    rel = RelativeState(20000.0, 0.0, theta)
    spec = GuidanceSpec(Law.FETCED_ITCG, N=4.0, K=5.0, T_s=t_go, t_d=45.0)
    ratio = itcg_bias(eps, rel, V, 0.0, spec) / oed_itcg_bias(eps, rel, V, t_go, OED_ITCG)
    assert 0.999 <= ratio <= 1.001


def test_itcg_bias_increases_flight_time():
    # Positive eps_t means the missile is early; the bias must raise the leading angle.
    eps = impact_time_error(START, V, 0.0, ITCG)
    a_it = itcg_bias(eps, START, V, 0.0, ITCG)
    assert impact_time_error_rate_approx(START, V, a_it, 4.0) < 0.0


# --- impact-time error rate ---------------------------------------------------

def test_full_rate_examples():
    zero = RelativeState(20000.0, 0.0, 0.0)
    assert impact_time_error_rate_full(zero, V, None, 0.0, 4.0) == 0.0
    assert impact_time_error_rate_full(START, V, None, 0.0, 4.0) == pytest.approx(-0.023725989, abs=1e-8)


def test_full_rate_matches_flow_of_estimate():
    # Independent route: central-difference t_f along a short exact PNG flight.
    # Under PNG the impact-time error rate is minus the drift of the estimate.
    target = TargetState()
    m0 = MissileState(-20000.0 * math.cos(Q0), -20000.0 * math.sin(Q0), V, 0.0)
    h = 1e-3

    def estimate_after(sign):
        m, dt = m0, sign * h / 10
        for _ in range(10):
            rel = relative_from_inertial(m, target)
            m = _integrate(m, png_command(V, -V * math.sin(rel.theta_m) / rel.r, 4.0), dt, "RK4")
        rel = relative_from_inertial(m, target)
        return estimate_impact_time(rel.r, V, rel.theta_m, sign * h, 4.0)

    fd = -(estimate_after(1) - estimate_after(-1)) / (2 * h)
    assert fd == pytest.approx(-0.023725989, abs=2e-6)


@given(theta=st.floats(-1.2, 1.2), a=st.floats(-100.0, 100.0), r=st.floats(100.0, 30000.0))
def test_full_minus_approx_independent_of_bias(theta, a, r):
    rel = RelativeState(r, 0.0, theta)
    d0 = impact_time_error_rate_full(rel, V, None, 0.0, 4.0) - impact_time_error_rate_approx(rel, V, 0.0, 4.0)
    d1 = impact_time_error_rate_full(rel, V, None, a, 4.0) - impact_time_error_rate_approx(rel, V, a, 4.0)
    assert d1 == pytest.approx(d0, abs=1e-9)


@given(theta=st.floats(-1.0, 1.0), a=st.floats(-100.0, 100.0), r=st.floats(100.0, 30000.0))
def test_full_rate_measured_form_agrees_with_png_form(theta, a, r):
    rel = RelativeState(r, 0.0, theta)
    q_dot = -V * math.sin(theta) / r
    theta_dot = (png_command(V, q_dot, 4.0) + a) / V - q_dot
    assert impact_time_error_rate_full(rel, V, theta_dot, 0.0, 4.0) == pytest.approx(
        impact_time_error_rate_full(rel, V, None, a, 4.0), abs=1e-12)


# --- dispatch -------------------------------------------------------------------

def test_command_dispatch():
    lacg = GuidanceSpec(Law.FETCED_LACG, K=3.0, T_s=20.0)
    png = GuidanceSpec(Law.PNG, N=4.0)
    assert command(START, V, 0.0, 0.0, png) == pytest.approx(png_command(V, QDOT0, 4.0), rel=1e-12)
    assert command(START, V, 0.0, 0.0, lacg) == lacg_command(START, V, 0.0, 3.0, 20.0)
    assert command(START, V, 0.0, 0.0, IACG) == iacg_command(START, V, QDOT0, 0.0, 0.0, IACG)
    assert command(START, V, 0.0, 0.0, ITCG) == itcg_command(START, V, QDOT0, 0.0, ITCG)
    assert command(START, V, 0.0, 0.0, OED_ITCG) == pytest.approx(
        oed_itcg_command(START, V, QDOT0, 40.0, 0.0, OED_ITCG), rel=1e-12)


def test_read_errors():
    e = read_errors(START, V, 0.0, 0.0, IACG)
    assert e.eps_theta == START.theta_m and e.eps_t is None
    assert e.active(Law.FETCED_IACG) == e.eps_phi
    e = read_errors(START, V, 0.0, 0.0, ITCG)
    assert e.eps_phi is None and e.active(Law.FETCED_ITCG) == e.eps_t
    assert read_errors(START, V, 0.0, 0.0, GuidanceSpec(Law.PNG, N=3.0)).active(Law.PNG) == START.theta_m
