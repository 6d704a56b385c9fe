"""Pendulum-model unit tests: DCM relations, CMP mapping, plant integration."""

import numpy as np
import pytest

from dcm_mpc.lip_model import (
    ComState,
    FreeFallError,
    FrequencySingularityError,
    Omega,
    cmp_from_cop,
    com_velocity,
    dcm_from_state,
    dcm_rate,
    integrate_plant,
    natural_frequency,
    vrp_from_cmp,
)


def test_dcm_velocity_round_trip():
    rng = np.random.default_rng(3)
    w = Omega(3.4)
    for _ in range(50):
        x = rng.normal(size=2)
        v = rng.normal(size=2)
        xi = dcm_from_state(x, v, w)
        assert np.allclose(com_velocity(xi, x, w), v, atol=1e-14)


def test_dcm_rate_constant_height():
    w = Omega(3.0, rate=0.0)
    xi = np.array([0.3, 0.1])
    vrp = np.array([0.1, 0.1])
    assert np.allclose(dcm_rate(xi, vrp, w), 3.0 * (xi - vrp))


def test_cmp_offset_signs():
    # Positive Hdot_y moves the CMP forward; positive Hdot_x moves it to -y.
    cop = np.zeros(2)
    out = cmp_from_cop(cop, hdot=(0.0, 88.29), mass=90.0)
    assert out[0] == pytest.approx(88.29 / (90.0 * 9.81))
    assert out[1] == 0.0
    out = cmp_from_cop(cop, hdot=(88.29, 0.0), mass=90.0)
    assert out[0] == 0.0
    assert out[1] == pytest.approx(-88.29 / (90.0 * 9.81))


def test_cmp_equals_cop_without_momentum():
    cop = np.array([0.2, -0.1])
    assert np.array_equal(cmp_from_cop(cop, (0.0, 0.0), mass=90.0), cop)


def test_cmp_free_fall_guard():
    with pytest.raises(FreeFallError):
        cmp_from_cop(np.zeros(2), (0.0, 10.0), mass=90.0, zdd=-20.0)


def test_omega_validation():
    with pytest.raises(ValueError):
        Omega(0.05)
    with pytest.raises(FrequencySingularityError):
        Omega(1.0, rate=2.0)
    w = natural_frequency(0.85)
    assert w.value == pytest.approx(np.sqrt(9.81 / 0.85))
    assert w.rate == 0.0


def test_vrp_height():
    w = Omega(np.sqrt(9.81 / 0.8))
    vrp = vrp_from_cmp((0.1, 0.0), w)
    assert vrp[2] == pytest.approx(0.8)


def test_plant_matches_hyperbolic_closed_form():
    # Constant height, fixed CoP, zero momentum: the analytic solution is
    # x(t) = cmp + (x0-cmp) cosh(w t) + (v0/w) sinh(w t).
    z = 0.8
    w = np.sqrt(9.81 / z)
    cop = np.array([0.05, -0.02])
    x0 = np.array([0.0, 0.01])
    v0 = np.array([0.1, -0.05])
    s = ComState(x=x0, v=v0, z=z)
    dt = 1e-3
    n = 1000
    for _ in range(n):
        s = integrate_plant(s, cop, (0.0, 0.0), dt, mass=90.0)
    t = n * dt
    x_exact = cop + (x0 - cop) * np.cosh(w * t) + (v0 / w) * np.sinh(w * t)
    v_exact = w * (x0 - cop) * np.sinh(w * t) + v0 * np.cosh(w * t)
    assert np.max(np.abs(s.x - x_exact)) < 1e-6
    assert np.max(np.abs(s.v - v_exact)) < 1e-6


def test_plant_push_acceleration():
    # A pure push on a balanced pendulum (x0 = cop) adds v = a t exactly in
    # the linear term; RK4 reproduces the short-time expansion closely.
    s = ComState(x=np.zeros(2), v=np.zeros(2), z=0.85)
    a = np.array([2.0, 0.0])
    s2 = integrate_plant(s, np.zeros(2), (0.0, 0.0), 1e-3, mass=90.0, push_accel=a)
    assert s2.v[0] == pytest.approx(2e-3, rel=1e-5)


def test_plant_rejects_bad_dt():
    s = ComState(x=np.zeros(2), v=np.zeros(2), z=0.85)
    with pytest.raises(ValueError):
        integrate_plant(s, np.zeros(2), (0.0, 0.0), 0.0, mass=90.0)
