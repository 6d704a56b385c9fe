"""Closed-loop simulator tests: determinism, purity, fall handling, pushes."""

import numpy as np
import pytest
from dataclasses import replace

from dcm_mpc.lip_model import ComState, Omega, integrate_plant
from dcm_mpc.mpc import MpcConfig, discretize
from dcm_mpc.simulator import (
    CONTROLLER_MODES,
    PushEvent,
    Scenario,
    default_push_start,
    run,
)


def small_scenario(**kw) -> Scenario:
    return Scenario(**kw)


def test_zero_push_run_completes():
    log = run(small_scenario())
    assert log.completed
    assert log.fall_reason is None
    assert np.all(log.push_active == 0)
    # The closed loop parks at rest near the final stance midpoint (the
    # exact endpoint is free: the terminal hold settles where it arrives).
    mid = 0.5 * (log.footholds_final[-1] + log.footholds_final[-2])
    assert np.max(np.abs(log.com[-1] - mid)) < 5e-2
    assert np.max(np.abs(log.vel[-1])) < 1e-4


def test_determinism_bitwise():
    sc = small_scenario(pushes=[PushEvent(force=np.array([80.0, 50.0]), start=1.5, duration=0.1)])
    a = run(sc)
    b = run(sc)
    for name in ("t", "com", "vel", "dcm", "cop", "cmp", "hdot"):
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()
    assert np.array_equal(a.footholds_final, b.footholds_final)


def test_baseline_purity():
    # Without CMP modulation the momentum channel must be exactly silent.
    sc = small_scenario(
        mpc=MpcConfig(**CONTROLLER_MODES["cop+step"]),
        pushes=[PushEvent(force=np.array([100.0, 60.0]), start=1.5, duration=0.1)],
    )
    log = run(sc)
    assert np.all(log.hdot == 0.0)
    assert np.array_equal(log.cmp, log.cop)


def test_cmp_mode_uses_momentum():
    sc = small_scenario(
        mpc=MpcConfig(**CONTROLLER_MODES["cop+step+cmp"]),
        pushes=[PushEvent(force=np.array([150.0, 0.0]), start=1.5, duration=0.1)],
    )
    log = run(sc)
    assert log.completed
    assert log.peak_hdot() > 0.1


def test_plant_matches_model_over_one_period():
    # Held inputs, constant height: the Euler prediction and the RK4 plant
    # stay within the documented discretization gap over one control period.
    T, dt, z, mass = 0.06, 1e-3, 0.85, 90.0
    w = Omega(float(np.sqrt(9.81 / z)))
    A, B = discretize(w, 0.0, mass, 9.81, T)
    psi = np.array([0.05, 0.02, 0.0, 0.01])  # dcm, com, hdot, cop
    u = np.array([0.0, 0.1])  # no momentum rate, slow cop slide
    pred = A @ psi + B @ u
    v0 = w.value * (psi[0] - psi[1])
    s = ComState(x=np.array([psi[1], 0.0]), v=np.array([v0, 0.0]), z=z)
    cop = psi[3]
    for _ in range(int(T / dt)):
        s = integrate_plant(s, np.array([cop, 0.0]), (0.0, 0.0), dt, mass)
        cop += u[1] * dt
    dcm_plant = s.x[0] + s.v[0] / w.value
    assert abs(dcm_plant - pred[0]) < 1e-3
    assert abs(s.x[0] - pred[1]) < 1e-3


def test_extreme_push_falls_with_reason():
    sc = small_scenario(
        mpc=MpcConfig(**CONTROLLER_MODES["cop+step"], foothold_bounds=((-0.05, 0.05), (-0.03, 0.03))),
        contact_half=(0.04, 0.04),
        pushes=[PushEvent(force=np.array([500.0, 400.0]), start=1.5, duration=0.1)],
    )
    log = run(sc)
    assert log.outcome == "fell"
    assert log.fall_time is not None
    assert log.fall_reason.startswith(("qp-infeasible", "dcm-divergence", "com-cop-excursion"))
    # The log stops at the fall instead of padding to the full gait.
    assert log.t[-1] <= log.fall_time + 1e-9


def test_push_event_window():
    ev = PushEvent(force=np.array([10.0, 0.0]), start=1.0, duration=0.2)
    assert not ev.active(0.999)
    assert ev.active(1.0)
    assert ev.active(1.1999)
    assert not ev.active(1.2)
    with pytest.raises(ValueError):
        PushEvent(force=np.array([1.0, 0.0]), start=0.0, duration=0.0)


def test_push_active_rows_match_duration():
    sc = small_scenario(pushes=[PushEvent(force=np.array([50.0, 0.0]), start=1.5, duration=0.1)])
    log = run(sc)
    assert int(log.push_active.sum()) == 100  # 0.1 s at dt = 1e-3


def test_default_push_start_is_first_ssp_midpoint():
    # initial DSP ends at 1.0 s; the 0.6 s SSP's midpoint is 1.3 s.
    assert default_push_start(small_scenario()) == pytest.approx(1.3)


def test_with_mode_sets_flags():
    sc = small_scenario().with_mode("cop-only")
    assert not sc.mpc.step_adjust and not sc.mpc.cmp_modulation
    sc = sc.with_mode("cop+step+cmp")
    assert sc.mpc.step_adjust and sc.mpc.cmp_modulation


def test_inner_dt_must_divide_period():
    with pytest.raises(ValueError):
        run(small_scenario(inner_dt=3e-4))


def test_terminal_rest_without_push():
    log = run(small_scenario())
    assert np.max(np.abs(log.cop[-1] - log.dcm[-1])) <= 1e-5
    assert np.max(np.abs(log.cop[-1] - log.com[-1])) <= 1e-5
    assert np.max(np.abs(log.hdot[-1])) <= 1e-5
