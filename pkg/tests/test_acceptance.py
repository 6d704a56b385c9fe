"""Acceptance gate: one test per top-level criterion, one printed verdict each.

Every criterion prints `ACCEPTANCE <n> <name>: PASS|FAIL <detail>` before its
assertions so a failing run still reports the measured values.
"""

import itertools
import time
from dataclasses import replace

import numpy as np

from dcm_mpc.cli import main
from dcm_mpc.gait_plan import build_plan, build_references, build_vertical_profile
from dcm_mpc.lip_model import ComState, Omega, com_velocity, dcm_from_state, integrate_plant
from dcm_mpc.mpc import MpcConfig, WalkingMpc, condense, discretize
from dcm_mpc.qp_solver import ActiveSetQp, QpProblem, kkt_residual
from dcm_mpc.scenario_io import bundled_scenario_path, load_scenario
from dcm_mpc.simulator import max_recoverable_push, run

BUNDLED = ("fig2", "fig4_baseline", "fig5_baseline", "fig6_full")


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    verdict = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num} {name}: {verdict} {detail}".rstrip())


# -- criterion 1: model consistency -----------------------------------------


def test_criterion_1_model_consistency():
    rng = np.random.default_rng(1)
    # (a) condensation equals the tick recursion, N <= 20.
    cond_err = 0.0
    for N in (3, 11, 20):
        A_seq, B_seq = [], []
        for _ in range(N):
            w = Omega(float(rng.uniform(3.0, 3.8)), float(rng.uniform(-0.5, 0.5)))
            A, B = discretize(w, float(rng.uniform(-1, 1)), 90.0, 9.81, 0.05)
            A_seq.append(A)
            B_seq.append(B)
        Phi, Phi_u = condense(A_seq, B_seq)
        psi0 = rng.normal(size=4)
        u = rng.normal(size=2 * N)
        stacked = Phi @ psi0 + Phi_u @ u
        psi = psi0.copy()
        for j in range(N):
            psi = A_seq[j] @ psi + B_seq[j] @ u[2 * j : 2 * j + 2]
            cond_err = max(cond_err, float(np.max(np.abs(stacked[4 * j : 4 * j + 4] - psi))))

    # (b) DCM <-> velocity round trip is exact.
    w = Omega(3.4)
    x, v = rng.normal(size=2), rng.normal(size=2)
    rt_err = float(np.max(np.abs(com_velocity(dcm_from_state(x, v, w), x, w) - v)))

    # (c) plant matches the hyperbolic closed form over 1 s at dt = 1e-3.
    z = 0.8
    wv = np.sqrt(9.81 / z)
    cop = np.array([0.05, -0.02])
    x0, v0 = np.array([0.0, 0.01]), np.array([0.1, -0.05])
    s = ComState(x=x0, v=v0, z=z)
    for _ in range(1000):
        s = integrate_plant(s, cop, (0.0, 0.0), 1e-3, mass=90.0)
    x_exact = cop + (x0 - cop) * np.cosh(wv) + (v0 / wv) * np.sinh(wv)
    plant_err = float(np.max(np.abs(s.x - x_exact)))

    # (d) cost gradient matches central finite differences.
    from test_mpc import independent_cost, make_controller

    ctrl = make_controller()
    grad_err = 0.0
    for axis, k in ((0, 25), (1, 60)):
        psi0 = rng.normal(scale=0.05, size=4)
        problem, _ = ctrl.build_axis_qp(axis, k, psi0)
        u = rng.normal(scale=0.02, size=problem.n)
        analytic = problem.H @ u + problem.f
        h = 1e-6
        fd = np.zeros(problem.n)
        for i in range(problem.n):
            up, dn = u.copy(), u.copy()
            up[i] += h
            dn[i] -= h
            fd[i] = (
                independent_cost(ctrl, axis, k, psi0, up)
                - independent_cost(ctrl, axis, k, psi0, dn)
            ) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(fd))))
        grad_err = max(grad_err, float(np.max(np.abs(analytic - fd))) / scale)

    # "Exact" means exact to floating-point arithmetic: the divide/multiply
    # round trip legitimately carries a last-place rounding error.
    ok = cond_err <= 1e-12 and rt_err <= 4 * np.finfo(float).eps and plant_err < 1e-6 and grad_err < 1e-6
    report(
        1,
        "model-consistency",
        ok,
        f"(condense {cond_err:.1e}, round-trip {rt_err:.1e}, plant {plant_err:.1e}, grad {grad_err:.1e})",
    )
    assert ok


# -- criterion 2: QP oracle suite --------------------------------------------


def test_criterion_2_qp_oracle():
    from test_qp_solver import enumerate_oracle, feasible_lp, random_problem

    rng = np.random.default_rng(42)
    solver = ActiveSetQp()
    worst_kkt = 0.0
    worst_x = 0.0
    n_optimal = 0
    for _ in range(1000):
        p = random_problem(rng)
        sol = solver.solve(p)
        if sol.status == "infeasible":
            assert not feasible_lp(p)
            continue
        oracle = enumerate_oracle(p)
        assert oracle is not None
        worst_x = max(worst_x, float(np.max(np.abs(sol.x - oracle[0]))))
        worst_kkt = max(worst_kkt, max(kkt_residual(p, sol).values()))
        n_optimal += 1
    ok = worst_x < 1e-6 and worst_kkt <= 1e-8
    report(
        2,
        "qp-oracle",
        ok,
        f"({n_optimal} optimal, max |x - oracle| {worst_x:.1e}, max KKT {worst_kkt:.1e})",
    )
    assert ok


# -- criterion 3: terminal constraints on bundled scenarios ------------------


def test_criterion_3_terminal_constraints():
    details = []
    ok = True
    completed = 0
    for name in BUNDLED:
        log = run(load_scenario(bundled_scenario_path(name)))
        if not log.completed:
            details.append(f"{name}: fell")
            continue
        completed += 1
        r = max(
            float(np.max(np.abs(log.cop[-1] - log.dcm[-1]))),
            float(np.max(np.abs(log.cop[-1] - log.com[-1]))),
            float(np.max(np.abs(log.hdot[-1]))),
        )
        ok = ok and r <= 1e-5
        details.append(f"{name}: {r:.1e}")
    ok = ok and completed >= 3
    report(3, "terminal-constraints", ok, "(" + ", ".join(details) + ")")
    assert ok


# -- criterion 4: property reproduction of the momentum-recovery scenario ----


def test_criterion_4_momentum_recovery_properties():
    sc = load_scenario(bundled_scenario_path("fig2"))
    t0 = time.time()
    log = run(sc)
    runtime = time.time() - t0

    plan, timeline = build_plan(
        sc.step_count, sc.step_length, sc.step_width, sc.durations, sc.control_period
    )
    profile = build_vertical_profile(sc.vertical_waypoints, timeline)
    refs = build_references(plan, timeline, profile)

    half = np.minimum(
        [sc.half_length, sc.half_width], sc.contact_half if sc.contact_half else np.inf
    )
    substeps = int(round(sc.control_period / sc.inner_dt))
    sat_ticks = outside_ticks = both_ticks = 0
    for k in range(timeline.total_ticks + 1):
        i = min(k * substeps, len(log.t) - 1)
        feet = log.footholds_final[list(timeline.feet[k])]
        lo = feet.min(axis=0) - half
        hi = feet.max(axis=0) + half
        cop, cmp_ = log.cop[i], log.cmp[i]
        saturated = bool(np.any((np.abs(cop - lo) < 1e-4) | (np.abs(cop - hi) < 1e-4)))
        outside = bool(np.any((cmp_ < lo - 1e-6) | (cmp_ > hi + 1e-6)))
        sat_ticks += saturated
        outside_ticks += outside
        both_ticks += saturated and outside

    peak = log.peak_hdot()
    jump = float(np.max(np.abs(np.diff(refs.xi_ref, axis=0))))
    jump_bound = float(profile.omega.max()) * sc.control_period * 0.5
    ok = (
        log.completed
        and runtime < 10.0
        and both_ticks >= 1
        and 35.0 <= peak <= 140.0
        and jump < jump_bound
    )
    report(
        4,
        "momentum-recovery-properties",
        ok,
        f"({log.outcome} in {runtime:.1f}s, saturated+outside {both_ticks} ticks, "
        f"peak |Hdot| {peak:.1f} N*m, xi_ref jump {jump:.4f} < {jump_bound:.4f})",
    )
    assert ok


# -- criterion 5: controller-authority ordering -------------------------------


def test_criterion_5_envelope_ordering():
    sc = replace(load_scenario(bundled_scenario_path("fig4_baseline")), pushes=[])
    env = {}
    times = {}
    for mode in ("cop-only", "cop+step", "cop+step+cmp"):
        t0 = time.time()
        m = sc.with_mode(mode)
        env[mode] = (
            max_recoverable_push(m, (1.0, 0.0), duration=0.1, tol=5.0).magnitude,
            max_recoverable_push(m, (0.0, 1.0), duration=0.1, tol=5.0).magnitude,
        )
        times[mode] = time.time() - t0
    c, b, f = env["cop-only"], env["cop+step"], env["cop+step+cmp"]
    ok = (
        c[0] < b[0] < f[0]
        and c[1] < b[1] < f[1]
        and b[0] >= 120.0
        and b[1] >= 100.0
        and f[0] >= 1.3 * b[0]
        and f[1] >= 1.3 * b[1]
        and max(times.values()) < 120.0
    )
    report(
        5,
        "envelope-ordering",
        ok,
        f"(fwd {c[0]:.0f} < {b[0]:.0f} < {f[0]:.0f} N, lat {c[1]:.0f} < {b[1]:.0f} < {f[1]:.0f} N, "
        f"slowest mode {max(times.values()):.0f}s)",
    )
    assert ok


# -- criterion 6: baseline purity ---------------------------------------------


def test_criterion_6_baseline_purity():
    worst = 0.0
    identical = True
    for name in ("fig4_baseline", "fig5_baseline"):
        log = run(load_scenario(bundled_scenario_path(name)))
        worst = max(worst, float(np.max(np.abs(log.hdot))))
        identical = identical and np.array_equal(log.cmp, log.cop)
    ok = worst == 0.0 and identical
    report(6, "baseline-purity", ok, f"(max |Hdot| {worst:.1e}, CMP == CoP: {identical})")
    assert ok


# -- criterion 7: determinism --------------------------------------------------


def test_criterion_7_determinism(tmp_path):
    path = str(bundled_scenario_path("fig4_baseline"))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    main(["run", path, "--out", str(out1), "--no-plots"])
    main(["run", path, "--out", str(out2), "--no-plots"])
    same = (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
    report(7, "determinism", same, "(byte-identical trajectory.csv)")
    assert same
