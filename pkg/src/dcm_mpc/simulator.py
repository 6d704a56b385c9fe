"""Closed-loop harness: RK4 pendulum plant at an inner time step, the MPC at
the control period with zero-order-hold commands, CoM push injection, fall
detection, and the push-envelope / controller-comparison protocols.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gait_plan import (
    build_plan,
    build_references,
    build_vertical_profile,
    FootstepPlan,
    PhaseTimeline,
)
from .lip_model import ComState, GRAVITY, cmp_from_cop, integrate_plant
from .mpc import FallPredictedError, MpcConfig, WalkingMpc

CONTROLLER_MODES = {
    "cop-only": dict(step_adjust=False, cmp_modulation=False),
    "cop+step": dict(step_adjust=True, cmp_modulation=False),
    "cop+cmp": dict(step_adjust=False, cmp_modulation=True),
    "cop+step+cmp": dict(step_adjust=True, cmp_modulation=True),
}


@dataclass(frozen=True)
class PushEvent:
    force: np.ndarray  # (2,) N, applied at the CoM
    start: float  # s
    duration: float  # s

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float).reshape(2))
        if self.duration <= 0:
            raise ValueError("push duration must be positive")

    def active(self, t: float) -> bool:
        return self.start <= t < self.start + self.duration


@dataclass
class Scenario:
    name: str = "scenario"
    step_count: int = 3
    step_length: float = 0.3
    step_width: float = 0.2
    durations: dict = field(
        default_factory=lambda: dict(initial_dsp=1.0, dsp=0.2, ssp=0.6, final_dsp=2.0)
    )
    control_period: float = 0.05
    half_length: float = 0.115
    half_width: float = 0.065
    vertical_waypoints: list | None = None  # [(t, z)]; None -> constant com_height
    com_height: float = 0.85
    mpc: MpcConfig = field(default_factory=MpcConfig)
    pushes: list = field(default_factory=list)
    contact_half: tuple | None = None  # narrowed CoP half-extents per axis
    inner_dt: float = 1e-3
    mass: float = 90.0
    gravity: float = GRAVITY
    seed: int = 0

    def with_mode(self, mode: str) -> "Scenario":
        flags = CONTROLLER_MODES[mode]
        return replace(self, mpc=replace(self.mpc, **flags))


@dataclass
class SimLog:
    scenario: Scenario
    t: np.ndarray
    com: np.ndarray  # (n, 2)
    com_z: np.ndarray
    vel: np.ndarray  # (n, 2)
    dcm: np.ndarray  # (n, 2)
    cop: np.ndarray  # (n, 2)
    cmp: np.ndarray  # (n, 2)
    hdot: np.ndarray  # (n, 2) physical (Hdot_x, Hdot_y)
    hddot: np.ndarray  # (n, 2)
    foothold_id: np.ndarray  # (n,)
    push_active: np.ndarray  # (n,) 0/1
    control_ticks: list  # dicts per control tick
    footholds_final: np.ndarray
    outcome: str  # "completed" | "fell"
    fall_time: float | None = None
    fall_reason: str | None = None

    @property
    def completed(self) -> bool:
        return self.outcome == "completed"

    def peak_hdot(self) -> float:
        return float(np.max(np.abs(self.hdot))) if len(self.hdot) else 0.0

    def max_foothold_deviation(self, plan: FootstepPlan | None = None) -> float:
        fh = self.footholds_final
        nom = self.nominal_footholds
        return float(np.max(np.abs(fh - nom))) if len(fh) else 0.0

    nominal_footholds: np.ndarray = None


@dataclass
class RecoveryEnvelope:
    direction: np.ndarray
    duration: float
    magnitude: float  # max recoverable push (N)
    bracket: tuple
    tolerance: float
    capped: bool
    trace: list  # (magnitude, recovered) pairs in evaluation order


def _axis_momentum_to_physical(h):
    """Map per-axis momentum states (h_x = Hdot_y, h_y = -Hdot_x) back."""
    return np.array([-h[1], h[0]])


def build_world(scenario: Scenario):
    plan, timeline = build_plan(
        scenario.step_count,
        scenario.step_length,
        scenario.step_width,
        scenario.durations,
        scenario.control_period,
        half_length=scenario.half_length,
        half_width=scenario.half_width,
    )
    wps = scenario.vertical_waypoints
    if wps is None:
        wps = [(0.0, scenario.com_height), (timeline.total_duration, scenario.com_height)]
    profile = build_vertical_profile(wps, timeline, g=scenario.gravity)
    refs = build_references(plan, timeline, profile)
    controller = WalkingMpc(
        plan,
        timeline,
        profile,
        refs,
        scenario.mpc,
        mass=scenario.mass,
        g=scenario.gravity,
        contact_half=scenario.contact_half,
    )
    return plan, timeline, profile, refs, controller


def run(scenario: Scenario) -> SimLog:
    """Simulate one scenario to completion or fall."""
    plan, timeline, profile, refs, controller = build_world(scenario)
    T = scenario.control_period
    dt = scenario.inner_dt
    substeps = int(round(T / dt))
    if abs(substeps * dt - T) > 1e-12:
        raise ValueError("control period must be a multiple of the inner dt")
    K = timeline.total_ticks
    mass, g = scenario.mass, scenario.gravity
    n_total = K * substeps + 1

    log_t = np.zeros(n_total)
    log_com = np.zeros((n_total, 2))
    log_z = np.zeros(n_total)
    log_v = np.zeros((n_total, 2))
    log_dcm = np.zeros((n_total, 2))
    log_cop = np.zeros((n_total, 2))
    log_cmp = np.zeros((n_total, 2))
    log_hdot = np.zeros((n_total, 2))
    log_hddot = np.zeros((n_total, 2))
    log_fid = np.zeros(n_total, dtype=int)
    log_push = np.zeros(n_total, dtype=int)
    control_ticks = []

    mid0 = 0.5 * (plan.positions[0] + plan.positions[1])
    z0, zd0, zdd0 = profile.sample(0.0)
    state = ComState(x=mid0.copy(), v=np.zeros(2), z=z0, zd=zd0, zdd=zdd0)
    cop = mid0.copy()
    h = np.zeros(2)  # axis-mapped momentum states
    hdd = np.zeros(2)
    pending_adjust = {}  # foothold id -> latest adjusted position
    l_bound = scenario.mpc.reach_bound
    dcm_out_ticks = 0
    outcome, fall_time, fall_reason = "completed", None, None
    idx = 0

    def record(i, t, push_on):
        w = np.sqrt(g / state.z)
        log_t[i] = t
        log_com[i] = state.x
        log_z[i] = state.z
        log_v[i] = state.v
        log_dcm[i] = state.x + state.v / w
        log_cop[i] = cop
        log_cmp[i] = cmp_from_cop(cop, _axis_momentum_to_physical(h), mass, state.zdd, g)
        log_hdot[i] = _axis_momentum_to_physical(h)
        log_hddot[i] = _axis_momentum_to_physical(hdd)
        log_fid[i] = timeline.owner[min(int(t / T), K)]
        log_push[i] = int(push_on)

    for k in range(K):
        t_k = k * T
        # Commit adjusted footholds at their touchdown tick, then rebuild the
        # references so the remaining gait continues from the adjusted plan.
        committed = False
        for fid, td in timeline.touchdown.items():
            if td == k and fid in pending_adjust:
                plan.commit_foothold(fid, pending_adjust.pop(fid))
                committed = True
        if committed:
            new_refs = build_references(plan, timeline, profile)
            refs.cop_ref[:] = new_refs.cop_ref
            refs.xi_ref[:] = new_refs.xi_ref

        w_k = profile.omega[k]
        dcm = state.x + state.v / np.sqrt(g / state.z)
        psi_x = np.array([dcm[0], state.x[0], h[0], cop[0]])
        psi_y = np.array([dcm[1], state.x[1], h[1], cop[1]])
        try:
            out = controller.solve_tick(k, psi_x, psi_y)
        except FallPredictedError as exc:
            outcome, fall_time = "fell", t_k
            fall_reason = f"qp-infeasible(axis={exc.axis})"
            break
        for fid, posn in out.adjusted_footholds().items():
            pending_adjust[fid] = posn
        hdd = np.array([out.hddot0[0], out.hddot0[1]])
        cop_rate = out.cop_rate0
        control_ticks.append(
            dict(
                tick=k,
                t=t_k,
                status="optimal",
                cost=[ax.cost for ax in out.axes],
                iterations=[ax.iterations for ax in out.axes],
                footholds={fid: v.tolist() for fid, v in out.adjusted_footholds().items()},
            )
        )

        for s in range(substeps):
            t = t_k + s * dt
            push_acc = np.zeros(2)
            push_on = False
            for ev in scenario.pushes:
                if ev.active(t):
                    push_acc += ev.force / mass
                    push_on = True
            record(idx, t, push_on)
            idx += 1
            z, zd, zdd = profile.sample(t)
            state.z, state.zd, state.zdd = z, zd, zdd
            state = integrate_plant(
                state,
                cop,
                _axis_momentum_to_physical(h),
                dt,
                mass,
                g=g,
                push_accel=push_acc,
            )
            cop = cop + cop_rate * dt
            h = h + hdd * dt

        # Fall detection on the control grid.
        w_now = np.sqrt(g / state.z)
        dcm_now = state.x + state.v / w_now
        reach_gap = np.maximum(np.abs(dcm_now - state.x) - l_bound, 0.0)
        if np.linalg.norm(reach_gap) > 0:
            dcm_out_ticks += 1
        else:
            dcm_out_ticks = 0
        if dcm_out_ticks >= timeline.step_ticks:
            outcome, fall_time, fall_reason = "fell", (k + 1) * T, "dcm-divergence"
            break
        if np.linalg.norm(state.x - cop) > 1.5 * l_bound:
            outcome, fall_time, fall_reason = "fell", (k + 1) * T, "com-cop-excursion"
            break

    if outcome == "completed":
        z, zd, zdd = profile.sample(K * T)
        state.z, state.zd, state.zdd = z, zd, zdd
        record(idx, K * T, False)
        idx += 1

    log = SimLog(
        scenario=scenario,
        t=log_t[:idx],
        com=log_com[:idx],
        com_z=log_z[:idx],
        vel=log_v[:idx],
        dcm=log_dcm[:idx],
        cop=log_cop[:idx],
        cmp=log_cmp[:idx],
        hdot=log_hdot[:idx],
        hddot=log_hddot[:idx],
        foothold_id=log_fid[:idx],
        push_active=log_push[:idx],
        control_ticks=control_ticks,
        footholds_final=plan.positions.copy(),
        outcome=outcome,
        fall_time=fall_time,
        fall_reason=fall_reason,
    )
    log.nominal_footholds = plan.nominal.copy()
    return log


def detect_fall(log: SimLog) -> str | None:
    """Fall reason of a finished run, if any."""
    return log.fall_reason


def default_push_start(scenario: Scenario) -> float:
    """Midpoint of the first SSP, the default onset for envelope pushes."""
    _, timeline = build_plan(
        scenario.step_count,
        scenario.step_length,
        scenario.step_width,
        scenario.durations,
        scenario.control_period,
    )
    for seg in timeline.segments:
        if seg.kind == "ssp":
            return (seg.start_tick + 0.5 * seg.ticks) * timeline.T
    raise ValueError("timeline has no SSP")


def recoverable(scenario: Scenario, direction, magnitude: float, duration: float, start: float | None = None) -> bool:
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    if start is None:
        start = default_push_start(scenario)
    pushes = list(scenario.pushes) + [
        PushEvent(force=direction * magnitude, start=start, duration=duration)
    ]
    return run(replace(scenario, pushes=pushes)).completed


def max_recoverable_push(
    scenario: Scenario,
    direction,
    duration: float = 0.1,
    bracket: tuple = (0.0, 500.0),
    tol: float = 5.0,
    cap: float = 2000.0,
    start: float | None = None,
) -> RecoveryEnvelope:
    """Bisect the push magnitude between recoverable and non-recoverable."""
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    lo, hi = float(bracket[0]), float(bracket[1])
    trace = []

    def check(mag):
        ok = recoverable(scenario, direction, mag, duration, start=start)
        trace.append((mag, ok))
        return ok

    if lo > 0 and not check(lo):
        while lo > tol:
            lo /= 2.0
            if check(lo):
                break
        else:
            lo = 0.0
    capped = False
    while check(hi):
        lo = hi
        hi = min(2.0 * hi, cap)
        if hi == lo:  # recoverable at the cap
            capped = True
            break
    if not capped:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if check(mid):
                lo = mid
            else:
                hi = mid
    return RecoveryEnvelope(
        direction=direction,
        duration=duration,
        magnitude=lo,
        bracket=(lo, hi),
        tolerance=tol,
        capped=capped,
        trace=trace,
    )


def compare_controllers(
    scenario: Scenario,
    modes: list,
    duration: float = 0.1,
    tol: float = 5.0,
    bracket: tuple = (0.0, 500.0),
) -> list:
    """Same gait / weights / pushes for every mode; per-mode outcome,
    envelopes along +x and +y, peak momentum rate and foothold deviation."""
    rows = []
    for mode in modes:
        sc = scenario.with_mode(mode)
        log = run(sc)
        env_x = max_recoverable_push(sc, (1.0, 0.0), duration, bracket, tol)
        env_y = max_recoverable_push(sc, (0.0, 1.0), duration, bracket, tol)
        rows.append(
            dict(
                mode=mode,
                outcome=log.outcome,
                envelope_forward=env_x.magnitude,
                envelope_lateral=env_y.magnitude,
                peak_hdot=log.peak_hdot(),
                max_foothold_deviation=log.max_foothold_deviation(),
            )
        )
    return rows
