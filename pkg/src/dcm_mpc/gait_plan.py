"""Nominal walking plan: footstep layout, DSP/SSP phase timeline, vertical
CoM profile with the derived natural-frequency trajectory, and reference
CoP/DCM trajectories on the control-tick grid.

Tick convention: the timeline has K = total_duration / T ticks; grid points
k = 0..K carry per-tick attributes (phase, owning foothold, references).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .lip_model import GRAVITY, OMEGA_MIN


class ConfigurationError(ValueError):
    """Inconsistent gait or scenario parameters."""


class ProfileError(ValueError):
    """Vertical profile violates omega or contact-force bounds."""


# Default foot rectangle half-extents (m) for an adult-size biped;
# configurable per scenario.
DEFAULT_HALF_LENGTH = 0.115
DEFAULT_HALF_WIDTH = 0.065


def _ticks_of(duration: float, T: float, name: str) -> int:
    n = duration / T
    if abs(n - round(n)) > 1e-9 or round(n) <= 0:
        raise ConfigurationError(f"{name} duration {duration} is not a positive multiple of T={T}")
    return int(round(n))


@dataclass
class FootstepPlan:
    """Ordered foothold placements; indices 0 and 1 are the initial stance feet."""

    positions: np.ndarray  # (n_footholds, 2)
    sides: list[str]  # "left" / "right" per foothold
    step_length: float
    step_width: float
    half_length: float = DEFAULT_HALF_LENGTH
    half_width: float = DEFAULT_HALF_WIDTH
    nominal: np.ndarray = field(default=None)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        if self.nominal is None:
            self.nominal = self.positions.copy()

    def half_extent(self, axis: int) -> float:
        return self.half_length if axis == 0 else self.half_width

    def commit_foothold(self, idx: int, position: np.ndarray) -> None:
        """Freeze an adjusted foothold at touchdown and carry the shift into
        the not-yet-planned footholds so the gait continues from it."""
        delta = np.asarray(position, dtype=float) - self.positions[idx]
        self.positions[idx] = position
        if idx + 1 < len(self.positions):
            self.positions[idx + 1 :] += delta


@dataclass(frozen=True)
class PhaseSegment:
    kind: str  # "initial_dsp" | "ssp" | "dsp" | "final_dsp"
    duration: float
    ticks: int
    start_tick: int
    support: tuple[int, ...]  # foothold ids on the ground
    owner: int  # foothold the segment's ticks are assigned to


@dataclass
class PhaseTimeline:
    segments: list[PhaseSegment]
    T: float
    total_ticks: int
    owner: np.ndarray  # (K+1,) owning foothold per grid point
    feet: list[tuple[int, ...]]  # footholds on the ground per grid point
    kind: list[str]  # phase kind per grid point
    touchdown: dict[int, int]  # foothold id -> touchdown tick
    step_ticks: int  # one SSP + one middle DSP, in ticks

    @property
    def total_duration(self) -> float:
        return self.total_ticks * self.T


def build_plan(
    step_count: int,
    step_length: float,
    step_width: float,
    durations: dict[str, float],
    T: float,
    half_length: float = DEFAULT_HALF_LENGTH,
    half_width: float = DEFAULT_HALF_WIDTH,
) -> tuple[FootstepPlan, PhaseTimeline]:
    """Lay out alternating footholds and the DSP/SSP phase timeline.

    `durations` keys: initial_dsp, dsp, ssp, final_dsp (seconds, multiples of T).
    The first swing foot is the right one; foothold 0 is the initial left foot
    at +step_width/2, foothold 1 the initial right foot at -step_width/2.
    """
    if step_count < 1:
        raise ConfigurationError("step_count must be >= 1")
    n_init = _ticks_of(durations["initial_dsp"], T, "initial_dsp")
    n_ssp = _ticks_of(durations["ssp"], T, "ssp")
    n_dsp = _ticks_of(durations["dsp"], T, "dsp") if step_count > 1 else 0
    n_final = _ticks_of(durations["final_dsp"], T, "final_dsp")

    positions = [np.array([0.0, +step_width / 2]), np.array([0.0, -step_width / 2])]
    sides = ["left", "right"]
    for i in range(1, step_count + 1):
        swing = "right" if i % 2 == 1 else "left"
        y = -step_width / 2 if swing == "right" else +step_width / 2
        positions.append(np.array([i * step_length, y]))
        sides.append(swing)
    plan = FootstepPlan(
        positions=np.array(positions),
        sides=sides,
        step_length=step_length,
        step_width=step_width,
        half_length=half_length,
        half_width=half_width,
    )

    def support_of_ssp(i: int) -> int:
        return 0 if i == 1 else i

    segments: list[PhaseSegment] = []
    tick = 0
    segments.append(
        PhaseSegment("initial_dsp", durations["initial_dsp"], n_init, 0, (0, 1), support_of_ssp(1))
    )
    tick += n_init
    for i in range(1, step_count + 1):
        sup = support_of_ssp(i)
        segments.append(PhaseSegment("ssp", durations["ssp"], n_ssp, tick, (sup,), sup))
        tick += n_ssp
        landed = i + 1
        if i < step_count:
            segments.append(
                PhaseSegment("dsp", durations["dsp"], n_dsp, tick, (sup, landed), landed)
            )
            tick += n_dsp
        else:
            segments.append(
                PhaseSegment(
                    "final_dsp", durations["final_dsp"], n_final, tick, (sup, landed), landed
                )
            )
            tick += n_final
    K = tick

    owner = np.zeros(K + 1, dtype=int)
    feet: list[tuple[int, ...]] = [()] * (K + 1)
    kind: list[str] = [""] * (K + 1)
    for seg in segments:
        for k in range(seg.start_tick, seg.start_tick + seg.ticks + 1):
            owner[k] = seg.owner
            feet[k] = seg.support
            kind[k] = seg.kind
    touchdown = {0: 0, 1: 0}
    for seg in segments:
        if seg.kind in ("dsp", "final_dsp"):
            touchdown.setdefault(seg.owner, seg.start_tick)

    timeline = PhaseTimeline(
        segments=segments,
        T=T,
        total_ticks=K,
        owner=owner,
        feet=feet,
        kind=kind,
        touchdown=touchdown,
        step_ticks=n_ssp + max(n_dsp, 1),
    )
    return plan, timeline


@dataclass
class VerticalProfile:
    """Sampled vertical CoM motion and the quasi-static natural frequency.

    omega = sqrt(g/z) per tick; omega_dot by centered finite difference at the
    control period (one-sided at the ends).
    """

    T: float
    g: float
    z: np.ndarray
    zd: np.ndarray
    zdd: np.ndarray
    omega: np.ndarray
    omega_dot: np.ndarray
    _spline: object = None

    def sample(self, t: float) -> tuple[float, float, float]:
        """(z, zd, zdd) at an arbitrary time, for the inner simulation loop."""
        if self._spline is None:
            return float(self.z[0]), 0.0, 0.0
        t = min(max(t, 0.0), (len(self.z) - 1) * self.T)
        return (
            float(self._spline(t)),
            float(self._spline(t, 1)),
            float(self._spline(t, 2)),
        )


def build_vertical_profile(
    waypoints: list[tuple[float, float]],
    timeline: PhaseTimeline,
    g: float = GRAVITY,
) -> VerticalProfile:
    """Cubic spline with zero end-slope through (time, height) waypoints."""
    T, K = timeline.T, timeline.total_ticks
    times = np.array([w[0] for w in waypoints], dtype=float)
    heights = np.array([w[1] for w in waypoints], dtype=float)
    if np.any(heights <= 0):
        raise ProfileError("waypoint heights must be positive")
    if np.any(np.diff(times) <= 0):
        raise ProfileError("waypoint times must be strictly increasing")
    if times[0] > 1e-9 or times[-1] < timeline.total_duration - 1e-9:
        raise ProfileError("waypoints must span the whole timeline")

    grid = np.arange(K + 1) * T
    if len(times) == 1 or np.ptp(heights) == 0.0:
        z = np.full(K + 1, heights[0])
        zd = np.zeros(K + 1)
        zdd = np.zeros(K + 1)
        spline = None
    else:
        spline = CubicSpline(times, heights, bc_type="clamped")
        z = spline(grid)
        zd = spline(grid, 1)
        zdd = spline(grid, 2)

    if np.any(z <= 0):
        raise ProfileError("spline height goes non-positive")
    if np.any(g + zdd <= 0):
        raise ProfileError("vertical acceleration reaches free fall (g + zdd <= 0)")
    omega = np.sqrt(g / z)
    if np.any(omega <= OMEGA_MIN):
        raise ProfileError("natural frequency falls below the admissible bound")
    omega_dot = np.gradient(omega, T) if spline is not None else np.zeros(K + 1)
    return VerticalProfile(T=T, g=g, z=z, zd=zd, zdd=zdd, omega=omega, omega_dot=omega_dot, _spline=spline)


@dataclass
class ReferenceTrajectories:
    cop_ref: np.ndarray  # (K+1, 2)
    xi_ref: np.ndarray  # (K+1, 2)


# Duration of the terminal hold: the reference reaches its endpoint this
# long before the gait ends, leaving the closed loop a stationary window to
# settle in.
SETTLE_TIME = 0.9


def final_rest_ticks(timeline: PhaseTimeline) -> int:
    """Length (in ticks) of the stationary hold at the end of the final DSP."""
    seg = timeline.segments[-1]
    return min(seg.ticks // 2, int(round(SETTLE_TIME / timeline.T)))


def _final_blend_fraction(ticks: int, T: float) -> np.ndarray:
    """Blend fraction over the final DSP: smoothstep ease-out over the ramp
    portion, then a constant hold so the reference ends at rest."""
    settle = min(ticks // 2, int(round(SETTLE_TIME / T)))
    ramp = max(ticks - settle, 1)
    s = np.minimum(np.arange(ticks + 1) / ramp, 1.0)
    return s * s * (3.0 - 2.0 * s)


def build_reference_cop(plan: FootstepPlan, timeline: PhaseTimeline) -> np.ndarray:
    """Reference CoP per grid point: foot center in SSP, linear blend in DSP."""
    K = timeline.total_ticks
    cop = np.zeros((K + 1, 2))
    pos = plan.positions
    for seg in timeline.segments:
        i0, i1 = seg.start_tick, seg.start_tick + seg.ticks
        if seg.kind == "ssp":
            cop[i0 : i1 + 1] = pos[seg.support[0]]
            continue
        if seg.kind == "initial_dsp":
            start = 0.5 * (pos[0] + pos[1])
            end = pos[seg.owner]
        elif seg.kind == "dsp":
            prev_sup, next_sup = seg.support
            start, end = pos[prev_sup], pos[next_sup]
        else:  # final_dsp
            prev_sup, landed = seg.support
            start = pos[prev_sup]
            end = 0.5 * (pos[prev_sup] + pos[landed])
            # Finish the blend early with an ease-out profile and hold the
            # endpoint: the reference arrives at rest, so the terminal state
            # can settle onto it without a velocity-lag offset.
            frac = _final_blend_fraction(seg.ticks, timeline.T)[:, None]
            cop[i0 : i1 + 1] = (1 - frac) * start + frac * end
            continue
        frac = np.linspace(0.0, 1.0, seg.ticks + 1)[:, None]
        cop[i0 : i1 + 1] = (1 - frac) * start + frac * end
    return cop


def reference_foothold_gain(timeline: PhaseTimeline) -> np.ndarray:
    """Sensitivity of the reference CoP to the owning foothold position.

    1 during SSP (the reference sits on the foot), the blend fraction during
    DSP, and half the (plateaued) ramp fraction during the final DSP where
    the reference ends at the midpoint of the last two feet. Used to keep
    foothold-relative tracking terms consistent with the reference shape.
    """
    K = timeline.total_ticks
    gain = np.zeros(K + 1)
    for seg in timeline.segments:
        i0, i1 = seg.start_tick, seg.start_tick + seg.ticks
        if seg.kind == "ssp":
            gain[i0 : i1 + 1] = 1.0
        elif seg.kind == "final_dsp":
            gain[i0 : i1 + 1] = 0.5 * _final_blend_fraction(seg.ticks, timeline.T)
        else:
            gain[i0 : i1 + 1] = np.linspace(0.0, 1.0, seg.ticks + 1)
    return gain


def build_reference_dcm(
    cop_ref: np.ndarray, profile: VerticalProfile, timeline: PhaseTimeline
) -> np.ndarray:
    """Reference DCM by backward recursion of the discrete DCM dynamics with
    zero momentum, terminal condition xi_N = cop_ref_N. Continuous by
    construction even when omega varies."""
    T, K = timeline.T, timeline.total_ticks
    xi = np.zeros_like(cop_ref)
    xi[K] = cop_ref[K]
    gain = (profile.omega**2 - profile.omega_dot) / profile.omega
    for k in range(K - 1, -1, -1):
        a = T * gain[k]
        xi[k] = (xi[k + 1] + a * cop_ref[k]) / (1.0 + a)
    return xi


def build_references(
    plan: FootstepPlan, timeline: PhaseTimeline, profile: VerticalProfile
) -> ReferenceTrajectories:
    cop = build_reference_cop(plan, timeline)
    return ReferenceTrajectories(cop_ref=cop, xi_ref=build_reference_dcm(cop, profile, timeline))
