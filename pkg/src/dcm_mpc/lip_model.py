"""Linear inverted pendulum with time-varying natural frequency.

Horizontal CoM dynamics about the centroidal moment pivot (CMP), the
divergent component of motion (DCM) split, and the kinematic relations
between CoP, CMP and the virtual repellent point (VRP). All horizontal
quantities are 2-vectors (x: sagittal, y: lateral) in meters; angular
momentum rates are in N*m.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

GRAVITY = 9.81
OMEGA_MIN = 0.1  # lower bound on the pendulum natural frequency (1/s)


class FreeFallError(ValueError):
    """Raised when the vertical contact force would vanish (g + zdd <= 0)."""


class FrequencySingularityError(ValueError):
    """Raised when omega^2 - omega_dot <= 0 and the VRP offset blows up."""


@dataclass(frozen=True)
class Omega:
    """Natural frequency of the pendulum and its rate.

    Attributes:
        value: omega(t) in 1/s, must exceed OMEGA_MIN.
        rate: d(omega)/dt in 1/s^2.
    """

    value: float
    rate: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.value) or not np.isfinite(self.rate):
            raise ValueError("omega must be finite")
        if self.value <= OMEGA_MIN:
            raise ValueError(f"omega = {self.value} must exceed {OMEGA_MIN} 1/s")
        if self.value**2 - self.rate <= 0.0:
            raise FrequencySingularityError(
                f"omega^2 - omega_dot = {self.value**2 - self.rate} must be positive"
            )

    @property
    def effective_rate_gain(self) -> float:
        """(omega^2 - omega_dot) / omega, the DCM convergence gain."""
        return (self.value**2 - self.rate) / self.value


@dataclass
class ComState:
    """Center-of-mass state: horizontal position/velocity plus vertical profile sample."""

    x: np.ndarray  # horizontal position (2,), m
    v: np.ndarray  # horizontal velocity (2,), m/s
    z: float = 0.75  # height, m
    zd: float = 0.0  # vertical velocity, m/s
    zdd: float = 0.0  # vertical acceleration, m/s^2

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(2).copy()
        self.v = np.asarray(self.v, dtype=float).reshape(2).copy()
        if self.z <= 0.0:
            raise ValueError("CoM height must be positive")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.v))):
            raise ValueError("CoM state must be finite")


def natural_frequency(z: float, g: float = GRAVITY) -> Omega:
    """Natural frequency omega0 = sqrt(g/z) of a pendulum at constant height z."""
    if z <= 0.0 or g <= 0.0:
        raise ValueError("height and gravity must be positive")
    return Omega(value=float(np.sqrt(g / z)), rate=0.0)


def dcm_from_state(x, v, w: Omega):
    """DCM xi = x + v/omega, elementwise over any matching shapes."""
    return np.asarray(x, dtype=float) + np.asarray(v, dtype=float) / w.value


def com_velocity(xi, x, w: Omega):
    """CoM velocity v = omega * (xi - x); the CoM follows the DCM."""
    return w.value * (np.asarray(xi, dtype=float) - np.asarray(x, dtype=float))


def dcm_rate(xi, vrp, w: Omega):
    """DCM rate (omega - omega_dot/omega) * (xi - vrp)."""
    gain = w.value - w.rate / w.value
    return gain * (np.asarray(xi, dtype=float) - np.asarray(vrp, dtype=float))


def cmp_from_cop(cop, hdot, mass: float, zdd: float = 0.0, g: float = GRAVITY):
    """CMP from the CoP and the centroidal angular-momentum rate.

    cmp_x = cop_x + Hdot_y / (m (g + zdd)); cmp_y = cop_y - Hdot_x / (m (g + zdd)).

    Args:
        cop: CoP (2,), m.
        hdot: angular-momentum rate (Hdot_x, Hdot_y), N*m.
        mass: robot mass, kg.
    """
    fz = mass * (g + zdd)
    if fz <= 0.0:
        raise FreeFallError(f"vertical contact force m(g+zdd) = {fz} is non-positive")
    cop = np.asarray(cop, dtype=float).reshape(2)
    hdot = np.asarray(hdot, dtype=float).reshape(2)
    return cop + np.array([hdot[1], -hdot[0]]) / fz


def vrp_from_cmp(cmp, w: Omega, g: float = GRAVITY) -> np.ndarray:
    """3D VRP: the CMP lifted by g / (omega^2 - omega_dot)."""
    denom = w.value**2 - w.rate
    if denom <= 0.0:
        raise FrequencySingularityError("omega^2 - omega_dot must be positive")
    cmp = np.asarray(cmp, dtype=float).reshape(2)
    return np.array([cmp[0], cmp[1], g / denom])


def integrate_plant(
    s: ComState,
    cop,
    hdot,
    dt: float,
    mass: float,
    g: float = GRAVITY,
    push_accel=None,
) -> ComState:
    """One fixed-step RK4 step of the pendulum about the CMP.

    Horizontal acceleration is omega^2 (x - cmp) with omega from the
    instantaneous height; the CoP, momentum rate and vertical states are
    held constant over the step (the caller resamples them per step).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    cmp = cmp_from_cop(cop, hdot, mass, zdd=s.zdd, g=g)
    w2 = g / s.z
    extra = np.zeros(2) if push_accel is None else np.asarray(push_accel, dtype=float)

    def acc(x):
        return w2 * (x - cmp) + extra

    x0, v0 = s.x, s.v
    k1x, k1v = v0, acc(x0)
    k2x, k2v = v0 + 0.5 * dt * k1v, acc(x0 + 0.5 * dt * k1x)
    k3x, k3v = v0 + 0.5 * dt * k2v, acc(x0 + 0.5 * dt * k2x)
    k4x, k4v = v0 + dt * k3v, acc(x0 + dt * k3x)
    x1 = x0 + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    v1 = v0 + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return replace(s, x=x1, v=v1)
