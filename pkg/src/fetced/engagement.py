"""Planar engagement kinematics: constant-speed missile vs. a fixed target.

Conventions:
- Positions [m], speed [m/s], time [s], angles [rad]
- q is the inertial angle of the missile-to-target line of sight
- theta_m = phi_m - q is the leading angle (zero on a collision course)
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DegenerateGeometryError(ValueError):
    """Missile and target positions coincide, so the LOS is undefined."""


class SingularRangeError(ValueError):
    """Range is zero or negative where the LOS rate is required."""


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@dataclass(frozen=True)
class MissileState:
    x: float
    y: float
    v_m: float
    phi_m: float  # unwrapped

    def __post_init__(self) -> None:
        if not self.v_m > 0.0:
            raise ValueError(f"missile speed must be positive, got {self.v_m}")


@dataclass(frozen=True)
class TargetState:
    x_t: float = 0.0
    y_t: float = 0.0


@dataclass(frozen=True)
class RelativeState:
    r: float
    q: float
    theta_m: float


@dataclass(frozen=True)
class StateDerivative:
    x_dot: float
    y_dot: float
    phi_dot: float
    r_dot: float
    q_dot: float

    @property
    def theta_dot(self) -> float:
        return self.phi_dot - self.q_dot


def relative_from_inertial(m: MissileState, t: TargetState) -> RelativeState:
    """Range, LOS angle and leading angle of the missile w.r.t. the target."""
    dx = t.x_t - m.x
    dy = t.y_t - m.y
    r = math.hypot(dx, dy)
    if r == 0.0:
        raise DegenerateGeometryError("missile and target positions coincide")
    q = math.atan2(dy, dx)
    if q == -math.pi:
        q = math.pi
    return RelativeState(r=r, q=q, theta_m=wrap_angle(m.phi_m - q))


def kinematics_rhs(m: MissileState, rel: RelativeState, a_m: float) -> StateDerivative:
    """Time derivatives of the inertial and relative states under command ``a_m``.

    The command acts normal to the velocity, so speed is not a state here.
    """
    if not rel.r > 0.0:
        raise SingularRangeError(f"range must be positive, got {rel.r}")
    v = m.v_m
    return StateDerivative(
        x_dot=v * math.cos(m.phi_m),
        y_dot=v * math.sin(m.phi_m),
        phi_dot=a_m / v,
        r_dot=-v * math.cos(rel.theta_m),
        q_dot=-v * math.sin(rel.theta_m) / rel.r,
    )


def los_rate(v_m: float, rel: RelativeState) -> float:
    if not rel.r > 0.0:
        raise SingularRangeError(f"range must be positive, got {rel.r}")
    return -v_m * math.sin(rel.theta_m) / rel.r


def polar_placement(target: TargetState, r0: float, q0: float) -> tuple[float, float]:
    """Missile position that puts the target at range ``r0`` along LOS angle ``q0``."""
    return target.x_t - r0 * math.cos(q0), target.y_t - r0 * math.sin(q0)
