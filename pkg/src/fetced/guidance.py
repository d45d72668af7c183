"""Acceleration commands for a constant-speed missile against a fixed target.

Laws:
- PNG:          a = N v q_dot
- FETCED_LACG:  drives the leading angle to zero at T_s
- FETCED_IACG:  PNG plus a bias that nulls the predicted impact-angle error at T_s
- FETCED_ITCG:  PNG plus a bias that nulls the predicted impact-time error at T_s
- OED_IACG / OED_ITCG: the linear-in-error baselines, using t_go = r / v

All FeTCED laws share the same reaching law for their governing error and fall
back to zero bias (pure PNG, or zero command for LACG) once t is within one
guard interval of T_s.

Conventions: [m], [s], [rad], accelerations in [m/s^2] normal to the velocity.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .engagement import RelativeState, los_rate

# Bias suppressed when |theta_m| is below this (impact-time laws divide by theta_m).
THETA_MIN = 0.01
# Bias suppressed when t_go is below this (OED laws divide by t_go).
T_GO_MIN = 1e-3
DEFAULT_GUARD = 0.01


class Law(str, enum.Enum):
    PNG = "PNG"
    FETCED_LACG = "FETCED_LACG"
    FETCED_IACG = "FETCED_IACG"
    FETCED_ITCG = "FETCED_ITCG"
    OED_IACG = "OED_IACG"
    OED_ITCG = "OED_ITCG"

    @property
    def is_fetced(self) -> bool:
        return self.name.startswith("FETCED")

    @property
    def controls_angle(self) -> bool:
        return self in (Law.FETCED_IACG, Law.OED_IACG)

    @property
    def controls_time(self) -> bool:
        return self in (Law.FETCED_ITCG, Law.OED_ITCG)


class GuidanceParameterError(ValueError):
    """Guidance parameters violate a law's requirements."""


@dataclass(frozen=True)
class GuidanceSpec:
    law: Law
    N: Optional[float] = None
    K: Optional[float] = None
    T_s: Optional[float] = None
    phi_d: Optional[float] = None  # rad
    t_d: Optional[float] = None  # s

    def __post_init__(self) -> None:
        object.__setattr__(self, "law", Law(self.law))
        self.validate()

    def validate(self) -> None:
        law = self.law
        needs_n = law in (Law.PNG,) or law.controls_angle or law.controls_time
        if needs_n and self.N is None:
            raise GuidanceParameterError(f"{law.value} requires N")
        if (law.controls_angle or law.controls_time) and not self.N > 1.0:
            raise GuidanceParameterError(f"{law.value} requires N > 1, got {self.N}")
        if law is not Law.PNG:
            if self.K is None:
                raise GuidanceParameterError(f"{law.value} requires K")
            if not self.K >= 1.0:
                raise GuidanceParameterError(f"K must be >= 1, got {self.K}")
        if law.is_fetced:
            if self.T_s is None or not self.T_s > 0.0:
                raise GuidanceParameterError(f"{law.value} requires T_s > 0, got {self.T_s}")
        if law.controls_angle and self.phi_d is None:
            raise GuidanceParameterError(f"{law.value} requires phi_d")
        if law.controls_time and self.t_d is None:
            raise GuidanceParameterError(f"{law.value} requires t_d")


@dataclass(frozen=True)
class ErrorReadout:
    eps_theta: float
    eps_phi: Optional[float] = None
    eps_t: Optional[float] = None

    def active(self, law: Law) -> float:
        """The error a given law is built to null."""
        if law.controls_angle:
            return self.eps_phi
        if law.controls_time:
            return self.eps_t
        return self.eps_theta


def _reaching_active(t: float, T_s: float, guard: float) -> bool:
    # The relative margin keeps t = T_s - dt on the inactive side despite rounding in k * dt.
    return T_s - t > guard * (1.0 + 1e-9)


def png_command(v_m: float, q_dot: float, N: float) -> float:
    return N * v_m * q_dot


def lacg_command(rel: RelativeState, v_m: float, t: float, K: float, T_s: float,
                 guard: float = DEFAULT_GUARD) -> float:
    """Leading-angle control: forces eps_theta = theta_m onto the reaching law."""
    if not _reaching_active(t, T_s, guard):
        return 0.0
    eps = rel.theta_m
    return -K * v_m * -math.expm1(-eps) / (T_s - t) - v_m**2 * math.sin(eps) / rel.r


def predict_terminal_angle(q: float, phi_m: float, N: float) -> float:
    """Impact angle PNG would deliver from the current LOS angle and heading."""
    if not N > 1.0:
        raise GuidanceParameterError(f"terminal-angle prediction requires N > 1, got {N}")
    return (N * q - phi_m) / (N - 1.0)


def impact_angle_error(q: float, phi_m: float, spec: GuidanceSpec) -> float:
    return spec.phi_d - predict_terminal_angle(q, phi_m, spec.N)


def iacg_bias(eps_phi: float, v_m: float, t: float, spec: GuidanceSpec,
              guard: float = DEFAULT_GUARD) -> float:
    # Substituting eps_phi_dot = a / ((N-1) v) into the reaching law fixes the sign.
    if not _reaching_active(t, spec.T_s, guard):
        return 0.0
    return -spec.K * (spec.N - 1.0) * v_m * -math.expm1(-eps_phi) / (spec.T_s - t)


def iacg_command(rel: RelativeState, v_m: float, q_dot: float, phi_m: float, t: float,
                 spec: GuidanceSpec, guard: float = DEFAULT_GUARD) -> float:
    eps_phi = impact_angle_error(rel.q, phi_m, spec)
    return png_command(v_m, q_dot, spec.N) + iacg_bias(eps_phi, v_m, t, spec, guard)


def oed_iacg_bias(eps_phi: float, v_m: float, t_go: float, spec: GuidanceSpec) -> float:
    if t_go < T_GO_MIN:
        return 0.0
    return -spec.K * (spec.N - 1.0) * v_m * eps_phi / t_go


def oed_iacg_command(rel: RelativeState, v_m: float, q_dot: float, phi_m: float, t_go: float,
                     spec: GuidanceSpec) -> float:
    eps_phi = impact_angle_error(rel.q, phi_m, spec)
    return png_command(v_m, q_dot, spec.N) + oed_iacg_bias(eps_phi, v_m, t_go, spec)


def estimate_impact_time(r: float, v_m: float, theta_m: float, t: float, N: float) -> float:
    """Total flight time under PNG predicted from the current state."""
    return t + (r / v_m) * (1.0 + theta_m**2 / (2.0 * (2.0 * N - 1.0)))


def time_to_go(r: float, v_m: float) -> float:
    return r / v_m


def impact_time_error(rel: RelativeState, v_m: float, t: float, spec: GuidanceSpec) -> float:
    return spec.t_d - estimate_impact_time(rel.r, v_m, rel.theta_m, t, spec.N)


def itcg_bias(eps_t: float, rel: RelativeState, v_m: float, t: float, spec: GuidanceSpec,
              guard: float = DEFAULT_GUARD, theta_min: float = THETA_MIN) -> float:
    if not _reaching_active(t, spec.T_s, guard) or abs(rel.theta_m) < theta_min:
        return 0.0
    n2 = 2.0 * spec.N - 1.0
    return (spec.K * n2 * v_m**2 * -math.expm1(-eps_t)
            / (rel.r * rel.theta_m * (spec.T_s - t)))


def itcg_command(rel: RelativeState, v_m: float, q_dot: float, t: float, spec: GuidanceSpec,
                 guard: float = DEFAULT_GUARD, theta_min: float = THETA_MIN) -> float:
    eps_t = impact_time_error(rel, v_m, t, spec)
    return png_command(v_m, q_dot, spec.N) + itcg_bias(eps_t, rel, v_m, t, spec, guard, theta_min)


def oed_itcg_bias(eps_t: float, rel: RelativeState, v_m: float, t_go: float, spec: GuidanceSpec,
                  theta_min: float = THETA_MIN) -> float:
    if t_go < T_GO_MIN or abs(rel.theta_m) < theta_min:
        return 0.0
    return spec.K * (2.0 * spec.N - 1.0) * v_m**2 * eps_t / (rel.r * rel.theta_m * t_go)


def oed_itcg_command(rel: RelativeState, v_m: float, q_dot: float, t_go: float, t: float,
                     spec: GuidanceSpec, theta_min: float = THETA_MIN) -> float:
    eps_t = impact_time_error(rel, v_m, t, spec)
    return png_command(v_m, q_dot, spec.N) + oed_itcg_bias(eps_t, rel, v_m, t_go, spec, theta_min)


def impact_time_error_rate_full(rel: RelativeState, v_m: float, theta_m_dot: Optional[float],
                                a_IT: float, N: float) -> float:
    """Exact rate of the impact-time error, before any small-angle approximation.

    With ``theta_m_dot`` given, the rate follows from the measured range and
    leading-angle rates, whatever law produced them. With ``theta_m_dot=None``
    the PNG closed loop is assumed and the leading-angle rate is eliminated in
    favour of the bias ``a_IT``. Only tests use this, to bound the error of the
    small-angle form that the ITCG bias inverts.
    """
    th = rel.theta_m
    n2 = 2.0 * N - 1.0
    shape = 1.0 + th**2 / (2.0 * n2)
    if theta_m_dot is not None:
        r_dot = -v_m * math.cos(th)
        return -r_dot / v_m * shape - rel.r * th * theta_m_dot / (n2 * v_m) - 1.0
    return (math.cos(th) * shape
            + (N - 1.0) * th * math.sin(th) / n2
            - rel.r * th * a_IT / (n2 * v_m**2)
            - 1.0)


def impact_time_error_rate_approx(rel: RelativeState, v_m: float, a_IT: float, N: float) -> float:
    """Small-leading-angle impact-time-error rate, the form the ITCG bias inverts."""
    return -rel.r * rel.theta_m * a_IT / ((2.0 * N - 1.0) * v_m**2)


def read_errors(rel: RelativeState, v_m: float, phi_m: float, t: float, spec: GuidanceSpec) -> ErrorReadout:
    eps_phi = impact_angle_error(rel.q, phi_m, spec) if spec.law.controls_angle else None
    eps_t = impact_time_error(rel, v_m, t, spec) if spec.law.controls_time else None
    return ErrorReadout(eps_theta=rel.theta_m, eps_phi=eps_phi, eps_t=eps_t)


def command(rel: RelativeState, v_m: float, phi_m: float, t: float, spec: GuidanceSpec,
            guard: float = DEFAULT_GUARD) -> float:
    """Dispatch to the law named by ``spec``."""
    q_dot = los_rate(v_m, rel)
    law = spec.law
    if law is Law.PNG:
        return png_command(v_m, q_dot, spec.N)
    if law is Law.FETCED_LACG:
        return lacg_command(rel, v_m, t, spec.K, spec.T_s, guard)
    if law is Law.FETCED_IACG:
        return iacg_command(rel, v_m, q_dot, phi_m, t, spec, guard)
    if law is Law.OED_IACG:
        return oed_iacg_command(rel, v_m, q_dot, phi_m, time_to_go(rel.r, v_m), spec)
    if law is Law.FETCED_ITCG:
        return itcg_command(rel, v_m, q_dot, t, spec, guard)
    if law is Law.OED_ITCG:
        return oed_itcg_command(rel, v_m, q_dot, time_to_go(rel.r, v_m), t, spec)
    raise GuidanceParameterError(f"unknown law {law!r}")
