"""Free-time convergent reaching law.

The desired error dynamics are

    eps_dot = -K / (T_s - t) * (1 - exp(-eps)),   t <= T_s
    eps_dot = 0,                                  t >  T_s

whose solution reaches zero exactly at T_s regardless of the initial error or
the gain K:

    eps(t) = ln(C (T_s - t)^K + 1),   C = (exp(eps0) - 1) / (T_s - t0)^K
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba
import numpy as np

log = logging.getLogger(__name__)

# Below this remaining time the law switches to its eps_dot = 0 branch.
SINGULAR_GUARD_S = 1e-9


class OutOfDomainError(ValueError):
    """Closed form queried outside [t0, T_s]."""


@dataclass(frozen=True)
class FeTCParams:
    K: float
    T_s: float

    def __post_init__(self) -> None:
        if not self.K >= 1.0:
            raise ValueError(f"gain K must be >= 1, got {self.K}")
        if not self.T_s > 0.0:
            raise ValueError(f"convergence time T_s must be positive, got {self.T_s}")


@dataclass(frozen=True)
class ReachingProfile:
    times: np.ndarray
    eps: np.ndarray
    eps_dot: np.ndarray

    def __len__(self) -> int:
        return len(self.times)


def fetc_rate(eps: float, t: float, p: FeTCParams, guard: float = SINGULAR_GUARD_S) -> float:
    """Right-hand side of the reaching law.

    Within ``guard`` seconds of T_s the singular coefficient is not evaluated and
    the rate is taken as zero (the limit for K > 1). A nonzero error at that point
    is logged as a convergence miss.
    """
    remaining = p.T_s - t
    if remaining < max(guard, SINGULAR_GUARD_S):
        if remaining >= 0.0 and eps != 0.0:
            log.debug("convergence miss: eps=%g at T_s - t=%g", eps, remaining)
        return 0.0
    return -(p.K / remaining) * -math.expm1(-eps)


def _integration_constant(eps0: float, t0: float, p: FeTCParams) -> float:
    if not t0 < p.T_s:
        raise OutOfDomainError(f"t0={t0} must precede T_s={p.T_s}")
    return math.expm1(eps0) / (p.T_s - t0) ** p.K


def fetc_closed_form(eps0: float, t0: float, t: float, p: FeTCParams) -> float:
    """Exact error at time ``t`` starting from ``eps0`` at ``t0``."""
    if t > p.T_s:
        raise OutOfDomainError(f"t={t} is past T_s={p.T_s}; the error is identically 0 there")
    c = _integration_constant(eps0, t0, p)
    if t == p.T_s:
        return 0.0
    if t == t0:
        return float(eps0)
    return math.log1p(c * (p.T_s - t) ** p.K)


def fetc_closed_form_rate(eps0: float, t0: float, t: float, p: FeTCParams) -> float:
    """Time derivative of :func:`fetc_closed_form`."""
    if t > p.T_s:
        raise OutOfDomainError(f"t={t} is past T_s={p.T_s}; the rate is identically 0 there")
    c = _integration_constant(eps0, t0, p)
    tau = p.T_s - t
    if tau == 0.0:
        # K = 1 leaves a finite limit -C; every K > 1 gives 0.
        return -c if p.K == 1.0 else 0.0
    return -c * p.K * tau ** (p.K - 1.0) / (c * tau**p.K + 1.0)


def closed_form_series(eps0: float, t0: float, times, p: FeTCParams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`fetc_closed_form` and :func:`fetc_closed_form_rate` over ``times``."""
    times = np.asarray(times, dtype=float)
    if np.any(times > p.T_s):
        raise OutOfDomainError(f"times past T_s={p.T_s}")
    c = _integration_constant(eps0, t0, p)
    tau = p.T_s - times
    ck = c * tau**p.K
    eps = np.log1p(ck)
    eps[times == t0] = eps0
    if p.K == 1.0:
        rate = -c / (ck + 1.0)
    else:
        rate = -c * p.K * tau ** (p.K - 1.0) / (ck + 1.0)
    return eps, rate + 0.0  # no -0.0 in output


def reaching_profile(eps0: float, t0: float, p: FeTCParams, dt: float) -> ReachingProfile:
    """Sample the closed-form error and its rate on [t0, T_s], ending exactly at T_s."""
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(math.floor((p.T_s - t0) / dt + 1e-9))
    times = t0 + dt * np.arange(n + 1, dtype=float)
    if p.T_s - times[-1] > 1e-9 * max(1.0, abs(p.T_s)):
        times = np.append(times, p.T_s)
    else:
        times[-1] = p.T_s
    eps, eps_dot = closed_form_series(eps0, t0, times, p)
    return ReachingProfile(times=times, eps=eps, eps_dot=eps_dot)


@numba.njit(cache=True)
def _rk4_kernel(eps0, K, T_s, t0, dt, n):
    out = np.empty((n + 1, eps0.size))
    half = 0.5 * dt
    for j in range(eps0.size):
        e = eps0[j]
        k, ts_ = K[j], T_s[j]
        out[0, j] = e
        for i in range(n):
            t = t0 + i * dt
            r1 = ts_ - t
            k1 = (k / r1) * math.expm1(-e) if r1 >= SINGULAR_GUARD_S else 0.0
            r2 = ts_ - (t + half)
            k2 = (k / r2) * math.expm1(-(e + half * k1)) if r2 >= SINGULAR_GUARD_S else 0.0
            k3 = (k / r2) * math.expm1(-(e + half * k2)) if r2 >= SINGULAR_GUARD_S else 0.0
            r4 = ts_ - (t + dt)
            k4 = (k / r4) * math.expm1(-(e + dt * k3)) if r4 >= SINGULAR_GUARD_S else 0.0
            e = e + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            out[i + 1, j] = e
    return out


def rk4_integrate_rate(eps0, t0: float, t_end: float, K, T_s, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Classic RK4 integration of the reaching law from t0 to t_end.

    ``eps0``, ``K`` and ``T_s`` broadcast against each other, so a whole grid of
    cases is integrated in one pass. Returns the time grid and an array of shape
    ``(len(times),) + broadcast_shape``. Used as the numerical cross-check of
    the closed form.
    """
    eps0, K, T_s = np.broadcast_arrays(
        np.asarray(eps0, dtype=float), np.asarray(K, dtype=float), np.asarray(T_s, dtype=float)
    )
    shape = eps0.shape
    n = int(round((t_end - t0) / dt))
    out = _rk4_kernel(eps0.ravel().copy(), K.ravel().copy(), T_s.ravel().copy(), float(t0), float(dt), n)
    ts = t0 + dt * np.arange(n + 1, dtype=float)
    return ts, out.reshape((n + 1,) + shape)
