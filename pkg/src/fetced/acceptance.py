"""Exit criteria for the library, runnable from pytest or ``fetced check``.

Each check returns a :class:`CheckResult`; nothing here asserts, so the CLI can
print a full pass/fail table even when some criteria fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import guidance as gl
from .engagement import RelativeState
from .error_dynamics import FeTCParams, closed_form_series, fetc_closed_form, rk4_integrate_rate
from .scenario_io import preset_table, run_scenarios
from .simulator import SimConfig, compare_energy, run_engagement

# Pinned tolerances.
REACHING_ABS_TOL = 1e-6
REACHING_DT = 1e-4
REACHING_MARGIN_S = 0.01
IMPACT_TIME_QUOTED_S = 41.8
IMPACT_TIME_EST_TOL_S = 0.05
PNG_MISS_MAX_M = 0.5
PNG_IMPACT_TIME_S = 41.76
PNG_IMPACT_TIME_TOL_S = 0.5
REF_DT = 0.001
HIT_MISS_MAX_M = 1.0
IMPACT_ANGLE_DEG = -90.0
IMPACT_ANGLE_TOL_DEG = 0.5
ANGLE_EPS_TOL = 0.01  # rad
ITCG_IMPACT_TIME_S = 45.0
ITCG_IMPACT_TIME_TOL_S = 0.1
TIME_EPS_TOL = 0.05  # s
OED_ZERO_EPS = 1e-4  # rad; numerically "at zero"
OED_NEAR_IMPACT_FRACTION = 0.9
LIMIT_ERR_MAX = 1e-3
LIMIT_RATIO_BAND = (0.99, 1.01)
LYAPUNOV_FLOOR = 1e-9  # allowed per-sample growth of |eps| from rounding


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number}. {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(number: int, name: str):
    def deco(fn: Callable[[], tuple[bool, str]]):
        def run() -> CheckResult:
            t0 = time.perf_counter()
            ok, detail = fn()
            return CheckResult(number, name, bool(ok), detail, time.perf_counter() - t0)
        run.__name__ = fn.__name__
        run.number = number
        return run
    return deco


@lru_cache(maxsize=None)
def _table_runs(table: int):
    scenarios = preset_table(table)
    return scenarios, run_scenarios(scenarios)


def _eps_at(traj, t: float) -> float:
    k = int(round(t / (traj.t[1] - traj.t[0])))
    return float(traj.eps[k])


@_timed(1, "reaching-law exactness")
def check_reaching_law() -> tuple[bool, str]:
    eps0 = np.array([-3.0, 0.1, 3.0, 9.0])[:, None, None]
    K = np.array([1.0, 2.0, 4.0, 8.0])[None, :, None]
    T_s = np.array([20.0, 40.0])[None, None, :]
    t_end = float(T_s.max()) - REACHING_MARGIN_S
    ts, num = rk4_integrate_rate(eps0, 0.0, t_end, K, T_s, REACHING_DT)
    worst = 0.0
    exact_zero = True
    for a, b, c in np.ndindex(4, 4, 2):
        p = FeTCParams(K=float(K[0, b, 0]), T_s=float(T_s[0, 0, c]))
        e0 = float(eps0[a, 0, 0])
        n = int(round((p.T_s - REACHING_MARGIN_S) / REACHING_DT))
        closed, _ = closed_form_series(e0, 0.0, ts[: n + 1], p)
        worst = max(worst, float(np.max(np.abs(closed - num[: n + 1, a, b, c]))))
        exact_zero &= fetc_closed_form(e0, 0.0, p.T_s, p) == 0.0
    ok = worst <= REACHING_ABS_TOL and exact_zero
    return ok, f"max |RK4 - closed form| = {worst:.2e} (tol {REACHING_ABS_TOL:g}); eps(T_s) exactly 0: {exact_zero}"


@_timed(2, "impact-time estimate")
def check_impact_time_estimate() -> tuple[bool, str]:
    tf = gl.estimate_impact_time(20000.0, 500.0, math.pi / 4, 0.0, 4.0)
    ok = abs(tf - IMPACT_TIME_QUOTED_S) <= IMPACT_TIME_EST_TOL_S
    return ok, f"t_f = {tf:.4f} s vs {IMPACT_TIME_QUOTED_S} s (tol {IMPACT_TIME_EST_TOL_S} s)"


@_timed(3, "PNG baseline")
def check_png_baseline() -> tuple[bool, str]:
    scenarios, results = _table_runs(1)
    sc, (_, m) = scenarios[-1], results[-1]
    _, ref = run_engagement(sc.missile, sc.target, sc.spec, SimConfig(dt=REF_DT))
    ok = (m.miss_distance < PNG_MISS_MAX_M
          and abs(m.impact_time - PNG_IMPACT_TIME_S) <= PNG_IMPACT_TIME_TOL_S
          and abs(ref.impact_time - PNG_IMPACT_TIME_S) <= PNG_IMPACT_TIME_TOL_S)
    return ok, (f"miss {m.miss_distance:.2e} m; t_f {m.impact_time:.3f} s "
                f"(dt={REF_DT:g} reference {ref.impact_time:.3f} s, closed-form estimate {PNG_IMPACT_TIME_S} s)")


@_timed(4, "impact-angle table")
def check_table2() -> tuple[bool, str]:
    scenarios, results = _table_runs(2)
    notes, ok = [], True
    fetced_T_s = []
    for sc, (traj, m) in zip(scenarios, results):
        ang = math.degrees(m.impact_angle)
        hit = m.intercepted and m.miss_distance < HIT_MISS_MAX_M
        ang_ok = abs(ang - IMPACT_ANGLE_DEG) <= IMPACT_ANGLE_TOL_DEG
        ok &= hit and ang_ok
        part = f"{sc.label} miss {m.miss_distance:.1e} angle {ang:.3f}"
        if sc.spec.law.is_fetced:
            e = abs(_eps_at(traj, sc.spec.T_s))
            ok &= e <= ANGLE_EPS_TOL
            fetced_T_s.append(sc.spec.T_s)
            part += f" |eps(T_s)| {e:.1e}"
        else:
            eps = np.abs(traj.eps[:-1])
            above = np.nonzero(eps > OED_ZERO_EPS)[0]
            t_zero = float(traj.t[above[-1] + 1]) if len(above) else 0.0
            late = t_zero >= OED_NEAR_IMPACT_FRACTION * m.impact_time and t_zero > max(fetced_T_s)
            ok &= late
            part += f" reaches |eps|<={OED_ZERO_EPS:g} at {t_zero:.2f}/{m.impact_time:.2f} s"
        notes.append(part)
    energy = compare_energy([m for _, m in results])
    e = [m.total_energy for _, m in results]
    order = e[0] > e[1] > e[2] > e[3]
    ok &= order
    notes.append("E " + " > ".join(f"{v:.0f}" for v in e) + f": {order}")
    return ok, "; ".join(notes)


@_timed(5, "impact-time table")
def check_table3() -> tuple[bool, str]:
    scenarios, results = _table_runs(3)
    notes, ok = [], True
    for sc, (traj, m) in zip(scenarios, results):
        hit = m.intercepted and m.miss_distance < HIT_MISS_MAX_M
        t_ok = abs(m.impact_time - ITCG_IMPACT_TIME_S) <= ITCG_IMPACT_TIME_TOL_S
        ok &= hit and t_ok
        part = f"{sc.label} miss {m.miss_distance:.1e} t_f {m.impact_time:.4f}"
        if sc.spec.law.is_fetced:
            e = abs(_eps_at(traj, sc.spec.T_s))
            ok &= e <= TIME_EPS_TOL
            part += f" |eps(T_s)| {e:.1e}"
        notes.append(part)
    energy = compare_energy([m for _, m in results])
    ok &= bool(energy.oed_minimal)
    notes.append(f"OED minimal energy: {energy.oed_minimal}")
    return ok, "; ".join(notes)


@_timed(6, "leading-angle table")
def check_table1() -> tuple[bool, str]:
    scenarios, results = _table_runs(1)
    fetced = [(sc, tr, m) for sc, (tr, m) in zip(scenarios, results) if sc.spec.law.is_fetced]
    ok, notes = True, []
    for sc, tr, m in fetced:
        e = abs(_eps_at(tr, sc.spec.T_s))
        ok &= e <= ANGLE_EPS_TOL and m.intercepted
        notes.append(f"{sc.label} |eps(T_s)| {e:.1e}")
    energies = [m.total_energy for _, _, m in fetced]
    a0 = [abs(tr.a_m[0]) for _, tr, _ in fetced]
    dec_e = all(x > y for x, y in zip(energies, energies[1:]))
    dec_a = all(x > y for x, y in zip(a0, a0[1:]))
    ok &= dec_e and dec_a
    notes.append("E " + " > ".join(f"{v:.0f}" for v in energies) + f": {dec_e}")
    notes.append("|a0| " + " > ".join(f"{v:.2f}" for v in a0) + f": {dec_a}")
    return ok, "; ".join(notes)


def _limit_states():
    """LOS geometries for the limit checks (leading angles of either sign)."""
    for r in (2000.0, 8000.0, 20000.0):
        for theta in (-0.6, -0.2, 0.1, 0.45, 0.785):
            yield RelativeState(r=r, q=-0.7, theta_m=theta)


@_timed(7, "limit equivalences")
def check_limits() -> tuple[bool, str]:
    v, t, N = 500.0, 3.0, 4.0
    lo, hi = LIMIT_RATIO_BAND
    worst = {"LACG/PNG": [], "IACG/OED": [], "ITCG/OED": []}
    for K in (1.5, 3.0, 5.0):
        for rel in _limit_states():
            t_go = rel.r / v
            T_s = t + t_go
            # Leading-angle law against PNG with N = K + 1, at a small leading angle.
            for th in (-LIMIT_ERR_MAX, 0.5 * LIMIT_ERR_MAX, LIMIT_ERR_MAX):
                small = RelativeState(rel.r, rel.q, th)
                q_dot = -v * math.sin(th) / rel.r
                worst["LACG/PNG"].append(gl.lacg_command(small, v, t, K, T_s) / gl.png_command(v, q_dot, K + 1.0))
            q_dot = -v * math.sin(rel.theta_m) / rel.r
            for err in (-LIMIT_ERR_MAX, 0.3 * LIMIT_ERR_MAX, LIMIT_ERR_MAX):
                phi_m = rel.q + rel.theta_m
                phi_d = gl.predict_terminal_angle(rel.q, phi_m, N) + err
                sa = gl.GuidanceSpec(gl.Law.FETCED_IACG, N=N, K=K, T_s=T_s, phi_d=phi_d)
                so = gl.GuidanceSpec(gl.Law.OED_IACG, N=N, K=K, phi_d=phi_d)
                worst["IACG/OED"].append(gl.iacg_command(rel, v, q_dot, phi_m, t, sa)
                                         / gl.oed_iacg_command(rel, v, q_dot, phi_m, t_go, so))
                t_d = gl.estimate_impact_time(rel.r, v, rel.theta_m, t, N) + err
                st = gl.GuidanceSpec(gl.Law.FETCED_ITCG, N=N, K=K, T_s=T_s, t_d=t_d)
                sot = gl.GuidanceSpec(gl.Law.OED_ITCG, N=N, K=K, t_d=t_d)
                worst["ITCG/OED"].append(gl.itcg_command(rel, v, q_dot, t, st)
                                         / gl.oed_itcg_command(rel, v, q_dot, t_go, t, sot))
    ok = True
    notes = []
    for name, ratios in worst.items():
        r = np.asarray(ratios)
        inside = bool(np.all((r >= lo) & (r <= hi)))
        ok &= inside
        notes.append(f"{name} in [{r.min():.5f}, {r.max():.5f}]")
    return ok, "; ".join(notes) + f" (band {lo}-{hi})"


@_timed(8, "Lyapunov decrease and PNG reduction")
def check_lyapunov() -> tuple[bool, str]:
    ok, notes = True, []
    for table in (1, 2, 3):
        scenarios, results = _table_runs(table)
        for sc, (traj, m) in zip(scenarios, results):
            spec = sc.spec
            if not spec.law.is_fetced:
                continue
            dt = sc.sim.dt
            # The final step into T_s is flown bias-free; that one dt is the allowed slack.
            k_end = int(round(spec.T_s / dt)) - 1
            v = np.abs(traj.eps[: k_end + 1])
            growth = float(np.max(np.diff(v))) if len(v) > 1 else 0.0
            mono = growth <= LYAPUNOV_FLOOR
            # After T_s the command must be the PNG value exactly.
            post = range(int(round(spec.T_s / dt)) + 1, len(traj) - 1)
            if spec.law is gl.Law.FETCED_LACG:
                post_ok = all(traj.a_m[k] == 0.0 for k in post)
            else:
                v_m = sc.missile.v_m
                post_ok = all(
                    traj.a_m[k] == gl.png_command(v_m, -v_m * math.sin(traj.theta_m[k]) / traj.r[k], spec.N)
                    for k in post)
            ok &= mono and post_ok
            notes.append(f"{sc.label} max d|eps| {growth:.1e}{'' if mono else ' FAIL'}"
                         f"{'' if post_ok else ' post-T_s mismatch'}")
    return ok, "; ".join(notes)


ALL_CHECKS = (
    check_reaching_law,
    check_impact_time_estimate,
    check_png_baseline,
    check_table2,
    check_table3,
    check_table1,
    check_limits,
    check_lyapunov,
)


def run_all() -> list[CheckResult]:
    return [check() for check in ALL_CHECKS]
