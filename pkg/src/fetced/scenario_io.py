"""Scenario files, the preset catalog, batch runs and CSV/report output.

Scenario files are flat ``key = value`` lines with dotted keys; ``#`` starts a
comment. Angles are degrees in files and radians everywhere else. Example::

    label = T2-M1
    missile.r0_km = 20
    missile.q0_deg = -45
    missile.v_mps = 500
    missile.phi0_deg = 0
    law.name = FETCED_IACG
    law.N = 4
    law.K = 3
    law.Ts_s = 20
    law.phi_d_deg = -90

Missile placement is either polar (``missile.r0_km`` + ``missile.q0_deg``,
measured from the target) or inertial (``missile.x_m`` + ``missile.y_m``), never
both. Optional ``expect.*`` keys declare pass/fail expectations for reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .engagement import MissileState, TargetState, polar_placement
from .error_dynamics import ReachingProfile
from .guidance import GuidanceParameterError, GuidanceSpec, Law
from .simulator import (EngagementMetrics, SimConfig, Trajectory, compare_energy, run_batch)


class ScenarioSchemaError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


EXPECT_KEYS = {
    "expect.miss_max_m",
    "expect.impact_time_s",
    "expect.impact_time_tol_s",
    "expect.impact_angle_deg",
    "expect.impact_angle_tol_deg",
}
FLOAT_KEYS = {
    "missile.r0_km", "missile.x_m", "missile.y_m", "missile.q0_deg", "missile.v_mps",
    "missile.phi0_deg", "target.x_m", "target.y_m", "law.N", "law.K", "law.Ts_s",
    "law.phi_d_deg", "law.t_d_s", "sim.dt_s", "sim.t_max_s", "sim.r_hit_m",
} | EXPECT_KEYS
TEXT_KEYS = {"label", "law.name", "sim.integrator"}
KNOWN_KEYS = FLOAT_KEYS | TEXT_KEYS

# Initial engagement geometry shared by every preset.
PRESET_R0_KM = 20.0
PRESET_Q0_DEG = -45.0
PRESET_V_MPS = 500.0
PRESET_PHI0_DEG = 0.0


@dataclass(frozen=True)
class Expectations:
    miss_max_m: Optional[float] = None
    impact_time_s: Optional[float] = None
    impact_time_tol_s: Optional[float] = None
    impact_angle_deg: Optional[float] = None
    impact_angle_tol_deg: Optional[float] = None

    def check(self, m: EngagementMetrics) -> dict[str, bool]:
        out = {}
        if self.miss_max_m is not None:
            out["miss"] = m.miss_distance < self.miss_max_m
        if self.impact_time_s is not None:
            out["impact_time"] = abs(m.impact_time - self.impact_time_s) <= (self.impact_time_tol_s or 0.0)
        if self.impact_angle_deg is not None:
            err = math.degrees(m.impact_angle) - self.impact_angle_deg
            out["impact_angle"] = abs(err) <= (self.impact_angle_tol_deg or 0.0)
        return out


@dataclass(frozen=True)
class Scenario:
    missile: MissileState
    target: TargetState
    spec: GuidanceSpec
    sim: SimConfig = SimConfig()
    label: str = ""
    expect: Expectations = Expectations()
    # Polar placement as written in the file, kept so serialization round-trips.
    polar: Optional[tuple[float, float]] = None  # (r0 [m], q0 [rad])


@dataclass
class RunReport:
    entries: list = field(default_factory=list)  # (label, EngagementMetrics, {check: bool})

    @property
    def passed(self) -> bool:
        return all(all(checks.values()) for _, _, checks in self.entries)


def _parse_lines(text: str, source: str) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioSchemaError(f"{source}:{lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ScenarioSchemaError(key, "unknown key")
        if key in values:
            raise ScenarioSchemaError(key, "duplicate key")
        values[key] = value
    return values


def _float(values: dict, key: str, default: Optional[float] = None, required: bool = False) -> Optional[float]:
    if key not in values:
        if required:
            raise ScenarioSchemaError(key, "missing required key")
        return default
    try:
        v = float(values[key])
    except ValueError:
        raise ScenarioSchemaError(key, f"not a number: {values[key]!r}") from None
    if not math.isfinite(v):
        raise ScenarioSchemaError(key, f"not finite: {values[key]!r}")
    return v


def _law_spec(values: dict) -> GuidanceSpec:
    if "law.name" not in values:
        raise ScenarioSchemaError("law.name", "missing required key")
    try:
        law = Law(values["law.name"].upper())
    except ValueError:
        raise ScenarioSchemaError("law.name", f"unknown law {values['law.name']!r}") from None
    N = _float(values, "law.N")
    K = _float(values, "law.K")
    T_s = _float(values, "law.Ts_s")
    phi_d = _float(values, "law.phi_d_deg")
    t_d = _float(values, "law.t_d_s")
    required = []
    if law is Law.PNG or law.controls_angle or law.controls_time:
        required.append(("law.N", N))
    if law is not Law.PNG:
        required.append(("law.K", K))
    if law.is_fetced:
        required.append(("law.Ts_s", T_s))
    if law.controls_angle:
        required.append(("law.phi_d_deg", phi_d))
    if law.controls_time:
        required.append(("law.t_d_s", t_d))
    for key, v in required:
        if v is None:
            raise ScenarioSchemaError(key, f"required for {law.value}")
    if N is not None and (law.controls_angle or law.controls_time) and not N > 1.0:
        raise ScenarioSchemaError("law.N", f"{law.value} requires N > 1, got {N:g}")
    if K is not None and not K >= 1.0:
        raise ScenarioSchemaError("law.K", f"K must be >= 1, got {K:g}")
    if T_s is not None and law.is_fetced and not T_s > 0.0:
        raise ScenarioSchemaError("law.Ts_s", f"T_s must be positive, got {T_s:g}")
    try:
        return GuidanceSpec(law=law, N=N, K=K, T_s=T_s,
                            phi_d=None if phi_d is None else math.radians(phi_d), t_d=t_d)
    except GuidanceParameterError as exc:
        raise ScenarioSchemaError("law", str(exc)) from None


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    values = _parse_lines(text, source)
    target = TargetState(_float(values, "target.x_m", 0.0), _float(values, "target.y_m", 0.0))

    polar = "missile.r0_km" in values
    inertial = "missile.x_m" in values or "missile.y_m" in values
    if polar == inertial:
        raise ScenarioSchemaError("missile", "give exactly one of missile.r0_km+q0_deg or missile.x_m+y_m")
    if polar:
        r0 = _float(values, "missile.r0_km", required=True) * 1000.0
        q0 = math.radians(_float(values, "missile.q0_deg", required=True))
        if not r0 > 0.0:
            raise ScenarioSchemaError("missile.r0_km", "must be positive")
        x, y = polar_placement(target, r0, q0)
        polar_spec = (r0, q0)
    else:
        if "missile.q0_deg" in values:
            raise ScenarioSchemaError("missile.q0_deg", "only valid with polar placement (missile.r0_km)")
        x = _float(values, "missile.x_m", required=True)
        y = _float(values, "missile.y_m", required=True)
        polar_spec = None
    v = _float(values, "missile.v_mps", required=True)
    if not v > 0.0:
        raise ScenarioSchemaError("missile.v_mps", "must be positive")
    phi0 = math.radians(_float(values, "missile.phi0_deg", required=True))
    missile = MissileState(x, y, v, phi0)
    if (x, y) == (target.x_t, target.y_t):
        raise ScenarioSchemaError("missile", "missile starts on the target")

    spec = _law_spec(values)
    defaults = SimConfig()
    try:
        sim = SimConfig(
            dt=_float(values, "sim.dt_s", defaults.dt),
            t_max=_float(values, "sim.t_max_s", defaults.t_max),
            r_hit=_float(values, "sim.r_hit_m", defaults.r_hit),
            integrator=values.get("sim.integrator", defaults.integrator),
        )
    except ValueError as exc:
        raise ScenarioSchemaError("sim", str(exc)) from None
    expect = Expectations(**{k.split(".", 1)[1]: _float(values, k) for k in sorted(EXPECT_KEYS)})
    return Scenario(missile=missile, target=target, spec=spec, sim=sim,
                    label=values.get("label", ""), expect=expect, polar=polar_spec)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text, str(path))


def _num(v: float) -> str:
    return repr(float(v))


def serialize_scenario(sc: Scenario) -> str:
    """Inverse of :func:`parse_scenario`; values are written with full precision."""
    lines = []
    if sc.label:
        lines.append(f"label = {sc.label}")
    if sc.polar is not None:
        lines.append(f"missile.r0_km = {_num(sc.polar[0] / 1000.0)}")
        lines.append(f"missile.q0_deg = {_num(math.degrees(sc.polar[1]))}")
    else:
        lines.append(f"missile.x_m = {_num(sc.missile.x)}")
        lines.append(f"missile.y_m = {_num(sc.missile.y)}")
    lines.append(f"missile.v_mps = {_num(sc.missile.v_m)}")
    lines.append(f"missile.phi0_deg = {_num(math.degrees(sc.missile.phi_m))}")
    lines.append(f"target.x_m = {_num(sc.target.x_t)}")
    lines.append(f"target.y_m = {_num(sc.target.y_t)}")
    s = sc.spec
    lines.append(f"law.name = {s.law.value}")
    for key, v in (("law.N", s.N), ("law.K", s.K), ("law.Ts_s", s.T_s), ("law.t_d_s", s.t_d)):
        if v is not None:
            lines.append(f"{key} = {_num(v)}")
    if s.phi_d is not None:
        lines.append(f"law.phi_d_deg = {_num(math.degrees(s.phi_d))}")
    lines.append(f"sim.dt_s = {_num(sc.sim.dt)}")
    lines.append(f"sim.t_max_s = {_num(sc.sim.t_max)}")
    lines.append(f"sim.r_hit_m = {_num(sc.sim.r_hit)}")
    lines.append(f"sim.integrator = {sc.sim.integrator}")
    for key in sorted(EXPECT_KEYS):
        v = getattr(sc.expect, key.split(".", 1)[1])
        if v is not None:
            lines.append(f"{key} = {_num(v)}")
    return "\n".join(lines) + "\n"


def _preset(label: str, spec: GuidanceSpec, expect: Expectations) -> Scenario:
    target = TargetState(0.0, 0.0)
    r0, q0 = PRESET_R0_KM * 1000.0, math.radians(PRESET_Q0_DEG)
    x, y = polar_placement(target, r0, q0)
    missile = MissileState(x, y, PRESET_V_MPS, math.radians(PRESET_PHI0_DEG))
    return Scenario(missile=missile, target=target, spec=spec, label=label, expect=expect, polar=(r0, q0))


def preset_catalog() -> list[Scenario]:
    """The twelve comparison runs: three tables of four missiles each."""
    phi_d = math.radians(-90.0)
    hit = Expectations(miss_max_m=1.0)
    angle = Expectations(miss_max_m=1.0, impact_angle_deg=-90.0, impact_angle_tol_deg=0.5)
    timed = Expectations(miss_max_m=1.0, impact_time_s=45.0, impact_time_tol_s=0.1)
    png = Expectations(miss_max_m=0.5, impact_time_s=41.76, impact_time_tol_s=0.5)
    out = []
    for i, T_s in enumerate((20.0, 30.0, 40.0), 1):
        out.append(_preset(f"T1-M{i}", GuidanceSpec(Law.FETCED_LACG, K=3.0, T_s=T_s), hit))
    out.append(_preset("T1-M4", GuidanceSpec(Law.PNG, N=4.0), png))
    for i, T_s in enumerate((20.0, 30.0, 40.0), 1):
        out.append(_preset(f"T2-M{i}", GuidanceSpec(Law.FETCED_IACG, N=4.0, K=3.0, T_s=T_s, phi_d=phi_d), angle))
    out.append(_preset("T2-M4", GuidanceSpec(Law.OED_IACG, N=4.0, K=3.0, phi_d=phi_d), angle))
    for i, T_s in enumerate((20.0, 30.0, 40.0), 1):
        out.append(_preset(f"T3-M{i}", GuidanceSpec(Law.FETCED_ITCG, N=4.0, K=5.0, T_s=T_s, t_d=45.0), timed))
    out.append(_preset("T3-M4", GuidanceSpec(Law.OED_ITCG, N=4.0, K=5.0, t_d=45.0), timed))
    return out


def preset_table(table: int) -> list[Scenario]:
    if table not in (1, 2, 3):
        raise ValueError(f"table must be 1, 2 or 3, got {table}")
    return [sc for sc in preset_catalog() if sc.label.startswith(f"T{table}-")]


def run_scenarios(scenarios: Sequence[Scenario], max_workers: Optional[int] = None) -> list:
    jobs = [(sc.missile, sc.target, sc.spec, sc.sim, sc.label) for sc in scenarios]
    return run_batch(jobs, max_workers=max_workers)


TRAJECTORY_HEADER = ("t", "x", "y", "r", "q_deg", "phi_deg", "theta_deg", "a_m", "eps", "energy")


def _g9(v: float) -> str:
    return f"{v:.9g}"


def trajectory_csv_text(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for i in range(len(traj)):
        w.writerow([_g9(v) for v in (
            traj.t[i], traj.x[i], traj.y[i], traj.r[i], math.degrees(traj.q[i]),
            math.degrees(traj.phi_m[i]), math.degrees(traj.theta_m[i]), traj.a_m[i],
            traj.eps[i], traj.energy[i])])
    return buf.getvalue()


def _write(path, text: str) -> None:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_trajectory_csv(traj: Trajectory, path) -> None:
    _write(path, trajectory_csv_text(traj))


def read_trajectory_csv(path) -> Trajectory:
    """Parse a file written by :func:`write_trajectory_csv` back into radians."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: not a trajectory CSV")
    data = []
    for row in rows[1:]:
        v = [float(s) for s in row]
        for i in (4, 5, 6):
            v[i] = math.radians(v[i])
        data.append(v)
    return Trajectory.from_rows(data)


def write_profile_csv(profile: ReachingProfile, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "eps", "eps_dot"))
    for t, e, ed in zip(profile.times, profile.eps, profile.eps_dot):
        w.writerow((_g9(t), _g9(e), _g9(ed)))
    _write(path, buf.getvalue())


def metrics_dict(m: EngagementMetrics) -> dict:
    return {
        "label": m.label,
        "law": m.law.value if m.law else None,
        "T_s": m.T_s,
        "intercepted": m.intercepted,
        "miss_distance_m": m.miss_distance,
        "impact_time_s": m.impact_time,
        "impact_angle_deg": math.degrees(m.impact_angle),
        "total_energy": m.total_energy,
        "error_convergence_time_s": m.error_convergence_time,
    }


def build_report(scenarios: Sequence[Scenario], results: Sequence) -> RunReport:
    report = RunReport()
    for sc, (_, m) in zip(scenarios, results):
        checks = sc.expect.check(m)
        checks["intercepted"] = m.intercepted
        report.entries.append((sc.label, m, checks))
    return report


def report_json(report: RunReport, energy=None) -> str:
    doc = {
        "passed": report.passed,
        "runs": [dict(metrics_dict(m), checks=checks) for _, m, checks in report.entries],
    }
    if energy is not None:
        doc["energy"] = {
            "ranking": [{"label": lbl, "total_energy": e} for lbl, e in energy.ranking],
            "monotone_in_T_s": energy.monotone_in_T_s,
            "monotone_claimed": energy.monotone_claimed,
            "oed_minimal": energy.oed_minimal,
        }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_table(table: int, out_dir, max_workers: Optional[int] = None) -> tuple[RunReport, object]:
    """Run one preset table, write per-run CSVs plus ``table<N>_report.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenarios = preset_table(table)
    results = run_scenarios(scenarios, max_workers=max_workers)
    for sc, (traj, _) in zip(scenarios, results):
        write_trajectory_csv(traj, out_dir / f"{sc.label}.csv")
    report = build_report(scenarios, results)
    energy = compare_energy([m for _, m in results])
    _write(out_dir / f"table{table}_report.json", report_json(report, energy))
    return report, energy


def write_scenario(sc: Scenario, path) -> None:
    _write(path, serialize_scenario(sc))


def export_presets(out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for sc in preset_catalog():
        p = out_dir / f"{sc.label}.scn"
        write_scenario(sc, p)
        paths.append(p)
    return paths
