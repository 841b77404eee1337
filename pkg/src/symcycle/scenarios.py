"""Scenario catalog, ``.scn`` files, single runs and parameter sweeps."""
from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import (Classification, Thresholds, classify,
                          diagnostics_series, reference_points)
from .equilibria import solve_fixed_point
from .integrator import (InputEntry, InputSchedule, IntegratorConfig, NumericalError,
                         Trajectory, simulate)
from .model import SpecError, SystemSpec, checked

T0 = 250.0  # injection time of the suppression scenarios


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    spec: SystemSpec
    initial: tuple
    config: IntegratorConfig = IntegratorConfig()
    schedule: InputSchedule = InputSchedule()
    expected: Optional[str] = None
    figure: str = ""
    description: str = ""
    source: str = ""
    allow_nonpositive: bool = False

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(float(v) for v in self.initial))
        if len(self.initial) != self.spec.n:
            raise ScenarioError(f"{self.name}: initial state has {len(self.initial)} entries, "
                                f"spec has n={self.spec.n}")

    def with_overrides(self, dt=None, t_end=None, stride=None) -> "Scenario":
        cfg = self.config
        cfg = IntegratorConfig(dt if dt is not None else cfg.dt,
                               t_end if t_end is not None else cfg.t_end,
                               stride if stride is not None else cfg.record_stride)
        return replace(self, config=cfg)


def _uniform(n, k2, sup=-2):
    return SystemSpec.uniform(n, 1.0, k2, 0.5, -1, sup)


def builtin_catalog() -> list[Scenario]:
    five = _uniform(5, 0.5)
    five_slow = _uniform(5, 0.16)
    eight_a = _uniform(8, 0.5, -2)
    eight_b = _uniform(8, 0.5, -3)
    one = SystemSpec.uniform(1, 1.0, 0.5, 0.5)
    cfg = IntegratorConfig
    inj = lambda amp: InputSchedule((InputEntry(1, T0, amp),))  # noqa: E731
    s = Scenario
    return [
        s("fig2", one, (0.5,), cfg(0.01, 30.0), expected="AsymptoticallyStable", figure="Fig. 2",
          description="logistic reduction, positive start, attracted to B=1",
          source="n=1, k=(1, 0.5, 0.5), E0=0.5"),
        s("fig2-negative", one, (-0.1,), cfg(0.01, 30.0), expected="Divergent", figure="Fig. 2",
          description="logistic reduction, negative start, diverges to -inf",
          source="n=1, k=(1, 0.5, 0.5), E0=-0.1", allow_nonpositive=True),
        s("fig3a", five, (2, 1, 1, 1, 1), cfg(0.01, 100.0), expected="AsymptoticallyStable",
          figure="Fig. 3a", description="large K2, small deviation: fast return",
          source="K1=1, K2=0.5, K3=0.5 uniform; E0=(2,1,1,1,1)"),
        s("fig3b", five, (6, 1, 1, 1, 1), cfg(0.01, 100.0), expected="AsymptoticallyStable",
          figure="Fig. 3b", description="large K2, large deviation: still converges",
          source="K1=1, K2=0.5, K3=0.5 uniform; E0=(6,1,1,1,1)"),
        s("fig3c", five_slow, (2.68, 1.68, 1.68, 1.68, 1.68), cfg(0.01, 1500.0),
          expected="AsymptoticallyStable", figure="Fig. 3c",
          description="small K2, small deviation: long ringing, eventual return to B=1.68",
          source="K2=0.16 uniform; E0=(2.68,1.68,1.68,1.68,1.68)"),
        s("fig3d", five_slow, (6.68, 1.68, 1.68, 1.68, 1.68), cfg(0.01, 1500.0),
          expected="Oscillatory", figure="Fig. 3d",
          description="small K2, large deviation: sustained oscillation",
          source="K2=0.16 uniform; E0=(6.68,1.68,1.68,1.68,1.68)"),
        s("fig5a", eight_a, (2,) + (1,) * 7, cfg(0.01, 100.0), expected="AsymptoticallyStable",
          figure="Fig. 5a", description="8 elements, offsets (-1,-2), small deviation",
          source="n=8, K=(1,0.5,0.5) uniform; E0=(2,1,...,1)"),
        s("fig5b", eight_a, (6,) + (1,) * 7, cfg(0.01, 100.0), expected="AsymptoticallyStable",
          figure="Fig. 5b", description="8 elements, offsets (-1,-2), large deviation",
          source="n=8, K=(1,0.5,0.5) uniform; E0=(6,1,...,1)"),
        s("fig5c", eight_b, (1.01,) + (1,) * 7, cfg(0.01, 500.0), expected="Oscillatory",
          figure="Fig. 5c", description="8 elements, offsets (-1,-3), tiny deviation grows",
          source="n=8, K=(1,0.5,0.5) uniform; E0=(1.01,1,...,1)"),
        s("fig5d", eight_b, (6,) + (1,) * 7, cfg(0.01, 500.0), expected="Oscillatory",
          figure="Fig. 5d", description="8 elements, offsets (-1,-3), immediate oscillation",
          source="n=8, K=(1,0.5,0.5) uniform; E0=(6,1,...,1)"),
        s("fig7a", five_slow, (6.68, 1.68, 1.68, 1.68, 1.68), cfg(0.01, 1500.0), inj(0.5),
          expected="Oscillatory", figure="Fig. 7a",
          description="fig3d system, weak input 0.5 on element 1 from t0=250 s",
          source="fig3d + input amplitude 0.5 at t0=250 s"),
        s("fig7b", five_slow, (6.68, 1.68, 1.68, 1.68, 1.68), cfg(0.01, 1500.0), inj(1.5),
          expected="AsymptoticallyStable", figure="Fig. 7b",
          description="fig3d system, strong input 1.5: settles at a new fixed point",
          source="fig3d + input amplitude 1.5 at t0=250 s"),
        s("fig7c", eight_b, (6,) + (1,) * 7, cfg(0.01, 1500.0), inj(0.5),
          expected="Oscillatory", figure="Fig. 7c",
          description="fig5d system, weak input 0.5 on element 1 from t0=250 s",
          source="fig5d + input amplitude 0.5 at t0=250 s"),
        s("fig7d", eight_b, (6,) + (1,) * 7, cfg(0.01, 1500.0), inj(1.0),
          expected="AsymptoticallyStable", figure="Fig. 7d",
          description="fig5d system, strong input 1.0: settles at a new fixed point",
          source="fig5d + input amplitude 1.0 at t0=250 s"),
    ]


def get_scenario(name: str) -> Scenario:
    for sc in builtin_catalog():
        if sc.name == name:
            return sc
    raise ScenarioError(f"unknown scenario {name!r}")


# --- .scn files --------------------------------------------------------------

def _vec(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _num(v: float) -> str:
    return repr(float(v))


def dumps(scenario: Scenario) -> str:
    """Serialize to the ``.scn`` text format (INI-style sections)."""
    cp = configparser.ConfigParser(interpolation=None)
    sc = scenario
    cp["scenario"] = {"name": sc.name}
    for key in ("expected", "figure", "description", "source"):
        val = getattr(sc, key)
        if val:
            cp["scenario"][key] = val
    spec = sc.spec
    cp["system"] = {"n": str(spec.n), "gen_offset": str(spec.gen_offset),
                    "sup_offset": str(spec.sup_offset),
                    "k1": " ".join(map(_num, spec.k1)), "k2": " ".join(map(_num, spec.k2)),
                    "k3": " ".join(map(_num, spec.k3))}
    cp["initial"] = {"values": " ".join(map(_num, sc.initial))}
    if sc.allow_nonpositive:
        cp["initial"]["allow_nonpositive"] = "true"
    cp["integrator"] = {"dt": _num(sc.config.dt), "t_end": _num(sc.config.t_end),
                        "record_stride": str(sc.config.record_stride)}
    for i, e in enumerate(sc.schedule, start=1):
        cp[f"input.{i}"] = {"element": str(e.element), "t_start": _num(e.t_start),
                            "t_stop": _num(e.t_stop), "amplitude": _num(e.amplitude)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
        meta = cp["scenario"]
        sysd = cp["system"]
        n = sysd.getint("n")
        spec = SystemSpec(n, _vec(sysd["k1"]), _vec(sysd["k2"]), _vec(sysd["k3"]),
                          sysd.getint("gen_offset", -1), sysd.getint("sup_offset", -2))
        integ = cp["integrator"] if cp.has_section("integrator") else {}
        config = IntegratorConfig(float(integ.get("dt", 0.01)), float(integ.get("t_end", 100.0)),
                                  int(integ.get("record_stride", 10)))
        entries = []
        inputs = sorted((s for s in cp.sections() if s.startswith("input.")),
                        key=lambda s: int(s.split(".", 1)[1]))
        for sec in inputs:
            d = cp[sec]
            entries.append(InputEntry(d.getint("element"), d.getfloat("t_start"),
                                      d.getfloat("amplitude"), d.getfloat("t_stop", math.inf)))
        init = cp["initial"]
        return Scenario(meta["name"], spec, tuple(_vec(init["values"])), config,
                        InputSchedule(tuple(entries)), meta.get("expected") or None,
                        meta.get("figure", ""), meta.get("description", ""),
                        meta.get("source", ""), init.getboolean("allow_nonpositive", False))
    except (KeyError, configparser.Error, ValueError) as exc:
        raise ScenarioError(f"invalid scenario file: {exc}") from exc


def load(path) -> Scenario:
    return loads(Path(path).read_text())


def save(scenario: Scenario, path):
    _atomic_write(Path(path), dumps(scenario))


def resolve(name_or_path: str) -> Scenario:
    """Builtin scenario by name, or a ``.scn`` file path."""
    p = Path(name_or_path)
    if p.suffix == ".scn" or p.exists():
        return load(p)
    return get_scenario(name_or_path)


# --- running -----------------------------------------------------------------

@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    series: object
    classification: Classification
    base_fixed_point: np.ndarray

    @property
    def matched(self) -> Optional[bool]:
        if self.scenario.expected is None:
            return None
        return self.classification.verdict == self.scenario.expected


@dataclass
class RunArtifacts:
    directory: Path
    trajectory_csv: Path
    diagnostics_csv: Optional[Path]
    classification_json: Path
    plots: list = field(default_factory=list)
    result: Optional[RunResult] = None

    @property
    def matched(self) -> Optional[bool]:
        return None if self.result is None else self.result.matched

    def mismatch_report(self) -> str:
        r = self.result
        if r is None or r.matched is not False:
            return ""
        c = r.classification
        return (f"{r.scenario.name}: expected {r.scenario.expected}, got {c.verdict}"
                f" (final |R| mean {c.final_r:.3g}{'; ' + c.note if c.note else ''})")


def execute(scenario: Scenario, thresholds: Thresholds = Thresholds(),
            seed_mode: str = "averaged") -> RunResult:
    """Simulate, compute diagnostics and classify, without writing files."""
    spec = checked(scenario.spec)
    x0 = np.array(scenario.initial)
    if not scenario.allow_nonpositive and not np.all(x0 > 0):
        raise ScenarioError(f"{scenario.name}: initial state must be strictly positive")
    traj = simulate(spec, x0, scenario.config, scenario.schedule, on_blowup="truncate",
                    check_positive=not scenario.allow_nonpositive)
    base = solve_fixed_point(spec, seed_mode=seed_mode).b
    refs = reference_points(spec, traj, seed_mode, base=base)
    series = diagnostics_series(spec, traj, refs)
    return RunResult(scenario, traj, series, classify(series, traj, thresholds), base)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _classification_payload(res: RunResult) -> dict:
    payload = {"scenario": res.scenario.name, "expected": res.scenario.expected,
               "matched": res.matched, "fixed_point": res.base_fixed_point.tolist(),
               "final_reference": res.series.b_used[-1].tolist()}
    payload.update(res.classification.to_dict())
    return payload


def run_scenario(scenario: Scenario, out_dir, *, thresholds: Thresholds = Thresholds(),
                 plot: bool = True, diagnostics: str = "separate",
                 seed_mode: str = "averaged") -> RunArtifacts:
    """Run one scenario and write its artifacts under ``out_dir/<name>/``.

    ``diagnostics="append"`` adds the diagnostics columns to the trajectory
    CSV instead of writing ``diagnostics.csv``.
    """
    if diagnostics not in ("separate", "append"):
        raise ValueError("diagnostics must be 'separate' or 'append'")
    res = execute(scenario, thresholds, seed_mode)
    directory = Path(out_dir) / scenario.name
    directory.mkdir(parents=True, exist_ok=True)

    buf = io.StringIO()
    extra = res.series.columns() if diagnostics == "append" else None
    res.trajectory.to_csv(buf, extra)
    traj_path = directory / "trajectory.csv"
    _atomic_write(traj_path, buf.getvalue())

    diag_path = None
    if diagnostics == "separate":
        buf = io.StringIO()
        res.series.to_csv(buf)
        diag_path = directory / "diagnostics.csv"
        _atomic_write(diag_path, buf.getvalue())

    cls_path = directory / "classification.json"
    _atomic_write(cls_path, json.dumps(_classification_payload(res), indent=2, sort_keys=True) + "\n")

    plots = []
    if plot:
        from .plotting import trajectory_svg
        svg_path = directory / "plot.svg"
        _atomic_write(svg_path, trajectory_svg(res.trajectory, res.series,
                                               title=f"{scenario.name}: {scenario.description}"))
        plots.append(svg_path)
    return RunArtifacts(directory, traj_path, diag_path, cls_path, plots, res)


# --- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    base: Scenario
    axis1: str
    values1: tuple
    axis2: Optional[str] = None
    values2: tuple = (None,)

    def __post_init__(self):
        object.__setattr__(self, "values1", tuple(self.values1))
        object.__setattr__(self, "values2", tuple(self.values2))
        if not self.values1 or not self.values2:
            raise ScenarioError("sweep axes need at least one value")
        if self.axis2 is None and self.values2 != (None,):
            raise ScenarioError("values given for a missing second axis")


@dataclass
class SweepCell:
    axis1: object
    axis2: object
    verdict: str
    final_r: Optional[float] = None
    period: Optional[float] = None
    amplitude_e1: Optional[float] = None
    error: str = ""


def _split(selector):
    if "." in selector:
        key, idx = selector.split(".", 1)
        return key, int(idx)
    return selector, None


def apply_selector(scenario: Scenario, selector: str, value) -> Scenario:
    """Return ``scenario`` with one parameter changed.

    Selectors: ``k1``/``k2``/``k3`` (uniform value), ``k1.j`` (element ``j``,
    1-based), ``gen_offset``, ``sup_offset``, ``initial.j`` (absolute
    value), ``deviation.j`` (start at the fixed point plus ``value`` on
    element ``j``), ``amplitude.m`` (input entry ``m``), ``dt``, ``t_end``.
    """
    key, idx = _split(selector)
    spec = scenario.spec
    if key in ("k1", "k2", "k3"):
        vec = np.array(getattr(spec, key))
        if idx is None:
            vec[:] = float(value)
        else:
            vec[idx - 1] = float(value)
        return replace(scenario, spec=spec.replace(**{key: vec}))
    if key in ("gen_offset", "sup_offset"):
        return replace(scenario, spec=spec.replace(**{key: int(value)}))
    if key == "initial" and idx is not None:
        init = list(scenario.initial)
        init[idx - 1] = float(value)
        return replace(scenario, initial=tuple(init))
    if key == "deviation" and idx is not None:
        b = solve_fixed_point(checked(spec)).b.copy()
        b[idx - 1] += float(value)
        return replace(scenario, initial=tuple(b))
    if key == "amplitude" and idx is not None:
        entries = list(scenario.schedule.entries)
        e = entries[idx - 1]
        entries[idx - 1] = InputEntry(e.element, e.t_start, float(value), e.t_stop)
        return replace(scenario, schedule=InputSchedule(tuple(entries)))
    if key == "dt":
        return scenario.with_overrides(dt=float(value))
    if key == "t_end":
        return scenario.with_overrides(t_end=float(value))
    raise ScenarioError(f"unknown selector {selector!r}")


def _cell_scenario(grid: SweepGrid, v1, v2) -> Scenario:
    # spec-changing selectors first so deviation.j sees the cell's own fixed point
    order = [(grid.axis1, v1), (grid.axis2, v2)]
    order.sort(key=lambda p: p[0] is not None and _split(p[0])[0] in ("deviation",))
    sc = grid.base
    for sel, val in order:
        if sel is not None:
            sc = apply_selector(sc, sel, val)
    return replace(sc, name=f"{grid.base.name}[{v1},{v2}]", expected=None)


def _run_cell(args) -> SweepCell:
    grid, v1, v2, thresholds = args
    try:
        res = execute(_cell_scenario(grid, v1, v2), thresholds)
    except (SpecError, ScenarioError, NumericalError, ArithmeticError, ValueError) as exc:
        return SweepCell(v1, v2, "Error", error=f"{type(exc).__name__}: {exc}")
    c = res.classification
    amp = c.cycle_amplitude[0] if c.cycle_amplitude else None
    return SweepCell(v1, v2, c.verdict, c.final_r, c.cycle_period, amp, c.note)


def sweep(grid: SweepGrid, thresholds: Thresholds = Thresholds(), jobs: int = 1) -> list[SweepCell]:
    """Classify every grid cell. Cells are independent; ``jobs > 1`` runs them in processes."""
    tasks = [(grid, v1, v2, thresholds) for v1 in grid.values1 for v2 in grid.values2]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, tasks))
    return [_run_cell(t) for t in tasks]


SWEEP_COLUMNS = ("axis1", "axis2", "verdict", "final_r", "period", "amplitude_e1")


def sweep_csv(cells: list[SweepCell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    fmt = lambda v: "" if v is None else (format(v, ".17g") if isinstance(v, float) else str(v))  # noqa: E731
    for c in cells:
        w.writerow([fmt(c.axis1), fmt(c.axis2), c.verdict, fmt(c.final_r), fmt(c.period),
                    fmt(c.amplitude_e1)])
    return buf.getvalue()


def run_sweep(grid: SweepGrid, out_dir, *, thresholds: Thresholds = Thresholds(),
              jobs: int = 1) -> tuple[Path, list[SweepCell]]:
    cells = sweep(grid, thresholds, jobs)
    path = Path(out_dir) / f"sweep_{grid.base.name}.csv"
    _atomic_write(path, sweep_csv(cells))
    errors = [f"{c.axis1},{c.axis2}: {c.error}" for c in cells if c.verdict == "Error"]
    if errors:
        _atomic_write(path.with_suffix(".errors.txt"), "\n".join(errors) + "\n")
    return path, cells


def load_grid(path) -> SweepGrid:
    """Read a sweep file: a ``[sweep]`` section naming the base and the axes."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(Path(path).read_text())
        d = cp["sweep"]
        base_ref = d["base"]
        base_path = Path(path).parent / base_ref
        base = load(base_path) if base_ref.endswith(".scn") else get_scenario(base_ref)
        if "t_end" in d or "dt" in d:
            base = base.with_overrides(dt=d.getfloat("dt") if "dt" in d else None,
                                       t_end=d.getfloat("t_end") if "t_end" in d else None)
        axis2 = d.get("axis2")
        return SweepGrid(base, d["axis1"], tuple(_vec(d["axis1_values"])), axis2,
                         tuple(_vec(d["axis2_values"])) if axis2 else (None,))
    except (KeyError, configparser.Error) as exc:
        raise ScenarioError(f"invalid sweep file: {exc}") from exc


def bisect_boundary(base: Scenario, selector: str, lo: float, hi: float, *,
                    tol: float = 1e-3, thresholds: Thresholds = Thresholds()) -> tuple[float, float]:
    """Narrow ``[lo, hi]`` to a bracket of width ``<= tol`` across which the verdict flips."""
    def verdict(v):
        return _run_cell((SweepGrid(base, selector, (v,)), v, None, thresholds)).verdict
    v_lo, v_hi = verdict(lo), verdict(hi)
    if v_lo == v_hi:
        raise ScenarioError(f"no verdict change between {lo} and {hi} ({v_lo})")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        v_mid = verdict(mid)
        if v_mid == v_lo:
            lo = mid
        else:
            hi, v_hi = mid, v_mid
    return lo, hi
