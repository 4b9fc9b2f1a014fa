"""Scenario config schema and file exports.

Formats:

* scenario config: strict JSON (unknown keys rejected at every level); all
  lengths in meters, times in seconds.
* step logs: JSON lines, one schema-versioned record per step, full double
  precision.
* grids and run summaries: CSV with ``#`` metadata comment lines.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any

from .errors import ConfigInvalid
from .fleet_simulator import AgentSpec, FailureEvent, Scenario, VehicleModel
from .flow_field import FieldGrid
from .navigator import NavigatorConfig
from .safety_analysis import SafetyMargins, monitor_separations
from .streamline_solver import SolverConfig
from .telemetry import SCHEMA_VERSION, ScenarioLog

CONFIG_SCHEMA_VERSION = 1

_TOP_KEYS = {
    "schema_version", "name", "seed", "duration", "pre_roll_velocity",
    "margins", "navigator", "solver", "vehicle", "agents", "failures",
}
_MARGIN_KEYS = {"delta", "epsilon"}
_NAV_KEYS = {"v_des", "dt", "k_passes", "total_steps"}
_SOLVER_KEYS = {"iterations", "noise_sigma", "dt", "rng_seed"}
_VEHICLE_KEYS = {"mode", "tracking_gain", "disturbance_amplitude"}
_AGENT_KEYS = {"id", "position", "altitude"}
_FAILURE_KEYS = {"agent_id", "time"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigInvalid(f"invalid scenario: unknown key(s) {unknown} in {where}")


def _require(section: dict, key: str, where: str) -> Any:
    if key not in section:
        raise ConfigInvalid(f"invalid scenario: missing required key {key!r} in {where}")
    return section[key]


def _point(value, where: str) -> tuple[float, float]:
    try:
        x, y = value
        return float(x), float(y)
    except (TypeError, ValueError) as err:
        raise ConfigInvalid(f"invalid scenario: bad point {value!r} in {where}") from err


def scenario_from_dict(doc: dict) -> Scenario:
    """Build a Scenario from a parsed config document (strict keys)."""
    if not isinstance(doc, dict):
        raise ConfigInvalid("invalid scenario: top level must be an object")
    _check_keys(doc, _TOP_KEYS, "top level")
    version = doc.get("schema_version", CONFIG_SCHEMA_VERSION)
    if version != CONFIG_SCHEMA_VERSION:
        raise ConfigInvalid(f"invalid scenario: unsupported schema_version {version}")

    try:
        m = doc.get("margins", {})
        _check_keys(m, _MARGIN_KEYS, "margins")
        margins = SafetyMargins(
            delta=float(m.get("delta", 0.40)),
            epsilon=float(m.get("epsilon", 0.28)),
        )

        duration = float(_require(doc, "duration", "top level"))
        nav = _require(doc, "navigator", "top level")
        _check_keys(nav, _NAV_KEYS, "navigator")
        dt = float(nav.get("dt", 0.01))
        total_steps = nav.get("total_steps")
        if total_steps is None:
            total_steps = int(round(duration / dt))
        navigator = NavigatorConfig(
            v_des=float(_require(nav, "v_des", "navigator")),
            total_steps=int(total_steps),
            dt=dt,
            k_passes=int(nav.get("k_passes", 2)),
        )

        sol = doc.get("solver", {})
        _check_keys(sol, _SOLVER_KEYS, "solver")
        rng_seed = sol.get("rng_seed")
        solver = SolverConfig(
            iterations=int(sol.get("iterations", 20)),
            noise_sigma=float(sol.get("noise_sigma", 0.001)),
            dt=float(sol.get("dt", dt)),
            rng_seed=None if rng_seed is None else int(rng_seed),
        )

        veh = doc.get("vehicle", {})
        _check_keys(veh, _VEHICLE_KEYS, "vehicle")
        vehicle = VehicleModel(
            mode=str(veh.get("mode", "lag-plus-bounded-disturbance")),
            tracking_gain=float(veh.get("tracking_gain", 2.0)),
            disturbance_amplitude=float(veh.get("disturbance_amplitude", 0.2)),
        )

        agents = []
        for idx, a in enumerate(_require(doc, "agents", "top level")):
            _check_keys(a, _AGENT_KEYS, f"agents[{idx}]")
            agents.append(
                AgentSpec(
                    agent_id=_require(a, "id", f"agents[{idx}]"),
                    position=_point(_require(a, "position", f"agents[{idx}]"),
                                    f"agents[{idx}]"),
                    altitude=float(a.get("altitude", 1.0)),
                )
            )

        failures = []
        for idx, f in enumerate(doc.get("failures", [])):
            _check_keys(f, _FAILURE_KEYS, f"failures[{idx}]")
            failures.append(
                FailureEvent(
                    agent_id=_require(f, "agent_id", f"failures[{idx}]"),
                    time=float(_require(f, "time", f"failures[{idx}]")),
                )
            )
    except (TypeError, ValueError) as err:
        raise ConfigInvalid(f"invalid scenario: {err}") from err

    scenario = Scenario(
        agents=tuple(agents),
        failures=tuple(failures),
        margins=margins,
        navigator=navigator,
        solver=solver,
        vehicle=vehicle,
        duration=duration,
        seed=int(doc.get("seed", 0)),
        pre_roll_velocity=_point(doc.get("pre_roll_velocity", (0.0, 0.0)),
                                 "pre_roll_velocity"),
        name=str(doc.get("name", "scenario")),
    )
    scenario.validate()
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "name": scenario.name,
        "seed": scenario.seed,
        "duration": scenario.duration,
        "pre_roll_velocity": list(scenario.pre_roll_velocity),
        "margins": asdict(scenario.margins),
        "navigator": asdict(scenario.navigator),
        "solver": asdict(scenario.solver),
        "vehicle": asdict(scenario.vehicle),
        "agents": [
            {"id": a.agent_id, "position": list(a.position), "altitude": a.altitude}
            for a in scenario.agents
        ],
        "failures": [
            {"agent_id": f.agent_id, "time": f.time} for f in scenario.failures
        ],
    }


def load_scenario(path: str | Path) -> Scenario:
    """Parse a config file; parse errors and scenario errors are distinct."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigInvalid(f"cannot read config {p}: {err}") from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigInvalid(f"cannot parse config {p}: {err}") from err
    return scenario_from_dict(doc)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2) + "\n")


def override_seed(scenario: Scenario, seed: int) -> Scenario:
    """Replace the master seed; the solver stream inherits it again."""
    return replace(
        scenario, seed=int(seed), solver=replace(scenario.solver, rng_seed=None)
    )


# ---------------- log exports ----------------


def write_steps_jsonl(log: ScenarioLog, path: str | Path) -> None:
    """One JSON record per step, append-only, full double precision."""
    with open(path, "w") as fh:
        for rec in log:
            doc = {
                "schema_version": SCHEMA_VERSION,
                "step": rec.step,
                "t": rec.time,
                "delta_phi": rec.delta_phi,
                "v_max": rec.v_max,
                "runtime_ns": rec.runtime_ns,
                "deadline_missed": rec.deadline_missed,
                "agents": [
                    {
                        "id": a.agent_id,
                        "healthy": a.healthy,
                        "rd": list(a.desired_position),
                        "vd": list(a.desired_velocity),
                        "r": list(a.actual_position),
                        "v": list(a.actual_velocity),
                        "phi": a.phi,
                        "psi": a.psi,
                        "disturbed": a.disturbed,
                    }
                    for a in rec.agents
                ],
            }
            fh.write(json.dumps(doc) + "\n")


def read_steps_jsonl(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _fmt(value: float) -> str:
    return "" if value is None or (isinstance(value, float) and math.isnan(value)) else repr(value)


def write_summary_csv(log: ScenarioLog, margins: SafetyMargins, path: str | Path) -> None:
    """Per-step separations, increment, speeds, and runtimes."""
    series = monitor_separations(log, margins)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "step", "t", "delta_phi", "v_max",
            "min_pair_commanded", "min_pair_actual",
            "clearance_commanded", "clearance_actual",
            "max_commanded_speed", "runtime_ms",
        ])
        for k, rec in enumerate(log):
            speeds = [
                math.hypot(*a.desired_velocity) for a in rec.agents if a.healthy
            ]
            writer.writerow([
                rec.step,
                repr(rec.time),
                _fmt(rec.delta_phi),
                _fmt(rec.v_max),
                _fmt(float(series.min_pair_commanded[k])),
                _fmt(float(series.min_pair_actual[k])),
                _fmt(float(series.clearance_commanded[k])),
                _fmt(float(series.clearance_actual[k])),
                _fmt(max(speeds) if speeds else None),
                repr(rec.runtime_ns / 1e6),
            ])


def write_field_grid_csv(grid: FieldGrid, path: str | Path) -> None:
    """Rectangular (x, y, phi, psi) samples; cells inside exclusion disks
    keep their row but carry empty phi/psi values."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# field grid export, schema {SCHEMA_VERSION}\n")
        fh.write(f"# grid_step={grid.grid_step!r} nx={len(grid.xs)} ny={len(grid.ys)}\n")
        for o in grid.obstacles:
            fh.write(
                f"# obstacle: x={o.center[0]!r} y={o.center[1]!r} "
                f"planned_radius={o.planned_radius!r}\n"
            )
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "phi", "psi"])
        for j, y in enumerate(grid.ys):
            for i, x in enumerate(grid.xs):
                if grid.masked[j, i]:
                    writer.writerow([repr(float(x)), repr(float(y)), "", ""])
                else:
                    writer.writerow([
                        repr(float(x)), repr(float(y)),
                        repr(float(grid.phi[j, i])), repr(float(grid.psi[j, i])),
                    ])
