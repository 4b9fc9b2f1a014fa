"""Deterministic scenario engine for formation fleets with scripted failures.

A scenario scripts a formation, failure times, margins, and model settings.
Until the first failure the fleet holds formation (or pre-rolls at constant
velocity); at each failure time the failed agent freezes in place, becomes
an exclusion zone, and the navigator (re)anchors every healthy agent to the
streamlines of the updated field. Vehicles follow commands through a
bounded-error model, and every step is logged.

The vehicle model is an abstraction of a real tracking controller: a
first-order lag with velocity feed-forward plus an optional seeded
sinusoidal disturbance, with the total deviation hard-saturated at the
tracking-error bound delta. Only that bound matters to the safety
guarantees, so the model enforces it by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Sequence

import numpy as np

from .errors import ConfigInvalid
from .flow_field import FlowField, Obstacle, Point
from .navigator import Navigator, NavigatorConfig, StepOutput
from .safety_analysis import SafetyMargins, check_single_obstacle_condition
from .streamline_solver import SolverConfig
from .telemetry import AgentRecord, ScenarioLog, StepRecord

import logging

logger = logging.getLogger(__name__)

VEHICLE_MODES = ("perfect", "first-order-lag", "lag-plus-bounded-disturbance")


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str | int
    position: Point
    altitude: float = 1.0


@dataclass(frozen=True)
class FailureEvent:
    agent_id: str | int
    time: float


@dataclass(frozen=True)
class VehicleModel:
    """Bounded-error tracking abstraction; deviation never exceeds delta."""

    mode: str = "lag-plus-bounded-disturbance"
    tracking_gain: float = 2.0          # 1/s
    disturbance_amplitude: float = 0.2  # meters, must stay <= delta

    def __post_init__(self):
        if self.mode not in VEHICLE_MODES:
            raise ValueError(f"mode must be one of {VEHICLE_MODES}, got {self.mode!r}")
        if self.tracking_gain <= 0.0:
            raise ValueError(f"tracking_gain must be > 0, got {self.tracking_gain}")
        if self.disturbance_amplitude < 0.0:
            raise ValueError("disturbance_amplitude must be >= 0")


@dataclass(frozen=True)
class Scenario:
    agents: tuple[AgentSpec, ...]
    failures: tuple[FailureEvent, ...]
    margins: SafetyMargins
    navigator: NavigatorConfig
    solver: SolverConfig
    vehicle: VehicleModel
    duration: float
    seed: int = 0
    pre_roll_velocity: Point = (0.0, 0.0)
    name: str = "scenario"

    def validate(self) -> None:
        """Raise ConfigInvalid with every diagnostic found."""
        problems: list[str] = []
        if not self.agents:
            problems.append("scenario has no agents")
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            problems.append(f"duplicate agent ids: {ids}")
        if self.duration <= 0.0:
            problems.append(f"duration must be > 0, got {self.duration}")
        known = set(ids)
        for f in self.failures:
            if f.agent_id not in known:
                problems.append(f"failure references unknown agent {f.agent_id!r}")
            if not 0.0 <= f.time <= self.duration:
                problems.append(
                    f"failure time {f.time} for agent {f.agent_id!r} outside [0, {self.duration}]"
                )
        failure_ids = [f.agent_id for f in self.failures]
        if len(set(failure_ids)) != len(failure_ids):
            problems.append(f"agent scheduled to fail more than once: {failure_ids}")
        if self.failures and len(set(failure_ids)) >= len(self.agents):
            problems.append("all agents scheduled to fail; at least one must stay healthy")
        if self.vehicle.disturbance_amplitude > self.margins.delta:
            problems.append(
                f"disturbance amplitude {self.vehicle.disturbance_amplitude} exceeds "
                f"delta {self.margins.delta}"
            )
        expected_steps = int(round(self.duration / self.navigator.dt))
        if self.navigator.total_steps != expected_steps:
            problems.append(
                f"navigator.total_steps={self.navigator.total_steps} inconsistent with "
                f"duration/dt={expected_steps}"
            )
        if problems:
            raise ConfigInvalid("invalid scenario: " + "; ".join(problems))

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.navigator.dt))


class _Vehicle:
    """Lag-tracking state for one agent; enforces the delta deviation bound."""

    __slots__ = ("model", "delta", "z", "actual", "prev_actual",
                 "amp", "w1", "w2", "p1", "p2")

    def __init__(self, model: VehicleModel, delta: float, start: Point,
                 rng: np.random.Generator):
        self.model = model
        self.delta = delta
        self.z = (float(start[0]), float(start[1]))
        self.actual = self.z
        self.prev_actual = self.z
        self.amp = min(model.disturbance_amplitude, delta)
        # Per-agent disturbance frequencies/phases, drawn once at start.
        self.w1 = float(rng.uniform(0.5, 2.0))
        self.w2 = float(rng.uniform(0.5, 2.0))
        self.p1 = float(rng.uniform(0.0, 2.0 * math.pi))
        self.p2 = float(rng.uniform(0.0, 2.0 * math.pi))

    def step(self, t: float, dt: float, desired: Point, desired_vel: Point) -> None:
        self.prev_actual = self.actual
        if self.model.mode == "perfect":
            self.actual = desired
            return
        kp = self.model.tracking_gain
        zx = self.z[0] + dt * (desired_vel[0] + kp * (desired[0] - self.z[0]))
        zy = self.z[1] + dt * (desired_vel[1] + kp * (desired[1] - self.z[1]))
        self.z = (zx, zy)
        ax, ay = zx, zy
        if self.model.mode == "lag-plus-bounded-disturbance" and self.amp > 0.0:
            ax += self.amp * math.sin(self.w1 * t + self.p1)
            ay += self.amp * math.sin(self.w2 * t + self.p2)
        # Hard saturation: the tracking-error bound is a model guarantee.
        ex = ax - desired[0]
        ey = ay - desired[1]
        err = math.hypot(ex, ey)
        if err > self.delta:
            scale = self.delta / err
            ax = desired[0] + ex * scale
            ay = desired[1] + ey * scale
        self.actual = (ax, ay)

    def velocity(self, dt: float) -> Point:
        return ((self.actual[0] - self.prev_actual[0]) / dt,
                (self.actual[1] - self.prev_actual[1]) / dt)

    def freeze(self) -> None:
        self.prev_actual = self.actual


def run_scenario(scenario: Scenario, fast: bool = True) -> ScenarioLog:
    """Execute a scenario and return the full step log.

    When exactly one failure is scripted, the single-obstacle pre-flight
    condition is evaluated on the healthy formation at the failure time and
    a warning is logged if it fails (the run proceeds regardless; the report
    lands in ``log.meta['preflight']``).
    """
    scenario.validate()
    dt = scenario.navigator.dt
    m = scenario.n_steps
    ids = [a.agent_id for a in scenario.agents]
    initial = {a.agent_id: (float(a.position[0]), float(a.position[1]))
               for a in scenario.agents}
    prv = scenario.pre_roll_velocity

    meta: dict = {"name": scenario.name}
    if len(scenario.failures) == 1:
        fail = scenario.failures[0]
        at_t0 = [
            (initial[i][0] + prv[0] * fail.time, initial[i][1] + prv[1] * fail.time)
            for i in ids if i != fail.agent_id
        ]
        report = check_single_obstacle_condition(
            at_t0, scenario.margins, planned_radius=scenario.margins.planned_radius
        )
        meta["preflight"] = report
        if report.single_obstacle_ok is False:
            logger.warning(
                "pre-flight single-obstacle condition fails: min separation %.3f m "
                "< required %.3f m (margin %.3f m); running anyway",
                report.min_xy_separation,
                scenario.margins.separation_floor + scenario.margins.planned_radius,
                report.margin,
            )

    solver_cfg = scenario.solver
    if solver_cfg.rng_seed is None:
        solver_cfg = replace(solver_cfg, rng_seed=scenario.seed)
    nav = Navigator(scenario.navigator, solver_cfg)

    vehicle_rng = np.random.default_rng(scenario.seed)
    vehicles = {
        i: _Vehicle(scenario.vehicle, scenario.margins.delta, initial[i], vehicle_rng)
        for i in ids
    }

    desired = dict(initial)
    desired_vel = {i: (0.0, 0.0) for i in ids}
    failed: dict = {}          # agent_id -> frozen (desired) position
    pending = sorted(scenario.failures, key=lambda f: f.time)
    nav_active = False
    state_by_id: dict = {}
    records: list[StepRecord] = []

    for k in range(m):
        t_now = k * dt
        t_cmd = (k + 1) * dt

        newly = [f for f in pending if f.time <= t_now]
        if newly:
            pending = [f for f in pending if f.time > t_now]
            for f in newly:
                failed[f.agent_id] = desired[f.agent_id]
                desired_vel[f.agent_id] = (0.0, 0.0)
                vehicles[f.agent_id].freeze()
            obstacles = [
                Obstacle.from_failed_agent(pos, scenario.margins)
                for pos in failed.values()
            ]
            flow = FlowField(obstacles)
            healthy_ids = [i for i in ids if i not in failed]
            nav.activate([desired[i] for i in healthy_ids], flow, agent_ids=healthy_ids)
            nav_active = True

        disturbed = {i: False for i in ids}
        if nav_active:
            out: StepOutput = nav.step()
            for cmd, dist in zip(out.commands, out.disturbed):
                desired[cmd.agent_id] = cmd.position
                desired_vel[cmd.agent_id] = cmd.velocity
                disturbed[cmd.agent_id] = dist
            state_by_id = {s.agent_id: s for s in nav.states}
            step_dphi: float | None = out.delta_phi_used
            step_vmax: float | None = out.v_max_observed
            runtime_ns = out.step_runtime_ns
        else:
            for i in ids:
                desired[i] = (initial[i][0] + prv[0] * t_cmd,
                              initial[i][1] + prv[1] * t_cmd)
                desired_vel[i] = prv
            step_dphi = None
            step_vmax = None
            runtime_ns = 0

        agent_records = []
        for i in ids:
            healthy = i not in failed
            if healthy:
                vehicles[i].step(t_cmd, dt, desired[i], desired_vel[i])
                actual = vehicles[i].actual
                actual_vel = vehicles[i].velocity(dt)
            else:
                actual = vehicles[i].actual
                actual_vel = (0.0, 0.0)
            st = state_by_id.get(i) if healthy else None
            agent_records.append(
                AgentRecord(
                    agent_id=i,
                    healthy=healthy,
                    desired_position=desired[i],
                    desired_velocity=desired_vel[i],
                    actual_position=actual,
                    actual_velocity=actual_vel,
                    phi=st.phi if st is not None else None,
                    psi=st.psi0 if st is not None else None,
                    disturbed=disturbed[i],
                )
            )

        records.append(
            StepRecord(
                step=k,
                time=t_cmd,
                agents=tuple(agent_records),
                delta_phi=step_dphi,
                v_max=step_vmax,
                runtime_ns=runtime_ns,
                deadline_missed=runtime_ns > int(dt * 1e9),
            )
        )

    return ScenarioLog(
        records=records,
        dt=dt,
        agent_ids=tuple(ids),
        altitudes={a.agent_id: a.altitude for a in scenario.agents},
        seed=scenario.seed,
        meta=meta,
    )


def default_six_agent_scenario(seed: int = 7) -> Scenario:
    """Six-agent leading-triangle formation with one scripted failure.

    The layout is parametric in the minimum separation, here exactly the
    boundary value of the single-obstacle condition (2.72 m with the default
    margins), so the scenario passes pre-flight with zero margin. The lead
    agent fails at t=0 and the rest stream past its exclusion zone in +x.

    Coordinates (s = 2.72, h = s * sqrt(3) / 2):
        Q1 ( 0.0,  0.0)   lead, fails
        Q2 (-s,    0.0)   directly behind: rides the psi=0 streamline
        Q3 (-s/2,  h)     left wing
        Q4 (-s/2, -h)     right wing
        Q5 (-3s/2, h)     left trail
        Q6 (-3s/2,-h)     right trail
    Every nearest-neighbor pair is at distance s exactly.
    """
    margins = SafetyMargins(delta=0.40, epsilon=0.28)
    s = margins.separation_floor + margins.planned_radius  # 2.72 m
    h = s * math.sqrt(3.0) / 2.0
    agents = (
        AgentSpec("Q1", (0.0, 0.0)),
        AgentSpec("Q2", (-s, 0.0)),
        AgentSpec("Q3", (-s / 2.0, h)),
        AgentSpec("Q4", (-s / 2.0, -h)),
        AgentSpec("Q5", (-1.5 * s, h)),
        AgentSpec("Q6", (-1.5 * s, -h)),
    )
    duration = 20.0
    dt = 0.01
    return Scenario(
        agents=agents,
        failures=(FailureEvent("Q1", 0.0),),
        margins=margins,
        navigator=NavigatorConfig(
            v_des=1.0, total_steps=int(round(duration / dt)), dt=dt, k_passes=2
        ),
        solver=SolverConfig(iterations=20, noise_sigma=0.001, dt=dt, rng_seed=None),
        vehicle=VehicleModel(),
        duration=duration,
        seed=seed,
        name="six-agent",
    )


@dataclass(frozen=True)
class KSweepEntry:
    k_passes: int
    peak_commanded_speed: float
    mean_step_runtime_ns: float
    p99_step_runtime_ns: float
    log: ScenarioLog


def peak_commanded_speed(log: ScenarioLog) -> float:
    """Max over steps and healthy agents of the commanded speed norm."""
    peak = 0.0
    for rec in log:
        for a in rec.agents:
            if not a.healthy:
                continue
            vx, vy = a.desired_velocity
            peak = max(peak, math.hypot(vx, vy))
    return peak


def sweep_k(scenario: Scenario, k_values: Sequence[int]) -> list[KSweepEntry]:
    """Re-run the scenario per retune count with identical seeds."""
    if not k_values:
        raise ValueError("k_values must be nonempty")
    entries = []
    for k in k_values:
        s_k = replace(scenario, navigator=replace(scenario.navigator, k_passes=int(k)))
        log = run_scenario(s_k, fast=True)
        runtimes = np.array([rec.runtime_ns for rec in log if rec.delta_phi is not None],
                            dtype=float)
        if runtimes.size == 0:
            runtimes = np.zeros(1)
        entries.append(
            KSweepEntry(
                k_passes=int(k),
                peak_commanded_speed=peak_commanded_speed(log),
                mean_step_runtime_ns=float(runtimes.mean()),
                p99_step_runtime_ns=float(np.percentile(runtimes, 99)),
                log=log,
            )
        )
    return entries
