"""Real-time navigation loop sliding agents along fixed streamlines.

At activation every healthy agent is assigned the streamline through its
current position (its stream value is frozen as psi0) and a potential value
phi. Each control period the shared increment delta_phi is added to every
agent's phi and the new positions are recovered by stream-coordinate
inversion. Because the increment is shared, the team moves rigidly in the
flow plane, which is the premise of the pre-flight separation guarantees.

delta_phi is retuned k_passes times per step against the desired speed: a
pass computes trial commands, measures the fastest agent, and rescales
delta_phi by v_des / v_max before the next pass. The commands of the last
pass are the ones emitted. Near stagnation points the inverse map gain
blows up, so the rescale automatically shrinks delta_phi there and the
whole formation slows down while the pinned agent slips around the zone.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AgentInsideExclusion, SolverError
from .flow_field import FlowField, Point
from .streamline_solver import SolverConfig, invert_point
from .telemetry import AgentRecord, ScenarioLog, StepRecord

logger = logging.getLogger(__name__)

# delta_phi is clamped to [DELTA_PHI_MIN, 10 * v_des * dt]; the ratio update
# is unstable if v_max is ever corrupted by a noise-injection step.
DELTA_PHI_MIN = 1e-6
DELTA_PHI_MAX_FACTOR = 10.0

# Sink receives (timestamp, agent_id, desired_position, desired_velocity).
CommandSink = Callable[[float, "str | int", Point, Point], None]


@dataclass(frozen=True)
class NavigatorConfig:
    v_des: float
    total_steps: int
    dt: float = 0.01
    k_passes: int = 2

    def __post_init__(self):
        if self.v_des <= 0.0:
            raise ValueError(f"v_des must be > 0, got {self.v_des}")
        if self.total_steps < 0:
            raise ValueError(f"total_steps must be >= 0, got {self.total_steps}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.k_passes < 1:
            raise ValueError(f"k_passes must be >= 1, got {self.k_passes}")


@dataclass
class AgentNavState:
    """One healthy agent's place in the flow plane.

    ``psi0`` is frozen for the lifetime of an activation; ``phi`` advances
    strictly monotonically. ``desired_position`` doubles as the warm start
    for the next inversion.
    """

    agent_id: str | int
    phi: float
    psi0: float
    desired_position: Point
    desired_velocity: Point = (0.0, 0.0)


@dataclass(frozen=True)
class Command:
    agent_id: str | int
    position: Point
    velocity: Point


@dataclass(frozen=True)
class StepOutput:
    commands: tuple[Command, ...]
    delta_phi_used: float      # increment the emitted commands were computed with
    v_max_observed: float      # fastest commanded speed in the final pass
    step_runtime_ns: int
    disturbed: tuple[bool, ...]  # per agent: noise injected or projected this step


class Navigator:
    """Single-threaded, deterministic navigation loop.

    One seeded noise stream lives with the instance and is consumed in fixed
    agent order, so identical inputs and seed reproduce identical commands.
    Re-activating against a new obstacle set keeps the stream (and therefore
    scenario-level determinism) intact.
    """

    def __init__(self, config: NavigatorConfig, solver_config: SolverConfig | None = None):
        self.config = config
        self.solver_config = solver_config if solver_config is not None else SolverConfig()
        self._rng = self.solver_config.make_rng()
        self._field: FlowField | None = None
        self._states: list[AgentNavState] | None = None
        self.delta_phi: float | None = None

    @property
    def states(self) -> list[AgentNavState]:
        if self._states is None:
            raise RuntimeError("navigator is not activated")
        return self._states

    @property
    def field(self) -> FlowField:
        if self._field is None:
            raise RuntimeError("navigator is not activated")
        return self._field

    def activate(
        self,
        positions: Sequence[Point],
        field: FlowField,
        agent_ids: Sequence[str | int] | None = None,
    ) -> list[AgentNavState]:
        """Anchor each agent to the streamline through its current position.

        Resets delta_phi to v_des * dt. Call again whenever the obstacle set
        changes; anchors are only meaningful for the field they were computed
        against.

        Raises AgentInsideExclusion when a position lies strictly inside an
        open planned-exclusion disk.
        """
        ids = list(agent_ids) if agent_ids is not None else list(range(len(positions)))
        if len(ids) != len(positions):
            raise ValueError("agent_ids and positions length mismatch")
        states = []
        for agent_id, p in zip(ids, positions):
            x, y = float(p[0]), float(p[1])
            if field.inside_planned(x, y, slack=1e-12):
                raise AgentInsideExclusion(
                    f"agent {agent_id} at ({x}, {y}) is inside a planned-exclusion disk",
                    agent_id=agent_id,
                )
            fp = field.evaluate(x, y)
            states.append(
                AgentNavState(
                    agent_id=agent_id,
                    phi=fp.phi,
                    psi0=fp.psi,
                    desired_position=(x, y),
                    desired_velocity=(0.0, 0.0),
                )
            )
        self._field = field
        self._states = states
        self.delta_phi = self.config.v_des * self.config.dt
        return states

    def step(self) -> StepOutput:
        """One control period: k_passes trial/rescale rounds, emit the last.

        Every pass restarts from the step-entry phi values but warm-starts
        the inversion from the previous trial positions. Command velocities
        are first-order differences against the step-entry positions, which
        is also what the v_max rescale measures.
        """
        t0 = time.perf_counter_ns()
        cfg = self.config
        states = self.states
        field = self.field
        assert self.delta_phi is not None

        phi_last = [s.phi for s in states]
        starts = [s.desired_position for s in states]
        disturbed = [False] * len(states)
        delta_phi_used = self.delta_phi
        v_max_last = 0.0
        dphi_max = DELTA_PHI_MAX_FACTOR * cfg.v_des * cfg.dt

        for _ in range(cfg.k_passes):
            delta_phi_used = self.delta_phi
            v_max = 0.0
            for i, s in enumerate(states):
                s.phi = phi_last[i] + delta_phi_used
                try:
                    res = invert_point(
                        s.phi, s.psi0, s.desired_position, field,
                        self.solver_config, self._rng,
                    )
                except SolverError as err:
                    err.agent_index = i
                    err.args = (f"agent {s.agent_id}: {err}",)
                    raise
                s.desired_position = res.position
                if res.noise_was_injected or res.projected:
                    disturbed[i] = True
                vx = (res.position[0] - starts[i][0]) / cfg.dt
                vy = (res.position[1] - starts[i][1]) / cfg.dt
                s.desired_velocity = (vx, vy)
                speed = (vx * vx + vy * vy) ** 0.5
                if speed > v_max:
                    v_max = speed
            v_max_last = v_max
            if v_max > 0.0:
                scaled = self.delta_phi * cfg.v_des / v_max
                self.delta_phi = min(max(scaled, DELTA_PHI_MIN), dphi_max)
            # v_max == 0: all agents stationary; keep delta_phi and let the
            # next pass (or step) recover.

        commands = tuple(
            Command(s.agent_id, s.desired_position, s.desired_velocity) for s in states
        )
        return StepOutput(
            commands=commands,
            delta_phi_used=delta_phi_used,
            v_max_observed=v_max_last,
            step_runtime_ns=time.perf_counter_ns() - t0,
            disturbed=tuple(disturbed),
        )

    def run_episode(
        self,
        sink: CommandSink | None = None,
        realtime: bool = False,
        steps: int | None = None,
    ) -> ScenarioLog:
        """Run ``total_steps`` control periods (or ``steps`` if given).

        In realtime mode the loop sleeps out the remainder of each period and
        logs a warning on deadline misses (never fatal); fast mode runs flat
        out. The returned log records commanded state only (actual mirrors
        desired), one record per step.
        """
        cfg = self.config
        states = self.states
        m = cfg.total_steps if steps is None else steps
        period_ns = int(cfg.dt * 1e9)
        records: list[StepRecord] = []
        wall_start = time.perf_counter()

        for k in range(m):
            out = self.step()
            t = (k + 1) * cfg.dt
            if sink is not None:
                for c in out.commands:
                    sink(t, c.agent_id, c.position, c.velocity)
            missed = out.step_runtime_ns > period_ns
            if realtime:
                if missed:
                    logger.warning(
                        "deadline miss at step %d: %.3f ms > %.3f ms budget",
                        k, out.step_runtime_ns / 1e6, cfg.dt * 1e3,
                    )
                remaining = wall_start + (k + 1) * cfg.dt - time.perf_counter()
                if remaining > 0:
                    time.sleep(remaining)
            agents = tuple(
                AgentRecord(
                    agent_id=s.agent_id,
                    healthy=True,
                    desired_position=s.desired_position,
                    desired_velocity=s.desired_velocity,
                    actual_position=s.desired_position,
                    actual_velocity=s.desired_velocity,
                    phi=s.phi,
                    psi=s.psi0,
                    disturbed=out.disturbed[i],
                )
                for i, s in enumerate(states)
            )
            records.append(
                StepRecord(
                    step=k,
                    time=t,
                    agents=agents,
                    delta_phi=out.delta_phi_used,
                    v_max=out.v_max_observed,
                    runtime_ns=out.step_runtime_ns,
                    deadline_missed=missed,
                )
            )

        return ScenarioLog(
            records=records,
            dt=cfg.dt,
            agent_ids=tuple(s.agent_id for s in states),
            seed=self.solver_config.rng_seed,
        )
