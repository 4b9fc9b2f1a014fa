"""Per-step telemetry records shared by the navigator and the simulator."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator

Point = tuple[float, float]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AgentRecord:
    agent_id: str | int
    healthy: bool
    desired_position: Point
    desired_velocity: Point
    actual_position: Point
    actual_velocity: Point
    phi: float | None = None   # None before activation / for failed agents
    psi: float | None = None
    disturbed: bool = False    # noise injection or boundary projection this step


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    agents: tuple[AgentRecord, ...]
    delta_phi: float | None = None
    v_max: float | None = None
    runtime_ns: int = 0
    deadline_missed: bool = False


@dataclass
class ScenarioLog:
    """Ordered step records plus run metadata.

    Timestamps are strictly increasing and agents appear in a fixed order in
    every record. ``runtime_ns``/``deadline_missed`` are wall-clock
    measurements and are excluded from the deterministic content signature.
    """

    records: list[StepRecord]
    dt: float
    agent_ids: tuple[str | int, ...]
    altitudes: dict = field(default_factory=dict)  # constant z per agent
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[StepRecord]:
        return iter(self.records)

    def content_signature(self, include_runtime: bool = False) -> str:
        """SHA-256 over the full-precision log content.

        Runtime fields are measured wall-clock values and differ between
        otherwise identical runs, so they are skipped unless asked for.
        """
        h = hashlib.sha256()
        h.update(f"schema={SCHEMA_VERSION};dt={self.dt!r};seed={self.seed!r}".encode())
        for rec in self.records:
            h.update(f"|{rec.step};{rec.time!r};{rec.delta_phi!r};{rec.v_max!r}".encode())
            if include_runtime:
                h.update(f";{rec.runtime_ns};{rec.deadline_missed}".encode())
            for a in rec.agents:
                h.update(
                    (
                        f"|{a.agent_id};{int(a.healthy)};"
                        f"{a.desired_position!r};{a.desired_velocity!r};"
                        f"{a.actual_position!r};{a.actual_velocity!r};"
                        f"{a.phi!r};{a.psi!r};{int(a.disturbed)}"
                    ).encode()
                )
        return h.hexdigest()
