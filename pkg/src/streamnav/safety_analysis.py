"""Pre-flight collision-avoidance predicates and runtime separation monitors.

Two sufficient conditions are implemented:

* the multi-obstacle condition (conservative, any number of zones): because
  the shared increment moves the team rigidly in the flow plane, pairwise
  flow-plane separations are time-invariant, and the squared map gain bounds
  how much the plane geometry can compress them. Collision avoidance holds
  when  min_flow_separation^2 / max_gain  >=  4 (delta + epsilon)^2.

* the single-obstacle condition (tight): the zero stream contour wraps a
  single zone with a circle of the planned radius, and the worst contraction
  between two recovery paths is less than that radius, so it suffices that
  the starting position-space separation satisfies
  min_xy_separation >= 2 (delta + epsilon) + planned_radius.

Boundary equality counts as pass in both conditions; comparisons use a tiny
absolute slack so that margin-zero configurations assembled from summed
constants are not rejected over float dust.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AgentInsideExclusion, NotApplicable
from .flow_field import FlowField, Point, max_gain
from .telemetry import ScenarioLog

logger = logging.getLogger(__name__)

# Absolute slack for boundary comparisons (meters / flow units).
BOUNDARY_TOL = 1e-12

# Default grid resolution for the gain search; halving it should move the
# estimate by <1% or a warning is emitted.
DEFAULT_GAIN_GRID_STEP = 0.01
_RICHARDSON_REL_TOL = 0.01


@dataclass(frozen=True)
class SafetyMargins:
    """Tracking-error bound and vehicle enclosing radius, both in meters."""

    delta: float
    epsilon: float

    def __post_init__(self):
        if self.delta <= 0.0:
            raise ValueError(f"delta must be > 0, got {self.delta}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def failed_agent_radius(self) -> float:
        """Keep-out radius of a hovering failed agent: delta + epsilon."""
        return self.delta + self.epsilon

    @property
    def planned_radius(self) -> float:
        """Planned exclusion radius for a failed agent: 2 (delta + epsilon)."""
        return 2.0 * (self.delta + self.epsilon)

    @property
    def separation_floor(self) -> float:
        """Minimum admissible center-to-center distance: 2 (delta + epsilon)."""
        return 2.0 * (self.delta + self.epsilon)


@dataclass(frozen=True)
class SafetyReport:
    """Outcome of the pre-flight checks.

    Fields not touched by a given check stay None. ``margin`` is the slack
    of the binding inequality in meters (negative when failing).
    """

    min_flow_separation: float | None = None   # min pairwise flow-plane distance at t0
    max_gain: float | None = None              # squared peak stretch of the map
    min_xy_separation: float | None = None     # min pairwise x-y distance at t0
    multi_obstacle_ok: bool | None = None
    single_obstacle_ok: bool | None = None
    margin: float = 0.0


def _min_pairwise(points: Sequence[Point]) -> float:
    best = math.inf
    for i in range(len(points)):
        xi, yi = points[i]
        for j in range(i + 1, len(points)):
            dx = xi - points[j][0]
            dy = yi - points[j][1]
            best = min(best, math.hypot(dx, dy))
    return best


def check_multi_obstacle_condition(
    positions: Sequence[Point],
    field: FlowField,
    margins: SafetyMargins,
    bbox: tuple[float, float, float, float],
    grid_step: float = DEFAULT_GAIN_GRID_STEP,
    inflate_gain: float = 0.0,
) -> SafetyReport:
    """Conservative avoidance condition for any number of exclusion zones.

    ``bbox`` bounds the motion space searched for the peak gain; exclusion
    disks are always removed from it. A Richardson sanity check reruns the
    gain search at half the step and warns when the estimate is not
    grid-converged.
    """
    if len(positions) < 2:
        raise ValueError("need at least two healthy positions")
    for i, p in enumerate(positions):
        if field.inside_planned(float(p[0]), float(p[1]), slack=1e-12):
            raise AgentInsideExclusion(
                f"position {i} at {tuple(p)} is inside a planned-exclusion disk",
                agent_id=i,
            )

    coarse = max_gain(field, bbox, grid_step, inflate=inflate_gain)
    fine = max_gain(field, bbox, grid_step / 2.0, inflate=inflate_gain)
    if fine > 0 and abs(fine - coarse) / fine > _RICHARDSON_REL_TOL:
        logger.warning(
            "gain grid not converged: %.6g at step %g vs %.6g at step %g",
            coarse, grid_step, fine, grid_step / 2.0,
        )
    gain = max(coarse, fine)

    flow_points = [
        (fp.phi, fp.psi)
        for fp in (field.evaluate(float(p[0]), float(p[1])) for p in positions)
    ]
    p_min = _min_pairwise(flow_points)
    d_min = _min_pairwise([(float(p[0]), float(p[1])) for p in positions])

    floor = margins.separation_floor
    bound = p_min / math.sqrt(gain)  # lower bound on pairwise x-y distance
    ok = bound >= floor - BOUNDARY_TOL
    return SafetyReport(
        min_flow_separation=p_min,
        max_gain=gain,
        min_xy_separation=d_min,
        multi_obstacle_ok=ok,
        margin=bound - floor,
    )


def check_single_obstacle_condition(
    positions: Sequence[Point],
    margins: SafetyMargins,
    planned_radius: float | None = None,
    field: FlowField | None = None,
) -> SafetyReport:
    """Tight avoidance condition, valid for exactly one exclusion zone.

    Passes iff the minimum pairwise distance at activation is at least
    2 (delta + epsilon) + planned_radius. When ``field`` is given it must
    hold exactly one obstacle (NotApplicable otherwise) and supplies the
    planned radius; fewer than two positions pass trivially.
    """
    if field is not None:
        if len(field) != 1:
            raise NotApplicable(
                f"single-obstacle condition needs exactly 1 obstacle, field has {len(field)}"
            )
        planned_radius = field.obstacles[0].planned_radius
    if planned_radius is None:
        raise ValueError("planned_radius or field must be provided")

    threshold = margins.separation_floor + planned_radius
    d_min = _min_pairwise([(float(p[0]), float(p[1])) for p in positions])
    if math.isinf(d_min):
        return SafetyReport(min_xy_separation=d_min, single_obstacle_ok=True, margin=math.inf)
    ok = d_min >= threshold - BOUNDARY_TOL
    return SafetyReport(
        min_xy_separation=d_min,
        single_obstacle_ok=ok,
        margin=d_min - threshold,
    )


@dataclass(frozen=True)
class SeparationSeries:
    """Per-step separation and clearance reductions over a scenario log.

    ``min_pair_commanded``/``min_pair_actual`` are minima over all agent
    pairs (NaN when fewer than two agents). Clearances are minima over
    (healthy agent, exclusion zone) of distance-to-center minus the actual
    keep-out radius (NaN while no zone exists).
    """

    times: np.ndarray
    min_pair_commanded: np.ndarray
    min_pair_actual: np.ndarray
    clearance_commanded: np.ndarray
    clearance_actual: np.ndarray


def monitor_separations(
    log: ScenarioLog,
    margins: SafetyMargins,
    field: FlowField | None = None,
) -> SeparationSeries:
    """Reduce a scenario log to separation/clearance time series.

    Exclusion zones are reconstructed per step from the failed agents in the
    log (their frozen setpoints are the zone centers); ``field`` overrides
    the keep-out radius for matching centers when provided.
    """
    if len(log) == 0:
        raise ValueError("log is empty")

    radius_by_center: dict[Point, float] = {}
    if field is not None:
        for o in field.obstacles:
            radius_by_center[o.center] = o.actual_radius
    default_af = margins.failed_agent_radius

    n = len(log)
    times = np.empty(n)
    pair_cmd = np.full(n, np.nan)
    pair_act = np.full(n, np.nan)
    clr_cmd = np.full(n, np.nan)
    clr_act = np.full(n, np.nan)

    for k, rec in enumerate(log):
        times[k] = rec.time
        cmd = [a.desired_position for a in rec.agents]
        act = [a.actual_position for a in rec.agents]
        if len(cmd) >= 2:
            pair_cmd[k] = _min_pairwise(cmd)
            pair_act[k] = _min_pairwise(act)
        zones = [
            (a.desired_position, radius_by_center.get(a.desired_position, default_af))
            for a in rec.agents
            if not a.healthy
        ]
        if zones:
            best_c = math.inf
            best_a = math.inf
            for a in rec.agents:
                if not a.healthy:
                    continue
                for center, a_f in zones:
                    dc = math.hypot(a.desired_position[0] - center[0],
                                    a.desired_position[1] - center[1]) - a_f
                    da = math.hypot(a.actual_position[0] - center[0],
                                    a.actual_position[1] - center[1]) - a_f
                    best_c = min(best_c, dc)
                    best_a = min(best_a, da)
            if math.isfinite(best_c):
                clr_cmd[k] = best_c
                clr_act[k] = best_a

    return SeparationSeries(
        times=times,
        min_pair_commanded=pair_cmd,
        min_pair_actual=pair_act,
        clearance_commanded=clr_cmd,
        clearance_actual=clr_act,
    )
