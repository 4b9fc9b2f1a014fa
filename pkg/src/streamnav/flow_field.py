"""Planar ideal-flow field around circular exclusion zones.

Each failed agent leaves behind a circular no-fly zone. Healthy agents are
routed as particles of an ideal fluid flow built from a uniform stream plus
one doublet per zone, which makes every planned-radius circle a streamline
of the flow. This module evaluates the potential/stream coordinate pair
(phi, psi), their Jacobian, and the domain gain statistic consumed by the
pre-flight safety checks.

With obstacles at centers (x_f, y_f) and planned radius a_p, writing
dx = x - x_f, dy = y - y_f, r2 = dx^2 + dy^2:

    phi = sum dx * (r2 + a_p^2) / r2
    psi = sum dy * (r2 - a_p^2) / r2

The map is conformal away from the centers, so the Jacobian has the form
[[a, b], [-b, a]] and satisfies the Cauchy-Riemann relations exactly. An
empty obstacle set degenerates to the identity map (phi = x, psi = y), so
navigation reduces to straight lines when nothing has failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, Sequence

import numpy as np

from .errors import EmptyDomain, SingularityEvaluation

if TYPE_CHECKING:
    from .safety_analysis import SafetyMargins

Point = tuple[float, float]

# No evaluation closer than this to a singularity center (meters).
CENTER_GUARD = 1e-9


@dataclass(frozen=True)
class Obstacle:
    """Circular no-fly zone around a failed agent.

    ``actual_radius`` is the physical keep-out cylinder radius; commanded
    trajectories must additionally stay outside ``planned_radius``, which
    inflates the actual radius by the controller error bound plus the
    vehicle enclosing radius.
    """

    center: Point
    actual_radius: float
    planned_radius: float

    def __post_init__(self):
        if not self.actual_radius > 0.0:
            raise ValueError(f"actual_radius must be > 0, got {self.actual_radius}")
        if not self.planned_radius > self.actual_radius:
            raise ValueError(
                f"planned_radius ({self.planned_radius}) must exceed "
                f"actual_radius ({self.actual_radius})"
            )

    @classmethod
    def from_failed_agent(cls, center: Point, margins: "SafetyMargins") -> "Obstacle":
        """Zone for a failed agent that hovers within the tracking-error bound.

        The hover error is bounded by delta and the vehicle fits in a ball of
        radius epsilon, so actual_radius = delta + epsilon and the planned
        radius adds the same margin again.
        """
        a_f = margins.delta + margins.epsilon
        return cls(
            center=(float(center[0]), float(center[1])),
            actual_radius=a_f,
            planned_radius=a_f + margins.delta + margins.epsilon,
        )

    def validate_margins(self, margins: "SafetyMargins") -> None:
        """Check planned = actual + delta + epsilon for the active margins."""
        expected = self.actual_radius + margins.delta + margins.epsilon
        if abs(self.planned_radius - expected) > 1e-9:
            raise ValueError(
                f"planned_radius {self.planned_radius} inconsistent with margins "
                f"(expected {expected})"
            )


@dataclass(frozen=True)
class FieldPoint:
    """Value of the (potential, stream) coordinate pair at one location."""

    phi: float
    psi: float


@dataclass(frozen=True)
class Jacobian2x2:
    """Jacobian of (phi, psi) w.r.t. (x, y).

    Conformality forces dpsi_dy == dphi_dx and dpsi_dx == -dphi_dy; the
    constructor rejects anything else so the structure cannot silently drift.
    """

    dphi_dx: float
    dphi_dy: float
    dpsi_dx: float
    dpsi_dy: float

    def __post_init__(self):
        if self.dpsi_dy != self.dphi_dx or self.dpsi_dx != -self.dphi_dy:
            raise ValueError("Jacobian violates the Cauchy-Riemann structure")

    @property
    def det(self) -> float:
        return self.dphi_dx * self.dphi_dx + self.dphi_dy * self.dphi_dy


class FlowField:
    """Superposition of per-obstacle flow terms.

    Immutable after construction; evaluation is pure, so instances can be
    shared freely across threads.
    """

    __slots__ = ("_obstacles", "_terms")

    def __init__(self, obstacles: Sequence[Obstacle] = ()):
        obs = tuple(obstacles)
        for i in range(len(obs)):
            for j in range(i + 1, len(obs)):
                if obs[i].center == obs[j].center:
                    raise ValueError(f"duplicate obstacle center {obs[i].center}")
        self._obstacles = obs
        # (x_f, y_f, a_p, a_p^2) tuples; plain floats keep the hot loop cheap.
        self._terms = tuple(
            (float(o.center[0]), float(o.center[1]), float(o.planned_radius),
             float(o.planned_radius) ** 2)
            for o in obs
        )

    @property
    def obstacles(self) -> tuple[Obstacle, ...]:
        return self._obstacles

    @property
    def terms(self) -> tuple[tuple[float, float, float, float], ...]:
        """(x_f, y_f, a_p, a_p^2) per obstacle; flat tuples for hot loops."""
        return self._terms

    def __len__(self) -> int:
        return len(self._obstacles)

    def __iter__(self) -> Iterator[Obstacle]:
        return iter(self._obstacles)

    # ---------------- scalar evaluation ----------------

    def evaluate(self, x: float, y: float) -> FieldPoint:
        """(phi, psi) at a point; identity map for an empty obstacle set."""
        if not self._terms:
            return FieldPoint(float(x), float(y))
        phi = 0.0
        psi = 0.0
        for xf, yf, _ap, ap2 in self._terms:
            dx = x - xf
            dy = y - yf
            r2 = dx * dx + dy * dy
            if r2 < CENTER_GUARD * CENTER_GUARD:
                raise SingularityEvaluation(
                    f"point ({x}, {y}) coincides with obstacle center ({xf}, {yf})"
                )
            q = ap2 / r2
            phi += dx * (1.0 + q)
            psi += dy * (1.0 - q)
        return FieldPoint(phi, psi)

    def jacobian(self, x: float, y: float) -> Jacobian2x2:
        """Analytic Jacobian; Cauchy-Riemann exact by shared subexpressions."""
        _, _, a, b = self.evaluate_with_jacobian(x, y)
        return Jacobian2x2(dphi_dx=a, dphi_dy=b, dpsi_dx=-b, dpsi_dy=a)

    def evaluate_with_jacobian(self, x: float, y: float) -> tuple[float, float, float, float]:
        """Fast path: (phi, psi, dphi_dx, dphi_dy) from one pass over obstacles."""
        if not self._terms:
            return float(x), float(y), 1.0, 0.0
        phi = 0.0
        psi = 0.0
        a = 0.0
        b = 0.0
        for xf, yf, _ap, ap2 in self._terms:
            dx = x - xf
            dy = y - yf
            r2 = dx * dx + dy * dy
            if r2 < CENTER_GUARD * CENTER_GUARD:
                raise SingularityEvaluation(
                    f"point ({x}, {y}) coincides with obstacle center ({xf}, {yf})"
                )
            q = ap2 / r2
            u = q / r2
            phi += dx * (1.0 + q)
            psi += dy * (1.0 - q)
            a += 1.0 + u * (dy * dy - dx * dx)
            b += -2.0 * u * dx * dy
        return phi, psi, a, b

    # ---------------- geometry helpers ----------------

    def nearest_center(self, x: float, y: float):
        """(distance, term) of the closest obstacle center; None when empty."""
        best = None
        best_d2 = math.inf
        for term in self._terms:
            dx = x - term[0]
            dy = y - term[1]
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best_d2 = d2
                best = term
        if best is None:
            return None
        return math.sqrt(best_d2), best

    def inside_planned(self, x: float, y: float, slack: float = 0.0) -> bool:
        """True when strictly inside any open planned-exclusion disk."""
        for xf, yf, ap, _ap2 in self._terms:
            dx = x - xf
            dy = y - yf
            if math.sqrt(dx * dx + dy * dy) < ap - slack:
                return True
        return False

    def min_planned_clearance(self, x: float, y: float) -> float:
        """min over obstacles of distance-to-center minus planned radius; inf if empty."""
        best = math.inf
        for xf, yf, ap, _ap2 in self._terms:
            dx = x - xf
            dy = y - yf
            best = min(best, math.sqrt(dx * dx + dy * dy) - ap)
        return best

    # ---------------- vectorized grid evaluation ----------------

    def evaluate_grid(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(PHI, PSI) arrays of shape (len(ys), len(xs)).

        Cells inside exclusion disks receive values too (guarded against
        division blow-up); callers mask them with :meth:`planned_mask_grid`.
        """
        X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        if not self._terms:
            return X.copy(), Y.copy()
        phi = np.zeros_like(X)
        psi = np.zeros_like(X)
        for xf, yf, _ap, ap2 in self._terms:
            dx = X - xf
            dy = Y - yf
            r2 = np.maximum(dx * dx + dy * dy, CENTER_GUARD * CENTER_GUARD)
            q = ap2 / r2
            phi += dx * (1.0 + q)
            psi += dy * (1.0 - q)
        return phi, psi

    def gain_grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """dphi_dx^2 + dphi_dy^2 on the grid (squared stretch of the map)."""
        X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        if not self._terms:
            return np.ones_like(X)
        a = np.zeros_like(X)
        b = np.zeros_like(X)
        for xf, yf, _ap, ap2 in self._terms:
            dx = X - xf
            dy = Y - yf
            r2 = np.maximum(dx * dx + dy * dy, CENTER_GUARD * CENTER_GUARD)
            u = ap2 / (r2 * r2)
            a += 1.0 + u * (dy * dy - dx * dx)
            b += -2.0 * u * dx * dy
        return a * a + b * b

    def planned_mask_grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Boolean array, True where strictly inside an open planned disk."""
        X, Y = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        mask = np.zeros(X.shape, dtype=bool)
        for xf, yf, _ap, ap2 in self._terms:
            dx = X - xf
            dy = Y - yf
            mask |= dx * dx + dy * dy < ap2
        return mask


# ---------------- module-level operation surface ----------------


def eval_field(p: Point, field: FlowField) -> FieldPoint:
    """(phi, psi) at point ``p``; raises SingularityEvaluation at centers."""
    return field.evaluate(float(p[0]), float(p[1]))


def eval_jacobian(p: Point, field: FlowField) -> Jacobian2x2:
    """Analytic Jacobian of the coordinate map at point ``p``."""
    return field.jacobian(float(p[0]), float(p[1]))


def grid_axes(bbox: tuple[float, float, float, float], grid_step: float) -> tuple[np.ndarray, np.ndarray]:
    """Axis sample vectors anchored at the rectangle minimum corner.

    Anchoring means refining the step by an integer factor yields a superset
    of sample points, which keeps grid maxima monotone under refinement.
    """
    xmin, xmax, ymin, ymax = (float(v) for v in bbox)
    if grid_step <= 0.0:
        raise ValueError(f"grid_step must be > 0, got {grid_step}")
    if xmax < xmin or ymax < ymin:
        raise ValueError(f"degenerate bbox {bbox}")
    nx = int(math.floor((xmax - xmin) / grid_step)) + 1
    ny = int(math.floor((ymax - ymin) / grid_step)) + 1
    return xmin + grid_step * np.arange(nx), ymin + grid_step * np.arange(ny)


def max_gain(
    field: FlowField,
    bbox: tuple[float, float, float, float],
    grid_step: float,
    inflate: float = 0.0,
) -> float:
    """Max of dphi_dx^2 + dphi_dy^2 over the rectangle minus exclusion disks.

    This is the squared worst-case stretch of the plane-to-flow-coordinates
    map on the motion domain; the safety checks divide by it to turn
    flow-plane separations into position-space lower bounds. ``inflate``
    optionally scales the grid estimate up by a safety fraction.

    Raises EmptyDomain when every grid sample falls inside an exclusion disk.
    """
    xs, ys = grid_axes(bbox, grid_step)
    gain = field.gain_grid(xs, ys)
    keep = ~field.planned_mask_grid(xs, ys)
    if not keep.any():
        raise EmptyDomain(f"bbox {bbox} is fully covered by exclusion disks")
    return float(gain[keep].max()) * (1.0 + inflate)


@dataclass(frozen=True)
class FieldGrid:
    """Rectangular field samples plus the exclusion mask, ready for export."""

    xs: np.ndarray
    ys: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    masked: np.ndarray  # True inside exclusion disks
    grid_step: float
    obstacles: tuple[Obstacle, ...]


def sample_grid(field: FlowField, bbox: tuple[float, float, float, float], grid_step: float) -> FieldGrid:
    """Sample (x, y, phi, psi) on a rectangle for contour export."""
    xs, ys = grid_axes(bbox, grid_step)
    phi, psi = field.evaluate_grid(xs, ys)
    masked = field.planned_mask_grid(xs, ys)
    return FieldGrid(xs=xs, ys=ys, phi=phi, psi=psi, masked=masked,
                     grid_step=float(grid_step), obstacles=field.obstacles)
