"""Inversion of (phi, psi) targets back to x-y positions.

The inverse map has no closed form, so positions are recovered with a fixed
number of Newton steps on the coordinate map, warm-started from the caller's
guess. Two guards make the iteration total in practice:

* near stagnation points the Jacobian vanishes; a Levenberg-style diagonal
  damping (mu added to the diagonal, grown x10 up to three retries) keeps
  the 2x2 solve bounded;
* iterates that touch an exclusion disk receive a small random kick with a
  half-normal outward component and a normal tangential component, which is
  what lets a trajectory pinned against a stagnation point slip around the
  zone instead of stalling on the symmetry line.

After the fixed iteration count, any final iterate still inside a planned
disk is projected radially onto the disk boundary, so returned positions
never violate the planned exclusion radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NonFinite, SingularJacobian, SolverError
from .flow_field import FlowField, Point

# |det J| below this triggers damped retries.
DET_FLOOR = 1e-12
# Returned positions satisfy distance >= planned_radius - EXCLUSION_TOL.
EXCLUSION_TOL = 1e-9

_DAMPING_INITIAL = 1e-6
_DAMPING_GROWTH = 10.0
_DAMPING_RETRIES = 3


@dataclass(frozen=True)
class SolverConfig:
    """Fixed-iteration inversion settings.

    ``iterations`` Newton steps are always executed (no early exit); the
    residual in the result reports how well the final position matches the
    target. ``rng_seed`` seeds the noise stream when the caller does not
    supply one; None defers to the caller (scenario-level seed).
    """

    iterations: int = 20
    noise_sigma: float = 0.001
    dt: float = 0.01
    rng_seed: int | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(0 if self.rng_seed is None else self.rng_seed)


@dataclass(frozen=True)
class SolveResult:
    position: Point
    velocity: Point
    residual: tuple[float, float]  # (|phi error|, |psi error|) at the returned position
    noise_was_injected: bool
    projected: bool = False  # final iterate was pushed back onto a disk boundary


def _solve_conformal(a: float, b: float, e1: float, e2: float) -> tuple[float, float]:
    """Solve [[a, b], [-b, a]] s = e, damping the diagonal when near-singular."""
    det = a * a + b * b
    if det < DET_FLOOR:
        mu = _DAMPING_INITIAL
        for _ in range(_DAMPING_RETRIES):
            aa = a + mu
            det = aa * aa + b * b
            if det >= DET_FLOOR:
                a = aa
                break
            mu *= _DAMPING_GROWTH
        else:
            raise SingularJacobian(
                f"Jacobian singular (|det|={a * a + b * b:.3e}) and damping failed"
            )
    return (a * e1 - b * e2) / det, (b * e1 + a * e2) / det


def _project_outside(field: FlowField, x: float, y: float) -> tuple[float, float, bool]:
    """Push a point radially out of any planned disk it ended up inside."""
    projected = False
    for _ in range(4 * len(field) + 1):
        worst = None
        worst_gap = 0.0
        for xf, yf, ap, _ap2 in field.terms:
            dx = x - xf
            dy = y - yf
            d = math.sqrt(dx * dx + dy * dy)
            gap = ap - d
            if gap > worst_gap:
                worst_gap = gap
                worst = (xf, yf, ap, d, dx, dy)
        if worst is None:
            break
        xf, yf, ap, d, dx, dy = worst
        if d > 0.0:
            x = xf + ap * dx / d
            y = yf + ap * dy / d
        else:
            x = xf + ap
            y = yf
        projected = True
    return x, y, projected


def invert_point(
    phi_target: float,
    psi_target: float,
    guess: Point,
    field: FlowField,
    cfg: SolverConfig = SolverConfig(),
    rng: np.random.Generator | None = None,
) -> SolveResult:
    """Recover the position whose flow coordinates match the target.

    Runs exactly ``cfg.iterations`` Newton updates

        r <- r - J^-1 [phi(r) - phi_target, psi(r) - psi_target] + r_noise

    where the noise kick is active only while the iterate is within the
    planned radius of the nearest obstacle center. The reported velocity is
    the first-order difference (r - guess) / dt.

    Raises SingularJacobian when damping cannot recover a near-zero Jacobian
    and NonFinite when iterates diverge.
    """
    if rng is None:
        rng = cfg.make_rng()
    x0 = float(guess[0])
    y0 = float(guess[1])
    x, y = x0, y0
    sigma = cfg.noise_sigma
    noise_injected = False

    for _ in range(cfg.iterations):
        phi1, psi1, a, b = field.evaluate_with_jacobian(x, y)
        sx, sy = _solve_conformal(a, b, phi1 - phi_target, psi1 - psi_target)

        nx = 0.0
        ny = 0.0
        if len(field):
            d, (xf, yf, ap, _ap2) = field.nearest_center(x, y)
            if d <= ap:
                if d > 0.0:
                    rax = (x - xf) / d
                    ray = (y - yf) / d
                else:
                    # Direction undefined at the center; any unit vector works.
                    rax, ray = 1.0, 0.0
                n_out = abs(rng.normal(0.0, sigma))
                n_tan = rng.normal(0.0, sigma)
                nx = n_out * rax + n_tan * ray
                ny = n_out * ray - n_tan * rax
                noise_injected = True

        x = x - sx + nx
        y = y - sy + ny
        if not (math.isfinite(x) and math.isfinite(y)):
            raise NonFinite(f"iterate diverged to ({x}, {y})")

    x, y, projected = _project_outside(field, x, y)

    final = field.evaluate(x, y)
    residual = (abs(final.phi - phi_target), abs(final.psi - psi_target))
    velocity = ((x - x0) / cfg.dt, (y - y0) / cfg.dt)
    return SolveResult(
        position=(x, y),
        velocity=velocity,
        residual=residual,
        noise_was_injected=noise_injected,
        projected=projected,
    )


def invert_batch(
    targets: Sequence[tuple[float, float, Point]],
    field: FlowField,
    cfg: SolverConfig = SolverConfig(),
    rng: np.random.Generator | None = None,
) -> list[SolveResult]:
    """Element-wise :func:`invert_point` over (phi, psi, guess) triples.

    One shared noise stream is consumed in list order, so results are
    reproducible for identical inputs and seed. Solver errors are re-raised
    with the offending index attached as ``agent_index``.
    """
    if rng is None:
        rng = cfg.make_rng()
    results: list[SolveResult] = []
    for i, (phi_t, psi_t, guess) in enumerate(targets):
        try:
            results.append(invert_point(phi_t, psi_t, guess, field, cfg, rng))
        except SolverError as err:
            err.agent_index = i
            raise
    return results
