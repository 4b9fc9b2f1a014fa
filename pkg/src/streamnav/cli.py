"""Command-line front end.

Subcommands: simulate, check, field, bench. Exit codes: 0 success, 1 error
(unreadable/invalid input), 2 success with safety-check warnings. The
STREAMNAV_SEED environment variable overrides the config seed; --seed
overrides both.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, NotApplicable, StreamNavError
from .fleet_simulator import Scenario, run_scenario
from .flow_field import FlowField, Obstacle, sample_grid
from .io_formats import (
    load_scenario,
    override_seed,
    write_field_grid_csv,
    write_steps_jsonl,
    write_summary_csv,
)
from .navigator import Navigator, NavigatorConfig
from .safety_analysis import (
    SafetyMargins,
    check_multi_obstacle_condition,
    check_single_obstacle_condition,
)

DEADLINE_S = 0.010  # hard per-step budget for the navigation loop


def _load(path: str, seed_arg: int | None) -> Scenario:
    scenario = load_scenario(path)
    seed = seed_arg
    if seed is None and os.environ.get("STREAMNAV_SEED"):
        seed = int(os.environ["STREAMNAV_SEED"])
    if seed is not None:
        scenario = override_seed(scenario, seed)
    return scenario


def _positions_at_first_failure(scenario: Scenario):
    """Healthy positions and obstacle centers at the reference time."""
    if not scenario.failures:
        return [a.position for a in scenario.agents], []
    t0 = min(f.time for f in scenario.failures)
    prv = scenario.pre_roll_velocity
    failed_ids = {f.agent_id for f in scenario.failures}
    centers = []
    healthy = []
    for a in scenario.agents:
        t_ref = t0
        if a.agent_id in failed_ids:
            t_ref = next(f.time for f in scenario.failures if f.agent_id == a.agent_id)
            centers.append((a.position[0] + prv[0] * t_ref, a.position[1] + prv[1] * t_ref))
        else:
            healthy.append((a.position[0] + prv[0] * t0, a.position[1] + prv[1] * t0))
    return healthy, centers


def _auto_bbox(points, centers, pad: float):
    xs = [p[0] for p in points] + [c[0] for c in centers]
    ys = [p[1] for p in points] + [c[1] for c in centers]
    return (min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad)


def cmd_simulate(args) -> int:
    scenario = _load(args.config, args.seed)
    log = run_scenario(scenario, fast=not args.realtime)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    steps_path = out_dir / "steps.jsonl"
    summary_path = out_dir / "summary.csv"
    write_steps_jsonl(log, steps_path)
    write_summary_csv(log, scenario.margins, summary_path)

    preflight = log.meta.get("preflight")
    warned = preflight is not None and preflight.single_obstacle_ok is False
    print(f"scenario {scenario.name!r}: {len(log)} steps, seed {scenario.seed}")
    print(f"wrote {steps_path} and {summary_path}")
    if warned:
        print(
            "WARNING: single-obstacle pre-flight condition failed "
            f"(min separation {preflight.min_xy_separation:.3f} m, "
            f"margin {preflight.margin:.3f} m)"
        )
        return 2
    return 0


def cmd_check(args) -> int:
    scenario = _load(args.config, args.seed)
    healthy, centers = _positions_at_first_failure(scenario)
    margins = scenario.margins
    print(f"margins: delta={margins.delta} m, epsilon={margins.epsilon} m")
    print(f"planned exclusion radius: {margins.planned_radius:.4f} m")

    if not centers:
        print("no failures scripted: both conditions pass trivially (not applicable)")
        return 0

    obstacles = [Obstacle.from_failed_agent(c, margins) for c in centers]
    field = FlowField(obstacles)
    failing = False

    try:
        single = check_single_obstacle_condition(healthy, margins, field=field)
        status = "PASS" if single.single_obstacle_ok else "FAIL"
        print(
            f"single-obstacle condition: {status} "
            f"(min separation {single.min_xy_separation:.4f} m, "
            f"margin {single.margin:.4f} m)"
        )
        if not single.single_obstacle_ok:
            failing = True
        binding = "single"
    except NotApplicable as err:
        print(f"single-obstacle condition: NOT APPLICABLE ({err})")
        binding = "multi"

    if len(healthy) >= 2:
        pad = 3.0 * max(o.planned_radius for o in obstacles)
        bbox = _auto_bbox(healthy, centers, pad)
        multi = check_multi_obstacle_condition(
            healthy, field, margins, bbox, grid_step=args.grid_step
        )
        status = "PASS" if multi.multi_obstacle_ok else "FAIL"
        print(
            f"multi-obstacle condition:  {status} "
            f"(flow separation {multi.min_flow_separation:.4f}, "
            f"max gain {multi.max_gain:.4f}, margin {multi.margin:.4f} m; "
            f"gain searched over bbox {tuple(round(v, 2) for v in bbox)})"
        )
        if binding == "multi" and not multi.multi_obstacle_ok:
            failing = True
    else:
        print("multi-obstacle condition:  NOT APPLICABLE (fewer than two healthy agents)")

    return 2 if failing else 0


def _parse_obstacles(spec: str) -> list[Obstacle]:
    obstacles = []
    for part in spec.split(";"):
        part = part.strip()
        if not part:
            continue
        fields = part.split(":")
        if len(fields) not in (3, 4):
            raise ValueError(
                f"obstacle spec {part!r} must be x:y:planned_radius[:actual_radius]"
            )
        x, y, ap = (float(v) for v in fields[:3])
        af = float(fields[3]) if len(fields) == 4 else ap / 2.0
        obstacles.append(Obstacle(center=(x, y), actual_radius=af, planned_radius=ap))
    return obstacles


def cmd_field(args) -> int:
    try:
        obstacles = _parse_obstacles(args.obstacles)
        xmin, xmax, ymin, ymax = (float(v) for v in args.bbox.split(","))
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    if xmax <= xmin or ymax <= ymin:
        print(f"error: degenerate bbox {args.bbox!r}", file=sys.stderr)
        return 1
    if args.step <= 0:
        print(f"error: step must be > 0, got {args.step}", file=sys.stderr)
        return 1
    grid = sample_grid(FlowField(obstacles), (xmin, xmax, ymin, ymax), args.step)
    write_field_grid_csv(grid, args.out)
    print(f"wrote {len(grid.xs) * len(grid.ys)} grid rows to {args.out}")
    return 0


def cmd_bench(args) -> int:
    k_values = [int(v) for v in args.k.split(",") if v.strip()]
    margins = SafetyMargins(delta=0.40, epsilon=0.28)
    field = FlowField([Obstacle.from_failed_agent((0.0, 0.0), margins)])
    spacing = margins.separation_floor + margins.planned_radius
    positions = [
        (-3.0, (i - (args.agents - 1) / 2.0) * spacing) for i in range(args.agents)
    ]
    print(f"agents={args.agents} steps={args.steps} budget={DEADLINE_S * 1e3:.1f}ms")
    for k in k_values:
        cfg = NavigatorConfig(v_des=1.0, total_steps=args.steps, dt=0.01, k_passes=k)
        nav = Navigator(cfg)
        nav.activate(positions, field)
        runtimes = np.array(
            [nav.step().step_runtime_ns for _ in range(args.steps)], dtype=float
        )
        if runtimes.size == 0:
            print(f"k={k}: no steps executed")
            continue
        p50, p99 = np.percentile(runtimes, [50, 99])
        misses = int((runtimes > DEADLINE_S * 1e9).sum())
        print(
            f"k={k}: p50={p50 / 1e6:.3f}ms p99={p99 / 1e6:.3f}ms "
            f"mean={runtimes.mean() / 1e6:.3f}ms deadline_misses={misses}/{args.steps}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamnav",
        description="Streamline navigation around failed-agent exclusion zones",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario config and write logs")
    p.add_argument("config", help="path to a scenario JSON config")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--fast", action="store_true", default=True,
                      help="run without real-time pacing (default)")
    mode.add_argument("--realtime", action="store_true",
                      help="pace the loop at the control period")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run the pre-flight safety checks")
    p.add_argument("config", help="path to a scenario JSON config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--grid-step", type=float, default=0.01,
                   help="gain search resolution in meters (default 0.01)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("field", help="export a (x, y, phi, psi) grid as CSV")
    p.add_argument("--obstacles", required=True,
                   help="semicolon-separated x:y:planned_radius[:actual_radius]")
    p.add_argument("--bbox", required=True, help="xmin,xmax,ymin,ymax")
    p.add_argument("--step", type=float, required=True, help="grid step in meters")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("bench", help="measure navigation step runtimes")
    p.add_argument("--agents", type=int, default=6)
    p.add_argument("--k", default="2", help="comma-separated retune counts (default 2)")
    p.add_argument("--steps", type=int, default=500)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except StreamNavError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
