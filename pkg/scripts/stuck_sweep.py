#!/usr/bin/env python3
"""Sweep the oracle's arc step on door instances and count stuck failures.

A large step makes each move a long chord that cuts across the hinge arc. Once
the chord's sagitta passes the stuck threshold the simulator rejects the move.
This script shows where that happens for each door radius.
"""

import argparse
import math
from dataclasses import replace

from kinoplan.dataset import generate_instance, object_for_task
from kinoplan.kinematics import axis_distance
from kinoplan.oracle import PlannerConfig, chord_deviation, plan, step_count
from kinoplan.sim import SimConfig, TrialStatus, execute


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--category", default="door")
    parser.add_argument("--instances", type=int, default=5)
    parser.add_argument("--steps", type=float, nargs="+", default=[5, 10, 15, 20, 30, 45, 90])
    args = parser.parse_args()

    sim = SimConfig()
    print(f"{'seed':>4} {'radius':>7} " + " ".join(f"{s:>6g}" for s in args.steps))
    for seed in range(args.instances):
        obj, tasks = generate_instance(args.category, seed)
        task = tasks[0]
        posed = object_for_task(obj, task)
        radius = axis_distance(posed.joint, posed.contact.position)
        cells = []
        for step_deg in args.steps:
            config = replace(PlannerConfig(), arc_step=math.radians(step_deg))
            outcome = execute(posed, plan(posed, task, config), task, sim)
            # the planner splits delta into equal segments no larger than the step
            segment = abs(task.delta) / step_count(abs(task.delta), config.arc_step)
            sagitta = chord_deviation(radius, segment)
            mark = "stuck" if outcome.status is TrialStatus.STUCK else "ok"
            cells.append(f"{mark + ('*' if (sagitta > sim.stuck_threshold) != (mark == 'stuck') else ''):>6}")
        print(f"{seed:>4} {radius:7.3f} " + " ".join(cells))
    print("\n* marks a cell where the sagitta estimate disagrees with the simulator")


if __name__ == "__main__":
    main()
