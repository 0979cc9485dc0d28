"""Evaluate one grasp on the builtin hammer and print the metric vector.

The pregrasp approaches the handle from above with a small roll; the use
direction points at the head face, roughly where a beating impact would land.
"""
import math

import numpy as np

from tgqm import affordance, pipeline
from tgqm.affordance import Task
from tgqm.hand import HandModel, Pregrasp, execute_policy
from tgqm.metrics import MetricsConfig, compute_phi
from tgqm.pipeline import UseDirection


def fmt(x):
    return "inf" if math.isinf(x) else f"{x:.5g}"


def main():
    mesh = pipeline.resolve_object("builtin:hammer")
    p0 = Pregrasp(approach_theta=0.2, approach_phi=-0.3, roll=0.1,
                  offset_x=0.0, offset_y=0.0, spread=0.6)
    grasp = execute_policy(mesh, p0, HandModel())
    print(f"reached object : {grasp.reached_object}")
    print(f"contacts       : {len(grasp.contacts)}")
    for c in grasp.contacts:
        print(f"  {c.source[0]:>5} at {np.round(c.point, 4)}")

    use = pipeline.direction_map(mesh, UseDirection(0.95, 0.0))
    phi = compute_phi(mesh, grasp, use, MetricsConfig())
    print(f"\nuse point      : {np.round(use.point, 4)}")
    print(f"eps            : {fmt(phi.eps)}")
    print(f"inertia        : {fmt(phi.inertia)}")
    print(f"effort impact  : {fmt(phi.effort_impact)}")
    print(f"effort hold    : {' '.join(fmt(v) for v in phi.effort_hold)}")
    print(f"discharge      : {fmt(phi.discharge)}")
    print(f"use force      : {fmt(phi.use_force)}")
    print(f"use geometry   : {fmt(phi.use_geometry)}")

    print("\ntask scores (no-robustness thresholds):")
    cfg = affordance.preset("no_robustness")
    for task in Task:
        s = affordance.score(task, phi, cfg)
        print(f"  {task.value:5s}: {'-inf (gated)' if s.gated else fmt(s.score)}")


if __name__ == "__main__":
    main()
