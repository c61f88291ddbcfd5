"""A dumbbell pinches at its neck before the bulbs disappear.

A rotationally symmetric surface with two round bulbs joined by a thin
neck develops a singularity on the neck, where the profile radius goes to
zero long before the bulbs shrink away. Rescaled by the curvature maximum,
the neck looks like the cylinder S^1 x R, with |h|^2 / |H|^2 = 1 and the
cylinder's Gaussian density sqrt(2 pi / e).

    python demos/neckpinch.py
"""
import numpy as np

from mcflab import blowup, classify, flow, meshes
from mcflab.flow import FlowConfig


def main():
    x, r = meshes.dumbbell_profile(bulb_radius=1.0, neck_radius=0.35)
    traj = flow.axisymmetric_run(np.stack([x, r], 1), 2, FlowConfig(stop_curvature=1e4))
    for e in traj.events:
        print(f"event {e['kind']}: t = {e['t']:.4f} at x = {e['x']:.3f}")
    print(f"a lone bulb of radius 1 would vanish at t = {1 / 4}")

    seq = blowup.make_type2_sequence(traj, 4)
    table = classify.build_density_table(2)
    c = classify.classify_shrinker(seq.at(0.0)[-1], table, s=-0.5, fit_center=True)
    print(f"\nrescaled neck: ratio |h|^2/|H|^2 {c.ratio_mean:.4f}, "
          f"density {c.density_measured:.4f} (cylinder {table.lookup('Cylinder', 1).density:.4f})")
    print(f"classified as {c.label}: {c.reason}")


if __name__ == "__main__":
    main()
