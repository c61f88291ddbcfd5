"""Gaussian density decreases along the flow.

For a space-time point (x0, T) the heat density

    theta(t) = int (4 pi (T - t))^(-n/2) exp(-|x - x0|^2 / (4 (T - t))) dmu_t

is non-increasing in t, and constant exactly on self-shrinkers. Its limit as
t -> T is the density of the singularity. For a shrinking circle the limit
is sqrt(2 pi / e) ~ 1.5203, which is larger than 1, the value of a plane.
Centred anywhere else the limit is 0.

    python demos/density_monotonicity.py
"""
import math

import numpy as np

from mcflab import classify, flow, meshes, monotonicity
from mcflab.flow import FlowConfig


def main():
    traj = flow.run(meshes.polygon(256), FlowConfig(stop_curvature=1e4))
    rep = flow.estimate_singular_time(traj)
    print(f"unit circle: singular time {rep.T_hat:.5f} at q = {np.round(rep.q_hat, 4)}")

    tr = monotonicity.density_trace(traj, rep.q_hat, rep.T_hat)
    step = max(1, len(tr.samples) // 12)
    print(f"\n{'t':>9} {'theta':>9}")
    for t, th in tr.samples[::step]:
        print(f"{t:9.5f} {th:9.5f}")
    rises = np.diff(tr.thetas) / tr.thetas[:-1]
    print(f"\nlargest relative rise between samples {rises.max():.1e}, "
          f"{len(tr.violations)} violations above {tr.slack:g}")
    print(f"limit density {tr.theta_limit:.4f} (round circle {math.sqrt(2 * math.pi / math.e):.4f})")

    off = rep.q_hat + np.array([0.3, 0.0])
    far = monotonicity.density_trace(traj, off, rep.T_hat)
    print(f"centred 0.3 away from the singular point the limit is {far.theta_limit:.4f}: "
          "the flow never reaches that point")

    print("\nshrinker densities that the limits are compared against:")
    for n in (1, 2):
        for e in classify.build_density_table(n).entries:
            print(f"  n={n} {e.label:<10} m={e.m}  {e.density:.4f}")


if __name__ == "__main__":
    main()
