"""Shared trajectories and the acceptance report hook.

The expensive flows are computed once per session and shared between the
unit tests and the acceptance suite.
"""
import time

import numpy as np
import pytest

from mcflab import classify, flow, meshes, oracle
from mcflab.flow import FlowConfig
from mcflab.geometry import compute_geometry

ACCEPTANCE_LINES = []
FIXTURE_SECONDS = {}


def timed(name, build):
    """Run ``build()`` and remember how long the shared fixture took."""
    t0 = time.perf_counter()
    out = build()
    FIXTURE_SECONDS[name] = time.perf_counter() - t0
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def circle_spec(resolution=256):
    return oracle.ExactSolutionSpec("Sphere", 1, 2, resolution=resolution)


def sphere_spec(resolution=80):
    return oracle.ExactSolutionSpec("Sphere", 2, 3, resolution=resolution)


@pytest.fixture(scope="session")
def circle_run():
    """Unit circle, 256 vertices, flowed to max|h|^2 = 1e4."""
    def build():
        traj = flow.run(oracle.make_exact(circle_spec(), 0.0), FlowConfig(stop_curvature=1e4))
        return traj, flow.estimate_singular_time(traj)
    return timed("circle_run", build)


@pytest.fixture(scope="session")
def sphere_run():
    """Unit icosphere (level 4), dt_safety 0.01, flowed to max|h|^2 = 1e4."""
    def build():
        cfg = FlowConfig(stop_curvature=1e4, dt_safety=0.01)
        traj = flow.run(oracle.make_exact(sphere_spec(), 0.0), cfg)
        return traj, flow.estimate_singular_time(traj)
    return timed("sphere_run", build)


def pinched_ellipsoid(N):
    imm = meshes.ellipsoid((1.5, 1.0, 1.0), 4, N)
    if N > 3:
        imm = meshes.lift_with_noise(imm, 3, amplitude=0.01, seed=0)
    return imm


def pinching_run(imm):
    g = compute_geometry(imm, gradients=False)
    a = 1e-3 * float(g.norm_H_sq.min())
    mh0 = float(g.norm_h_sq.max())
    cfg = FlowConfig(dt_safety=0.02, stop_curvature=1e3 * mh0, pinching_c=2.0 / 3.0,
                     pinching_a=a)
    return flow.run(imm, cfg), mh0


@pytest.fixture(scope="session")
def ellipsoid_pinching_run():
    """1.5:1:1 ellipsoid in R^3 flowed to 1000x its initial max|h|^2."""
    return timed("ellipsoid_pinching_run", lambda: pinching_run(pinched_ellipsoid(3)))


@pytest.fixture(scope="session")
def ellipsoid_r4_pinching_run():
    """The same ellipsoid bent by 1% smooth noise into a fourth coordinate."""
    return timed("ellipsoid_r4_pinching_run", lambda: pinching_run(pinched_ellipsoid(4)))


@pytest.fixture(scope="session")
def table1():
    return timed("table1", lambda: classify.build_density_table(1))


@pytest.fixture(scope="session")
def table2():
    return timed("table2", lambda: classify.build_density_table(2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
