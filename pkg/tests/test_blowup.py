import math
from dataclasses import replace

import numpy as np
import pytest

from mcflab import blowup, flow, oracle
from mcflab.flow import FlowConfig, FlowTrajectory, SingularityReport, TypeVerdict
from mcflab.geometry import compute_geometry

S = oracle.ExactSolutionSpec


def exact_circle_trajectory(T=0.5, scales=10):
    spec = S("Sphere", 1, 2, resolution=128)
    times = [0.0] + [T * (1.0 - 2.0 ** (-k)) for k in range(1, scales + 1)]
    states = [(t, oracle.make_exact(spec, t)) for t in times]
    mh = np.array([1.0 / (1.0 - 2.0 * t) for t in times])
    trace = {"t": np.array(times), "max_h_sq": mh}
    report = SingularityReport(T, 0.0, TypeVerdict.TYPE_I, 1.0, [], 0, np.zeros(2), 1.0)
    return FlowTrajectory(states, trace, FlowConfig(), np.arange(len(times))), report


def test_circle_snapshots_are_unit_circles(circle_run):
    traj, rep = circle_run
    seq = blowup.make_rescaled_sequence(traj, rep, 8, (-0.5,))
    for imm in seq.at(-0.5):
        r = np.linalg.norm(imm.positions, axis=1)
        assert np.allclose(r, 1.0, rtol=0.01)
        assert np.linalg.norm(imm.positions.mean(0)) < 0.01
    assert max(b[0] for b in seq.curvature_bound_check) <= 1.05


def test_sphere_snapshots_have_radius_sqrt2(sphere_run):
    traj, rep = sphere_run
    seq = blowup.make_rescaled_sequence(traj, rep, 6, (-0.5,))
    for imm in seq.at(-0.5):
        assert np.allclose(np.linalg.norm(imm.positions, axis=1), math.sqrt(2), rtol=0.01)
    assert max(b[0] for b in seq.curvature_bound_check) <= 1.05
    assert max(r[0] for r in seq.shrinker_residuals) < 0.05


def test_scale_law_is_exact(circle_run):
    traj, rep = circle_run
    seq = blowup.make_rescaled_sequence(traj, rep, 8, (-0.5, -0.25), with_residuals=False)
    for tk, lam in zip(seq.times, seq.scales):
        assert lam == 1.0 / math.sqrt(2.0 * (rep.T_hat - tk))
    assert np.all(np.diff(seq.scales) > 0)
    assert seq.center_kind is blowup.CenterKind.FIXED_POINT


def test_rescaled_curvature_bound(circle_run):
    traj, rep = circle_run
    seq = blowup.make_rescaled_sequence(traj, rep, 8, (-1.0, -0.5, -0.25))
    for row in seq.curvature_bound_check:
        assert max(row) <= 1.05


def test_residual_lower_bound_at_special_point(circle_run):
    traj, rep = circle_run
    seq = blowup.make_rescaled_sequence(traj, rep, 8, (-1.0,), with_residuals=False)
    for imm in seq.at(-1.0):
        g = compute_geometry(imm, gradients=False)
        # 2 (T - t) |h|^2 in rescaled variables is (-2 s) |h|^2_k
        assert 2.0 * g.norm_h_sq.max() >= 0.9 * rep.delta_hat


def test_type1_preconditions(circle_run):
    traj, rep = circle_run
    with pytest.raises(ValueError):
        blowup.make_rescaled_sequence(traj, replace(rep, type_verdict=TypeVerdict.TYPE_II))
    with pytest.raises(ValueError, match="outside"):
        blowup.make_rescaled_sequence(traj, rep, 4, (-1e6,))
    with pytest.raises(ValueError):
        blowup.make_rescaled_sequence(traj, rep, 4, (0.0,))


@pytest.mark.parametrize("spec", [S("Sphere", 2, 3, resolution=80), S("Sphere", 1, 2),
                                  S("Cylinder", 2, 3, m=1, resolution=80)])
def test_residual_vanishes_on_shrinkers(spec):
    assert blowup.shrinker_residual(oracle.shrinker_at(spec, -0.5), None, -0.5) < 1e-2


def test_residual_of_unit_circle_at_s_minus_one():
    circle = oracle.make_exact(S("Sphere", 1, 2), 0.0)
    assert blowup.shrinker_residual(circle, None, -1.0) == pytest.approx(0.5, rel=0.02)
    with pytest.raises(ValueError):
        blowup.shrinker_residual(circle, None, 0.0)


def test_type2_normalization(sphere_run):
    traj, _ = sphere_run
    seq = blowup.make_type2_sequence(traj, 4)
    assert seq.center_kind is blowup.CenterKind.CURVATURE_MAX
    for imm, p, c in zip(seq.at(0.0), seq.peak_vertices, seq.centers):
        g = compute_geometry(imm, gradients=False)
        assert abs(math.sqrt(g.norm_H_sq[p]) - 1.0) < 1e-10
        assert np.allclose(imm.positions[p], 0.0)
        assert g.traceless_sq.max() < 1e-3
        assert np.allclose(g.ratio, 0.5, rtol=0.01)
    assert np.all(np.diff(seq.scales) > 0)


def test_type2_needs_states():
    traj, _ = exact_circle_trajectory(scales=2)
    with pytest.raises(ValueError):
        blowup.make_type2_sequence(traj, 5)


def test_exact_sequence_is_stable():
    traj, rep = exact_circle_trajectory()
    seq = blowup.make_rescaled_sequence(traj, rep, 8, (-0.5,))
    assert blowup.stabilization_check(seq, -0.5, 3.0) < 1e-6
    assert max(blowup.stabilization_profile(seq, -0.5, 3.0)) < 1e-6


def test_stabilization_needs_two_snapshots():
    traj, rep = exact_circle_trajectory()
    seq = blowup.make_rescaled_sequence(traj, rep, 1, (-0.5,))
    with pytest.raises(ValueError):
        blowup.stabilization_check(seq, -0.5, 3.0)


def test_interpolation_cadence(circle_run):
    """Halving the stored-state cadence leaves the snapshots essentially unchanged."""
    traj, rep = circle_run
    coarse = FlowTrajectory(traj.states[::2] + ([traj.states[-1]] if len(traj.states) % 2 == 0 else []),
                            traj.trace, traj.config, traj.state_steps)
    a = blowup.make_rescaled_sequence(traj, rep, 6, (-0.5,), with_residuals=False).at(-0.5)
    b = blowup.make_rescaled_sequence(coarse, rep, 6, (-0.5,), with_residuals=False).at(-0.5)
    for x, y in zip(a, b):
        assert np.abs(x.positions - y.positions).max() < 5e-3


@pytest.mark.parametrize("offset", [[0.3, -0.2, 0.1], [0.0, 0.0, 0.0]])
def test_fit_shrinker_center(offset):
    sphere = oracle.shrinker_at(S("Sphere", 2, 3, resolution=40), -0.3)
    moved = sphere.with_positions(sphere.positions + np.array(offset))
    c, s = blowup.fit_shrinker_center(moved, s0=-0.5, center0=np.zeros(3))
    assert np.allclose(c, offset, atol=1e-3)
    assert s == pytest.approx(-0.3, rel=0.01)
