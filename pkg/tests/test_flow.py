import math

import numpy as np
import pytest

from mcflab import flow, meshes, oracle
from mcflab.flow import FlowConfig, Integrator, InsufficientDataError, TypeVerdict
from mcflab.geometry import compute_geometry
from mcflab.immersion import validate

S = oracle.ExactSolutionSpec


def mean_radius(imm, center):
    return float(np.mean(np.linalg.norm(imm.positions - center, axis=1)))


@pytest.mark.parametrize("integrator", list(Integrator))
def test_plane_is_stationary(integrator):
    plane = oracle.make_exact(S("Plane", 2, 3, radius0=2.0, resolution=16))
    out = flow.step(plane, 0.1, integrator)
    assert np.allclose(out.positions, plane.positions, atol=1e-14)
    assert np.array_equal(out.cells, plane.cells)


def test_circle_euler_step():
    out = flow.step(meshes.polygon(256), 1e-4, Integrator.EXPLICIT_EULER)
    assert mean_radius(out, 0) == pytest.approx(1 - 1e-4, abs=1e-7)


@pytest.mark.parametrize("integrator", list(Integrator))
def test_sphere_step(integrator):
    out = flow.step(meshes.icosphere(4), 1e-4, integrator)
    r = np.linalg.norm(out.positions, axis=1)
    assert np.allclose(r, 1 - 2e-4, atol=1e-6)


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        flow.step(meshes.polygon(16), 0.0)


def test_config_validation():
    for bad in (dict(dt_safety=0.0), dict(dt_safety=0.6), dict(stop_curvature=0.0),
                dict(record_every=0), dict(pinching_c=-1.0), dict(pinching_a=-1.0),
                dict(tangential_sweeps=-1)):
        with pytest.raises(ValueError):
            FlowConfig(**bad)
    assert FlowConfig(integrator="ExplicitEuler").integrator is Integrator.EXPLICIT_EULER


def test_circle_run(circle_run):
    traj, rep = circle_run
    assert traj.final_time == pytest.approx(0.5, rel=0.01)
    assert 0.495 <= rep.T_hat <= 0.505 and 0.98 <= rep.C0_hat <= 1.05
    assert rep.type_verdict is TypeVerdict.TYPE_I
    assert np.linalg.norm(rep.q_hat) < 1e-3


def test_sphere_run(sphere_run):
    traj, rep = sphere_run
    assert traj.final_time == pytest.approx(0.25, rel=0.02)
    assert 0.98 <= rep.C0_hat <= 1.05


def test_sphere_singular_time_default_step():
    traj = flow.run(meshes.icosphere(3), FlowConfig(stop_curvature=1e4))
    rep = flow.estimate_singular_time(traj)
    assert rep.T_hat == pytest.approx(0.25, rel=0.01)
    assert 0.98 <= rep.C0_hat <= 1.05


def test_trajectory_structure(circle_run):
    traj, _ = circle_run
    ts = traj.trace["t"]
    assert np.all(np.diff(ts) > 0) and np.all(np.diff(traj.times) > 0)
    assert all(validate(imm).is_manifold for _, imm in traj.states[::10])
    assert set(flow.TRACE_COLUMNS) <= set(traj.trace)
    assert np.all(np.diff(traj.trace["total_measure"]) < 0)


@pytest.mark.parametrize("n, seed", [(1, meshes.polygon(256)), (2, meshes.icosphere(3))],
                         ids=["circle", "sphere"])
def test_comparison_with_exact_radius(n, seed):
    mh0 = compute_geometry(seed, gradients=False).norm_h_sq.max()
    cfg = FlowConfig(stop_curvature=100 * mh0, integrator=Integrator.EXTRAPOLATED,
                     record_every=5)
    traj = flow.run(seed, cfg)
    assert traj.trace["max_h_sq"][-1] >= 100 * mh0
    for t, imm in traj.states:
        exact = math.sqrt(1 - 2 * n * t)
        assert mean_radius(imm, imm.positions.mean(0)) == pytest.approx(exact, rel=0.01)


def test_extrapolated_step_is_second_order():
    circle = meshes.polygon(256)
    r = [np.linalg.norm(flow.step(circle, dt, Integrator.EXTRAPOLATED).positions, axis=1).mean()
         for dt in (0.02, 0.01)]
    err = [abs(ri - math.sqrt(1 - 2 * dt)) for ri, dt in zip(r, (0.02, 0.01))]
    assert err[1] <= err[0] / 6


@pytest.mark.parametrize("fixture", ["circle_run", "sphere_run"])
def test_lower_blowup_bound(request, fixture):
    _, rep = request.getfixturevalue(fixture)
    q = np.array([v for _, v in rep.ratio_trend])
    assert q.min() >= 0.95


def test_ellipse_ratio_is_one():
    traj = flow.run(meshes.ellipse(2.0, 1.0, 128), FlowConfig(stop_curvature=50.0, dt_safety=0.02))
    assert np.allclose(traj.trace["max_ratio"], 1.0)
    assert np.all(np.diff(traj.trace["total_measure"]) < 0)


def test_state_interpolation(circle_run):
    traj, _ = circle_run
    (t0, a), (t1, b) = traj.states[3], traj.states[4]
    mid = traj.state_at(0.5 * (t0 + t1))
    assert np.allclose(mid.positions, 0.5 * (a.positions + b.positions))
    assert traj.state_at(t0) is a
    with pytest.raises(ValueError):
        traj.state_at(traj.times[-1] + 1.0)


def test_plane_has_no_singularity():
    plane = oracle.make_exact(S("Plane", 2, 3, radius0=2.0, resolution=16))
    traj = flow.run(plane, FlowConfig(t_max=1.0, record_every=1, max_steps=20))
    with pytest.raises(InsufficientDataError):
        flow.estimate_singular_time(traj)


def test_run_rejects_invalid_start():
    pos = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]
    from mcflab.immersion import DiscreteImmersion
    with pytest.raises(ValueError):
        flow.run(DiscreteImmersion(pos, [(0, 1, 2), (0, 1, 3)], 2))


def test_pinching_gap_recorded():
    traj = flow.run(meshes.ellipsoid((1.5, 1, 1), 2), FlowConfig(stop_curvature=10.0, dt_safety=0.05,
                                                                pinching_c=2 / 3, pinching_a=1e-3))
    assert np.all(traj.trace["pinching_gap"] < 0)


# -- embeddedness ---------------------------------------------------------------------

def test_embeddedness_circle():
    assert flow.embeddedness_gap(meshes.polygon(256)) == pytest.approx(2 * math.sin(0.25), rel=0.01)


def test_embeddedness_coincident_circles():
    assert flow.embeddedness_gap(meshes.coincident_copies(meshes.polygon(64), 2)) == 0.0


def test_embeddedness_icosphere():
    assert flow.embeddedness_gap(meshes.icosphere(3)) > 0.0


def test_embeddedness_shrinks_towards_self_contact():
    gaps = [flow.embeddedness_gap(meshes.peanut(256, w)) for w in (0.2, 0.05, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert flow.embeddedness_gap(meshes.figure_eight(256)) < 1e-6


def test_embed_gap_monitored_on_convex_curve():
    # the unnormalized flow shrinks every distance, so the gap is compared at fixed length
    traj = flow.normalized_run(meshes.ellipse(2.0, 1.0, 128),
                               FlowConfig(t_max=1.0, dt_safety=0.02, monitor_embeddedness=True,
                                          stop_curvature=math.inf))
    g = traj.trace["embed_gap"]
    g = g[np.isfinite(g)]
    assert len(g) > 3
    assert np.all(g[1:] >= g[:-1] * (1 - 1e-3))


# -- normalized flow --------------------------------------------------------------------

def test_normalized_circle_is_fixed():
    circle = meshes.polygon(128)
    traj = flow.normalized_run(circle, FlowConfig(t_max=0.5, dt_safety=0.02, stop_curvature=math.inf))
    last = traj.states[-1][1]
    assert np.allclose(np.linalg.norm(last.positions, axis=1), 1.0, atol=1e-6)
    assert np.all(traj.trace["max_traceless_sq"] == 0.0)
    assert np.allclose(traj.trace["total_measure"], traj.trace["total_measure"][0], rtol=1e-12)
    assert traj.unnormalized_t[-1] < traj.final_time


def test_normalized_ellipse_gradient_decay():
    traj = flow.normalized_run(meshes.ellipse(2.0, 1.0, 128),
                               FlowConfig(t_max=2.0, dt_safety=0.02, stop_curvature=math.inf))
    g = traj.trace["max_grad_h_sq"]
    t = traj.trace["t"]
    ok = np.isfinite(g)
    g, t = g[ok], t[ok]
    tail = t >= 0.5
    assert np.all(np.diff(g[tail]) < 0)
    slope = np.polyfit(t[tail], np.log(g[tail]), 1)[0]
    assert slope < 0


@pytest.mark.slow
def test_normalized_ellipsoid_rounds_off():
    traj = flow.normalized_run(meshes.ellipsoid((3.0, 1.0, 1.0), 3),
                               FlowConfig(t_max=7.0, dt_safety=0.02, record_every=20,
                                          stop_curvature=math.inf))
    tl = traj.trace["max_traceless_sq"]
    assert tl[-1] < 0.1 * tl[0]
    g = compute_geometry(traj.states[-1][1], gradients=False)
    assert np.allclose(g.ratio, 0.5, rtol=0.02)


# -- axisymmetric mode ---------------------------------------------------------------------

def test_axisymmetric_cylinder_law():
    x = np.linspace(0, 1, 20, endpoint=False)
    traj = flow.axisymmetric_run(np.stack([x, np.ones_like(x)], 1), 2, FlowConfig(t_max=0.3),
                                 periodic=True, period=1.0)
    t, _, r = traj.profiles[-1]
    assert t == pytest.approx(0.3)
    assert np.allclose(r, math.sqrt(1 - 2 * t), rtol=0.01)


def test_axisymmetric_sphere_extinction():
    th = np.linspace(np.pi, 0, 101)
    prof = np.stack([np.cos(th), np.sin(th)], 1)
    prof[0, 1] = prof[-1, 1] = 0.0
    traj = flow.axisymmetric_run(prof, 2, FlowConfig(stop_curvature=1e4))
    rep = flow.estimate_singular_time(traj)
    assert rep.T_hat == pytest.approx(0.25, rel=0.02)
    assert abs(rep.q_hat[0]) < 0.02
    assert not [e for e in traj.events if e["kind"] == "neck"]


def test_axisymmetric_input_checks():
    with pytest.raises(ValueError):
        flow.axisymmetric_run(np.ones((5, 2)), 1)
    with pytest.raises(ValueError):
        flow.axisymmetric_run(np.ones((5, 3)), 2)
    with pytest.raises(ValueError):
        flow.axisymmetric_run(np.stack([np.arange(5.0), -np.ones(5)], 1), 2, periodic=True, period=5.0)
