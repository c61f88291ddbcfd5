import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcflab import oracle
from mcflab.blowup import shrinker_residual
from mcflab.geometry import compute_geometry

S = oracle.ExactSolutionSpec


def radii(imm, dims):
    return np.linalg.norm(np.asarray(imm.positions)[:, :dims], axis=1)


def test_make_exact_seed_is_unit_icosphere():
    imm = oracle.make_exact(S("Sphere", 2, 3, resolution=80), 0.0)
    assert imm.num_vertices == 2562
    assert np.allclose(radii(imm, 3), 1.0)


def test_circle_radius_law():
    imm = oracle.make_exact(S("Sphere", 1, 2), 0.375)
    assert np.allclose(radii(imm, 2), 0.5)


def test_cylinder_radius_law():
    imm = oracle.make_exact(S("Cylinder", 2, 3, m=1, resolution=32), 0.25)
    assert np.allclose(radii(imm, 2), math.sqrt(0.5))
    assert np.abs(imm.positions[:, 2]).max() == pytest.approx(6.0)


def test_sphere_in_higher_codimension():
    imm = oracle.make_exact(S("Sphere", 2, 5, resolution=20), 0.1)
    assert imm.ambient_dim == 5
    assert np.all(imm.positions[:, 3:] == 0.0)
    assert np.allclose(radii(imm, 3), math.sqrt(1 - 0.4))


@pytest.mark.parametrize("spec, T", [(S("Sphere", 1, 2), 0.5), (S("Sphere", 2, 3), 0.25),
                                     (S("Cylinder", 2, 3, m=1), 0.5),
                                     (S("Sphere", 2, 3, radius0=2.0), 1.0)])
def test_extinction_time(spec, T):
    assert oracle.extinction_time(spec) == pytest.approx(T)


def test_errors():
    with pytest.raises(ValueError):
        oracle.extinction_time(S("Plane", 2, 3))
    with pytest.raises(ValueError):
        oracle.make_exact(S("Sphere", 1, 2), 0.5)
    with pytest.raises(ValueError):
        S("Cylinder", 2, 3, m=2)
    with pytest.raises(ValueError):
        S("Sphere", 2, 2)
    with pytest.raises(ValueError):
        oracle.shrinker_at(S("Sphere", 2, 3), 0.0)


@pytest.mark.parametrize("spec, dims, r", [(S("Sphere", 2, 3), 3, math.sqrt(2)),
                                           (S("Cylinder", 2, 3, m=1), 2, 1.0),
                                           (S("Sphere", 1, 2), 2, 1.0)])
def test_shrinker_radius(spec, dims, r):
    assert np.allclose(radii(oracle.shrinker_at(spec, -0.5), dims), r)


@settings(max_examples=15, deadline=None)
@given(s=st.floats(-5.0, -1e-3), kind=st.sampled_from(["Sphere1", "Sphere2", "Cylinder"]))
def test_self_similarity_is_exact(s, kind):
    spec = {"Sphere1": S("Sphere", 1, 2, resolution=64), "Sphere2": S("Sphere", 2, 3, resolution=20),
            "Cylinder": S("Cylinder", 2, 3, m=1, resolution=16)}[kind]
    a = oracle.shrinker_at(spec, s).positions
    b = oracle.shrinker_at(spec, -0.5).positions
    assert np.array_equal(a, math.sqrt(-2.0 * s) * b)


@pytest.mark.parametrize("spec", [S("Sphere", 1, 2), S("Sphere", 2, 3, resolution=80),
                                  S("Cylinder", 2, 3, m=1, resolution=80)])
@pytest.mark.parametrize("s", [-0.5, -2.0])
def test_soliton_identity(spec, s):
    imm = oracle.shrinker_at(spec, s)
    assert shrinker_residual(imm, None, s) <= 1e-2


@pytest.mark.parametrize("spec, ratio", [(S("Sphere", 1, 2), 1.0), (S("Sphere", 2, 3, resolution=80), 0.5),
                                         (S("Cylinder", 2, 3, m=1, resolution=80), 1.0)])
def test_pinching_ratios(spec, ratio):
    imm = oracle.shrinker_at(spec, -0.5)
    g = compute_geometry(imm, gradients=False)
    inner = ~g.boundary & (np.abs(imm.positions[:, -1]) < 3.0 if spec.kind.value == "Cylinder"
                           else ~g.boundary)
    assert np.allclose(g.ratio[inner], ratio, rtol=0.01)


def test_closed_form_densities():
    assert oracle.closed_form_density(0) == 1.0
    assert oracle.closed_form_density(1) == pytest.approx(math.sqrt(2 * math.pi / math.e))
    assert oracle.closed_form_density(2) == pytest.approx(4 / math.e)


def test_plane_multiplicity_is_coincident_copies():
    one = oracle.make_exact(S("Plane", 2, 3, radius0=2.0, resolution=16))
    two = oracle.make_exact(S("Plane", 2, 3, radius0=2.0, resolution=16, multiplicity=2))
    assert two.num_vertices == 2 * one.num_vertices
    assert np.array_equal(two.positions[one.num_vertices:], one.positions)
    assert np.all(two.positions[:, 2] == 0.0)
