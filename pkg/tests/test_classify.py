import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mcflab import classify, oracle
from mcflab.classify import Thresholds, classify_shrinker, pinching_filter

S = oracle.ExactSolutionSpec
THETA_CIRCLE = math.sqrt(2 * math.pi / math.e)


def test_table_values(table1, table2):
    assert table1.lookup("Plane").density == 1.0
    assert table1.lookup("Sphere").density == pytest.approx(THETA_CIRCLE, rel=0.005)
    assert table2.lookup("Plane").density == 1.0
    assert table2.lookup("Sphere").density == pytest.approx(4 / math.e, rel=0.005)
    assert table2.lookup("Cylinder", 1).density == pytest.approx(THETA_CIRCLE, rel=0.005)
    assert all(e.density > 1.0 for e in table2.entries if e.label != "Plane")
    assert table2.lookup("Sphere").density < table2.lookup("Cylinder", 1).density
    with pytest.raises(KeyError):
        table2.lookup("Cylinder", 2)
    with pytest.raises(ValueError):
        classify.build_density_table(3)


def test_table_reproducible_across_resolutions(table2):
    fine = classify.build_density_table(2, 160)
    for a, b in zip(table2.entries, fine.entries):
        assert a.label == b.label and a.density == pytest.approx(b.density, rel=0.005)


def test_sphere_classifies(table2):
    c = classify_shrinker(oracle.shrinker_at(S("Sphere", 2, 3, resolution=80), -0.5), table2)
    assert c.label == "Sphere"
    assert c.ratio_mean == pytest.approx(0.5, abs=0.02)
    assert c.density_measured == pytest.approx(4 / math.e, rel=0.01)
    assert c.pinching_satisfied and pinching_filter(c, 2)


def test_cylinder_classifies(table2):
    c = classify_shrinker(oracle.shrinker_at(S("Cylinder", 2, 3, m=1, resolution=80), -0.5), table2)
    assert c.label == "Cylinder{m=1}" and c.m == 1
    assert c.ratio_mean == pytest.approx(1.0, abs=0.02)
    assert c.density_measured == pytest.approx(THETA_CIRCLE, rel=0.01)
    assert not c.pinching_satisfied and not pinching_filter(c, 2)


@pytest.mark.parametrize("n, N, table", [(2, 3, "table2"), (1, 2, "table1")])
def test_coincident_planes(request, n, N, table):
    spec = S("Plane", n, N, radius0=8.0, resolution=80 if n == 2 else 256, multiplicity=2)
    c = classify_shrinker(oracle.shrinker_at(spec, -0.5), request.getfixturevalue(table))
    assert c.label == "Plane{multiplicity=2}"
    assert c.density_measured == pytest.approx(2.0, rel=0.01)
    assert pinching_filter(c, n)


def test_circle_classifies_in_higher_codimension(table1):
    c = classify_shrinker(oracle.shrinker_at(S("Sphere", 1, 4), -0.5), table1)
    assert c.label == "Sphere"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_noisy_sphere_is_unknown(table2, seed):
    base = oracle.shrinker_at(S("Sphere", 2, 3, resolution=80), -0.5)
    rng = np.random.default_rng(seed)
    X = base.positions * (1.0 + 0.05 * rng.standard_normal((base.num_vertices, 1)))
    assert classify_shrinker(base.with_positions(X), table2).verdict == "Unknown"


def test_unscaled_sphere_is_unknown(table2):
    wrong = oracle.make_exact(S("Sphere", 2, 3, resolution=80), 0.0)  # radius 1, not sqrt 2
    c = classify_shrinker(wrong, table2)
    assert c.verdict == "Unknown" and c.shrinker_residual > 0.1


def test_fractional_multiplicity_is_unknown(table2):
    disk = oracle.shrinker_at(S("Plane", 2, 3, radius0=1.0, resolution=40), -0.5)
    c = classify_shrinker(disk, table2)
    assert c.verdict == "Unknown" and "not an integer" in c.reason


@settings(max_examples=6, deadline=None)
@given(lam=st.floats(0.3, 4.0), kind=st.sampled_from(["Sphere", "Cylinder"]))
def test_scale_invariance(table2, lam, kind):
    spec = S(kind, 2, 3, m=1 if kind == "Cylinder" else 0, resolution=40)
    base = oracle.shrinker_at(spec, -0.5)
    ref = classify_shrinker(base, table2)
    scaled = base.with_positions(lam * base.positions)
    c = classify_shrinker(scaled, table2, s=-0.5 * lam ** 2)
    assert c.label == ref.label
    assert c.density_measured == pytest.approx(ref.density_measured, rel=1e-9)
    assert c.ratio_mean == pytest.approx(ref.ratio_mean, rel=1e-9)


def test_fit_center_recovers_offset_shrinker(table2):
    base = oracle.shrinker_at(S("Sphere", 2, 3, resolution=80), -0.8)
    moved = base.with_positions(base.positions + np.array([0.4, 0.0, -0.3]))
    assert classify_shrinker(moved, table2).verdict == "Unknown"
    c = classify_shrinker(moved, table2, fit_center=True)
    assert c.label == "Sphere" and c.s == pytest.approx(-0.8, rel=0.01)


def test_thresholds_are_configurable(table2):
    imm = oracle.shrinker_at(S("Sphere", 2, 3, resolution=80), -0.5)
    strict = Thresholds(residual=1e-12)
    assert classify_shrinker(imm, table2, thresholds=strict).verdict == "Unknown"


def test_pinching_filter_arithmetic():
    def fake(verdict, ratio):
        return classify.ShrinkerClassification(verdict, None, None, 0.0, ratio, 0.0, 0.0,
                                               1.0, 1.0, True)
    assert pinching_filter(fake("Sphere", 0.5), 2)
    assert pinching_filter(fake("Sphere", 1.0), 1)
    assert not pinching_filter(fake("Cylinder", 1.0), 2)
    assert pinching_filter(fake("Plane", math.nan), 2)
