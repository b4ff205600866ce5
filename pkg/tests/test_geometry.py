"""Metric, Christoffel symbols, Riemann tensor and curvature scalars."""
import math

import numpy as np
import pytest

from conftest import euclidean, hyperbolic, polar, unit_sphere
from subaudit.catalog import all_charts, product_chart, sphere_chart
from subaudit.errors import (
    DegeneratePlaneError, DomainBoxError, NotPositiveDefiniteError, PreconditionError, RankDeficiencyError,
)
from subaudit.geometry import (
    Chart, christoffel_at, metric_at, orthonormalize, random_orthonormal_frame, riemann_at,
    scalar_curvature, sectional_curvature,
)


### metric_at

def test_euclidean_metric_is_identity():
    g, ginv = metric_at(euclidean(3), [0.1, 0.2, 0.3])
    assert np.array_equal(g, np.eye(3))
    assert np.allclose(ginv, np.eye(3))


def test_polar_metric():
    g, ginv = metric_at(polar(), [2.0, 0.0])
    assert np.allclose(g, np.diag([1.0, 4.0]), atol=1e-15)
    assert np.allclose(ginv, np.diag([1.0, 0.25]))


def test_hyperbolic_metric():
    g, _ = metric_at(hyperbolic(), [1.0, 0.0])
    assert g[1, 1] == pytest.approx(7.38905609893065, abs=1e-12)


def test_point_outside_domain():
    with pytest.raises(DomainBoxError):
        metric_at(polar(), [3.5, 0.0])
    # within 1e-6 of the face is rejected too
    with pytest.raises(DomainBoxError):
        metric_at(polar(), [0.5 + 1e-8, 0.0])


def test_not_positive_definite():
    chart = Chart.from_strings(["x", "y"], ["x", "1"], [(-1.0, 1.0), (-1.0, 1.0)])
    with pytest.raises(NotPositiveDefiniteError):
        metric_at(chart, [-0.5, 0.0])


def test_metric_symmetry_on_catalog(rng):
    for chart in all_charts():
        for x in chart.random_points(3, rng):
            assert chart.symmetry_defect(x) <= 1e-12


### christoffel_at

def test_euclidean_christoffels_vanish():
    assert not np.any(christoffel_at(euclidean(3), [0.3, -0.2, 0.1]))


def test_polar_christoffels():
    G = christoffel_at(polar(), [2.0, 0.4])
    assert G[0, 1, 1] == pytest.approx(-2.0, abs=1e-14)
    assert G[1, 0, 1] == pytest.approx(0.5, abs=1e-14)
    assert G[1, 1, 0] == G[1, 0, 1]


def test_hyperbolic_christoffel():
    G = christoffel_at(hyperbolic(), [0.0, 0.0])
    assert G[0, 1, 1] == pytest.approx(-1.0, abs=1e-14)


def test_christoffel_symmetric_in_lower_indices(rng):
    chart = sphere_chart(3)
    for x in chart.random_points(5, rng):
        G = christoffel_at(chart, x)
        assert np.allclose(G, np.transpose(G, (0, 2, 1)), atol=1e-14)


### riemann_at

def test_flat_riemann_vanishes():
    assert np.max(np.abs(riemann_at(euclidean(3), [0.1, 0.2, 0.3]).riemann)) <= 1e-9


def test_sphere_component_under_standard_orientation():
    s = riemann_at(unit_sphere(), [math.pi / 3, 0.2])
    # R(X,Y,Y,X) > 0 for the sphere; the alternating slot order flips sign
    assert s.riemann[0, 1, 1, 0] == pytest.approx(0.75, abs=1e-6)
    assert s.riemann[0, 1, 0, 1] == pytest.approx(-0.75, abs=1e-6)
    assert s.convention == "standard"


def test_hyperbolic_sectional_curvature(rng):
    chart = hyperbolic()
    for x in chart.random_points(5, rng):
        s = riemann_at(chart, x)
        assert sectional_curvature(s, [1, 0], [0, 1]) == pytest.approx(-1.0, abs=1e-6)


def test_symmetry_residuals_on_catalog(rng):
    for chart in all_charts():
        for x in chart.random_points(10, rng):
            res = riemann_at(chart, x).residuals
            assert max(res.values()) <= 1e-6, (chart.name, res)


def test_step_halving_convergence():
    chart = unit_sphere()
    x = [1.1, 0.3]

    def err(h):
        s = riemann_at(chart, x, step=h, richardson=False, check=False)
        return abs(sectional_curvature(s, [1, 0], [0, 1]) - 1.0)

    e1, e2 = err(0.1), err(0.05)
    assert e1 / e2 >= 3.0


### sectional_curvature

def test_sectional_flat():
    s = riemann_at(euclidean(3), [0.0, 0.0, 0.0])
    assert sectional_curvature(s, [1, 2, 0], [0, 1, 3]) == pytest.approx(0.0, abs=1e-9)


def test_sectional_unit_sphere_random_points(rng):
    chart = unit_sphere()
    for x in chart.random_points(10, rng):
        s = riemann_at(chart, x)
        assert sectional_curvature(s, [1, 0], [0, 1]) == pytest.approx(1.0, abs=1e-5)


def test_sectional_small_sphere():
    s = riemann_at(sphere_chart(2, 0.5), [1.0, 0.0])
    assert sectional_curvature(s, [1, 0], [0, 1]) == pytest.approx(4.0, abs=1e-5)


def test_sectional_gl2_invariance(rng):
    chart = sphere_chart(3)
    s = riemann_at(chart, [1.0, 1.2, 0.3])
    X, Y = rng.standard_normal(3), rng.standard_normal(3)
    k0 = sectional_curvature(s, X, Y)
    a, b, c, d = rng.standard_normal(4)
    assert sectional_curvature(s, a * X + b * Y, c * X + d * Y) == pytest.approx(k0, abs=1e-8)


def test_degenerate_plane():
    s = riemann_at(unit_sphere(), [1.0, 0.0])
    with pytest.raises(DegeneratePlaneError):
        sectional_curvature(s, [1, 1], [2, 2])


### scalar_curvature and frames

def test_scalar_curvature_flat():
    s = riemann_at(euclidean(4), [0.1] * 4)
    assert scalar_curvature(s, random_orthonormal_frame(s, 1)) == pytest.approx(0.0, abs=1e-9)


def test_scalar_curvature_s3():
    s = riemann_at(sphere_chart(3), [1.0, 1.3, 0.2])
    assert scalar_curvature(s, random_orthonormal_frame(s, 1)) == pytest.approx(3.0, abs=1e-6)


def test_scalar_curvature_product():
    s = riemann_at(product_chart(2, 1.0, 1), [1.0, 0.5, 0.1])
    assert scalar_curvature(s, random_orthonormal_frame(s, 1)) == pytest.approx(1.0, abs=1e-6)


def test_scalar_curvature_frame_invariance(rng):
    for chart in (sphere_chart(3), product_chart(2, 1.5, 2), hyperbolic()):
        for x in chart.random_points(3, rng):
            s = riemann_at(chart, x)
            t1 = scalar_curvature(s, random_orthonormal_frame(s, 11))
            t2 = scalar_curvature(s, random_orthonormal_frame(s, 12))
            assert t1 == pytest.approx(t2, abs=1e-6)


def test_scalar_curvature_rejects_non_orthonormal_frame():
    s = riemann_at(sphere_chart(3), [1.0, 1.3, 0.2])
    f = random_orthonormal_frame(s, 1)
    f.vectors = 2 * f.vectors
    with pytest.raises(PreconditionError):
        scalar_curvature(s, f)


def test_orthonormalize_idempotent():
    f = orthonormalize(np.eye(3), np.eye(3))
    assert np.array_equal(f.vectors, np.eye(3))


def test_orthonormalize_textbook():
    f = orthonormalize([[1, 0], [1, 1]], np.eye(2))
    assert np.allclose(f.vectors, np.eye(2), atol=1e-15)


def test_orthonormalize_weighted():
    f = orthonormalize([[1, 0], [0, 1]], np.diag([4.0, 9.0]))
    assert np.allclose(f.vectors, [[0.5, 0], [0, 1 / 3]], atol=1e-15)
    assert f.orthonormality_defect() <= 1e-10


def test_orthonormalize_keeps_first_direction(rng):
    A = rng.standard_normal((4, 4))
    g = A @ A.T + 4 * np.eye(4)
    V = rng.standard_normal((4, 4))
    f = orthonormalize(V, g)
    assert f.orthonormality_defect() <= 1e-10
    ratio = f.vectors[0] / V[0]
    assert np.allclose(ratio, ratio[0]) and ratio[0] > 0


def test_orthonormalize_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        orthonormalize([[1, 2, 3], [2, 4, 6]], np.eye(3))


def test_orthonormalize_ill_conditioned_input():
    # nearly parallel input takes the sequential path and still comes out orthonormal
    f = orthonormalize([[1.0, 0.0, 0.0], [1.0, 1e-9, 0.0], [0.0, 0.0, 2.0]], np.diag([1.0, 2.0, 3.0]))
    assert f.orthonormality_defect() <= 1e-10
    assert np.allclose(f.vectors[0], [1, 0, 0])


def reference_gram_schmidt(V, g):
    out = []
    for v in V:
        w = v.astype(float)
        for e in out:
            w = w - (e @ g @ w) * e
        out.append(w / np.sqrt(w @ g @ w))
    return np.array(out)


def test_orthonormalize_matches_reference(rng):
    A = rng.standard_normal((5, 5))
    g = A @ A.T + 5 * np.eye(5)
    V = rng.standard_normal((4, 5))
    assert np.allclose(orthonormalize(V, g).vectors, reference_gram_schmidt(V, g), atol=1e-12)
