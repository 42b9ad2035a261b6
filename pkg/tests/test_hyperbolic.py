import math

import numpy as np
import pytest

from limitlab.errors import NotLoxodromic
from limitlab.hyperbolic import (
    AT_INFINITY,
    BASEPOINT,
    EPS_BOUNDARY,
    IDENTITY,
    BoundaryPoint,
    Geodesic,
    InteriorPoint,
    Mobius,
    angle_distance,
    angle_to_boundary,
    apply,
    axis_of,
    boundary_angle,
    classify_isometry,
    compose,
    distance_to_geodesic,
    geodesic_through,
    geodesics_cross,
    hyperbolic_distance,
    point_along_ray,
    rotate_about_i,
    standard_position,
    translate_up,
)

DIAG2 = Mobius(2.0, 0.0, 0.0, 0.5)
PARAB = Mobius(1.0, 1.0, 0.0, 1.0)


def random_mobius(rng) -> Mobius:
    """Random element of SL(2,R) via Iwasawa-style factors."""
    t = translate_up(rng.uniform(-3, 3))
    r = rotate_about_i(rng.uniform(0, 2 * math.pi))
    s = Mobius(1.0, rng.uniform(-3, 3), 0.0, 1.0)
    return compose(compose(r, t), s)


def random_point(rng) -> InteriorPoint:
    return InteriorPoint(rng.uniform(-5, 5), math.exp(rng.uniform(-3, 3)))


class TestMobius:
    def test_compose_identity(self):
        m = Mobius(2.0, 1.0, 1.0, 1.0)
        assert compose(IDENTITY, m).distance_to(m) == 0.0
        assert compose(m, IDENTITY).distance_to(m) == 0.0

    def test_compose_inverse(self):
        m = Mobius(2.0, 1.0, 1.0, 1.0)
        assert compose(m, m.inverse()).distance_to(IDENTITY) < 1e-10

    def test_diagonal_product(self):
        sq = compose(DIAG2, DIAG2)
        assert sq.distance_to(Mobius(4.0, 0.0, 0.0, 0.25)) < 1e-12

    def test_canonical_sign(self):
        m = Mobius(-2.0, 0.0, 0.0, -0.5)
        assert m.a == 2.0
        n = Mobius(0.0, -1.0, 1.0, 0.0)  # first nonzero entry is b
        assert n.b == 1.0 and n.c == -1.0

    def test_det_validation(self):
        with pytest.raises(ValueError):
            Mobius(2.0, 0.0, 0.0, 2.0)
        with pytest.raises(ValueError):
            Mobius(math.nan, 0.0, 0.0, 1.0)

    def test_det_renormalized_when_measurably_off(self):
        m = Mobius(2.0 * (1 + 2e-7), 0.0, 0.0, 0.5)
        assert abs(m.a * m.d - m.b * m.c - 1.0) < 1e-12

    def test_invariant_efter_compositions(self):
        rng = np.random.default_rng(7)
        m = IDENTITY
        for _ in range(60):
            m = compose(m, random_mobius(rng))
        det = m.a * m.d - m.b * m.c
        assert abs(det - 1.0) < 1e-12 * (1 + abs(m.a * m.d))


class TestApply:
    def test_identity_fixes(self):
        p = InteriorPoint(0.0, 1.0)
        q = apply(IDENTITY, p)
        assert q.x == 0.0 and q.y == 1.0

    def test_diag_scales(self):
        q = apply(DIAG2, InteriorPoint(0.0, 1.0))
        assert abs(q.x) < 1e-15 and abs(q.y - 4.0) < 1e-12

    def test_parabolic_fixes_infinity(self):
        assert apply(PARAB, AT_INFINITY).is_infinity

    def test_boundary_pole_goes_to_infinity(self):
        m = Mobius(0.0, -1.0, 1.0, -2.0)  # pole at x = 2
        assert apply(m, BoundaryPoint(2.0)).is_infinity

    def test_interior_stays_interior(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            q = apply(random_mobius(rng), random_point(rng))
            assert q.y > 0.0


class TestDistance:
    def test_zero_iff_equal(self):
        p = InteriorPoint(0.0, 1.0)
        assert hyperbolic_distance(p, p) == 0.0

    def test_vertical(self):
        d = hyperbolic_distance(InteriorPoint(0, 1), InteriorPoint(0, 2))
        assert abs(d - math.log(2.0)) < 1e-12

    def test_horizontal_closed_form(self):
        d = hyperbolic_distance(InteriorPoint(0, 1), InteriorPoint(1, 1))
        assert abs(d - math.acosh(1.5)) < 1e-12

    def test_isometry_invariance(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            m = random_mobius(rng)
            p, q = random_point(rng), random_point(rng)
            d1 = hyperbolic_distance(p, q)
            d2 = hyperbolic_distance(apply(m, p), apply(m, q))
            assert abs(d1 - d2) < 1e-9


class TestClassification:
    def test_loxodromic_translation_length(self):
        cls = classify_isometry(DIAG2)
        assert cls.tag == "loxodromic"
        assert abs(cls.translation_length - 2.0 * math.log(2.0)) < 1e-12

    def test_parabolic(self):
        assert classify_isometry(PARAB).tag == "parabolic"

    def test_elliptic(self):
        assert classify_isometry(rotate_about_i(math.pi / 3)).tag == "elliptic"

    def test_identity(self):
        assert classify_isometry(IDENTITY).tag == "identity"

    def test_conjugation_invariance(self):
        rng = np.random.default_rng(5)
        samples = [DIAG2, PARAB, rotate_about_i(1.0), compose(DIAG2, PARAB)]
        for m in samples:
            base = classify_isometry(m)
            for _ in range(250):
                n = random_mobius(rng)
                conj = compose(compose(n, m), n.inverse())
                cls = classify_isometry(conj)
                assert cls.tag == base.tag
                assert abs(cls.translation_length - base.translation_length) < 1e-9


class TestAxis:
    def test_diag_axis(self):
        g = axis_of(DIAG2)
        assert g.start.value == 0.0  # repelling
        assert g.end.is_infinity     # attracting

    def test_conjugated_axis(self):
        shift = Mobius(1.0, 1.0, 0.0, 1.0)
        g = axis_of(compose(compose(shift, DIAG2), shift.inverse()))
        assert abs(g.start.value - 1.0) < 1e-12
        assert g.end.is_infinity

    def test_parabolic_rejected(self):
        with pytest.raises(NotLoxodromic):
            axis_of(PARAB)

    def test_equivariance(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            n = random_mobius(rng)
            m = compose(compose(n, DIAG2), n.inverse())
            g = axis_of(m)
            expected_rep = apply(n, BoundaryPoint(0.0))
            expected_att = apply(n, AT_INFINITY)
            assert angle_distance(g.start.angle, expected_rep.angle) < 1e-9
            assert angle_distance(g.end.angle, expected_att.angle) < 1e-9

    def test_attracting_endpoint_attracts(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            n = random_mobius(rng)
            m = compose(compose(n, DIAG2), n.inverse())
            target = axis_of(m).end.angle
            p = random_point(rng)
            for _ in range(40):
                p = apply(m, p)
            # compare the Cayley image angle of the (near-boundary) orbit
            w = (p.z - 1j) / (p.z + 1j)
            assert angle_distance(math.atan2(w.imag, w.real) % (2 * math.pi), target) < 1e-3


class TestBoundaryAngles:
    def test_reference_angles(self):
        assert boundary_angle(math.inf) == 0.0
        assert abs(boundary_angle(0.0) - math.pi) < 1e-15
        assert abs(boundary_angle(1.0) - 1.5 * math.pi) < 1e-12

    def test_round_trip(self):
        rng = np.random.default_rng(23)
        for theta in rng.uniform(0, 2 * math.pi, 500):
            x = angle_to_boundary(theta)
            assert angle_distance(boundary_angle(x), theta) < 1e-10

    def test_round_trip_through_values(self):
        for x in (-1e6, -3.5, -1.0, 0.0, 0.25, 1.0, 17.0, 1e7, math.inf):
            theta = boundary_angle(x)
            y = angle_to_boundary(theta)
            if math.isinf(x):
                assert math.isinf(y)
            else:
                assert abs(x - y) <= 1e-8 * max(1.0, x * x)


class TestGeodesics:
    def test_cross(self):
        g = Geodesic(BoundaryPoint(0.0), AT_INFINITY)
        h = Geodesic(BoundaryPoint(-1.0), BoundaryPoint(1.0))
        assert geodesics_cross(g, h) == "cross"

    def test_disjoint(self):
        g = Geodesic(BoundaryPoint(0.0), BoundaryPoint(1.0))
        h = Geodesic(BoundaryPoint(2.0), BoundaryPoint(3.0))
        assert geodesics_cross(g, h) == "disjoint"

    def test_share_endpoint(self):
        g = Geodesic(BoundaryPoint(0.0), AT_INFINITY)
        h = Geodesic(BoundaryPoint(0.0), BoundaryPoint(1.0))
        assert geodesics_cross(g, h) == "share-endpoint"

    def test_nested_disjoint(self):
        g = Geodesic(BoundaryPoint(-10.0), BoundaryPoint(10.0))
        h = Geodesic(BoundaryPoint(-1.0), BoundaryPoint(1.0))
        assert geodesics_cross(g, h) == "disjoint"

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            Geodesic(BoundaryPoint(1.0), BoundaryPoint(1.0))

    def test_distance_to_geodesic(self):
        g = Geodesic(BoundaryPoint(-1.0), BoundaryPoint(1.0))
        assert distance_to_geodesic(InteriorPoint(0, 1), g) < 1e-12
        d = distance_to_geodesic(InteriorPoint(0, 2), g)
        assert abs(d - math.log(2.0)) < 1e-12  # distance realized at i

    def test_distance_to_vertical(self):
        g = Geodesic(BoundaryPoint(0.0), AT_INFINITY)
        d = distance_to_geodesic(InteriorPoint(1, 1), g)
        assert abs(d - math.asinh(1.0)) < 1e-12


class TestRays:
    def test_standard_position(self):
        rng = np.random.default_rng(31)
        for _ in range(100):
            p = random_point(rng)
            xi = BoundaryPoint(rng.uniform(-5, 5)) if rng.random() < 0.8 else AT_INFINITY
            T = standard_position(p, xi)
            q = apply(T, p)
            assert abs(q.x) < 1e-9 and abs(q.y - 1.0) < 1e-9
            assert apply(T, xi).is_infinity

    def test_point_along_ray_arclength(self):
        rng = np.random.default_rng(37)
        for _ in range(100):
            p = random_point(rng)
            xi = BoundaryPoint(rng.uniform(-5, 5))
            t = rng.uniform(0.1, 5.0)
            q = point_along_ray(p, xi, t)
            assert abs(hyperbolic_distance(p, q) - t) < 1e-9

    def test_geodesic_through_contains_points(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            p, q = random_point(rng), random_point(rng)
            if abs(p.x - q.x) < 1e-6:
                continue
            g = geodesic_through(p, q)
            assert distance_to_geodesic(p, g) < 1e-9
            assert distance_to_geodesic(q, g) < 1e-9
