"""Exact-formula geometry of the hyperbolic plane.

All arithmetic happens in the upper half-plane model: points are x + iy with
y > 0, orientation-preserving isometries are unit-determinant real 2x2
matrices acting by fractional-linear maps, and the ideal boundary is the
extended real line.  Whenever two boundary points have to be compared or
measured against each other we pass to the Poincare disc through the Cayley
transform z -> (z - i)/(z + i), so the boundary becomes the compact unit
circle and "disc angle" (in [0, 2*pi)) is the canonical boundary coordinate.

Matrices are canonicalized to a single representative of {M, -M}: after
renormalizing the determinant to 1, the first entry of (a, b, c, d) with
absolute value above 1e-12 is made positive.  This makes deduplication of
group elements well defined.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import NotLoxodromic

TWO_PI = 2.0 * math.pi

# Trace-classification tolerance and boundary-coincidence tolerance.
EPS_CLS = 1e-9
EPS_BOUNDARY = 1e-10

# Constructors reject determinants further than this from 1 before
# renormalization.
EPS_DET = 1e-6

INFINITY = math.inf


def _canonical(a: float, b: float, c: float, d: float) -> tuple[float, float, float, float]:
    for v in (a, b, c, d):
        if abs(v) > 1e-12:
            if v < 0.0:
                return -a, -b, -c, -d
            return a, b, c, d
    return a, b, c, d


@dataclass(frozen=True)
class Mobius:
    """Unit-determinant real Mobius transformation z -> (az + b)/(cz + d).

    Entries are stored row-major.  Construction renormalizes the determinant
    to exactly det = 1 (rejecting inputs off by more than 1e-6) and fixes the
    PSL(2, R) sign ambiguity.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        a, b, c, d = float(self.a), float(self.b), float(self.c), float(self.d)
        if not all(math.isfinite(v) for v in (a, b, c, d)):
            raise ValueError(f"non-finite matrix entries ({a}, {b}, {c}, {d})")
        det = a * d - b * c
        # a*d - b*c cancels two big products for matrices with large entries,
        # so the det can only be measured to ~|ad| * eps; renormalizing below
        # that floor would inject noise instead of removing drift.
        noise = 64.0 * 2.23e-16 * (abs(a * d) + abs(b * c))
        if abs(det - 1.0) > EPS_DET + noise:
            raise ValueError(f"determinant {det} too far from 1")
        if abs(det - 1.0) > noise:
            s = math.sqrt(det)
            a, b, c, d = a / s, b / s, c / s, d / s
        a, b, c, d = _canonical(a, b, c, d)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "Mobius":
        return Mobius(self.d, -self.b, -self.c, self.a)

    def entries(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def distance_to(self, other: "Mobius") -> float:
        """Frobenius distance between the canonical representatives."""
        return math.sqrt(
            (self.a - other.a) ** 2
            + (self.b - other.b) ** 2
            + (self.c - other.c) ** 2
            + (self.d - other.d) ** 2
        )


IDENTITY = Mobius(1.0, 0.0, 0.0, 1.0)


def compose(m: Mobius, n: Mobius) -> Mobius:
    """Matrix product m*n, renormalized and sign-canonicalized."""
    return Mobius(
        m.a * n.a + m.b * n.c,
        m.a * n.b + m.b * n.d,
        m.c * n.a + m.d * n.c,
        m.c * n.b + m.d * n.d,
    )


@dataclass(frozen=True)
class InteriorPoint:
    """Point x + iy of the open upper half-plane (y strictly positive)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)) or self.y <= 0.0:
            raise ValueError(f"not an upper half-plane point: {self.x} + {self.y}i")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


BASEPOINT = InteriorPoint(0.0, 1.0)


@dataclass(frozen=True)
class BoundaryPoint:
    """Point of the ideal boundary: a finite real or the point at infinity.

    The derived disc angle is the argument of the Cayley image
    (value - i)/(value + i); infinity maps to angle 0.
    """

    value: float

    def __post_init__(self):
        if math.isnan(self.value):
            raise ValueError("boundary value is NaN")

    @property
    def is_infinity(self) -> bool:
        return math.isinf(self.value)

    @property
    def angle(self) -> float:
        return boundary_angle(self.value)

    @staticmethod
    def from_angle(theta: float) -> "BoundaryPoint":
        return BoundaryPoint(angle_to_boundary(theta))


AT_INFINITY = BoundaryPoint(INFINITY)


def boundary_angle(x: float) -> float:
    """Disc angle in [0, 2*pi) of the boundary value x (inf allowed)."""
    if math.isinf(x):
        return 0.0
    w = (x - 1j) / (x + 1j)
    theta = math.atan2(w.imag, w.real)
    return theta % TWO_PI


def angle_to_boundary(theta: float) -> float:
    """Inverse Cayley transform of exp(i*theta); angle 0 is infinity."""
    w = cmath.exp(1j * (theta % TWO_PI))
    denom = 1.0 - w
    if abs(denom) < 1e-15:
        return INFINITY
    z = 1j * (1.0 + w) / denom
    return z.real


def angle_distance(t1: float, t2: float) -> float:
    """Distance between two angles on the circle, in [0, pi]."""
    d = abs(t1 - t2) % TWO_PI
    return min(d, TWO_PI - d)


def interior_to_disc(p: InteriorPoint) -> complex:
    """Cayley image of an interior point; lands in the open unit disc."""
    return (p.z - 1j) / (p.z + 1j)


def apply(m: Mobius, p):
    """Fractional-linear action on interior or boundary points.

    A boundary pole (c*x + d = 0) maps to the point at infinity; this is a
    regular value, not an error.
    """
    if isinstance(p, InteriorPoint):
        cx_d = m.c * p.x + m.d
        denom = cx_d * cx_d + (m.c * p.y) ** 2
        x = ((m.a * p.x + m.b) * cx_d + m.a * m.c * p.y * p.y) / denom
        y = p.y / denom
        return InteriorPoint(x, y)
    if isinstance(p, BoundaryPoint):
        return BoundaryPoint(apply_boundary_value(m, p.value))
    raise TypeError(f"cannot apply Mobius to {type(p).__name__}")


def apply_boundary_value(m: Mobius, x: float) -> float:
    if math.isinf(x):
        return m.a / m.c if m.c != 0.0 else INFINITY
    denom = m.c * x + m.d
    if denom == 0.0:
        return INFINITY
    return (m.a * x + m.b) / denom


@dataclass(frozen=True)
class IsometryClass:
    """Trace classification: loxodromic / parabolic / elliptic / identity.

    translation_length is 2*arccosh(|trace|/2) for loxodromic elements and
    0 otherwise.
    """

    tag: str
    translation_length: float = 0.0


def classify_isometry(m: Mobius) -> IsometryClass:
    if max(abs(m.a - 1.0), abs(m.b), abs(m.c), abs(m.d - 1.0)) < EPS_CLS:
        return IsometryClass("identity")
    t = abs(m.trace)
    if t > 2.0 + EPS_CLS:
        return IsometryClass("loxodromic", 2.0 * math.acosh(t / 2.0))
    if t >= 2.0 - EPS_CLS:
        return IsometryClass("parabolic")
    return IsometryClass("elliptic")


def translation_length(m: Mobius) -> float:
    t = abs(m.trace)
    if t <= 2.0 + EPS_CLS:
        raise NotLoxodromic(f"|trace| = {t} is not > 2")
    return 2.0 * math.acosh(t / 2.0)


@dataclass(frozen=True)
class Geodesic:
    """Complete geodesic given by an ordered pair of distinct ideal endpoints."""

    start: BoundaryPoint
    end: BoundaryPoint

    def __post_init__(self):
        if angle_distance(self.start.angle, self.end.angle) <= EPS_BOUNDARY:
            raise ValueError(
                f"geodesic endpoints coincide: {self.start.value}, {self.end.value}"
            )

    def angles(self) -> tuple[float, float]:
        return (self.start.angle, self.end.angle)


def axis_of(m: Mobius) -> Geodesic:
    """Axis of a loxodromic element, oriented (repelling, attracting).

    The fixed points are the roots of c*x^2 + (d - a)*x - b = 0, computed
    with the sign-matched quadratic form so neither root cancels.  Elements
    whose c vanishes up to float noise (relative to the entry scale) fix
    infinity; an exact-zero test would divide by noise.  The attracting
    endpoint is the one where |c*x + d| > 1 (derivative modulus below 1).
    """
    cls = classify_isometry(m)
    if cls.tag != "loxodromic":
        raise NotLoxodromic(f"classification is {cls.tag}")
    scale = max(abs(m.a), abs(m.b), abs(m.c), abs(m.d))
    if abs(m.c) <= 1e-12 * scale:
        finite = m.b / (m.d - m.a)
        if abs(m.a) > 1.0:
            return Geodesic(BoundaryPoint(finite), AT_INFINITY)
        return Geodesic(AT_INFINITY, BoundaryPoint(finite))
    tr = m.trace
    disc = math.sqrt(tr * tr - 4.0)
    num = (m.a - m.d) + math.copysign(disc, m.a - m.d)
    x_big = num / (2.0 * m.c)
    x_small = -2.0 * m.b / num if num != 0.0 else 0.0
    if abs(m.c * x_big + m.d) > 1.0:
        return Geodesic(BoundaryPoint(x_small), BoundaryPoint(x_big))
    return Geodesic(BoundaryPoint(x_big), BoundaryPoint(x_small))


def hyperbolic_distance(p: InteriorPoint, q: InteriorPoint) -> float:
    """d(p, q) = arccosh(1 + |p - q|^2 / (2 Im p Im q))."""
    dx = p.x - q.x
    dy = p.y - q.y
    arg = 1.0 + (dx * dx + dy * dy) / (2.0 * p.y * q.y)
    return math.acosh(max(arg, 1.0))


def _in_open_arc(theta: float, a: float, b: float) -> bool:
    """Is theta inside the counterclockwise open arc from a to b?"""
    span = (b - a) % TWO_PI
    pos = (theta - a) % TWO_PI
    return 0.0 < pos < span


def geodesics_cross(g: Geodesic, h: Geodesic) -> str:
    """'cross', 'disjoint' or 'share-endpoint' for two geodesics.

    Crossing happens exactly when the endpoint pairs interleave on the
    boundary circle; endpoint coincidence is decided at 1e-10 in disc angle.
    """
    a1, a2 = g.angles()
    b1, b2 = h.angles()
    for s in (a1, a2):
        for t in (b1, b2):
            if angle_distance(s, t) <= EPS_BOUNDARY:
                return "share-endpoint"
    inside = _in_open_arc(b1, a1, a2) + _in_open_arc(b2, a1, a2)
    return "cross" if inside == 1 else "disjoint"


def distance_to_geodesic(p: InteriorPoint, g: Geodesic) -> float:
    """Distance from an interior point to a complete geodesic.

    For a vertical line x = alpha the distance is arcsinh(|x - alpha| / y);
    for a semicircle of center c and radius r it is
    arcsinh(|(x - c)^2 + y^2 - r^2| / (2 r y)).
    """
    u, v = g.start.value, g.end.value
    if math.isinf(u) or math.isinf(v):
        alpha = v if math.isinf(u) else u
        return math.asinh(abs(p.x - alpha) / p.y)
    c = (u + v) / 2.0
    r = abs(u - v) / 2.0
    return math.asinh(abs((p.x - c) ** 2 + p.y * p.y - r * r) / (2.0 * r * p.y))


# ---------------------------------------------------------------------------
# Frames and canonical-position helpers.
#
# A frame is a Mobius map F with F(i) = p and the upward vertical tangent at
# i carried to a chosen unit tangent at p; moving along geodesics and turning
# by angles are then compositions with the two one-parameter subgroups below.
# ---------------------------------------------------------------------------


def translate_up(s: float) -> Mobius:
    """Translation by s along the imaginary axis: i -> i*e^s."""
    e = math.exp(s / 2.0)
    return Mobius(e, 0.0, 0.0, 1.0 / e)


def rotate_about_i(theta: float) -> Mobius:
    """Elliptic rotation fixing i, turning tangent directions by +theta."""
    c = math.cos(theta / 2.0)
    s = math.sin(theta / 2.0)
    return Mobius(c, s, -s, c)


def standard_position(p: InteriorPoint, target: BoundaryPoint) -> Mobius:
    """Mobius T with T(p) = i and T(target) = infinity.

    The geodesic ray from p toward target becomes the upward imaginary axis,
    so the point at arclength t along the ray is T^{-1}(i e^t).
    """
    if target.is_infinity:
        x1, y1 = p.x, p.y
        s = math.sqrt(y1)
        return Mobius(1.0 / s, -x1 / s, 0.0, s)
    xi = target.value
    # S(z) = -1/(z - xi) sends xi to infinity, det = 1.
    sx, sy = _apply_entries(0.0, -1.0, 1.0, -xi, p.x, p.y)
    s = math.sqrt(sy)
    shift = Mobius(1.0 / s, -sx / s, 0.0, s)
    return compose(shift, Mobius(0.0, -1.0, 1.0, -xi))


def _apply_entries(a, b, c, d, x, y):
    cx_d = c * x + d
    denom = cx_d * cx_d + (c * y) ** 2
    return ((a * x + b) * cx_d + a * c * y * y) / denom, y / denom


def point_along_ray(p: InteriorPoint, target: BoundaryPoint, t: float) -> InteriorPoint:
    """Point at arclength t from p along the geodesic ray toward target."""
    T = standard_position(p, target)
    return apply(T.inverse(), InteriorPoint(0.0, math.exp(t)))


def angle_between(at: InteriorPoint, p: InteriorPoint, q: InteriorPoint) -> float:
    """Unsigned angle at `at` between the geodesics toward p and q.

    Computed in the disc model after moving `at` to the origin, where
    geodesics through the center are Euclidean diameters.
    """
    T = standard_position(at, AT_INFINITY)
    wp = interior_to_disc(apply(T, p))
    wq = interior_to_disc(apply(T, q))
    d = abs(cmath.phase(wp) - cmath.phase(wq)) % TWO_PI
    return min(d, TWO_PI - d)


def geodesic_through(p: InteriorPoint, q: InteriorPoint) -> Geodesic:
    """Complete geodesic through two distinct interior points, oriented p -> q."""
    if abs(p.x - q.x) < 1e-12 * max(1.0, abs(p.x)):
        # Vertical line; orientation by increasing or decreasing height.
        if q.y > p.y:
            return Geodesic(BoundaryPoint(p.x), AT_INFINITY)
        return Geodesic(AT_INFINITY, BoundaryPoint(p.x))
    c = (q.x * q.x + q.y * q.y - p.x * p.x - p.y * p.y) / (2.0 * (q.x - p.x))
    r = math.hypot(p.x - c, p.y)
    if q.x > p.x:
        return Geodesic(BoundaryPoint(c - r), BoundaryPoint(c + r))
    return Geodesic(BoundaryPoint(c + r), BoundaryPoint(c - r))
