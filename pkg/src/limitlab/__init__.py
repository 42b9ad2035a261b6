"""Fuchsian groups, limit sets and conical-limit-point experiments."""

from .errors import *  # noqa: F401,F403
from .hyperbolic import (  # noqa: F401
    BASEPOINT,
    IDENTITY,
    AT_INFINITY,
    BoundaryPoint,
    Geodesic,
    InteriorPoint,
    IsometryClass,
    Mobius,
    apply,
    axis_of,
    boundary_angle,
    classify_isometry,
    compose,
    geodesics_cross,
    hyperbolic_distance,
)
from .groups import (  # noqa: F401
    Ball,
    GroupElement,
    MarkedGroup,
    SubgroupSpec,
    build_genus2_group,
    build_schottky_group,
    enumerate_ball,
    is_member,
    reduce_word,
)

__version__ = "0.1.0"
