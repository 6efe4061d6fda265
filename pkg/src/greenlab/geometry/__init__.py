"""Polygonal domains, flatness certificates and constructive ball chains."""
from .appendix import EscapeSegment, TwoScale, appendix_tan_bound, escape_segment, two_scale_points
from .chain import (CHAIN_CONSTANT, BallChain, chain_invariants, chain_of_balls,
                    random_chain_queries)
from .clipping import clipped_triangle_rule, polygon_disk_area
from .domain import (GAMMA_MAX, PolygonalDomain, ellipse_polygon, half_plane_box, rectangle,
                     regular_polygon, stadium, unit_square)
from .flatness import (CoordinateFrame, FlatnessReport, LipschitzReport, associated_frame,
                       best_frame, certify_flatness, certify_lipschitz, max_flat_radius)


def clipped_area(domain, center, radius):
    """|Ω ∩ B_radius(center)| by exact clipping."""
    return domain.clipped_area(center, radius)


def flat_disk(n=512, radius=1.0):
    """Regular n-gon disk with a flatness certificate at γ = 1/96."""
    return regular_polygon(n, radius, gamma=GAMMA_MAX, R0=0.018 * radius, name=f"disk{n}-flat")


def flat_ellipse(n=768):
    return ellipse_polygon(1.5, 1.0, n, gamma=GAMMA_MAX, R0=0.0125, name=f"ellipse{n}-flat")


def flat_stadium(n_arc=256):
    return stadium(2.0, 1.0, n_arc, gamma=GAMMA_MAX, R0=0.018, name="stadium-flat")


def lipschitz_disk(n=512, radius=1.0):
    """Regular n-gon disk on the Lipschitz route (slope of one edge turn, R0 = 0.5)."""
    return regular_polygon(n, radius, lipschitz=1.0, R0=0.5, diameter_K=2.0 * radius, name=f"disk{n}")


def lipschitz_square():
    return unit_square(lipschitz=1.0, R0=0.5, diameter_K=2.0 ** 0.5, name="unit_square")


__all__ = [n for n in dir() if not n.startswith("_")]
