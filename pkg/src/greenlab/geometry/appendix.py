"""Two-scale points and escape segments built from associated frames."""
from dataclasses import dataclass

import numpy as np

from ..errors import GeometryContractViolation, InvalidParameter, OutOfScale
from .domain import GAMMA_MAX
from .flatness import CoordinateFrame, angle_between, associated_frame

_REL = 1e-12


def rounding_slack(scale, *pts):
    """Relative slack plus the absolute rounding floor of the coordinates."""
    mag = max([1.0] + [float(np.max(np.abs(p))) for p in pts])
    return _REL * scale + 1e-14 * mag


def appendix_tan_bound(gamma):
    """Closed-form bound on tan of the angle between frames at scales R and 2R."""
    if not (0.0 <= gamma <= GAMMA_MAX):
        raise InvalidParameter(f"gamma must lie in [0, 1/96], got {gamma}")
    s1 = np.sqrt(1.0 - gamma ** 2)
    s4 = np.sqrt(1.0 - 4.0 * gamma ** 2)
    return float(gamma * (2.0 * s1 + s4) / (s1 * s4 - 2.0 * gamma ** 2))


def two_scale_length_bound(gamma):
    """R⁻¹ max |z1 − z2| when the inter-frame angle saturates the tan bound."""
    s1 = np.sqrt(1.0 - gamma ** 2)
    s4 = np.sqrt(1.0 - 4.0 * gamma ** 2)
    return float(np.sqrt(5.0 + 8.0 * gamma ** 2 - 4.0 * s1 * s4))


@dataclass(frozen=True)
class TwoScale:
    z1: np.ndarray
    z2: np.ndarray
    frame_R: CoordinateFrame
    frame_2R: CoordinateFrame

    @property
    def segment(self):
        return self.z1, self.z2

    @property
    def ratio(self):
        return float(np.linalg.norm(self.z1 - self.z2) / self.frame_R.radius)

    @property
    def angle(self):
        return angle_between(self.frame_R, self.frame_2R)


def _segment_min_distance(p, q, c):
    d = q - p
    t = np.clip(np.dot(c - p, d) / np.dot(d, d), 0.0, 1.0)
    return float(np.linalg.norm(p + t * d - c))


def two_scale_points(domain, x0, R) -> TwoScale:
    """z1 = (R,0) in frame(x0,R) and z2 = (2R,0) in frame(x0,2R), with contract checks."""
    if domain.R0 is None or domain.gamma is None:
        raise InvalidParameter("two_scale_points needs a flatness-certified domain")
    if not (0 < R <= 0.5 * domain.R0 * (1 + _REL)):
        raise InvalidParameter(f"R must lie in (0, R0/2], got R={R}, R0={domain.R0}")
    x0 = np.asarray(x0, float)
    f1 = associated_frame(domain, x0, R)
    f2 = associated_frame(domain, x0, 2 * R)
    z1 = f1.to_global([R, 0.0])
    z2 = f2.to_global([2 * R, 0.0])
    length = np.linalg.norm(z1 - z2)
    tol = rounding_slack(R, x0)
    if not (R - tol <= length <= 1.001 * R + tol):
        raise GeometryContractViolation(f"|z1-z2|/R = {length / R:.9f} outside [1, 1.001]")
    if _segment_min_distance(z1, z2, x0) < R - tol:
        raise GeometryContractViolation("segment z1z2 meets B_R(x0)")
    if max(np.linalg.norm(z1 - x0), np.linalg.norm(z2 - x0)) > 2 * R + tol:
        raise GeometryContractViolation("segment z1z2 leaves B_2R(x0)")
    if not domain.segment_in_closure(z1, z2):
        raise GeometryContractViolation("segment z1z2 leaves the closure of the domain")
    return TwoScale(z1, z2, f1, f2)


@dataclass(frozen=True)
class EscapeSegment:
    z1: np.ndarray
    z2: np.ndarray
    case: str
    y_tilde: np.ndarray
    dist: float
    frame: CoordinateFrame

    @property
    def length(self):
        return float(np.linalg.norm(self.z1 - self.z2))


def escape_segment(domain, y, rho) -> EscapeSegment:
    """Segment from ∂B_ρ(y) to a far point at the next boundary scale.

    With ỹ the nearest boundary point and d = |y − ỹ|: case 'a' (ρ < d) uses
    the frame at (ỹ, 2d) and ends at (2d, 0); case 'b' (d ≤ ρ) uses the frame
    at (ỹ, 4ρ) and ends at (4ρ, 0).  In both cases z1 = y + ρ·e₁.
    """
    if domain.R0 is None or domain.gamma is None:
        raise InvalidParameter("escape_segment needs a flatness-certified domain")
    y = np.asarray(y, float)
    R0 = domain.R0
    if rho <= 0:
        raise InvalidParameter("rho must be positive")
    if rho >= R0 / 4:
        raise OutOfScale(f"escape segments need rho < R0/4 = {R0 / 4:.6g}, got {rho:.6g}")
    yt, d, _ = domain.nearest_boundary_point(y)
    if d <= 0 or not domain.contains(y)[0]:
        raise InvalidParameter("y must be an interior point")
    if rho < d:
        if d >= R0 / 4:
            raise OutOfScale(f"case a needs dist(y, ∂Ω) < R0/4; got {d:.6g}")
        case, scale = "a", 2 * d
        lo, hi = d - rho, np.sqrt(5.0) * d
    else:
        case, scale = "b", 4 * rho
        lo, hi = 2 * rho, np.sqrt(17.0) * rho
    fr = associated_frame(domain, yt, scale)
    z1 = y + rho * fr.axis
    z2 = fr.to_global([scale, 0.0])
    L = np.linalg.norm(z1 - z2)
    tol = rounding_slack(scale, y)
    if not (lo - tol <= L <= hi + tol):
        raise GeometryContractViolation(f"case {case}: |z1-z2| = {L:.6g} outside [{lo:.6g}, {hi:.6g}]")
    if _segment_min_distance(z1, z2, y) < rho - tol:
        raise GeometryContractViolation("escape segment enters B_rho(y)")
    if not domain.segment_in_closure(z1, z2):
        raise GeometryContractViolation("escape segment leaves the closure of the domain")
    if max(np.linalg.norm(z1 - yt), np.linalg.norm(z2 - yt)) > scale + tol:
        raise GeometryContractViolation("escape segment leaves the frame ball")
    return EscapeSegment(z1, z2, case, yt, float(d), fr)
