"""Half-plane sandwich certification and associated coordinate frames.

For a boundary point x0, a radius R and a unit direction n (the frame's first
axis), the deviation of the frame is the smallest g with

    {x¹ > gR} ∩ B_R(x0) ⊂ Ω   and   {x¹ < -gR} ∩ B_R(x0) ⊂ ℝ² \\ Ω.

Both suprema are attained on ∂(B_R ∩ Ω) or ∂(B_R \\ Ω), i.e. at boundary
vertices inside the disk, edge/circle intersection points, or on a circle
arc lying inside (resp. outside) Ω.  Evaluating those finitely many
candidates gives the deviation exactly for every n.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..errors import FlatnessViolation, InvalidDomain, InvalidParameter
from .domain import GAMMA_MAX, PolygonalDomain

TWO_PI = 2.0 * np.pi
_GOLDEN = 0.5 * (np.sqrt(5.0) - 1.0)
_SLACK = 1e-12


@dataclass(frozen=True)
class CoordinateFrame:
    """Rotated frame at ``origin``; ``rotation_angle`` is the angle of the first axis."""
    origin: np.ndarray
    rotation_angle: float
    radius: float = float("nan")
    deviation: float = float("nan")

    @property
    def axis(self):
        return np.array([np.cos(self.rotation_angle), np.sin(self.rotation_angle)])

    @property
    def normal(self):
        a = self.axis
        return np.array([-a[1], a[0]])

    @property
    def matrix(self):
        """Columns are the frame axes; det = +1."""
        return np.column_stack([self.axis, self.normal])

    def to_local(self, p):
        return (np.asarray(p, float) - self.origin) @ self.matrix

    def to_global(self, q):
        return self.origin + np.asarray(q, float) @ self.matrix.T


def angle_between(f1, f2):
    d = (f1.rotation_angle - f2.rotation_angle + np.pi) % TWO_PI - np.pi
    return abs(d)


class _LocalBoundary:
    """Candidate points and circle arcs of ∂Ω near (x0, R)."""

    def __init__(self, domain, x0, R):
        self.x0 = np.asarray(x0, float)
        self.R = float(R)
        a, b = domain.edges
        rel = a - self.x0
        d = b - a
        vin = np.sum(rel * rel, axis=1) <= R * R
        pts = [rel[vin], np.zeros((1, 2))]
        qa = np.sum(d * d, axis=1)
        qb = 2.0 * np.sum(rel * d, axis=1)
        qc = np.sum(rel * rel, axis=1) - R * R
        disc = qb * qb - 4 * qa * qc
        hit = disc > 0
        angles = []
        if np.any(hit):
            root = np.sqrt(disc[hit])
            for sgn in (-1.0, 1.0):
                t = (-qb[hit] + sgn * root) / (2 * qa[hit])
                ok = (t >= 0) & (t <= 1)
                p = rel[hit][ok] + t[ok, None] * d[hit][ok]
                pts.append(p)
                angles.append(np.arctan2(p[:, 1], p[:, 0]))
        self.points = np.vstack(pts)
        ang = np.sort(np.concatenate(angles)) if angles else np.zeros(0)
        # arcs between consecutive crossing angles, classified by midpoints
        if len(ang) == 0:
            starts, ends = np.array([0.0]), np.array([TWO_PI])
        else:
            starts = ang
            ends = np.append(ang[1:], ang[0] + TWO_PI)
        keep = ends - starts > 1e-14
        starts, ends = starts[keep], ends[keep]
        mids = 0.5 * (starts + ends)
        probe = self.x0 + R * np.column_stack([np.cos(mids), np.sin(mids)])
        inside = domain.contains(probe)
        self.arcs_in = [(s, e) for s, e, f in zip(starts, ends, inside) if f]
        self.arcs_out = [(s, e) for s, e, f in zip(starts, ends, inside) if not f]
        # edge directions near x0 provide exact candidates for flat pieces
        near = _edge_distance(a, b, self.x0) < R
        self.edge_normal_angles = np.arctan2(d[near, 0], -d[near, 1])  # inward normal of ccw edge

    def deviation(self, theta):
        theta = np.atleast_1d(np.asarray(theta, float))
        n = np.stack([np.cos(theta), np.sin(theta)])
        proj = self.points @ n / self.R
        ext = proj.max(axis=0)
        inn = (-proj).max(axis=0)
        if self.arcs_out:
            ext = np.where(_in_arcs(theta, self.arcs_out), 1.0, ext)
        if self.arcs_in:
            inn = np.where(_in_arcs(theta + np.pi, self.arcs_in), 1.0, inn)
        return np.maximum(np.maximum(ext, inn), 0.0)


def _edge_distance(a, b, p):
    d = b - a
    t = np.clip(np.sum((p - a) * d, axis=1) / np.sum(d * d, axis=1), 0.0, 1.0)
    return np.linalg.norm(a + t[:, None] * d - p, axis=1)


def _in_arcs(theta, arcs):
    out = np.zeros(theta.shape, dtype=bool)
    for s, e in arcs:
        rel = (theta - s) % TWO_PI
        out |= rel <= (e - s)
    return out


def inward_normal_angle(domain, x0, tol=1e-10):
    """Angle of the inward normal at a boundary point (bisector at vertices)."""
    a, b = domain.edges
    dist = _edge_distance(a, b, np.asarray(x0, float))
    scale = max(domain.diameter_K, 1.0)
    on = np.nonzero(dist <= tol * scale)[0]
    if len(on) == 0:
        raise InvalidParameter(f"x0={tuple(np.asarray(x0))} is not on the boundary (distance {dist.min():.3e})")
    nrm = domain.inward_normals()[on].sum(axis=0)
    return float(np.arctan2(nrm[1], nrm[0]))


def _wrap(t):
    return (t + np.pi) % TWO_PI - np.pi


def best_frame(domain, x0, R, n_scan=720, tol=1e-9):
    """Deviation-minimizing frame at (x0, R) via scan + golden-section search."""
    loc = _LocalBoundary(domain, x0, R)
    theta_n = inward_normal_angle(domain, x0)
    grid = TWO_PI * np.arange(n_scan) / n_scan
    cand = np.concatenate([grid, [theta_n], loc.edge_normal_angles])
    dev = loc.deviation(cand)
    best = dev.min()
    # golden-section refinement around the scanned grid minimum
    i = int(np.argmin(dev[:n_scan]))
    lo, hi = grid[i] - TWO_PI / n_scan, grid[i] + TWO_PI / n_scan
    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = loc.deviation(c)[0], loc.deviation(d)[0]
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - _GOLDEN * (hi - lo)
            fc = loc.deviation(c)[0]
        else:
            lo, c, fc = c, d, fd
            d = lo + _GOLDEN * (hi - lo)
            fd = loc.deviation(d)[0]
    tg = 0.5 * (lo + hi)
    cand = np.append(cand, tg)
    dev = np.append(dev, loc.deviation(tg)[0])
    best = dev.min()
    ties = np.nonzero(dev <= best + 1e-15)[0]
    # tie-break: smallest rotation relative to the inward normal
    j = ties[np.argmin(np.abs(_wrap(cand[ties] - theta_n)))]
    theta = float(_wrap(cand[j]))
    return CoordinateFrame(np.asarray(x0, float), theta, float(R), float(dev[j]))


def associated_frame(domain: PolygonalDomain, x0, R, gamma=None) -> CoordinateFrame:
    """Frame at (x0, R) satisfying the γ-sandwich with minimal deviation."""
    gamma = domain.gamma if gamma is None else gamma
    if gamma is None:
        raise InvalidParameter("domain carries no flatness certificate and no gamma was given")
    if R <= 0:
        raise InvalidParameter("R must be positive")
    if domain.R0 is not None and R > domain.R0 * (1 + 1e-12):
        raise InvalidParameter(f"R={R} exceeds R0={domain.R0}; frames exist only for R ∈ (0, R0]")
    fr = best_frame(domain, x0, R)
    if fr.deviation > gamma + _SLACK:
        raise FlatnessViolation(
            f"no {gamma:.6g}-flat frame at x0={tuple(np.round(x0, 12))}, R={R:.6g}: best deviation {fr.deviation:.6g}")
    return fr


def sandwich_holds(domain, frame, gamma, R, n_check=2000, seed=0):
    """Independent check of both inclusions by exact polygon tests on sample points.

    Points of B_R(x0) with x¹ > γR must lie in Ω (interior or boundary) and
    points with x¹ < -γR outside Ω (or on its boundary).
    """
    rng = np.random.default_rng(seed)
    r = R * np.sqrt(rng.uniform(0, 1, n_check))
    t = rng.uniform(0, TWO_PI, n_check)
    loc = np.column_stack([r * np.cos(t), r * np.sin(t)])
    pts = frame.to_global(loc)
    ins = domain.contains(pts)
    onb = domain.boundary_distance(pts) <= 1e-12 * max(domain.diameter_K, 1)
    upper = loc[:, 0] > gamma * R
    lower = loc[:, 0] < -gamma * R
    return bool(np.all(ins[upper] | onb[upper]) and np.all(~ins[lower] | onb[lower]))


@dataclass
class FlatnessReport:
    passed: bool
    gamma: float
    R0: float
    n_samples: int
    worst_x0: Tuple[float, float]
    worst_R: float
    worst_ratio: float
    violations: List[dict] = field(default_factory=list)
    route: str = "reifenberg"

    def to_dict(self):
        return {"route": self.route, "passed": self.passed, "gamma": self.gamma, "R0": self.R0,
                "n_samples": self.n_samples, "worst_x0": list(self.worst_x0), "worst_R": self.worst_R,
                "worst_ratio": self.worst_ratio, "n_violations": len(self.violations),
                "violations": self.violations[:50]}


def dyadic_scales(domain, R0, depth=None):
    if depth is None:
        emin = float(domain.edge_lengths.min())
        depth = int(np.clip(np.ceil(np.log2(R0 / (0.25 * emin))), 1, 10))
    return R0 * 2.0 ** -np.arange(depth + 1)


def boundary_samples(domain, sample_density):
    a, b = domain.edges
    t = np.arange(sample_density) / sample_density
    return (a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]).reshape(-1, 2)


def _validate(domain, gamma, R0, sample_density):
    if not isinstance(domain, PolygonalDomain):
        raise InvalidDomain("expected a PolygonalDomain")
    if not (0.0 <= gamma <= GAMMA_MAX):
        raise InvalidParameter(f"gamma must lie in [0, 1/96], got {gamma}")
    if not (0.0 < R0 <= 1.0):
        raise InvalidParameter(f"R0 must lie in (0, 1], got {R0}")
    if sample_density < 8:
        raise InvalidParameter("sample_density must be at least 8 points per edge per scale")


def certify_flatness(domain, gamma, R0, sample_density=8, depth=None) -> FlatnessReport:
    """Check the γ-sandwich at sampled boundary points and dyadic scales ≤ R0."""
    _validate(domain, gamma, R0, sample_density)
    pts = boundary_samples(domain, sample_density)
    scales = dyadic_scales(domain, R0, depth)
    n_scan = 360
    worst = (-1.0, None, None)
    violations = []
    for R in scales:
        for x0 in pts:
            loc = _LocalBoundary(domain, x0, R)
            cand = np.concatenate([TWO_PI * np.arange(n_scan) / n_scan, loc.edge_normal_angles])
            dev = loc.deviation(cand).min()
            if dev > gamma + _SLACK or dev > worst[0]:
                dev = min(dev, best_frame(domain, x0, R).deviation)
            if dev > gamma + _SLACK:
                violations.append({"x0": [float(x0[0]), float(x0[1])], "R": float(R), "ratio": float(dev)})
            if dev > worst[0]:
                worst = (dev, x0, R)
    return FlatnessReport(not violations, float(gamma), float(R0), len(pts) * len(scales),
                          (float(worst[1][0]), float(worst[1][1])), float(worst[2]), float(worst[0]), violations)


def max_flat_radius(domain, gamma, x0, R_hi, R_lo=1e-6, iters=40):
    """Largest R ≤ R_hi (bisection on log R) with a γ-flat frame at x0."""
    if best_frame(domain, x0, R_hi).deviation <= gamma + _SLACK:
        return R_hi
    lo, hi = np.log(R_lo), np.log(R_hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if best_frame(domain, x0, np.exp(mid)).deviation <= gamma + _SLACK:
            lo = mid
        else:
            hi = mid
    return float(np.exp(lo))


# --- Lipschitz route ----------------------------------------------------------

@dataclass
class LipschitzReport:
    passed: bool
    declared: float
    R0: float
    measured: float
    worst_x0: Tuple[float, float]
    worst_R: float
    n_samples: int
    route: str = "lipschitz"

    def to_dict(self):
        return {"route": self.route, "passed": self.passed, "declared": self.declared, "R0": self.R0,
                "measured": self.measured, "worst_x0": list(self.worst_x0), "worst_R": self.worst_R,
                "n_samples": self.n_samples}


def local_slope(domain, x0, R):
    """Maximal boundary slope over B_R(x0) in the best local frame.

    The boundary edges meeting the open disk must form one contiguous chain;
    with unwrapped edge angles spanning ``s < π`` the best graph axis is the
    mid-direction and the slope is ``tan(s/2)``.
    """
    a, b = domain.edges
    n = len(a)
    near = np.nonzero(_edge_distance(a, b, np.asarray(x0, float)) < R)[0]
    if len(near) == 0:
        raise InvalidParameter("x0 is not within R of the boundary")
    if len(near) == n:
        return np.inf
    # order the contiguous run cyclically
    mask = np.zeros(n, dtype=bool)
    mask[near] = True
    start = next(i for i in near if not mask[(i - 1) % n])
    run = []
    i = start
    while mask[i]:
        run.append(i)
        i = (i + 1) % n
    if len(run) != len(near):
        return np.inf
    d = b[run] - a[run]
    ang = np.unwrap(np.arctan2(d[:, 1], d[:, 0]))
    spread = float(ang.max() - ang.min())
    if spread >= np.pi:
        return np.inf
    return float(np.tan(0.5 * spread))


def certify_lipschitz(domain, lipschitz, R0, sample_density=8, depth=None) -> LipschitzReport:
    if not (0.0 < R0 <= 1.0):
        raise InvalidParameter(f"R0 must lie in (0, 1], got {R0}")
    if lipschitz <= 0:
        raise InvalidParameter("Lipschitz constant must be positive")
    pts = boundary_samples(domain, sample_density)
    scales = dyadic_scales(domain, R0, depth)
    worst = (-1.0, pts[0], R0)
    for R in scales:
        for x0 in pts:
            s = local_slope(domain, x0, R)
            if s > worst[0]:
                worst = (s, x0, R)
    ok = worst[0] <= lipschitz * (1 + 1e-12)
    return LipschitzReport(bool(ok), float(lipschitz), float(R0), float(worst[0]),
                           (float(worst[1][0]), float(worst[1][1])), float(worst[2]), len(pts) * len(scales))
