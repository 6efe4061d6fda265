"""Chains of overlapping balls from a point x to a far point y0, avoiding a pole y.

Boundary case (dist(y, ∂Ω) < R0/8): an arc on ∂B_ρ(y) from x (or from the
shifted point x̄ when x is too close to the boundary plane) to w0, the escape
segment w0 → w1, then dyadic segments w_{i-1} → w_i built from two-scale
points at the nearest boundary point until the scale reaches [R0/2, R0).
Interior case: balls along the ray from y through x with geometrically
growing radii until distance R0/8.

Every ball has radius |z − y|/16 at its center z, and consecutive centers
are at most one radius apart, so consecutive balls overlap.
"""
from dataclasses import dataclass, field
from typing import List

import numpy as np

from ..errors import GeometryContractViolation, InvalidParameter, OutOfScale, TooClose
from .appendix import escape_segment, two_scale_points
from .flatness import associated_frame

# k / log(R0/ρ) peaks near ρ → R0/8 where log(R0/ρ) → log 8; targeted sampling
# there reached 40.7 with k ≤ 98, and 98 / log 8 < 48
CHAIN_CONSTANT = 48.0

MAX_PER_DYADIC = 32
TERMINAL_FRACTION = 1.0 / (8 * 17)
_WITNESS_T = (0.5, 0.25, 0.75, 0.1, 0.9, 0.01, 0.99, 0.001, 0.999)


@dataclass
class BallChain:
    pole: np.ndarray
    start: np.ndarray
    terminal: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    case: str
    R0: float
    pieces: List[dict] = field(default_factory=list)
    witnesses: np.ndarray = None

    @property
    def k(self):
        return len(self.radii)

    @property
    def rho(self):
        return float(np.linalg.norm(self.start - self.pole))

    @property
    def length_ratio(self):
        return self.k / np.log(self.R0 / self.rho)

    def to_dict(self, report=None):
        d = {"pole": self.pole.tolist(), "start": self.start.tolist(), "terminal": self.terminal.tolist(),
             "case": self.case, "k": self.k, "rho": self.rho, "R0": self.R0,
             "balls": [{"center": c.tolist(), "radius": float(r)} for c, r in zip(self.centers, self.radii)]}
        if report is not None:
            d["invariants"] = report
        return d


def _cover_segment(p, q, y):
    """Centers from p to q (both included) with step = local radius."""
    p, q = np.asarray(p, float), np.asarray(q, float)
    L = np.linalg.norm(q - p)
    out = [p]
    if L == 0:
        return out
    u = (q - p) / L
    s = 0.0
    while True:
        r = np.linalg.norm(p + s * u - y) / 16.0
        if L - s <= r:
            out.append(q)
            return out
        s += r
        out.append(p + s * u)


def _cover_arc(y, radius, phi0, phi1, axes):
    """Centers on the circle |z − y| = radius for angles phi0 → phi1 (in the frame axes)."""
    n = max(1, int(np.ceil(abs(phi1 - phi0) * 16.0)))
    phi = np.linspace(phi0, phi1, n + 1)
    loc = radius * np.column_stack([np.cos(phi), np.sin(phi)])
    return list(y + loc @ axes.T)


def _local_angle(p, y, axes):
    v = (np.asarray(p) - y) @ axes
    return float(np.arctan2(v[1], v[0]))


def _dyadic_counts(centers, base, unit):
    d = np.linalg.norm(np.asarray(centers) - base, axis=1) / unit
    k = np.floor(np.log2(np.maximum(d, 1.0))).astype(int)
    return np.bincount(k)


def chain_of_balls(domain, x, y, check=True) -> BallChain:
    """Chain of balls from x to a far point y0 with all centers ≥ 16 radii from y."""
    if domain.R0 is None:
        raise InvalidParameter("chain_of_balls needs a certified R0")
    x, y = np.asarray(x, float), np.asarray(y, float)
    R0 = domain.R0
    rho = float(np.linalg.norm(x - y))
    if rho >= R0 / 8:
        raise OutOfScale(f"chain_of_balls requires 0<ρ:=|x−y|<R_0/8; got ρ={rho:.6g}, R0/8={R0 / 8:.6g}")
    if rho < 1e-9 * domain.diameter_K:
        raise TooClose(f"ρ={rho:.3e} is below 1e-9·K; chains would be unbounded")
    if not np.all(domain.contains(np.array([x, y]))):
        raise InvalidParameter("x and y must be interior points of the domain")
    yt, dist, _ = domain.nearest_boundary_point(y)
    if dist > R0 / 8 * (1 + 1e-9):
        chain = _interior_chain(x, y, rho, R0)
    else:
        chain = _boundary_chain(domain, x, y, rho, yt, dist, R0)
    if check:
        rep = chain_invariants(domain, chain)
        if not rep["all"]:
            bad = [k for k, v in rep.items() if v is False]
            raise GeometryContractViolation(f"chain invariants failed: {bad}")
    return chain


def _interior_chain(x, y, rho, R0):
    u = (x - y) / rho
    # the last center sits just beyond R0/8 so that |y − y0| ≥ R0/8 survives rounding
    t_end = R0 / 8 * (1 + 1e-12)
    t, ts = rho, [rho]
    while t < t_end:
        t = min(17.0 * t / 16.0, t_end)
        ts.append(t)
    centers = y + np.outer(ts, u)
    radii = np.linalg.norm(centers - y, axis=1) / 16.0
    piece = {"kind": "ray", "start": 0, "stop": len(ts), "base": x.tolist(), "unit": rho}
    return BallChain(y, x, centers[-1].copy(), centers, radii, "interior", R0, [piece])


def _boundary_chain(domain, x, y, rho, yt, dist, R0):
    esc = escape_segment(domain, y, rho)
    w0, w1 = esc.z1, esc.z2
    scale = 2 * dist if esc.case == "a" else 4 * rho
    ws = [w1]
    while scale < R0 / 2:
        ts = two_scale_points(domain, yt, scale)
        if np.linalg.norm(ts.z1 - ws[-1]) > 1e-12 * scale:
            raise GeometryContractViolation("two-scale point does not continue the dyadic path")
        ws.append(ts.z2)
        scale *= 2
    centers, pieces = [], []

    def extend(pts, kind, **meta):
        start = len(centers)
        if centers and np.array_equal(pts[0], centers[-1]):
            pts = pts[1:]
        centers.extend(pts)
        pieces.append(dict(kind=kind, start=start, stop=len(centers), **meta))

    if esc.case == "a":
        # closed B_ρ(y) lies inside Ω: any arc works, take the shorter one
        axes = esc.frame.matrix
        a0, a1 = _local_angle(x, y, axes), _local_angle(w0, y, axes)
        a1 = a0 + (a1 - a0 + np.pi) % (2 * np.pi) - np.pi
        extend(_cover_arc(y, rho, a0, a1, axes), "arc")
    else:
        fr3 = associated_frame(domain, yt, 3 * rho)
        axes = fr3.matrix
        xl = fr3.to_local(x)
        g = domain.gamma
        if xl[0] > 3 * g * rho:
            extend(_cover_arc(y, rho, _local_angle(x, y, axes), _local_angle(w0, y, axes), axes), "arc")
        else:
            xbar = fr3.to_global([xl[0] + 6 * g * rho, xl[1]])
            rbar = float(np.linalg.norm(xbar - y))
            z0 = y + rbar * (w0 - y) / np.linalg.norm(w0 - y)
            centers.append(x)
            pieces.append(dict(kind="start", start=0, stop=1))
            extend(_cover_arc(y, rbar, _local_angle(xbar, y, axes), _local_angle(z0, y, axes), axes),
                   "arc_shifted", xbar=xbar.tolist())
            extend(_cover_segment(z0, w0, y), "radial")
    extend(_cover_segment(w0, w1, y), "escape", base=w0.tolist(), unit=rho)
    for i in range(1, len(ws)):
        extend(_cover_segment(ws[i - 1], ws[i], y), "dyadic", base=ws[i - 1].tolist(),
               unit=float(np.linalg.norm(ws[i] - ws[i - 1])))
    centers = np.array(centers)
    radii = np.linalg.norm(centers - y, axis=1) / 16.0
    return BallChain(y, x, centers[-1].copy(), centers, radii, "boundary-" + esc.case, R0, pieces)


def _witness(domain, z1, r1, z2, r2):
    """A point of Ω ∩ B_r1(z1) ∩ B_r2(z2), or None."""
    d = z2 - z1
    L = float(np.linalg.norm(d))
    if L >= r1 + r2:
        return None
    if L == 0:
        return z1 if domain.contains(z1)[0] else None
    lo, hi = max(0.0, 1.0 - r2 / L), min(1.0, r1 / L)
    ts = lo + (hi - lo) * np.array(_WITNESS_T)
    cand = z1 + ts[:, None] * d
    ok = ((np.linalg.norm(cand - z1, axis=1) < r1) & (np.linalg.norm(cand - z2, axis=1) < r2)
          & domain.contains(cand))
    if np.any(ok):
        return cand[np.argmax(ok)]
    # probe the lens off the center line
    nrm = np.array([-d[1], d[0]]) / L
    w = 0.5 * min(r1, r2)
    for s in (0.5, -0.5, 0.9, -0.9):
        c2 = cand + s * w * nrm
        ok = ((np.linalg.norm(c2 - z1, axis=1) < r1) & (np.linalg.norm(c2 - z2, axis=1) < r2)
              & domain.contains(c2))
        if np.any(ok):
            return c2[np.argmax(ok)]
    return None


def chain_invariants(domain, chain: BallChain, chain_constant=CHAIN_CONSTANT):
    """Exact check of the five chain invariants plus construction side conditions."""
    c, r, y = chain.centers, chain.radii, chain.pole
    R0 = chain.R0
    rep = {}
    rep["x_in_first"] = bool(np.linalg.norm(chain.start - c[0]) < r[0])
    rep["y0_in_last"] = bool(np.linalg.norm(chain.terminal - c[-1]) < r[-1])
    rep["separation"] = bool(np.all(np.linalg.norm(c - y, axis=1) >= 16.0 * r))
    rep["radius_le_R0"] = bool(np.all(r <= R0))
    rep["centers_in_domain"] = bool(np.all(domain.contains(c)))
    wit, ok = [], True
    for j in range(len(r) - 1):
        w = _witness(domain, c[j], r[j], c[j + 1], r[j + 1])
        if w is None:
            ok = False
            wit.append([np.nan, np.nan])
        else:
            wit.append(w)
    chain.witnesses = np.array(wit).reshape(-1, 2)
    rep["consecutive_overlap"] = ok
    rep["terminal_far"] = bool(np.linalg.norm(y - chain.terminal) >= R0 / 8)
    rep["length_bound"] = bool(chain.k <= chain_constant * np.log(R0 / chain.rho))
    rep["terminal_radius"] = bool(r[-1] >= TERMINAL_FRACTION * R0)
    per = True
    for p in chain.pieces:
        if p["kind"] in ("escape", "dyadic", "ray"):
            counts = _dyadic_counts(c[p["start"]:p["stop"]], np.array(p["base"]), p["unit"])
            per &= bool(counts.max(initial=0) <= MAX_PER_DYADIC)
    rep["per_dyadic_count"] = per
    rep["k"] = chain.k
    rep["ratio"] = float(chain.length_ratio)
    rep["all"] = all(v for v in rep.values() if isinstance(v, bool))
    return rep


def random_chain_queries(domain, n, seed=0, boundary_fraction=0.7, rho_range=(1e-3, 0.95)):
    """Random (x, y) pairs in scale-free coordinates (lengths in units of R0).

    A fraction of poles sits at log-uniform distance from a uniformly chosen
    boundary point; the rest are interior poles with B_{R0/8}(y) ⊂ Ω.  The
    separation ρ is log-uniform in [rho_range[0]·R0, rho_range[1]·R0/8].
    """
    rng = np.random.default_rng(seed)
    R0 = domain.R0
    a, b = domain.edges
    L = domain.edge_lengths
    cum = np.concatenate([[0.0], np.cumsum(L)])
    nrm = domain.inward_normals()
    lo, hi = np.log(rho_range[0] * R0), np.log(rho_range[1] * R0 / 8)
    out = []
    while len(out) < n:
        boundary = rng.uniform() < boundary_fraction
        if boundary:
            s = rng.uniform(0, cum[-1])
            i = min(int(np.searchsorted(cum, s, side="right")) - 1, len(L) - 1)
            p = a[i] + (s - cum[i]) / L[i] * (b[i] - a[i])
            dist = np.exp(rng.uniform(np.log(1e-3 * R0), np.log(0.12 * R0)))
            y = p + dist * nrm[i]
        else:
            lo_b, hi_b = domain.vertices.min(axis=0), domain.vertices.max(axis=0)
            y = rng.uniform(lo_b, hi_b)
        rho = np.exp(rng.uniform(lo, hi))
        phi = rng.uniform(0, 2 * np.pi)
        if boundary:
            phi += np.arctan2(nrm[i][1], nrm[i][0])
        x = y + rho * np.array([np.cos(phi), np.sin(phi)])
        if not np.all(domain.contains(np.array([x, y]))):
            continue
        dy = domain.boundary_distance(y)[0]
        if boundary and dy >= R0 / 8:
            continue
        if not boundary and dy < R0 / 8:
            continue
        out.append((x, y))
    return out
