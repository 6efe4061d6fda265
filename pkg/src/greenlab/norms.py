"""Lebesgue, weak-Lebesgue and Hölder functionals on mesh regions, plus embedding-ratio diagnostics.

Fields are anything with a ``mesh`` attribute and a ``sample(tri, L, x)`` method
returning a dict with keys among "u" (n, d), "Du" (n, d, 2) and "p" (n,) or (n, m).
Regions are Ω, Ω_R(x) = Ω ∩ B_R(x) or Ω \\ closure(B_R(y)); integrals over
straddling triangles use exact polygon–disk clipping.
"""
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import FitError, InvalidParameter
from .geometry.clipping import clipped_triangle_rule, triangle_disk_relation
from .quadrature import triangle_rule


# --- regions and quadrature ---------------------------------------------------------

@dataclass(frozen=True)
class Region:
    kind: str                        # domain | ball | annulus
    center: Optional[tuple] = None
    radius: Optional[float] = None

    @staticmethod
    def domain():
        return Region("domain")

    @staticmethod
    def ball(center, radius):
        return Region("ball", tuple(map(float, center)), float(radius))

    @staticmethod
    def annulus(center, radius):
        """Ω minus the closed ball B_R(center)."""
        return Region("annulus", tuple(map(float, center)), float(radius))


@dataclass
class RegionRule:
    tri: np.ndarray
    L: np.ndarray
    x: np.ndarray
    w: np.ndarray          # may contain negative weights (annulus complements)

    @property
    def measure(self):
        return float(self.w.sum())

    def __len__(self):
        return len(self.w)


def _clipped_pieces(mesh, c, r, order):
    rel = triangle_disk_relation(mesh.tri_xy, c, r)
    tris, xs, ws = [], [], []
    for t in np.nonzero(rel == 1)[0]:
        xq, wq = clipped_triangle_rule(mesh.tri_xy[t], c, r, order)
        if len(wq):
            tris.append(np.full(len(wq), t))
            xs.append(xq)
            ws.append(wq)
    return rel, tris, xs, ws


def region_rule(mesh, region: Region, order=4) -> RegionRule:
    """Quadrature rule on a region; memoized on the mesh since suites revisit the same balls."""
    cache = mesh.meta.setdefault("_cache", {}).setdefault("regions", {})
    key = (region, order)
    if key not in cache:
        if len(cache) > 512:
            cache.clear()
        cache[key] = _region_rule(mesh, region, order)
    return cache[key]


def _region_rule(mesh, region, order):
    bary, w0 = triangle_rule(order)
    nq = len(w0)

    def whole(ts):
        tri = np.repeat(ts, nq)
        L = np.tile(bary, (len(ts), 1))
        x = np.einsum("nk,nkd->nd", L, mesh.tri_xy[tri])
        w = (mesh.areas[ts, None] * w0[None, :]).ravel()
        return tri, L, x, w

    if region.kind == "domain":
        return RegionRule(*whole(np.arange(mesh.n_triangles)))
    if region.radius is None or region.radius <= 0:
        raise InvalidParameter("region radius must be positive")
    c, r = np.asarray(region.center, float), region.radius
    rel, tris, xs, ws = _clipped_pieces(mesh, c, r, order)
    if region.kind == "ball":
        parts = [whole(np.nonzero(rel == 2)[0])]
        sign = 1.0
    elif region.kind == "annulus":
        parts = [whole(np.nonzero(rel != 2)[0])]
        sign = -1.0          # subtract T ∩ B from the whole straddling triangle
    else:
        raise InvalidParameter(f"unknown region kind {region.kind!r}")
    for t, xq, wq in zip(tris, xs, ws):
        L = mesh.barycentric(xq, t)
        parts.append((t, L, xq, sign * wq))
    tri = np.concatenate([p[0] for p in parts]).astype(int)
    L = np.vstack([p[1] for p in parts])
    x = np.vstack([p[2] for p in parts])
    w = np.concatenate([p[3] for p in parts])
    return RegionRule(tri, L, x, w)


# --- sampled quantities ---------------------------------------------------------

class ColumnStack:
    """Several fields on one mesh viewed as a single field (components concatenated)."""

    def __init__(self, fields):
        fields = [getattr(f, "field", f) for f in fields]
        self.fields = fields
        self.mesh = fields[0].mesh

    def sample(self, tri, L, x=None):
        parts = [f.sample(tri, L, x) for f in self.fields]
        out = {}
        for key in parts[0]:
            vals = [p[key] for p in parts]
            if vals[0].ndim == 1:
                out[key] = np.column_stack(vals)
            else:
                out[key] = np.concatenate(vals, axis=1)
        return out


class ClosedForm:
    """Closed-form u (x → (n,) or (n,d)), gradient (x → (n,2) or (n,d,2)) and optional p on a mesh."""

    def __init__(self, mesh, u, grad=None, p=None):
        self.mesh, self._u, self._g, self._p = mesh, u, grad, p

    def sample(self, tri, L, x=None):
        if x is None:
            x = np.einsum("nk,nkd->nd", L, self.mesh.tri_xy[tri])
        u = np.asarray(self._u(x), float)
        u = u[:, None] if u.ndim == 1 else u
        out = {"u": u}
        if self._g is not None:
            g = np.asarray(self._g(x), float)
            out["Du"] = g[:, None, :] if g.ndim == 2 else g
        if self._p is not None:
            out["p"] = np.asarray(self._p(x), float)
        return out


def magnitude(vals):
    v = np.asarray(vals)
    if v.ndim == 1:
        return np.abs(v)
    return np.sqrt(np.sum(v.reshape(len(v), -1) ** 2, axis=1))


def _values(fieldlike, rule, quantity):
    s = fieldlike.sample(rule.tri, rule.L, rule.x)
    if quantity not in s:
        raise InvalidParameter(f"field has no quantity {quantity!r}")
    return s[quantity]


# --- reports --------------------------------------------------------------------

@dataclass
class NormReport:
    kind: str
    value: float
    params: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


# --- norms ----------------------------------------------------------------------

def weak_l2_values(values, weights):
    """sup_t t·|{v > t}|^{1/2} for samples v with weights w, the sup restricted to sampled t."""
    v = np.asarray(values, float)
    w = np.asarray(weights, float)
    if len(v) == 0:
        raise InvalidParameter("empty region")
    order = np.argsort(-v, kind="stable")
    vs, ws = v[order], w[order]
    # measure of {v ≥ v_i}: group ties so every equal value sees the full tied block
    cum = np.cumsum(ws)
    last = np.searchsorted(-vs, -vs, side="right") - 1
    meas = np.maximum(cum[last], 0.0)
    return float(np.max(vs * np.sqrt(meas)))


def weak_l2(fieldlike, region=None, quantity="Du", order=4):
    region = region or Region.domain()
    rule = region_rule(fieldlike.mesh, region, order)
    if len(rule) == 0 or rule.measure <= 0:
        raise InvalidParameter("empty region")
    vals = magnitude(_values(fieldlike, rule, quantity))
    return NormReport("weak_l2", weak_l2_values(vals, rule.w),
                      {"quantity": quantity, "region": asdict(region)}, {"n_samples": len(rule)})


def lq_values(values, weights, q):
    s = float(np.sum(weights * np.abs(values) ** q))
    return max(s, 0.0) ** (1.0 / q)


def lq_norm(fieldlike, q, region=None, quantity="Du", order=4):
    if not q >= 1:
        raise InvalidParameter("q must be ≥ 1")
    region = region or Region.domain()
    rule = region_rule(fieldlike.mesh, region, order)
    if len(rule) == 0:
        raise InvalidParameter("empty region")
    vals = magnitude(_values(fieldlike, rule, quantity))
    return NormReport("lq_" + region.kind, lq_values(vals, rule.w, q),
                      {"q": q, "quantity": quantity, "region": asdict(region)},
                      {"n_samples": len(rule), "measure": rule.measure})


def region_points(domain, mesh, center, radius, n_points, seed=0, n_circle=64):
    """Nested deterministic point list in closure(Ω_r(x)): center, circle points, then random points."""
    c = np.asarray(center, float)
    th = 2 * np.pi * np.arange(n_circle) / n_circle
    circ = c + radius * np.column_stack([np.cos(th), np.sin(th)])
    rng = np.random.default_rng(seed)
    m = max(4 * n_points, 256)
    a = rng.uniform(0, 2 * np.pi, m)
    rr = radius * np.sqrt(rng.uniform(0, 1, m))
    rnd = c + np.column_stack([rr * np.cos(a), rr * np.sin(a)])
    cand = np.vstack([c[None], circ, rnd])
    keep = domain.in_closure(cand)
    pts = cand[keep]
    return pts[:n_points]


def holder_seminorm(fieldlike, mu, domain, center, radius, pair_budget=2000, quantity="u", seed=0):
    """max over sampled pairs of |u(z1) − u(z2)| / |z1 − z2|^μ in Ω_r(x): a lower bound on the seminorm.

    The pair set grows monotonically with the budget (nested point lists).
    """
    if not (0 < mu < 1):
        raise InvalidParameter("mu must lie in (0, 1)")
    n = int((1 + np.sqrt(1 + 8 * pair_budget)) // 2)
    pts = region_points(domain, fieldlike.mesh, center, radius, n, seed)
    if len(pts) < 2:
        raise InvalidParameter("region contains fewer than two evaluation points")
    tri, L = fieldlike.mesh.locate(pts)
    ok = tri >= 0
    pts, tri, L = pts[ok], tri[ok], L[ok]
    u = _values_at(fieldlike, tri, L, pts, quantity)
    u = u.reshape(len(pts), -1)
    i, j = np.triu_indices(len(pts), 1)
    d = np.linalg.norm(pts[i] - pts[j], axis=1)
    good = d > 0
    diff = np.linalg.norm(u[i] - u[j], axis=1)
    val = float(np.max(diff[good] / d[good] ** mu)) if np.any(good) else 0.0
    return NormReport("holder", val, {"mu": mu, "center": list(map(float, center)), "radius": radius},
                      {"n_points": int(len(pts)), "n_pairs": int(good.sum()), "lower_bound": True})


def _values_at(fieldlike, tri, L, x, quantity):
    return fieldlike.sample(tri, L, x)[quantity]


def log_slope_fit(values, distances, K, eps=None):
    """Least-squares fit values ≈ slope·log(K/r) + intercept; returns (slope, intercept, residual)."""
    v = np.asarray(values, float)
    r = np.asarray(distances, float)
    if len(v) != len(r):
        raise FitError("values and distances differ in length")
    radii = np.unique(np.round(r, 14))
    if len(radii) < 6:
        raise FitError(f"need ≥ 6 distinct probe radii, got {len(radii)}")
    if radii.max() / radii.min() < 4.0 * (1 - 1e-12):
        raise FitError("probe radii must span at least two dyadic octaves")
    if eps is not None and r.min() < 2 * eps * (1 - 1e-12):
        raise FitError("probe radii must be ≥ 2ε")
    X = np.column_stack([np.log(K / r), np.ones_like(r)])
    coef, *_ = np.linalg.lstsq(X, v, rcond=None)
    res = float(np.sqrt(np.mean((X @ coef - v) ** 2)))
    return float(coef[0]), float(coef[1]), res


# --- embedding and regularity ratios ---------------------------------------------------------

def sobolev_conjugate(q):
    return 2 * q / (2 - q)


def _parts(fieldlike, region, order=4):
    rule = region_rule(fieldlike.mesh, region, order)
    return rule, fieldlike.sample(rule.tri, rule.L, rule.x)


def _check_scale(domain, R):
    R0 = getattr(domain, "R0", None)
    if not (R > 0) or (R0 is not None and R > R0 * (1 + 1e-12)):
        raise InvalidParameter(f"R ∈ (0, R0] required; got R={R}, R0={R0}")


def _oscillation_lq(u, w, q):
    u = u.reshape(len(w), -1)
    mean = (w @ u) / w.sum()
    osc = lq_values(magnitude(u - mean), w, q)
    # an oscillation at rounding level of the field itself is a constant
    return 0.0 if osc <= 1e-13 * lq_values(magnitude(u), w, q) else osc


def inequality_ratio(kind, fieldlike, domain=None, x0=None, R=None, q=1.5, pair_budget=2000, seed=0):
    """LHS/RHS of an embedding or regularity inequality, evaluated on a field.

    kinds: sobolev_poincare_local   ‖u − (u)_{Ω_{R/8}}‖_{L_{q*}(Ω_{R/8}(x0))} / ‖Du‖_{L_q(Ω_R(x0))},  q ∈ (1,2)
           sobolev_poincare_global  ‖u − (u)_Ω‖_{L_{q*}(Ω)} / ‖Du‖_{L_q(Ω)},  q ∈ (1,2)
           morrey                   [u]_{C^{1−2/q}(Ω_{R/8}(x0))} / ‖Du‖_{L_q(Ω_R(x0))},  q > 2
           reverse_holder           (|Du|^q+|p|^q)^{1/q}_{B_{R/2}} / (|Du|²+|p|²)^{1/2}_{B_R}, q ≥ 2
                                    (averages over full balls, fields extended by zero)
    """
    if kind in ("sobolev_poincare_local", "sobolev_poincare_global"):
        if not (1 < q < 2):
            raise InvalidParameter("Sobolev–Poincaré ratios need q ∈ (1, 2)")
        qs = sobolev_conjugate(q)
        if kind == "sobolev_poincare_local":
            _check_scale(domain, R)
            r1, s1 = _parts(fieldlike, Region.ball(x0, R / 8))
            r2, s2 = _parts(fieldlike, Region.ball(x0, R))
        else:
            r1, s1 = _parts(fieldlike, Region.domain())
            r2, s2 = r1, s1
        lhs = _oscillation_lq(s1["u"], r1.w, qs)
        rhs = lq_values(magnitude(s2["Du"]), r2.w, q)
    elif kind == "morrey":
        if not q > 2:
            raise InvalidParameter("Morrey ratio needs q > 2")
        _check_scale(domain, R)
        lhs = holder_seminorm(fieldlike, 1 - 2 / q, domain, x0, R / 8, pair_budget, seed=seed).value
        r2, s2 = _parts(fieldlike, Region.ball(x0, R))
        rhs = lq_values(magnitude(s2["Du"]), r2.w, q)
    elif kind == "reverse_holder":
        if not q >= 2:
            raise InvalidParameter("reverse Hölder ratio needs q ≥ 2")
        _check_scale(domain, R)
        r1, s1 = _parts(fieldlike, Region.ball(x0, R / 2))
        r2, s2 = _parts(fieldlike, Region.ball(x0, R))

        def dens(s, qq):
            out = magnitude(s["Du"]) ** qq
            if "p" in s:
                out = out + magnitude(s["p"]) ** qq
            return out

        lhs = (np.sum(r1.w * dens(s1, q)) / (np.pi * (R / 2) ** 2)) ** (1 / q)
        rhs = np.sqrt(np.sum(r2.w * dens(s2, 2)) / (np.pi * R ** 2))
    else:
        raise InvalidParameter(f"unknown inequality kind {kind!r}")
    ratio = 0.0 if lhs == 0 else (float(lhs / rhs) if rhs > 0 else float("inf"))
    return NormReport("ratio", ratio, {"inequality": kind, "q": q, "R": R,
                                       "x0": None if x0 is None else list(map(float, x0))},
                      {"lhs": float(lhs), "rhs": float(rhs)})


def empirical_q0(ratios_by_mesh, q_grid, tol=0.10):
    """Largest q such that every q' ≤ q has a finite, refinement-stable ensemble max ratio.

    ``ratios_by_mesh[m][i]`` is the ensemble max of the reverse Hölder ratio on mesh m at q_grid[i].
    Returns (q0, per-q relative changes).  q0 = 2 when no q in the grid is stable.
    """
    R = np.asarray(ratios_by_mesh, float)
    with np.errstate(invalid="ignore", divide="ignore"):
        change = np.max(np.abs(np.diff(R, axis=0)) / np.abs(R[1:]), axis=0) if len(R) > 1 else np.zeros(len(q_grid))
    q0 = 2.0
    for q, c, col in zip(q_grid, change, R.T):
        if not (np.all(np.isfinite(col)) and c <= tol):
            break
        q0 = float(q)
    return q0, change.tolist()
