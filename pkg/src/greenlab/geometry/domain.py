"""Polygonal domains, basic predicates and shape generators."""
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import InvalidDomain, InvalidParameter
from .clipping import polygon_disk_area

GAMMA_MAX = 1.0 / 96.0


def _segments_cross(p1, p2, q1, q2):
    """Proper or touching intersection of segment pairs (broadcast)."""
    def orient(a, b, c):
        return np.sign((b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1])
                       - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0]))

    def on_seg(a, b, c):
        return ((np.minimum(a[..., 0], b[..., 0]) <= c[..., 0]) & (c[..., 0] <= np.maximum(a[..., 0], b[..., 0]))
                & (np.minimum(a[..., 1], b[..., 1]) <= c[..., 1]) & (c[..., 1] <= np.maximum(a[..., 1], b[..., 1])))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    hit = (o1 * o2 < 0) & (o3 * o4 < 0)
    hit |= (o1 == 0) & on_seg(p1, p2, q1)
    hit |= (o2 == 0) & on_seg(p1, p2, q2)
    hit |= (o3 == 0) & on_seg(q1, q2, p1)
    hit |= (o4 == 0) & on_seg(q1, q2, p2)
    return hit


@dataclass(frozen=True, eq=False)
class PolygonalDomain:
    """Bounded polygon with counterclockwise vertices and optional certificates.

    ``gamma``/``R0`` declare Reifenberg flatness; ``lipschitz``/``R0`` declare
    the Lipschitz route.  ``R0`` is the common scale of either certificate.
    """
    vertices: np.ndarray
    diameter_K: Optional[float] = None
    gamma: Optional[float] = None
    R0: Optional[float] = None
    lipschitz: Optional[float] = None
    name: str = "polygon"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidDomain("vertices must be an (n>=3, 2) array")
        if np.allclose(v[0], v[-1]) and len(v) > 3:
            v = v[:-1]
        area2 = np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1])
        if area2 == 0:
            raise InvalidDomain("degenerate polygon with zero area")
        if area2 < 0:
            v = v[::-1].copy()
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        _check_simple(v)
        diam = float(np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2)))
        if self.diameter_K is None:
            object.__setattr__(self, "diameter_K", diam)
        elif self.diameter_K < diam * (1 - 1e-12):
            raise InvalidDomain(f"diameter_K={self.diameter_K} is below the polygon diameter {diam}")
        if self.gamma is not None and not (0.0 <= self.gamma <= GAMMA_MAX):
            raise InvalidParameter(f"gamma must lie in [0, 1/96], got {self.gamma}")
        if self.R0 is not None and not (0.0 < self.R0 <= 1.0):
            raise InvalidParameter(f"R0 must lie in (0, 1], got {self.R0}")
        if (self.gamma is not None or self.lipschitz is not None) and self.R0 is None:
            raise InvalidParameter("a flatness or Lipschitz certificate needs R0")

    # --- basic measures ----------------------------------------------------
    @property
    def edges(self):
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def n_edges(self):
        return len(self.vertices)

    @property
    def area(self):
        v = self.vertices
        return 0.5 * float(np.sum(v[:, 0] * np.roll(v[:, 1], -1) - np.roll(v[:, 0], -1) * v[:, 1]))

    @property
    def centroid(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        cr = v[:, 0] * w[:, 1] - w[:, 0] * v[:, 1]
        return np.array([np.sum((v[:, 0] + w[:, 0]) * cr), np.sum((v[:, 1] + w[:, 1]) * cr)]) / (6 * self.area)

    @property
    def edge_lengths(self):
        a, b = self.edges
        return np.linalg.norm(b - a, axis=1)

    def inward_normals(self):
        a, b = self.edges
        t = (b - a) / self.edge_lengths[:, None]
        return np.column_stack([-t[:, 1], t[:, 0]])

    def with_certificate(self, gamma=None, R0=None, lipschitz=None, name=None):
        return PolygonalDomain(self.vertices, self.diameter_K, gamma, R0, lipschitz, name or self.name)

    # --- predicates ----------------------------------------------------------
    def contains(self, points):
        """Strict-interior test by crossing number (boundary points ambiguous)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a, b = self.edges
        inside = np.zeros(len(p), dtype=bool)
        for s in range(0, len(p), 4096):
            q = p[s:s + 4096]
            px, py = q[:, 0:1], q[:, 1:2]
            ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
            cond = (ay > py) != (by > py)
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = ax + (py - ay) * (bx - ax) / (by - ay)
            inside[s:s + 4096] = np.sum(cond & (px < xint), axis=1) % 2 == 1
        return inside

    def boundary_distance(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        a, b = self.edges
        d = b - a
        dd = np.sum(d * d, axis=1)
        out = np.empty(len(p))
        for s in range(0, len(p), 2048):
            q = p[s:s + 2048, None, :]
            t = np.clip(np.sum((q - a) * d, axis=2) / dd, 0.0, 1.0)
            proj = a + t[..., None] * d
            out[s:s + 2048] = np.sqrt(np.min(np.sum((q - proj) ** 2, axis=2), axis=1))
        return out

    def nearest_boundary_point(self, y):
        """Exact nearest point on ∂Ω; ties go to the smallest edge index."""
        y = np.asarray(y, dtype=float)
        a, b = self.edges
        d = b - a
        t = np.clip(np.sum((y - a) * d, axis=1) / np.sum(d * d, axis=1), 0.0, 1.0)
        proj = a + t[:, None] * d
        dist = np.linalg.norm(proj - y, axis=1)
        i = int(np.argmin(dist))
        return proj[i], float(dist[i]), i

    def in_closure(self, points, tol=1e-12):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        scale = max(self.diameter_K, 1.0)
        return self.contains(p) | (self.boundary_distance(p) <= tol * scale)

    def segment_in_closure(self, p, q, tol=1e-12):
        """Whether the closed segment pq lies in the closure of Ω.

        Endpoints must be in the closure and the open segment must not cross
        the boundary transversally; touching points are probed by midpoints.
        """
        p, q = np.asarray(p, float), np.asarray(q, float)
        if not np.all(self.in_closure(np.array([p, q]), tol)):
            return False
        a, b = self.edges
        hits = _segments_cross(p, q, a, b)
        if not np.any(hits):
            return True
        # split at crossing parameters and test every sub-midpoint
        d = q - p
        ts = [0.0, 1.0]
        for i in np.nonzero(hits)[0]:
            e = b[i] - a[i]
            den = d[0] * e[1] - d[1] * e[0]
            if den != 0:
                ts.append(((a[i][0] - p[0]) * e[1] - (a[i][1] - p[1]) * e[0]) / den)
            else:
                for v in (a[i], b[i]):
                    ts.append(np.dot(v - p, d) / np.dot(d, d))
        ts = np.unique(np.clip(ts, 0.0, 1.0))
        mids = p + 0.5 * (ts[1:] + ts[:-1])[:, None] * d
        return bool(np.all(self.in_closure(mids, tol)))

    def clipped_area(self, center, radius):
        """|Ω ∩ B_radius(center)| by exact polygon/disk clipping."""
        if radius <= 0:
            raise InvalidParameter("radius must be positive")
        return polygon_disk_area(self.vertices, center, radius)

    # --- IO -------------------------------------------------------------------
    def to_dict(self):
        return {"name": self.name, "vertices": self.vertices.tolist(), "diameter_K": self.diameter_K,
                "gamma": self.gamma, "R0": self.R0, "lipschitz": self.lipschitz}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["vertices"], float), d.get("diameter_K"), d.get("gamma"), d.get("R0"),
                   d.get("lipschitz"), d.get("name", "polygon"))

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _check_simple(v):
    n = len(v)
    a, b = v, np.roll(v, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    for s in range(0, len(i), 200000):
        ii, jj = i[s:s + 200000], j[s:s + 200000]
        bad = _segments_cross(a[ii], b[ii], a[jj], b[jj])
        if np.any(bad):
            k = np.nonzero(bad)[0][0]
            raise InvalidDomain(f"polygon is not simple: edges {ii[k]} and {jj[k]} intersect")


# --- generators -----------------------------------------------------------------

def regular_polygon(n, radius=1.0, center=(0.0, 0.0), **cert):
    t = 2 * np.pi * np.arange(n) / n
    v = np.column_stack([radius * np.cos(t), radius * np.sin(t)]) + np.asarray(center, float)
    return PolygonalDomain(v, name=cert.pop("name", f"{n}-gon"), **cert)


def rectangle(x0, y0, x1, y1, **cert):
    v = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], float)
    return PolygonalDomain(v, name=cert.pop("name", "rectangle"), **cert)


def unit_square(**cert):
    cert.setdefault("name", "unit_square")
    return rectangle(0.0, 0.0, 1.0, 1.0, **cert)


def ellipse_polygon(a, b, n, **cert):
    t = 2 * np.pi * np.arange(n) / n
    v = np.column_stack([a * np.cos(t), b * np.sin(t)])
    return PolygonalDomain(v, name=cert.pop("name", f"ellipse-{n}"), **cert)


def stadium(length, radius, n_arc, **cert):
    """Two half-disks of the given radius joined by straight sides of given length."""
    h = 0.5 * length
    t = np.linspace(-np.pi / 2, np.pi / 2, n_arc + 1)
    right = np.column_stack([h + radius * np.cos(t), radius * np.sin(t)])
    left = np.column_stack([-h - radius * np.cos(t), -radius * np.sin(t)])
    return PolygonalDomain(np.vstack([right, left]), name=cert.pop("name", "stadium"), **cert)


def half_plane_box(width=4.0, **cert):
    """{x¹ > 0} truncated to a box; the flat edge is x¹ = 0."""
    cert.setdefault("name", "half_plane_box")
    return rectangle(0.0, -0.5 * width, width, 0.5 * width, **cert)
