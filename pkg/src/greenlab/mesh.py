"""Conforming triangulations of polygonal domains with grading toward a pole.

Meshing is delegated to Shewchuk's Triangle (``triangle`` package); grid
lines of piecewise-constant coefficients are inserted as constraint segments
so no triangle straddles a coefficient discontinuity.
"""
import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import triangle as tr
from scipy.spatial import cKDTree

from .errors import InvalidParameter, MeshFailure
from .quadrature import triangle_rule

MIN_ANGLE_DEG = 20.0
_MAGIC = b"GLMESH01"


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray = None
    normals: np.ndarray = None
    h_max: float = 0.0
    h_min: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=float)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        p = v[t]
        det = _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        if np.any(det < 0):
            t = t.copy()
            bad = det < 0
            t[bad] = t[bad][:, [0, 2, 1]]
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        diam = self.diameters
        object.__setattr__(self, "h_max", float(diam.max()))
        object.__setattr__(self, "h_min", float(diam.min()))
        if self.boundary_edges is None:
            be, nrm = _boundary(v, t)
            object.__setattr__(self, "boundary_edges", be)
            object.__setattr__(self, "normals", nrm)
        edges, tri_edges = _edges(t)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "tri_edges", tri_edges)

    # --- sizes -------------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def tri_xy(self):
        return self.vertices[self.triangles]

    @property
    def areas(self):
        p = self.tri_xy
        return 0.5 * _cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @property
    def area(self):
        return float(np.sum(self.areas))

    @property
    def diameters(self):
        p = self.vertices[self.triangles]
        e = np.stack([p[:, 1] - p[:, 2], p[:, 2] - p[:, 0], p[:, 0] - p[:, 1]], axis=1)
        return np.sqrt(np.sum(e * e, axis=2)).max(axis=1)

    @property
    def centroids(self):
        return self.tri_xy.mean(axis=1)

    def min_angles_deg(self):
        p = self.tri_xy
        out = np.full(len(p), 180.0)
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out = np.minimum(out, np.degrees(np.arccos(np.clip(c, -1, 1))))
        return out

    @property
    def p2_nodes(self):
        """Vertices followed by edge midpoints."""
        mid = 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])
        return np.vstack([self.vertices, mid])

    @property
    def p2_triangles(self):
        """Local ordering [v0, v1, v2, e(v1v2), e(v2v0), e(v0v1)]."""
        return np.hstack([self.triangles, self.n_vertices + self.tri_edges])

    # --- quadrature ----------------------------------------------------------------
    def quadrature(self, order=4):
        """Physical points (nt, nq, 2), weights (nt, nq) and barycentrics (nq, 3)."""
        bary, w = triangle_rule(order)
        pts = np.einsum("qk,tkd->tqd", bary, self.tri_xy)
        return pts, self.areas[:, None] * w[None, :], bary

    # --- point location -------------------------------------------------------------
    def _tree(self):
        cache = self.meta.setdefault("_cache", {})
        if "tree" not in cache:
            cache["tree"] = cKDTree(self.centroids)
        return cache["tree"]

    def barycentric(self, points, tri):
        p = self.tri_xy[tri]
        v0, v1, v2 = p[:, 0], p[:, 1], p[:, 2]
        det = _cross(v1 - v0, v2 - v0)
        l1 = _cross(points - v0, v2 - v0) / det
        l2 = _cross(v1 - v0, points - v0) / det
        return np.column_stack([1 - l1 - l2, l1, l2])

    def locate(self, points, k=12, tol=1e-10):
        """Containing triangle and barycentric coordinates for each point (-1 if outside)."""
        pts = np.atleast_2d(np.asarray(points, float))
        tree = self._tree()
        kk = min(k, self.n_triangles)
        _, cand = tree.query(pts, k=kk)
        cand = cand.reshape(len(pts), kk)
        best = np.full(len(pts), -np.inf)
        tri = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        for j in range(kk):
            b = self.barycentric(pts, cand[:, j])
            m = b.min(axis=1)
            upd = m > best
            best = np.where(upd, m, best)
            tri = np.where(upd, cand[:, j], tri)
            bary = np.where(upd[:, None], b, bary)
        tri = np.where(best >= -tol, tri, -1)
        miss = np.nonzero(tri < 0)[0]
        for i in miss:
            b = self.barycentric(np.repeat(pts[i:i + 1], self.n_triangles, 0), np.arange(self.n_triangles))
            j = int(np.argmax(b.min(axis=1)))
            if b[j].min() >= -tol:
                tri[i], bary[i] = j, b[j]
        return tri, bary

    def submesh(self, mask):
        """Mesh of the selected triangles with compacted vertex numbering."""
        t = self.triangles[np.asarray(mask)]
        used, inv = np.unique(t, return_inverse=True)
        return TriMesh(self.vertices[used], inv.reshape(t.shape))

    # --- dumps ----------------------------------------------------------------------
    def to_dict(self):
        return {"vertices": self.vertices.tolist(), "triangles": self.triangles.tolist(),
                "boundary_edges": self.boundary_edges.tolist(), "normals": self.normals.tolist(),
                "h_max": self.h_max, "h_min": self.h_min}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        return cls(np.array(d["vertices"]), np.array(d["triangles"]))

    def to_binary(self, path):
        """Layout: 8-byte magic, int64 n_vertices, int64 n_triangles,
        float64 vertices (row-major x, y), int64 triangle index triples."""
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<qq", self.n_vertices, self.n_triangles))
            fh.write(self.vertices.astype("<f8").tobytes())
            fh.write(self.triangles.astype("<i8").tobytes())

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            if fh.read(8) != _MAGIC:
                raise ValueError("not a greenlab mesh file")
            nv, nt = struct.unpack("<qq", fh.read(16))
            v = np.frombuffer(fh.read(16 * nv), dtype="<f8").reshape(nv, 2)
            t = np.frombuffer(fh.read(24 * nt), dtype="<i8").reshape(nt, 3)
        return cls(v.copy(), t.copy())


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _edges(t):
    loc = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)  # edge k opposite vertex k
    flat = np.sort(loc.reshape(-1, 2), axis=1)
    edges, inv = np.unique(flat, axis=0, return_inverse=True)
    return edges, inv.reshape(len(t), 3)


def _boundary(v, t):
    loc = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(loc, axis=1)
    _, inv, cnt = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    be = loc[cnt[inv.ravel()] == 1]
    d = v[be[:, 1]] - v[be[:, 0]]
    nrm = np.column_stack([d[:, 1], -d[:, 0]]) / np.linalg.norm(d, axis=1)[:, None]
    return be, nrm


# --- generation -------------------------------------------------------------------

def _pslg(domain, coefficients=None, extra_points=()):
    """Boundary polygon plus coefficient grid lines as constraint segments."""
    poly = domain.vertices
    n = len(poly)
    a, b = poly, np.roll(poly, -1, axis=0)
    xs, ys = (coefficients.grid_lines() if coefficients is not None and coefficients.grid is not None
              else (np.zeros(0), np.zeros(0)))
    # boundary crossing parameters per edge
    inserts = [[] for _ in range(n)]
    lines = [(0, c) for c in xs] + [(1, c) for c in ys]
    line_pts = []
    for axis, c in lines:
        eps = 1e-12 * max(1.0, domain.diameter_K)
        da = a[:, axis] - c
        db = b[:, axis] - c
        on_a = np.abs(da) <= eps
        on_b = np.abs(db) <= eps
        cross = np.nonzero(((da * db < 0) & ~on_b) | on_a)[0]
        hits = []
        for i in cross:
            if on_a[i]:
                p = a[i].copy()
            else:
                t = da[i] / (da[i] - db[i])
                p = a[i] + t * (b[i] - a[i])
                p[axis] = c
                inserts[i].append((t, p))
            hits.append(p[1 - axis])
        hits = np.unique(np.array(hits))
        other = ys if axis == 0 else xs
        knots = np.unique(np.concatenate([hits, other[(other > hits.min()) & (other < hits.max())]])) \
            if len(hits) else np.zeros(0)
        for s0, s1 in zip(knots[:-1], knots[1:]):
            mid = np.empty(2)
            mid[axis], mid[1 - axis] = c, 0.5 * (s0 + s1)
            if domain.contains(mid)[0]:
                p0, p1 = np.empty(2), np.empty(2)
                p0[axis], p0[1 - axis] = c, s0
                p1[axis], p1[1 - axis] = c, s1
                line_pts.append((p0, p1))
    verts = []
    for i in range(n):
        verts.append(a[i])
        verts.extend(p for _, p in sorted(inserts[i], key=lambda z: z[0]))
    m = len(verts)
    segs = [[i, (i + 1) % m] for i in range(m)]
    index = {(round(p[0], 13), round(p[1], 13)): i for i, p in enumerate(verts)}
    for p0, p1 in line_pts:
        ids = []
        for p in (p0, p1):
            key = (round(p[0], 13), round(p[1], 13))
            if key not in index:
                index[key] = len(verts)
                verts.append(p)
            ids.append(index[key])
        segs.append(ids)
    pts = np.array(verts)
    # duplicate input vertices crash triangle, so a pole on a grid node is skipped
    extra = [np.asarray(p, float) for p in extra_points if domain.contains(np.asarray(p, float))[0]
             and np.min(np.linalg.norm(pts - np.asarray(p, float), axis=1)) > 1e-12]
    if extra:
        pts = np.vstack([pts, np.array(extra)])
    return pts, np.array(segs, dtype=np.int64)


def triangulate(domain, h, grading=None, coefficients=None, min_angle=30.0, max_rounds=12) -> TriMesh:
    """Quality mesh with maximal element diameter about ``h``.

    ``grading = (pole, ratio)`` shrinks the target size to h/ratio at the pole
    and lets it grow linearly with slope 0.3 away from it.
    """
    if h <= 0:
        raise InvalidParameter("h must be positive")
    if domain.gamma is not None and domain.R0 is not None and h >= domain.R0 / 4:
        raise InvalidParameter(f"h={h} must be below R0/4={domain.R0 / 4} for a flatness-certified domain")
    pole, ratio = (None, 1.0) if grading is None else (np.asarray(grading[0], float), float(grading[1]))
    if not (1.0 <= ratio <= 10.0):
        raise InvalidParameter("grading ratio must lie in [1, 10]")
    extra = [pole] if pole is not None else []
    pts, segs = _pslg(domain, coefficients, extra)

    def size(x):
        if pole is None:
            return np.full(len(x), h)
        return np.clip(h / ratio + 0.3 * np.linalg.norm(x - pole, axis=1), h / ratio, h)

    base_area = 0.433 * (h / ratio if pole is not None else h) ** 2
    flags = f"pq{min_angle:g}a{0.433 * h * h:.17g}"
    out = tr.triangulate({"vertices": pts, "segments": segs}, flags)
    for _ in range(max_rounds):
        v, t = out["vertices"], out["triangles"]
        p = v[t]
        cen = p.mean(axis=1)
        e = np.stack([p[:, 1] - p[:, 2], p[:, 2] - p[:, 0], p[:, 0] - p[:, 1]], axis=1)
        diam = np.sqrt(np.sum(e * e, axis=2)).max(axis=1)
        # size at the point of the triangle closest to the pole
        target = size(cen) if pole is None else size(cen - 0.5 * diam[:, None] * _unit(cen - pole))
        area = 0.5 * np.abs(_cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]))
        bad = diam > target
        if not np.any(bad):
            break
        maxa = np.where(bad, np.maximum(area * (target / diam) ** 2 * 0.8, 0.25 * base_area), -1.0)
        out = tr.triangulate({"vertices": v, "triangles": t, "segments": out["segments"],
                              "triangle_max_area": maxa[:, None]}, f"rpq{min_angle:g}a")
    mesh = TriMesh(out["vertices"], out["triangles"],
                   meta={"h": h, "pole": None if pole is None else pole.tolist(), "ratio": ratio,
                         "domain": domain.name})
    ang = mesh.min_angles_deg()
    if ang.min() < MIN_ANGLE_DEG:
        j = int(np.argmin(ang))
        raise MeshFailure(f"minimum angle {ang[j]:.2f}° < {MIN_ANGLE_DEG}° at triangle {j} "
                          f"with vertices {mesh.tri_xy[j].tolist()}")
    return mesh


def _unit(v):
    n = np.linalg.norm(v, axis=1)
    return v / np.where(n > 0, n, 1.0)[:, None]
