"""Exact polygon/disk clipping and quadrature on clipped triangles.

Areas use the per-edge decomposition of the polygon into signed triangles
``(c, P, Q)``; each triangle-disk intersection is a sector, a triangle and a
sector.  Integrals over ``T ∩ B_r(c)`` split the region into its convex
chord polygon (fan + triangle rule) and circular segments, where a segment of
central angle ``Δ`` is parameterized by ``s = r cos φ``, ``w = τ r sin φ`` with
Jacobian ``r² sin² φ``.
"""
import numpy as np

from ..quadrature import gauss_legendre, triangle_rule


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _dot(u, v):
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1]


def _sector(u, v, r):
    return 0.5 * r * r * np.arctan2(_cross(u, v), _dot(u, v))


def signed_polygon_disk_area(vertices, center, radius):
    """Signed area of polygon ∩ disk (positive for counterclockwise input)."""
    p = np.asarray(vertices, dtype=float) - np.asarray(center, dtype=float)
    q = np.roll(p, -1, axis=0)
    d = q - p
    a = _dot(d, d)
    b = 2.0 * _dot(p, d)
    c = _dot(p, p) - radius * radius
    disc = b * b - 4.0 * a * c
    safe = np.where(a > 0, a, 1.0)
    root = np.sqrt(np.maximum(disc, 0.0))
    t1 = (-b - root) / (2.0 * safe)
    t2 = (-b + root) / (2.0 * safe)
    hit = (disc > 0) & (a > 0)
    s1 = np.where(hit, np.clip(t1, 0.0, 1.0), 0.0)
    s2 = np.where(hit, np.clip(t2, 0.0, 1.0), 0.0)
    a1 = p + s1[:, None] * d
    # anchored at q so that s2 = 1 reproduces q exactly (a vertex near the center
    # otherwise turns into a rounding-sized vector of arbitrary direction)
    a2 = q - (1.0 - s2)[:, None] * d
    area = _sector(p, a1, radius) + 0.5 * _cross(a1, a2) + _sector(a2, q, radius)
    return float(np.sum(area))


def polygon_disk_area(vertices, center, radius):
    return abs(signed_polygon_disk_area(vertices, center, radius))


def point_segment_distance(points, a, b):
    """Distances from points ``(n, 2)`` to segments ``a -> b`` (broadcast)."""
    d = b - a
    dd = _dot(d, d)
    t = _dot(points - a, d) / np.where(dd > 0, dd, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * d
    return np.linalg.norm(points - proj, axis=-1)


def triangle_disk_relation(tri_xy, center, radius):
    """Classify triangles against a disk.

    ``tri_xy`` has shape ``(m, 3, 2)``.  Returns an int array with
    0 = disjoint, 1 = straddling, 2 = triangle inside the disk.
    """
    c = np.asarray(center, dtype=float)
    rel = tri_xy - c
    vd = np.sqrt(np.sum(rel * rel, axis=2))
    inside = np.all(vd <= radius, axis=1)
    a = tri_xy
    b = np.roll(tri_xy, -1, axis=1)
    d = b - a
    dd = np.sum(d * d, axis=2)
    t = np.sum((c - a) * d, axis=2) / np.where(dd > 0, dd, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * d
    ed = np.sqrt(np.sum((c - proj) ** 2, axis=2)).min(axis=1)
    # center inside triangle means distance zero
    cr = _cross(d, c - a)
    cin = np.all(cr >= 0, axis=1) | np.all(cr <= 0, axis=1)
    dist = np.where(cin, 0.0, ed)
    out = np.ones(len(tri_xy), dtype=int)
    out[dist >= radius] = 0
    out[inside] = 2
    return out


def triangle_disk_area(tri, center, radius):
    t = np.asarray(tri, dtype=float)
    if _cross(t[1] - t[0], t[2] - t[0]) < 0:
        t = t[::-1]
    return signed_polygon_disk_area(t, center, radius)


def _boundary_walk(tri, c, r):
    """Ordered boundary points of T ∩ B with 'exit' flags (boundary leaves the disk there).

    Vertices within a relative 1e-12 of the circle count as on it: they are
    kept as boundary points and flagged as exits when the next edge points
    outward.  Edge crossings are taken strictly inside the edge.
    """
    tol = 1e-12 * r
    on = [abs(np.hypot(*(v - c)) - r) <= tol for v in tri]
    pts, exits = [], []
    for i in range(3):
        j = (i + 1) % 3
        p, q = tri[i], tri[j]
        d = q - p
        if np.hypot(*(p - c)) <= r or on[i]:
            pts.append(p)
            exits.append(bool(on[i] and np.dot(d, p - c) > 0))
        a = np.dot(d, d)
        if a <= 0:
            continue
        b = 2.0 * np.dot(p - c, d)
        # an endpoint on the circle is a known root; the other follows from the root sum −b/a
        if on[i] and on[j]:
            roots = []
        elif on[i]:
            roots = [(-b / a, True)]
        elif on[j]:
            roots = [(-b / a - 1.0, False)]
        else:
            cc = np.dot(p - c, p - c) - r * r
            disc = b * b - 4 * a * cc
            if disc <= 0:
                continue
            root = np.sqrt(disc)
            roots = [((-b - root) / (2 * a), False), ((-b + root) / (2 * a), True)]
        L = np.sqrt(a)
        for t, leaving in roots:
            if t * L > tol and (1.0 - t) * L > tol:
                pts.append(p + t * d)
                exits.append(leaving)
    # merge coincident points; an exit flag survives the merge
    i = 0
    while len(pts) > 1 and i < len(pts):
        j = (i + 1) % len(pts)
        if np.hypot(*(pts[i] - pts[j])) <= tol:
            exits[i] = exits[i] or exits[j]
            del pts[j], exits[j]
            if j < i:
                i -= 1
        else:
            i += 1
    return pts, exits


def clipped_triangle_rule(tri, center, radius, order=4, n_phi=12, n_tau=4):
    """Quadrature points and positive weights on ``T ∩ B_radius(center)``.

    The rule integrates polynomials of degree ``order`` exactly on the chord
    polygon and is spectrally accurate on the circular segments.
    """
    tri = np.asarray(tri, dtype=float)
    c = np.asarray(center, dtype=float)
    r = float(radius)
    if _cross(tri[1] - tri[0], tri[2] - tri[0]) < 0:
        tri = tri[::-1]
    bary, bw = triangle_rule(order)
    pts, exits = _boundary_walk(tri, c, r)
    out_x, out_w = [], []
    if len(pts) <= 1:
        # disjoint, touching at one point, or the whole disk sits inside T
        rel = _cross(np.roll(tri, -1, axis=0) - tri, c - tri)
        dmin = min(point_segment_distance(c[None, :], tri[i], tri[(i + 1) % 3])[0] for i in range(3))
        if np.all(rel >= 0) and dmin >= r * (1 - 1e-12):
            x, w = _segment_rule(c, r, np.array([1.0, 0.0]), 2 * np.pi, n_phi, n_tau)
            return x, w
        return np.zeros((0, 2)), np.zeros(0)
    pts = np.array(pts)
    # chord polygon by fan
    for i in range(1, len(pts) - 1):
        v0, v1, v2 = pts[0], pts[i], pts[i + 1]
        area = 0.5 * _cross(v1 - v0, v2 - v0)
        if area <= 0:
            continue
        out_x.append(bary[:, :1] * v0 + bary[:, 1:2] * v1 + bary[:, 2:3] * v2)
        out_w.append(area * bw)
    n = len(pts)
    for i in range(n):
        if not exits[i]:
            continue
        a, b = pts[i] - c, pts[(i + 1) % n] - c
        delta = np.arctan2(_cross(a, b), _dot(a, b))
        if delta <= 0:
            delta += 2 * np.pi
        if n == 1 or delta <= 1e-15:
            continue
        ua = a / np.hypot(*a)
        cs, sn = np.cos(delta / 2), np.sin(delta / 2)
        m = np.array([cs * ua[0] - sn * ua[1], sn * ua[0] + cs * ua[1]])
        x, w = _segment_rule(c, r, m, delta, n_phi, n_tau)
        out_x.append(x)
        out_w.append(w)
    if not out_x:
        return np.zeros((0, 2)), np.zeros(0)
    return np.vstack(out_x), np.concatenate(out_w)


def _segment_rule(c, r, m, delta, n_phi, n_tau):
    """Circular segment {s ≥ r cos(Δ/2)} ∩ disk along unit direction m."""
    phi, wphi = gauss_legendre(n_phi, 0.0, delta / 2)
    tau, wtau = gauss_legendre(n_tau)
    s = r * np.cos(phi)
    half = r * np.sin(phi)
    S = np.repeat(s, n_tau)
    W = (half[:, None] * tau[None, :]).ravel()
    jac = (r * r * np.sin(phi) ** 2)[:, None] * wtau[None, :] * wphi[:, None]
    mperp = np.array([-m[1], m[0]])
    x = c + S[:, None] * m + W[:, None] * mperp
    return x, jac.ravel()
