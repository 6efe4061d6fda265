"""Approximated Green functions (G_ε, Π_ε) and the identities they satisfy.

Column k solves the discrete conormal problem with the mollified source
Φ_{ε,y} e_k, i.e. the load φ ↦ ⨍_{Ω_ε(y)} φᵏ − ⨍_Ω φᵏ.  Ball averages use
the same clipped quadrature as the load, so the duality and representation
identities hold to solver precision on a common mesh.
"""
import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPairing, InvalidParameter, ResolutionError
from .geometry.clipping import triangle_disk_relation
from .norms import ColumnStack, Region, lq_norm, weak_l2
from .stokes_fem import DiscreteField, assemble, ball_average_weights, load_vector, mollified_delta

MIN_ELEMENTS = 8


@dataclass(eq=False)
class GreenColumn:
    pole: np.ndarray
    epsilon: float
    k: int                      # 0 or 1 (column index)
    field: DiscreteField
    adjoint: bool = False
    info: dict = field(default_factory=dict)

    @property
    def mesh(self):
        return self.field.mesh

    def sample(self, tri, L, x=None):
        return self.field.sample(tri, L, x)

    def ball_average(self, center, radius):
        """⨍_{Ω_r(c)} G^{·k} by exact clipping (same rule as the load)."""
        w, area = ball_average_weights(self.mesh, np.asarray(center, float), radius)
        return self.field.velocity @ w / area


def _system_for(mesh, coefficients, adjoint, system):
    if system is not None:
        if system.mesh is not mesh or system.adjoint != adjoint:
            raise InvalidParameter("supplied system does not match the mesh/adjoint flag")
        return system
    return assemble(mesh, coefficients, adjoint=adjoint)


def approx_green(domain, coefficients, mesh, y, epsilon, adjoint=False, system=None, q_list=(2.2,)):
    """Both columns (k = 1, 2) of the approximated Green function with pole y."""
    y = np.asarray(y, float)
    touching = int(np.count_nonzero(triangle_disk_relation(mesh.tri_xy, y, epsilon) > 0))
    if touching < MIN_ELEMENTS:
        raise ResolutionError(f"only {touching} elements meet B_ε(y) with ε={epsilon:g}; need ≥ {MIN_ELEMENTS}")
    delta = mollified_delta(mesh, domain, y, epsilon)
    sysm = _system_for(mesh, coefficients, adjoint, system)
    b = np.column_stack([delta.load(sysm, k) for k in range(2)])
    x, rel = sysm.solve_vector(b)
    cols = []
    for k in range(2):
        fld = sysm.field_from(x[:, k], residual=float(rel[k]))
        u = fld.velocity
        nrm = fld.norms()
        mean = fld.mean_velocity()
        div = sysm.B @ u.ravel()
        info = {"residual": float(rel[k]),
                "velocity_mean": float(np.linalg.norm(mean)),
                "velocity_mean_relative": float(np.linalg.norm(mean) / max(nrm["u_l2"], 1e-300)),
                "divergence": float(np.max(np.abs(div)) / max(abs(sysm.B).max() * np.max(np.abs(u)), 1e-300)),
                "pressure_mean": fld.mean_pressure(),
                "clipped_area": delta.clipped_area}
        cols.append(GreenColumn(y, float(epsilon), k, fld, adjoint, info))
    pair = ColumnStack(cols)
    for q in q_list:
        a = lq_norm(pair, q, quantity="Du").value + lq_norm(pair, q, quantity="p").value
        for c in cols:
            c.info[f"apriori_q{q:g}"] = a * epsilon ** (1 - 2 / q)
    return cols[0], cols[1]


def green_values(cols, points):
    """G(x_i, y) (n, 2, 2) indexed [i, l, k] and Π(x_i, y) (n, 2) indexed [i, k]."""
    pts = np.atleast_2d(np.asarray(points, float))
    G = np.empty((len(pts), 2, 2))
    P = np.empty((len(pts), 2))
    for c in cols:
        u, _, p = c.field.evaluate(pts)
        G[:, :, c.k] = u
        P[:, c.k] = p
    return G, P


# --- tables --------------------------------------------------------------------

@dataclass
class GreenTable:
    pole: np.ndarray
    epsilon: float
    points: np.ndarray
    G: np.ndarray
    Pi: np.ndarray

    HEADER = ("x1", "x2", "y1", "y2", "eps", "G11", "G12", "G21", "G22", "Pi1", "Pi2")

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for x, g, p in zip(self.points, self.G, self.Pi):
            row = [x[0], x[1], self.pole[0], self.pole[1], self.epsilon,
                   g[0, 0], g[0, 1], g[1, 0], g[1, 1], p[0], p[1]]
            w.writerow([repr(float(v)) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    @property
    def distances(self):
        return np.linalg.norm(self.points - self.pole, axis=1)


def probe_points(domain, y, epsilon, K=None, n_dir=8, factor=2.0):
    """Log-spaced radii 2ε, 4ε, ... ≤ K/4 along n_dir directions, kept inside Ω."""
    K = domain.diameter_K if K is None else K
    y = np.asarray(y, float)
    radii = []
    r = factor * epsilon
    while r <= K / 4 * (1 + 1e-12):
        radii.append(r)
        r *= 2
    th = 2 * np.pi * np.arange(n_dir) / n_dir
    d = np.column_stack([np.cos(th), np.sin(th)])
    pts = (y[None, None, :] + np.asarray(radii)[:, None, None] * d[None]).reshape(-1, 2)
    return pts[domain.contains(pts)]


def green_table(cols, points) -> GreenTable:
    y, eps = cols[0].pole, cols[0].epsilon
    pts = np.atleast_2d(np.asarray(points, float))
    if np.any(np.linalg.norm(pts - y, axis=1) < eps / 2):
        raise InvalidParameter("table points must keep distance ≥ ε/2 from the pole")
    G, P = green_values(cols, pts)
    return GreenTable(y, eps, pts, G, P)


# --- identities -----------------------------------------------------------------

@dataclass
class DualityResult:
    defect: np.ndarray          # 2×2, [l, k]
    direct: np.ndarray          # ⨍_{Ω_ε'(x)} G_ε^{lk}(·, y)
    adjoint: np.ndarray         # ⨍_{Ω_ε(y)} (G*_ε')^{kl}(·, x), arranged as [l, k]

    @property
    def scale(self):
        return float(max(np.max(np.abs(self.direct)), np.max(np.abs(self.adjoint)), 1e-300))

    @property
    def relative(self):
        return float(np.max(np.abs(self.defect)) / self.scale)


def duality_identity(direct_cols, adjoint_cols) -> DualityResult:
    """M[l][k] = ⨍_{Ω_ε'(x)} G_ε^{lk}(·,y) − ⨍_{Ω_ε(y)} (G*_ε')^{kl}(·,x)."""
    mesh = direct_cols[0].mesh
    if any(c.mesh is not mesh for c in list(direct_cols) + list(adjoint_cols)):
        raise InvalidPairing("duality needs both Green functions on the same mesh")
    y, eps = direct_cols[0].pole, direct_cols[0].epsilon
    x, eps2 = adjoint_cols[0].pole, adjoint_cols[0].epsilon
    if np.allclose(x, y, rtol=0, atol=0):
        raise InvalidParameter("x and y must differ")
    D = np.empty((2, 2))
    A = np.empty((2, 2))
    for c in direct_cols:
        D[:, c.k] = c.ball_average(x, eps2)          # l-components of column k
    for c in adjoint_cols:
        A[c.k, :] = c.ball_average(y, eps)           # column l of G*, components k
    return DualityResult(D - A, D, A)


@dataclass
class RepresentationResult:
    lhs: np.ndarray
    rhs: np.ndarray
    defect: np.ndarray

    @property
    def max_defect(self):
        return float(np.max(self.defect))


def representation_check(domain, coefficients, mesh, y, epsilon, f=None, f_alpha=None, g=None,
                         green_mesh=None, green_cols=None, adjoint_system=None, order=6):
    """Compare ⨍_{Ω_ε(y)} u with −∫G^{·k}·f + ∫D_αG^{·k}·f_α + ∫Π^k g for the adjoint solution u.

    u solves the adjoint problem on ``mesh``; G is taken from ``green_mesh``
    (defaults to ``mesh``).  Defect per component: |L − R| / (|L| + |R| + scale)
    with scale the largest |L|.
    """
    from .stokes_fem import solve_conormal
    gmesh = mesh if green_mesh is None else green_mesh
    if green_cols is None:
        green_cols = approx_green(domain, coefficients, gmesh, y, epsilon)
    sa = adjoint_system if adjoint_system is not None else assemble(mesh, coefficients, adjoint=True)
    u = solve_conormal(sa, f, f_alpha, g, order=order)
    w, area = ball_average_weights(mesh, np.asarray(y, float), epsilon)
    lhs = u.velocity @ w / area
    F = load_vector(gmesh, f, f_alpha, g, order)
    rhs = np.empty(2)
    n2 = gmesh.n_vertices + gmesh.n_edges
    for c in green_cols:
        xvec = np.concatenate([c.field.velocity.ravel(), c.field.pressure])
        rhs[c.k] = xvec @ F[:2 * n2 + gmesh.n_vertices]
    scale = float(np.max(np.abs(lhs)))
    den = np.abs(lhs) + np.abs(rhs) + scale
    defect = np.where(den > 0, np.abs(lhs - rhs) / np.where(den > 0, den, 1.0), 0.0)
    return RepresentationResult(lhs, rhs, defect)


# --- ε ladders ---------------------------------------------------------------

def eps_ladder(R0, J):
    if J > 6:
        raise InvalidParameter("ε ladders are limited to J ≤ 6")
    return [R0 * 2.0 ** (-j) for j in range(J + 1)]


def eps_sequence_study(domain, coefficients, mesh, y, eps_list, probes=None, local_R=None,
                       local_centers=None, s_local=1.5, s_annulus=2.2, annulus_R=None, system=None):
    """Per-ε norm table: weak-L2 of DG_ε and Π_ε, local L_s and annulus L_s ratios, probe values."""
    y = np.asarray(y, float)
    R0 = domain.R0
    local_R = R0 if local_R is None else local_R
    annulus_R = R0 / 4 if annulus_R is None else annulus_R
    centers = [y] if local_centers is None else [np.asarray(c, float) for c in local_centers]
    sysm = system if system is not None else assemble(mesh, coefficients)
    rows = []
    for eps in eps_list:
        cols = approx_green(domain, coefficients, mesh, y, eps, system=sysm, q_list=())
        pair = ColumnStack(cols)
        row = {"eps": eps,
               "weak_l2_DG": weak_l2(pair, quantity="Du").value,
               "weak_l2_Pi": weak_l2(pair, quantity="p").value,
               "velocity_mean": max(c.info["velocity_mean_relative"] for c in cols),
               "pressure_mean": [c.info["pressure_mean"] for c in cols]}
        if eps <= local_R / 8 * (1 + 1e-12):
            loc = []
            for c in centers:
                reg = Region.ball(c, local_R)
                v = lq_norm(pair, s_local, reg, "Du").value + lq_norm(pair, s_local, reg, "p").value
                loc.append(v / local_R ** (-1 + 2 / s_local))
            row["local_ratio"] = float(max(loc))
        reg = Region.annulus(y, annulus_R)
        v = lq_norm(pair, s_annulus, reg, "Du").value + lq_norm(pair, s_annulus, reg, "p").value
        row["annulus_ratio"] = v / annulus_R ** (-1 + 2 / s_annulus)
        if probes is not None:
            G, _ = green_values(cols, probes)
            row["probe_G"] = G.reshape(len(probes), 4).tolist()
        rows.append(row)
    return rows
