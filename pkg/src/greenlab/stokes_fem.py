"""Taylor-Hood (P2/P1) discretization of the conormal Stokes problem.

Weak form, for all test velocities φ and pressures q:

    ∫ A_{αβ} D_β u · D_α φ + ∫ p div φ = −∫ f·φ + ∫ f_α · D_α φ,
    ∫ q div u = ∫ g q.

The velocity is determined up to constants, removed by two mean-value
multiplier rows; the pressure carries no normalization.  Unknowns are laid
out as [u¹ (P2 nodes), u² (P2 nodes), p (vertices), μ₁, μ₂].
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CompatibilityError, InvalidParameter, SolveFailure
from .geometry.clipping import clipped_triangle_rule, triangle_disk_relation
from .quadrature import triangle_rule

RESIDUAL_TOL = 1e-9
COMPAT_TOL = 1e-8


# --- reference basis -----------------------------------------------------------

def p2_values(L):
    """P2 basis [λ0(2λ0−1), λ1(2λ1−1), λ2(2λ2−1), 4λ1λ2, 4λ2λ0, 4λ0λ1] at barycentrics L (..., 3)."""
    l0, l1, l2 = L[..., 0], L[..., 1], L[..., 2]
    return np.stack([l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
                     4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1], axis=-1)


def p2_gradients(L, dlam):
    """Gradients (..., 6, 2) given barycentrics (..., 3) and ∇λ (..., 3, 2)."""
    l0, l1, l2 = (L[..., k, None] for k in range(3))
    g0, g1, g2 = dlam[..., 0, :], dlam[..., 1, :], dlam[..., 2, :]
    return np.stack([(4 * l0 - 1) * g0, (4 * l1 - 1) * g1, (4 * l2 - 1) * g2,
                     4 * (l1 * g2 + l2 * g1), 4 * (l2 * g0 + l0 * g2), 4 * (l0 * g1 + l1 * g0)], axis=-2)


def lambda_gradients(mesh):
    p = mesh.tri_xy
    x, y = p[..., 0], p[..., 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    g = np.empty((len(p), 3, 2))
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        g[:, k, 0] = (y[:, i] - y[:, j]) / det
        g[:, k, 1] = (x[:, j] - x[:, i]) / det
    return g


# --- discrete field -----------------------------------------------------------------

@dataclass(eq=False)
class DiscreteField:
    """Velocity in continuous P2 (shape (2, n_p2)), pressure in continuous P1."""
    mesh: object
    velocity: np.ndarray
    pressure: np.ndarray
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(2))
    info: dict = field(default_factory=dict)

    def _local(self, tri):
        ids = self.mesh.p2_triangles[tri]
        return self.velocity[:, ids], self.pressure[self.mesh.triangles[tri]]

    def evaluate_bary(self, tri, L, gradient=True):
        """Values at barycentric coordinates L (n, 3) inside triangles tri (n,).

        Returns (u (n, 2), Du (n, 2, 2) indexed [n, i, α], p (n,)).
        """
        tri = np.asarray(tri)
        uloc, ploc = self._local(tri)
        phi = p2_values(L)
        u = np.einsum("ina,na->ni", uloc, phi)
        p = np.sum(ploc * L, axis=1)
        Du = None
        if gradient:
            dl = self.mesh.meta.setdefault("_cache", {}).get("dlam")
            if dl is None:
                dl = lambda_gradients(self.mesh)
                self.mesh.meta["_cache"]["dlam"] = dl
            G = p2_gradients(L, dl[tri])
            Du = np.einsum("ina,nad->nid", uloc, G)
        return u, Du, p

    def sample(self, tri, L, x=None):
        """Uniform sampling hook used by the norm functionals."""
        u, Du, p = self.evaluate_bary(tri, L)
        return {"u": u, "Du": Du, "p": p}

    def evaluate(self, points, gradient=False):
        tri, L = self.mesh.locate(points)
        if np.any(tri < 0):
            raise InvalidParameter("evaluation point outside the mesh")
        return self.evaluate_bary(tri, L, gradient)

    def at_quadrature(self, order=4):
        """Values at the mesh quadrature points: u (nt, nq, 2), Du (nt, nq, 2, 2), p, weights."""
        x, w, bary = self.mesh.quadrature(order)
        nt, nq = w.shape
        tri = np.repeat(np.arange(nt), nq)
        L = np.tile(bary, (nt, 1))
        u, Du, p = self.evaluate_bary(tri, L)
        return u.reshape(nt, nq, 2), Du.reshape(nt, nq, 2, 2), p.reshape(nt, nq), w, x

    def mean_velocity(self, order=4):
        u, _, _, w, _ = self.at_quadrature(order)
        return np.einsum("tqi,tq->i", u, w) / w.sum()

    def mean_pressure(self, order=4):
        _, _, p, w, _ = self.at_quadrature(order)
        return float(np.sum(p * w) / w.sum())

    def norms(self, order=4):
        u, Du, p, w, _ = self.at_quadrature(order)
        return {"u_l2": float(np.sqrt(np.sum(w[..., None] * u ** 2))),
                "Du_l2": float(np.sqrt(np.sum(w[..., None, None] * Du ** 2))),
                "p_l2": float(np.sqrt(np.sum(w * p ** 2)))}

    def scaled(self, a, b=None):
        b = a if b is None else b
        return DiscreteField(self.mesh, a * self.velocity, b * self.pressure, a * self.multipliers, dict(self.info))

    def to_dict(self):
        return {"mesh": self.mesh.to_dict(), "velocity": self.velocity.tolist(), "pressure": self.pressure.tolist(),
                "info": {k: v for k, v in self.info.items() if isinstance(v, (int, float, str, list))}}


# --- system -------------------------------------------------------------------

@dataclass(eq=False)
class DiscreteSystem:
    mesh: object
    coefficients: object
    adjoint: bool
    K: sp.csc_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    order: int
    _lu: Optional[object] = None

    @property
    def n2(self):
        return self.mesh.n_vertices + self.mesh.n_edges

    @property
    def n_velocity(self):
        return 2 * self.n2

    @property
    def n_pressure(self):
        return self.mesh.n_vertices

    @property
    def size(self):
        return self.K.shape[0]

    def factor(self):
        if self._lu is None:
            self._lu = spla.splu(self.K.tocsc(), permc_spec="COLAMD")
        return self._lu

    def split(self, x):
        nu, npr = self.n_velocity, self.n_pressure
        return x[:nu].reshape(2, self.n2), x[nu:nu + npr], x[nu + npr:]

    def solve_vector(self, b):
        """Solve K x = b (columns of b) with one refinement step and a residual guard."""
        b = np.asarray(b, float)
        lu = self.factor()
        x = lu.solve(b)
        r = b - self.K @ x
        x = x + lu.solve(r)
        r = b - self.K @ x
        bn = np.linalg.norm(b, axis=0)
        rel = np.linalg.norm(r, axis=0) / np.where(bn > 0, bn, 1.0)
        if np.max(rel) > RESIDUAL_TOL:
            x, rel = self._fallback(b, x)
        return x, rel

    def _fallback(self, b, x0):
        lu = self.factor()
        prec = spla.LinearOperator(self.K.shape, matvec=lu.solve, dtype=float)
        cols = [b] if b.ndim == 1 else list(b.T)
        xs0 = [x0] if x0.ndim == 1 else list(x0.T)
        out, rels = [], []
        for bc, xc in zip(cols, xs0):
            xn, info = spla.gmres(self.K, bc, x0=xc, M=prec, rtol=1e-12, atol=0.0, restart=50, maxiter=20)
            rel = np.linalg.norm(bc - self.K @ xn) / max(np.linalg.norm(bc), 1e-300)
            if rel > RESIDUAL_TOL:
                raise SolveFailure(f"linear solve residual {rel:.3e} exceeds {RESIDUAL_TOL}", residual=rel)
            out.append(xn)
            rels.append(rel)
        x = out[0] if b.ndim == 1 else np.column_stack(out)
        return x, np.array(rels)

    def field_from(self, x, **info):
        u, p, mu = self.split(x)
        return DiscreteField(self.mesh, u.copy(), p.copy(), mu.copy(), info)

    def triplets(self):
        """Debug dump lines 'row col value' of the augmented matrix."""
        K = self.K.tocoo()
        return "\n".join(f"{i} {j} {v:.17g}" for i, j, v in zip(K.row, K.col, K.data))


def assemble(mesh, coefficients, adjoint=False, order=4) -> DiscreteSystem:
    """Augmented saddle-point matrix [[A, Bᵀ, Cᵀ], [B, 0, 0], [C, 0, 0]]."""
    if order < 4:
        raise InvalidParameter("assembly needs quadrature order ≥ 4")
    coef = coefficients
    if adjoint:
        from .coefficients import adjoint as adj
        coef = adj(coefficients)
    x, w, bary = mesh.quadrature(order)
    nt, nq = w.shape
    dl = lambda_gradients(mesh)
    G = p2_gradients(bary[None, :, :], dl[:, None, :, :])           # (nt, nq, 6, 2)
    M = coef.matrices(x.reshape(-1, 2)).reshape(nt, nq, 2, 2, 2, 2)  # [t,q,α,i,β,j]
    Aloc = np.einsum("tq,tqxiyj,tqax,tqby->tiajb", w, M, G, G, optimize=True)
    n2 = mesh.n_vertices + mesh.n_edges
    ids = mesh.p2_triangles                                          # (nt, 6)
    dof = np.stack([ids, n2 + ids], axis=1)                          # (nt, 2, 6)
    rows = np.broadcast_to(dof[:, :, :, None, None], Aloc.shape).ravel()
    cols = np.broadcast_to(dof[:, None, None, :, :], Aloc.shape).ravel()
    A = sp.csr_matrix((Aloc.ravel(), (rows, cols)), shape=(2 * n2, 2 * n2))
    # B[c, (i, a)] = ∫ λ_c ∂_i ψ_a
    Bloc = np.einsum("tq,qc,tqai->tcia", w, bary, G)
    vt = mesh.triangles
    r = np.broadcast_to(vt[:, :, None, None], Bloc.shape).ravel()
    c = np.broadcast_to(dof[:, None, :, :], Bloc.shape).ravel()
    B = sp.csr_matrix((Bloc.ravel(), (r, c)), shape=(mesh.n_vertices, 2 * n2))
    # C[k, (k, a)] = ∫ ψ_a
    phi = p2_values(bary)
    mass = np.einsum("tq,qa->ta", w, phi)
    cr = np.concatenate([np.zeros(mass.size, int), np.ones(mass.size, int)])
    cc = np.concatenate([ids.ravel(), n2 + ids.ravel()])
    C = sp.csr_matrix((np.concatenate([mass.ravel(), mass.ravel()]), (cr, cc)), shape=(2, 2 * n2))
    K = sp.bmat([[A, B.T, C.T], [B, None, None], [C, None, None]], format="csc")
    return DiscreteSystem(mesh, coefficients, adjoint, K, A, B, C, order)


# --- right-hand sides -------------------------------------------------------------

def _eval(fn, x):
    return None if fn is None else np.asarray(fn(x), float)


def load_vector(system, f=None, f_alpha=None, g=None, order=6):
    """Right-hand side for data f (x → (n,2)), f_α (x → (n,2,2) as [n, α, i]), g (x → (n,)).

    ``system`` may be a DiscreteSystem or a bare mesh (the layout depends on the mesh only).
    """
    mesh = getattr(system, "mesh", system)
    x, w, bary = mesh.quadrature(order)
    nt, nq = w.shape
    xf = x.reshape(-1, 2)
    n2 = mesh.n_vertices + mesh.n_edges
    rhs = np.zeros(2 * n2 + mesh.n_vertices + 2)
    ids = mesh.p2_triangles
    phi = p2_values(bary)
    fv = _eval(f, xf)
    if fv is not None:
        loc = -np.einsum("tq,tqi,qa->tia", w, fv.reshape(nt, nq, 2), phi)
        for i in range(2):
            np.add.at(rhs, i * n2 + ids, loc[:, i])
    Fa = _eval(f_alpha, xf)
    if Fa is not None:
        G = p2_gradients(bary[None], lambda_gradients(mesh)[:, None])
        loc = np.einsum("tq,tqxi,tqax->tia", w, Fa.reshape(nt, nq, 2, 2), G)
        for i in range(2):
            np.add.at(rhs, i * n2 + ids, loc[:, i])
    gv = _eval(g, xf)
    if gv is not None:
        loc = np.einsum("tq,tq,qc->tc", w, gv.reshape(nt, nq), bary)
        np.add.at(rhs, 2 * n2 + mesh.triangles, loc)
    return rhs


def data_norms(mesh, f=None, f_alpha=None, g=None, order=6, q=2.0):
    x, w, _ = mesh.quadrature(order)
    xf, wf = x.reshape(-1, 2), w.ravel()
    out = {}
    for name, fn in (("f", f), ("f_alpha", f_alpha), ("g", g)):
        v = _eval(fn, xf)
        if v is None:
            out[name] = 0.0
            continue
        mag = np.sqrt(np.sum(v.reshape(len(wf), -1) ** 2, axis=1))
        out[name] = float(np.sum(wf * mag ** q) ** (1 / q))
    return out


def solve_conormal(system, f=None, f_alpha=None, g=None, order=6) -> DiscreteField:
    """Solve the discrete conormal problem; f must have zero mean."""
    mesh = system.mesh
    if f is not None:
        x, w, _ = mesh.quadrature(order)
        fv = np.asarray(f(x.reshape(-1, 2)), float).reshape(w.shape + (2,))
        mean = np.einsum("tqi,tq->i", fv, w) / w.sum()
        scale = np.sqrt(np.sum(w[..., None] * fv ** 2) / w.sum())
        if np.linalg.norm(mean) > COMPAT_TOL * max(scale, 1e-300):
            raise CompatibilityError(f"(f)_Ω = {mean.tolist()} is not zero (relative {np.linalg.norm(mean) / scale:.2e})")
    b = load_vector(system, f, f_alpha, g, order)
    if not np.any(b):
        x = np.zeros_like(b)
        rel = np.zeros(1)
    else:
        x, rel = system.solve_vector(b)
    fld = system.field_from(x, residual=float(np.max(rel)))
    nrm = fld.norms()
    dn = data_norms(mesh, f, f_alpha, g, order)
    den = dn["f"] + dn["f_alpha"] + dn["g"]
    fld.info["energy_constant"] = (nrm["Du_l2"] + nrm["p_l2"]) / den if den > 0 else 0.0
    return fld


# --- mollified delta ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MollifiedDelta:
    """Φ_{ε,y} = −χ_{Ω_ε(y)}/|Ω_ε(y)| + 1/|Ω|, through its ball-average functional."""
    pole: np.ndarray
    epsilon: float
    clipped_area: float
    domain_area: float
    average: np.ndarray      # ⨍_{Ω_ε(y)} ψ_a for every P2 node a
    mean: np.ndarray         # ⨍_Ω ψ_a

    @property
    def weights(self):
        return self.average - self.mean

    def load(self, system, k):
        """Load vector of column k: φ ↦ ⨍_{Ω_ε(y)} φᵏ − ⨍_Ω φᵏ."""
        b = np.zeros(system.size)
        b[k * system.n2:(k + 1) * system.n2] = self.weights
        return b

    def value(self, x):
        x = np.atleast_2d(x)
        inside = np.linalg.norm(x - self.pole, axis=1) < self.epsilon
        return np.where(inside, -1.0 / self.clipped_area, 0.0) + 1.0 / self.domain_area


def ball_average_weights(mesh, center, radius, order=4):
    """Coefficients c_a with ∫_{Ω∩B} ψ_a = c_a, and the clipped area, by exact clipping."""
    rel = triangle_disk_relation(mesh.tri_xy, center, radius)
    n2 = mesh.n_vertices + mesh.n_edges
    out = np.zeros(n2)
    ids = mesh.p2_triangles
    bary, w = triangle_rule(order)
    phi = p2_values(bary)
    full = np.nonzero(rel == 2)[0]
    if len(full):
        np.add.at(out, ids[full], mesh.areas[full, None] * (w @ phi)[None, :])
    area = float(mesh.areas[full].sum())
    for t in np.nonzero(rel == 1)[0]:
        xq, wq = clipped_triangle_rule(mesh.tri_xy[t], center, radius, order)
        if len(wq) == 0:
            continue
        L = mesh.barycentric(xq, np.full(len(xq), t))
        np.add.at(out, ids[t], wq @ p2_values(L))
        area += float(wq.sum())
    return out, area


def mollified_delta(mesh, domain, y, epsilon, R0=None) -> MollifiedDelta:
    y = np.asarray(y, float)
    R0 = domain.R0 if R0 is None else R0
    if not (epsilon > 0) or (R0 is not None and epsilon > R0 * (1 + 1e-12)):
        raise InvalidParameter(f"epsilon must lie in (0, R0]; got {epsilon}")
    if not domain.contains(y)[0]:
        raise InvalidParameter("the pole must be an interior point")
    integ, area = ball_average_weights(mesh, y, epsilon)
    exact = domain.clipped_area(y, epsilon)
    if abs(area - exact) > 1e-10 * exact:
        raise InvalidParameter(f"clipped quadrature area {area} disagrees with exact area {exact}")
    n2 = mesh.n_vertices + mesh.n_edges
    mass = np.zeros(n2)
    bary, w = triangle_rule(4)
    np.add.at(mass, mesh.p2_triangles, mesh.areas[:, None] * (w @ p2_values(bary))[None, :])
    return MollifiedDelta(y, float(epsilon), exact, mesh.area, integ / area, mass / mesh.area)


# --- solvability probe ------------------------------------------------------------

def random_smooth_data(rng, n_modes=4, scale=1.0):
    """Random low-frequency trigonometric f_α (n,2,2) and g (n,) generators."""
    k = rng.integers(-2, 3, size=(n_modes, 2)).astype(float) * np.pi / scale
    ph = rng.uniform(0, 2 * np.pi, size=(n_modes, 5))
    amp = rng.normal(size=(n_modes, 5))

    def fa(x):
        arg = x @ k.T                                 # (n, modes)
        vals = np.stack([np.sum(amp[:, c] * np.cos(arg + ph[:, c]), axis=1) for c in range(4)], axis=1)
        return vals.reshape(-1, 2, 2)

    def g(x):
        arg = x @ k.T
        return np.sum(amp[:, 4] * np.cos(arg + ph[:, 4]), axis=1)

    return fa, g


def lq_total(field, q, order=4):
    _, Du, p, w, _ = field.at_quadrature(order)
    nd = np.sqrt(np.sum(Du ** 2, axis=(2, 3)))
    return float(np.sum(w * nd ** q) ** (1 / q) + np.sum(w * np.abs(p) ** q) ** (1 / q))


def operator_norm_probe(meshes, coefficients, q=2.0, n_samples=6, seed=0):
    """sup over random (f_α, g) of (‖Du‖_q + ‖p‖_q) / (‖f_α‖_q + ‖g‖_q) on each mesh."""
    out = []
    for mesh in meshes:
        system = assemble(mesh, coefficients)
        rng = np.random.default_rng(seed)
        best = 0.0
        for _ in range(n_samples):
            fa, g = random_smooth_data(rng)
            fld = solve_conormal(system, None, fa, g)
            dn = data_norms(mesh, None, fa, g, q=q)
            best = max(best, lq_total(fld, q) / (dn["f_alpha"] + dn["g"]))
        out.append({"h": float(mesh.h_max), "constant": best, "dofs": system.n_velocity})
    return out
