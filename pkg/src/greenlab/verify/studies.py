"""Numerical studies behind the verification suites.

Each study builds its own meshes and systems and returns plain dicts, so the
suites, the CLI and the acceptance tests share one implementation.
"""
import numpy as np

from ..coefficients import identity
from ..errors import GreenlabError, InvalidParameter
from ..geometry.appendix import rounding_slack
from ..geometry import (chain_invariants, chain_of_balls, escape_segment, random_chain_queries,
                        two_scale_points, unit_square)
from ..green import approx_green, duality_identity, green_values, probe_points, representation_check
from ..mesh import triangulate
from ..norms import ColumnStack, Region, empirical_q0, inequality_ratio, log_slope_fit, lq_norm
from ..stokes_fem import assemble, solve_conormal

STOKESLET_SLOPE = 1.0 / (4.0 * np.pi)


def fit_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def relative_spread(values):
    v = np.asarray(values, float)
    return float((v.max() - v.min()) / v.min())


# --- manufactured solution ----------------------------------------------------------

def _mms():
    pi = np.pi

    def u(x):
        return np.column_stack([np.sin(pi * x[:, 0]) * np.cos(pi * x[:, 1]),
                                -np.cos(pi * x[:, 0]) * np.sin(pi * x[:, 1])])

    def p(x):
        return x[:, 0] * x[:, 1] - 0.25

    def Du(x):
        a, b = pi * x[:, 0], pi * x[:, 1]
        D = np.empty((len(x), 2, 2))          # [n, i, α]
        D[:, 0, 0] = pi * np.cos(a) * np.cos(b)
        D[:, 0, 1] = -pi * np.sin(a) * np.sin(b)
        D[:, 1, 0] = pi * np.sin(a) * np.sin(b)
        D[:, 1, 1] = -pi * np.cos(a) * np.cos(b)
        return D

    def f_alpha(x):
        # divergence-free u with p = xy − 1/4: the conormal data is the flux A Du + p I
        F = np.transpose(Du(x), (0, 2, 1)).copy()
        F[:, 0, 0] += p(x)
        F[:, 1, 1] += p(x)
        return F

    return u, Du, p, f_alpha


def manufactured_study(hs=(0.1, 0.05, 0.025), order=6):
    """L2 errors of velocity, gradient and pressure for a smooth exact solution on the unit square."""
    u_ex, Du_ex, p_ex, fa = _mms()
    dom = unit_square()
    rows = []
    for h in hs:
        mesh = triangulate(dom, h)
        system = assemble(mesh, identity())
        fld = solve_conormal(system, None, fa, None, order)
        u, D, p, w, x = fld.at_quadrature(order)
        xf = x.reshape(-1, 2)
        rows.append({"h": float(h), "h_max": float(mesh.h_max), "dofs": system.n_velocity,
                     "u_l2": float(np.sqrt(np.sum(w[..., None] * (u - u_ex(xf).reshape(u.shape)) ** 2))),
                     "Du_l2": float(np.sqrt(np.sum(w[..., None, None] * (D - Du_ex(xf).reshape(D.shape)) ** 2))),
                     "p_l2": float(np.sqrt(np.sum(w * (p - p_ex(xf).reshape(p.shape)) ** 2))),
                     "energy_constant": float(fld.info["energy_constant"]),
                     "residual": float(fld.info["residual"])})
    h = [r["h"] for r in rows]
    out = {"rows": rows}
    for key in ("u_l2", "Du_l2", "p_l2"):
        out["slope_" + key] = fit_slope(h, [r[key] for r in rows])
    out["energy_spread"] = relative_spread([r["energy_constant"] for r in rows])
    return out


# --- Green function studies ----------------------------------------------------------

def green_magnitude(G):
    """Spectral norm of each 2×2 block."""
    return np.linalg.norm(G, ord=2, axis=(1, 2))


def log_bound_profile(cols, domain, K=None):
    """|G_ε(x, y)| and |G_ε|/(log(K/r) + 1) at the standard probes."""
    y, eps = cols[0].pole, cols[0].epsilon
    K = domain.diameter_K if K is None else K
    P = probe_points(domain, y, eps, K)
    G, _ = green_values(cols, P)
    mag = green_magnitude(G)
    r = np.linalg.norm(P - y, axis=1)
    return {"r": r, "G": mag, "ratio": mag / (np.log(K / r) + 1.0), "K": K, "points": P}


def stokeslet_study(domain, meshes=((0.1, 10.0), (0.07, 10.0)), y=None, eps_fraction=1 / 64,
                    coefficients=None):
    """Fitted slope of |G_ε| against log(K/r) and the max log-bound ratio on a mesh sequence."""
    coefficients = identity() if coefficients is None else coefficients
    y = domain.centroid if y is None else np.asarray(y, float)
    eps = domain.R0 * eps_fraction
    rows = []
    for h, ratio in meshes:
        mesh = triangulate(domain, h, grading=(y, ratio), coefficients=coefficients)
        cols = approx_green(domain, coefficients, mesh, y, eps, q_list=())
        prof = log_bound_profile(cols, domain)
        slope, _, res = log_slope_fit(prof["G"], prof["r"], prof["K"], eps)
        rows.append({"h": float(h), "ratio": float(ratio), "dofs": 2 * (mesh.n_vertices + mesh.n_edges),
                     "slope": slope, "slope_over_stokeslet": slope / STOKESLET_SLOPE,
                     "fit_residual": res, "max_ratio": float(prof["ratio"].max())})
    return {"eps": eps, "rows": rows,
            "ratio_spread": relative_spread([r["max_ratio"] for r in rows])}


def annulus_slopes(cols, q_list, R_lo, R_hi, n=9, quantity="Du"):
    """Slope of log ‖·‖_{L_q(Ω \\ B_R(y))} against log R on a geometric R grid."""
    if R_hi < 4.0 * R_lo * (1 - 1e-12):
        raise InvalidParameter("the R window must span two octaves")
    if R_lo < 2.0 * cols[0].epsilon * (1 - 1e-12):
        raise InvalidParameter("annulus radii must be ≥ 2ε")
    pair = ColumnStack(cols)
    y = cols[0].pole
    Rs = np.geomspace(R_lo, R_hi, n)
    out = {}
    for q in q_list:
        if not q > 2:
            raise InvalidParameter("annulus exponents need q > 2")
        vals = [lq_norm(pair, q, Region.annulus(y, R), quantity).value for R in Rs]
        out[float(q)] = {"slope": fit_slope(Rs, vals), "target": -(1.0 - 2.0 / q),
                         "R": Rs.tolist(), "values": [float(v) for v in vals]}
    return out


# --- inequality diagnostics --------------------------------------------------------

def bump_data(domain, rng, avoid, width=0.15, tries=10_000):
    """Smooth compactly supported f_α (a bump times a random matrix) away from the given balls."""
    lo, hi = domain.vertices.min(axis=0), domain.vertices.max(axis=0)
    for _ in range(tries):
        c = rng.uniform(lo, hi)
        if not domain.contains(c)[0] or domain.boundary_distance(c)[0] < width:
            continue
        if all(np.linalg.norm(c - np.asarray(z)) > r + width for z, r in avoid):
            break
    else:
        raise InvalidParameter("no room for a bump away from the sampled balls")
    M = rng.normal(size=(2, 2))

    def f_alpha(x):
        r2 = np.sum((x - c) ** 2, axis=1) / width ** 2
        b = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1.0 - r2, 1e-300)), 0.0)
        return b[:, None, None] * M[None]

    return f_alpha, c


INEQUALITY_ENSEMBLE = (("sobolev_poincare_local", 1.5), ("sobolev_poincare_global", 1.5),
                       ("morrey", 2.5), ("morrey", 4.0))


def inequality_study(domain, coefficients, meshes, centers, R_list, q_grid=(2.1, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0),
                     n_data=3, seed=0, R_embedding=None, tol=0.10):
    """Ensemble maxima of the inequality ratios on each mesh, and the empirical q0.

    The ensemble is the solutions with f_α bumps supported away from every
    sampled ball, so the reverse Hölder balls see homogeneous solutions.
    """
    R_embedding = domain.R0 if R_embedding is None else R_embedding
    centers = [np.asarray(c, float) for c in centers]
    avoid = [(c, max(R_list)) for c in centers] + [(c, R_embedding) for c in centers]
    rng = np.random.default_rng(seed)
    data = [bump_data(domain, rng, avoid) for _ in range(n_data)]
    rh, emb = [], {f"{k}@{q:g}": [] for k, q in INEQUALITY_ENSEMBLE}
    for mesh in meshes:
        system = assemble(mesh, coefficients)
        flds = [solve_conormal(system, None, fa, None) for fa, _ in data]
        rh.append([max(inequality_ratio("reverse_holder", f, domain, c, R, q).value
                       for f in flds for c in centers for R in R_list) for q in q_grid])
        for kind, q in INEQUALITY_ENSEMBLE:
            emb[f"{kind}@{q:g}"].append(max(inequality_ratio(kind, f, domain, c, R_embedding, q).value
                                            for f in flds for c in centers))
    q0, changes = empirical_q0(rh, q_grid, tol)
    stable = {}
    for key, vals in emb.items():
        v = np.asarray(vals)
        stable[key] = bool(np.all(np.isfinite(v)) and np.all(np.abs(np.diff(v)) <= tol * np.abs(v[1:])))
    return {"q_grid": list(map(float, q_grid)), "reverse_holder": rh, "q0": q0, "q0_changes": changes,
            "q0_capped": bool(q0 >= max(q_grid)), "embedding": emb, "embedding_stable": stable,
            "bump_centers": [c.tolist() for _, c in data],
            "dofs": [2 * (m.n_vertices + m.n_edges) for m in meshes]}


# --- duality and representation ----------------------------------------------------

def sample_interior_points(domain, n, margin, rng):
    lo, hi = domain.vertices.min(axis=0), domain.vertices.max(axis=0)
    out = []
    while len(out) < n:
        z = rng.uniform(lo, hi)
        if domain.contains(z)[0] and domain.boundary_distance(z)[0] > margin:
            out.append(z)
    return np.array(out)


def duality_pairs(domain, n, eps, eps_adj, seed=0):
    """n pole pairs (x, y) in Ω with disjoint mollifier balls."""
    rng = np.random.default_rng(seed)
    pairs = []
    while len(pairs) < n:
        x, y = sample_interior_points(domain, 2, 0.0, rng)
        if np.linalg.norm(x - y) > 2 * (eps + eps_adj):
            pairs.append((x, y))
    return pairs


def duality_study(domain, coefficients, mesh, pairs, eps, eps_adj, corrupt=None):
    """Relative defects of the mollified duality identity over pole pairs.

    ``corrupt`` (a shift vector) moves the adjoint pole away from x: a
    negative control whose defect must be large.
    """
    direct = assemble(mesh, coefficients)
    adjoint = assemble(mesh, coefficients, adjoint=True)
    defects = []
    for x, y in pairs:
        xa = x if corrupt is None else x + np.asarray(corrupt, float)
        dc = approx_green(domain, coefficients, mesh, y, eps, system=direct, q_list=())
        ac = approx_green(domain, coefficients, mesh, xa, eps_adj, adjoint=True, system=adjoint, q_list=())
        if corrupt is not None:
            for c in ac:
                c.pole = x
        defects.append(duality_identity(dc, ac).relative)
    return {"defects": defects, "max_defect": float(max(defects)), "n_pairs": len(pairs),
            "dofs": direct.n_velocity}


def standard_data(domain):
    """Three data sets (f, f_α, g): pure divergence, pure flux, and all three combined.

    f is odd about the centroid, so it has zero mean on centrally symmetric domains.
    """
    c = domain.centroid

    def g1(x):
        return np.ones(len(x))

    def fa(x):
        z = x - c
        F = np.empty((len(x), 2, 2))
        F[:, 0, 0] = np.sin(2 * z[:, 1])
        F[:, 0, 1] = z[:, 0] * z[:, 1]
        F[:, 1, 0] = np.cos(z[:, 0] + z[:, 1])
        F[:, 1, 1] = z[:, 0] ** 2
        return F

    def f(x):
        z = x - c
        return np.column_stack([z[:, 0], z[:, 1] ** 3])

    def g3(x):
        return (x - c)[:, 0] ** 2

    return [{"name": "divergence", "f": None, "f_alpha": None, "g": g1},
            {"name": "flux", "f": None, "f_alpha": fa, "g": None},
            {"name": "combined", "f": f, "f_alpha": fa, "g": g3}]


def representation_study(domain, coefficients, y, eps, hs, same_mesh_h=None):
    """Representation defects on a common mesh and across meshes (G on h, u on h/2 style pairs)."""
    y = np.asarray(y, float)
    data = standard_data(domain)
    meshes = {h: triangulate(domain, h, coefficients=coefficients) for h in hs}
    h0 = hs[0] if same_mesh_h is None else same_mesh_h
    if h0 not in meshes:
        meshes[h0] = triangulate(domain, h0, coefficients=coefficients)
    same = []
    m0 = meshes[h0]
    cols0 = approx_green(domain, coefficients, m0, y, eps, q_list=())
    adj0 = assemble(m0, coefficients, adjoint=True)
    for d in data:
        r = representation_check(domain, coefficients, m0, y, eps, d["f"], d["f_alpha"], d["g"],
                                 green_cols=cols0, adjoint_system=adj0)
        same.append({"data": d["name"], "defect": r.max_defect})
    cross = []
    green = {h: approx_green(domain, coefficients, meshes[h], y, eps, q_list=()) for h in hs[:-1]}
    adjoint = {h: assemble(meshes[h], coefficients, adjoint=True) for h in hs[1:]}
    for hg, hu in zip(hs[:-1], hs[1:]):
        worst = 0.0
        for d in data:
            r = representation_check(domain, coefficients, meshes[hu], y, eps, d["f"], d["f_alpha"], d["g"],
                                     green_mesh=meshes[hg], green_cols=green[hg], adjoint_system=adjoint[hu])
            worst = max(worst, r.max_defect)
        cross.append({"h_green": float(hg), "h_solution": float(hu), "defect": worst})
    return {"same_mesh": same, "cross_mesh": cross,
            "same_max": max(s["defect"] for s in same),
            "cross_decreasing": bool(all(b["defect"] < a["defect"] for a, b in zip(cross, cross[1:])))}


# --- geometry studies -----------------------------------------------------------------

def chain_constant_study(domains, n=100, seed=0):
    """Chains for random pairs per domain: invariant outcomes and max k / log(R0/ρ)."""
    rows = []
    for dom in domains:
        ok, ratios, cases, failures = 0, [], {}, {}
        for x, y in random_chain_queries(dom, n, seed):
            try:
                ch = chain_of_balls(dom, x, y, check=False)
            except GreenlabError as exc:
                failures[type(exc).__name__] = failures.get(type(exc).__name__, 0) + 1
                continue
            rep = chain_invariants(dom, ch)
            ok += int(rep["all"])
            for k, v in rep.items():
                if v is False:
                    failures[k] = failures.get(k, 0) + 1
            ratios.append(rep["ratio"])
            cases[ch.case] = cases.get(ch.case, 0) + 1
        rows.append({"domain": dom.name, "n": n, "passed": ok, "max_ratio": float(max(ratios)),
                     "cases": cases, "failures": failures})
    m = [r["max_ratio"] for r in rows]
    return {"rows": rows, "chain_constant": float(max(m)), "spread": relative_spread(m)}


def _boundary_point(domain, rng):
    a, b = domain.edges
    L = domain.edge_lengths
    i = rng.choice(len(L), p=L / L.sum())
    return a[i] + rng.uniform() * (b[i] - a[i]), domain.inward_normals()[i]


def appendix_study(domain, n_two_scale=200, n_escape=100, seed=0):
    """Two-scale length ratios and escape-segment bounds on random samples."""
    rng = np.random.default_rng(seed)
    R0 = domain.R0
    ratios, two_ok = [], True
    for _ in range(n_two_scale):
        x0, _ = _boundary_point(domain, rng)
        R = np.exp(rng.uniform(np.log(1e-3 * R0), np.log(R0 / 2)))
        ts = two_scale_points(domain, x0, R)
        L, tol = ts.ratio * R, rounding_slack(R, x0)
        two_ok &= bool(R - tol <= L <= 1.001 * R + tol)
        ratios.append(ts.ratio)
    esc = {"a": [], "b": []}
    for case in ("a", "b"):
        while len(esc[case]) < n_escape:
            p, nrm = _boundary_point(domain, rng)
            d = np.exp(rng.uniform(np.log(1e-3 * R0), np.log(0.2 * R0)))
            y = p + d * nrm
            if not domain.contains(y)[0]:
                continue
            _, dist, _ = domain.nearest_boundary_point(y)
            if case == "a":
                if dist >= R0 / 4:
                    continue
                rho = dist * rng.uniform(0.05, 0.95)
                lo, hi = dist - rho, np.sqrt(5.0) * dist
            else:
                rho = np.exp(rng.uniform(np.log(dist), np.log(0.24 * R0)))
                if rho < dist:
                    continue
                lo, hi = 2 * rho, np.sqrt(17.0) * rho
            s = escape_segment(domain, y, rho)
            if s.case != case:
                continue
            tol = rounding_slack(2 * dist if case == "a" else 4 * rho, y)
            esc[case].append({"length": s.length, "lo": float(lo), "hi": float(hi),
                              "ok": bool(lo - tol <= s.length <= hi + tol)})
    ok_a = all(e["ok"] for e in esc["a"])
    ok_b = all(e["ok"] for e in esc["b"])
    r = np.asarray(ratios)
    return {"domain": domain.name, "two_scale_min": float(r.min()), "two_scale_max": float(r.max()),
            "two_scale_ok": two_ok,
            "escape_a_ok": ok_a, "escape_b_ok": ok_b,
            "n_two_scale": len(ratios), "n_escape": {k: len(v) for k, v in esc.items()}}
