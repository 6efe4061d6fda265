"""Verification suites: Green function estimates, duality and chains of balls."""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..errors import GreenlabError
from ..geometry import CHAIN_CONSTANT, chain_of_balls
from ..green import approx_green, green_values, representation_check
from ..mesh import triangulate
from ..norms import ColumnStack, Region, holder_seminorm, log_slope_fit, lq_norm, weak_l2
from ..stokes_fem import assemble
from .plan import DOMAIN_PRESETS, ExperimentPlan
from .plots import write_plots
from .report import SuiteReport
from .studies import (STOKESLET_SLOPE, annulus_slopes, appendix_study, chain_constant_study,
                      duality_pairs, duality_study, inequality_study, log_bound_profile, relative_spread,
                      standard_data)

_DIRS = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])


def parallel_map(fn, items, threads=0):
    """Order-preserving map; threads = 0 picks the CPU count, 1 runs inline."""
    items = list(items)
    n = int(threads) if threads else (os.cpu_count() or 1)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))


def _setup(name, plan):
    rep = SuiteReport(name, plan=plan.to_dict())
    try:
        dom = plan.build_domain()
        cf = plan.build_coefficients()
        bad = plan.check(name, dom)
    except GreenlabError as exc:
        rep.aborted = str(exc)
        return rep, None, None
    if bad:
        rep.aborted = "; ".join(bad)
        return rep, None, None
    return rep, dom, cf


def _norm_pair(pair, q, region):
    return lq_norm(pair, q, region, "Du").value + lq_norm(pair, q, region, "p").value


def _spread_ok(entries, tol):
    """Finite ratios whose maxima at each fixed R vary over ε by at most tol (relative)."""
    if not np.all(np.isfinite([e["ratio"] for e in entries])):
        return False, float("inf")
    worst = 0.0
    for R in sorted({e["R"] for e in entries}):
        by_eps = {}
        for e in entries:
            if e["R"] == R:
                by_eps[e["eps"]] = max(by_eps.get(e["eps"], 0.0), e["ratio"])
        worst = max(worst, relative_spread(list(by_eps.values())))
    return worst <= tol, worst


# --- Green function estimates -----------------------------------------------------------------------

def _m1_pole(plan, dom, cf, y, q0):
    m1 = plan["m1"]
    R0 = dom.R0
    mesh = plan.build_mesh(dom, cf, y)
    system = assemble(mesh, cf)
    eps_list = plan.eps_list(R0)
    aq = [q for q in m1["annulus_q"] if q <= q0]
    out = {"pole": y.tolist(), "dofs": system.n_velocity, "local": [], "annulus": [], "holder": [], "weak_l2": []}
    for eps in eps_list:
        cols = approx_green(dom, cf, mesh, y, eps, system=system, q_list=())
        pair = ColumnStack(cols)
        out["weak_l2"].append({"eps": eps, "DG": weak_l2(pair, quantity="Du").value,
                               "Pi": weak_l2(pair, quantity="p").value})
        for Rf in m1["local_R"]:
            R = Rf * R0
            if eps <= R / 8 * (1 + 1e-12):
                centers = [y] + [c for c in y + 0.5 * R * _DIRS if dom.contains(c)[0]]
                for c in centers:
                    for q in m1["local_q"]:
                        v = _norm_pair(pair, q, Region.ball(c, R))
                        out["local"].append({"eps": eps, "q": q, "R": R, "center": c.tolist(),
                                             "ratio": v * R ** (1 - 2 / q)})
                for q in aq:
                    v = _norm_pair(pair, q, Region.annulus(y, R))
                    out["annulus"].append({"eps": eps, "q": q, "R": R, "ratio": v * R ** (1 - 2 / q)})
        if eps == min(eps_list):
            for Rf in m1["holder_R"]:
                R = Rf * R0
                for x in y + R * _DIRS:
                    if not dom.in_closure(x[None])[0]:
                        continue
                    for q in aq:
                        mu = 1 - 2 / q
                        v = holder_seminorm(pair, mu, dom, x, R / 16, m1["holder_budget"],
                                            seed=plan["seed"]).value
                        out["holder"].append({"eps": eps, "q": q, "R": R, "center": x.tolist(), "ratio": v * R ** mu})
    # the finest solve also carries the log-bound profile (probes start at 2ε)
    eps_a = m1["annulus_eps"] * R0
    cols = approx_green(dom, cf, mesh, y, eps_a, system=system, q_list=())
    prof = log_bound_profile(cols, dom)
    out["log_bound"] = {"eps": eps_a, "K": prof["K"], "r": prof["r"].tolist(), "G": prof["G"].tolist(),
                        "ratio": prof["ratio"].tolist()}
    lo, hi = m1["annulus_R"]
    out["annulus_slopes"] = {f"{q:g}": v for q, v in
                             annulus_slopes(cols, aq, lo * R0, hi * R0, m1["annulus_points"]).items()}
    return out


def estimate_q0(plan, dom, cf):
    m1 = plan["m1"]
    y = plan.poles[0]
    meshes = [plan.build_mesh(dom, cf, y, h=h) for h in m1["q0_h"]]
    return inequality_study(dom, cf, meshes, plan.poles, [f * dom.R0 for f in m1["q0_R"]],
                            q_grid=m1["q0_grid"], seed=plan["seed"])


def run_theorem_m1(plan: ExperimentPlan) -> SuiteReport:
    """Local, annulus, Hölder, weak-L2 and log-bound ratio families for every pole."""
    rep, dom, cf = _setup("m1", plan)
    if rep.aborted:
        return rep
    m1 = plan["m1"]
    tol = m1["variation_tol"]
    if m1["q0"] is None:
        try:
            study = estimate_q0(plan, dom, cf)
        except GreenlabError as exc:
            rep.aborted = f"q0 estimate failed: {exc}"
            return rep
        q0 = study["q0"]
        rep.measurements["q0_study"] = study
    else:
        q0 = float(m1["q0"])
    rep.measurements["q0"] = q0
    rep.add("q0_above_2", q0 > 2, q0, 2.0)

    def task(y):
        try:
            return _m1_pole(plan, dom, cf, y, q0)
        except GreenlabError as exc:
            return {"pole": y.tolist(), "error": f"{type(exc).__name__}: {exc}"}

    poles = parallel_map(task, plan.poles, plan["threads"])
    errors = [p["error"] for p in poles if "error" in p]
    rep.add("solves", not errors, len(errors), 0, "; ".join(errors) or None)
    poles = [p for p in poles if "error" not in p]
    fams = {"local": [], "annulus": [], "holder": []}
    weak, logb, maxima = {}, {}, {}
    for p in poles:
        key = "y=({:.4g},{:.4g})".format(*p["pole"])
        for fam in fams:
            fams[fam].extend(dict(e, pole=p["pole"]) for e in p[fam])
        weak[key] = p["weak_l2"]
        logb[key] = p["log_bound"]
        small = [w for w in p["weak_l2"] if w["eps"] <= dom.R0 / 4 * (1 + 1e-12)]
        for part in ("DG", "Pi"):
            vals = [w[part] for w in small]
            s = relative_spread(vals) if vals else 0.0
            rep.add(f"weak_l2_{part}_uniform[{key}]", s <= tol, s, tol)
            maxima[f"weak_l2_{part}"] = max(maxima.get(f"weak_l2_{part}", 0.0), max(w[part] for w in p["weak_l2"]))
        for qs, fit in p["annulus_slopes"].items():
            dev = abs(fit["slope"] - fit["target"])
            rep.add(f"annulus_slope_q{qs}[{key}]", dev <= m1["slope_tol"], fit["slope"], fit["target"],
                    f"|slope − target| = {dev:.4f}, tolerance {m1['slope_tol']}")
        ratio = np.asarray(p["log_bound"]["ratio"])
        rep.add(f"log_bound_finite[{key}]", bool(np.all(np.isfinite(ratio))), float(ratio.max()))
        maxima["log_bound"] = max(maxima.get("log_bound", 0.0), float(ratio.max()))
        if cf.name == "identity" and dom.boundary_distance(np.asarray(p["pole"]))[0] >= dom.R0 / 8:
            lb = p["log_bound"]
            try:
                slope, _, _ = log_slope_fit(lb["G"], lb["r"], lb["K"], lb["eps"])
            except GreenlabError as exc:
                rep.add(f"stokeslet_slope[{key}]", False, None, STOKESLET_SLOPE, str(exc))
            else:
                rel = slope / STOKESLET_SLOPE
                rep.add(f"stokeslet_slope[{key}]", abs(rel - 1) <= m1["stokeslet_tol"], slope, STOKESLET_SLOPE,
                        f"slope / (1/4π) = {rel:.4f}")
    for fam, entries in fams.items():
        qs = sorted({e["q"] for e in entries})
        for q in qs:
            sel = [e for e in entries if e["q"] == q]
            vals = [e["ratio"] for e in sel]
            maxima[f"{fam}_q{q:g}"] = float(max(vals))
            if fam == "holder":
                rep.add(f"holder_bounded_q{q:g}", bool(np.all(np.isfinite(vals))), float(max(vals)))
            else:
                ok, s = _spread_ok(sel, tol)
                rep.add(f"{fam}_bounded_q{q:g}", ok, s, tol, "relative spread over ε of the maxima at fixed R")
    rep.measurements.update({"maxima": maxima, "weak_l2": weak, "log_bound": logb,
                             "annulus_slopes": {"y=({:.4g},{:.4g})".format(*p["pole"]): p["annulus_slopes"]
                                                for p in poles},
                             "dofs": [p["dofs"] for p in poles]}, **fams)
    if m1["baseline"]:
        base = SuiteReport.load(m1["baseline"]).measurements.get("maxima", {})
        for k, v in sorted(maxima.items()):
            if k in base:
                d = abs(v - base[k]) / abs(base[k])
                rep.add(f"baseline_{k}", d <= m1["baseline_tol"], v, base[k], f"relative drift {d:.4f}")
    return rep


# --- symmetry ---------------------------------------------------------------------------

def run_symmetry_suite(plan: ExperimentPlan) -> SuiteReport:
    """Mollified duality over random pole pairs, a corrupted-pairing control and same-mesh representation."""
    rep, dom, cf = _setup("symmetry", plan)
    if rep.aborted:
        return rep
    sym = plan["symmetry"]
    eps, eps_adj = sym["eps"]
    try:
        mesh = triangulate(dom, sym["h"], coefficients=cf)
        pairs = duality_pairs(dom, sym["n_pairs"], eps, eps_adj, plan["seed"])
        res = duality_study(dom, cf, mesh, pairs, eps, eps_adj)
        bad = duality_study(dom, cf, mesh, pairs[:3], eps, eps_adj, corrupt=(sym["corrupt_shift"], 0.0))
        rows = []
        y = pairs[0][1]
        adj = assemble(mesh, cf, adjoint=True)
        cols = approx_green(dom, cf, mesh, y, eps, q_list=())
        for d in standard_data(dom):
            r = representation_check(dom, cf, mesh, y, eps, d["f"], d["f_alpha"], d["g"],
                                     green_cols=cols, adjoint_system=adj)
            rows.append({"data": d["name"], "defect": r.max_defect})
    except GreenlabError as exc:
        rep.aborted = f"{type(exc).__name__}: {exc}"
        return rep
    rep.add("duality", res["max_defect"] <= sym["tol"], res["max_defect"], sym["tol"])
    rep.add("corrupted_pairing_flagged", bad["max_defect"] > sym["tol"], bad["max_defect"], sym["tol"],
            "negative control: the defect must exceed the tolerance")
    worst = max(r["defect"] for r in rows)
    rep.add("representation_same_mesh", worst <= sym["tol"], worst, sym["tol"])
    rep.measurements.update({"defects": res["defects"], "corrupted_defects": bad["defects"],
                             "pairs": [[x.tolist(), y.tolist()] for x, y in pairs],
                             "self_adjoint": cf.is_symmetric, "dofs": res["dofs"], "representation": rows})
    return rep


# --- chains ---------------------------------------------------------------------------

def chain_green_averages(domain, coefficients, mesh, cols, x):
    """Ball averages of G_ε along the chain from x, with the telescoping bound checked."""
    y = cols[0].pole
    ch = chain_of_balls(domain, x, y)
    avg = np.array([np.column_stack([c.ball_average(z, r) for c in cols])
                    for z, r in zip(ch.centers, ch.radii)])
    G, _ = green_values(cols, x)
    Gx = G[0]
    inc = np.linalg.norm(np.diff(avg, axis=0), ord=2, axis=(1, 2))
    first = float(np.linalg.norm(Gx - avg[0], ord=2))
    N0 = float(max(inc.max(initial=0.0), first))
    tail = float(np.linalg.norm(avg[-1], ord=2))
    lhs = float(np.linalg.norm(Gx, ord=2))
    return {"rho": ch.rho, "k": ch.k, "case": ch.case, "N0": N0, "tail": tail, "G": lhs,
            "bound": 2 * ch.k * N0 + tail, "holds": lhs <= 2 * ch.k * N0 + tail,
            "averages": np.linalg.norm(avg, ord=2, axis=(1, 2)).tolist(), "increments": inc.tolist()}


def _comparative_chains(domain):
    """Interior and near-boundary poles at the same ρ."""
    R0 = domain.R0
    rho = R0 / 64
    a, b = domain.edges
    i = int(np.argmax(domain.edge_lengths))
    nrm = domain.inward_normals()[i]
    yb = 0.5 * (a[i] + b[i]) + 1e-3 * R0 * nrm
    xb = yb + rho * nrm
    yi = domain.centroid
    xi = yi + rho * np.array([1.0, 0.0])
    kb = chain_of_balls(domain, xb, yb).k
    ki = chain_of_balls(domain, xi, yi).k
    return {"rho": rho, "k_interior": ki, "k_boundary": kb}


def run_chain_suite(plan: ExperimentPlan) -> SuiteReport:
    """Chain invariants on certified domains, two-scale and escape bounds, and G_ε averaged along chains."""
    rep, dom, cf = _setup("chain", plan)
    if rep.aborted:
        return rep
    cfg = plan["chain"]
    seed = plan["seed"]
    domains = [DOMAIN_PRESETS[n]() for n in cfg["domains"]]
    try:
        study = chain_constant_study(domains, cfg["n_pairs"], seed)
        comp = _comparative_chains(domains[0])
        app = [appendix_study(d, seed=seed) for d in domains]
    except GreenlabError as exc:
        rep.aborted = f"{type(exc).__name__}: {exc}"
        return rep
    for row in study["rows"]:
        rep.add(f"invariants[{row['domain']}]", row["passed"] == row["n"], row["passed"], row["n"],
                None if not row["failures"] else str(row["failures"]))
        rep.add(f"length_bound[{row['domain']}]", row["max_ratio"] <= CHAIN_CONSTANT, row["max_ratio"],
                CHAIN_CONSTANT)
    rep.add("chain_constant_stable", study["spread"] <= cfg["spread_tol"], study["spread"], cfg["spread_tol"])
    rep.add("interior_shorter_than_boundary", comp["k_interior"] < comp["k_boundary"],
            comp["k_interior"], comp["k_boundary"])
    for a in app:
        rep.add(f"two_scale[{a['domain']}]", a["two_scale_ok"], a["two_scale_max"], 1.001)
        rep.add(f"escape[{a['domain']}]", a["escape_a_ok"] and a["escape_b_ok"])
    # G_ε along interior chains on the plan's domain
    R0 = dom.R0
    eps = cfg["green_eps"] * R0
    rng = np.random.default_rng(seed)
    green_rows = []
    try:
        for y in plan.poles:
            if dom.boundary_distance(y)[0] <= R0 / 8:
                continue
            mesh = plan.build_mesh(dom, cf, y)
            cols = approx_green(dom, cf, mesh, y, eps, q_list=())
            for rho in np.geomspace(4 * eps, 0.9 * R0 / 8, cfg["green_pairs"]):
                phi = rng.uniform(0, 2 * np.pi)
                x = y + rho * np.array([np.cos(phi), np.sin(phi)])
                green_rows.append(dict(chain_green_averages(dom, cf, mesh, cols, x), pole=y.tolist()))
    except GreenlabError as exc:
        rep.add("green_chains", False, None, None, f"{type(exc).__name__}: {exc}")
    if green_rows:
        rep.add("telescoping_bound", all(r["holds"] for r in green_rows),
                max(r["G"] / r["bound"] for r in green_rows), 1.0)
        rep.measurements["N0"] = max(r["N0"] for r in green_rows)
    rep.measurements.update({"chain_study": study, "comparative": comp, "appendix": app,
                             "green_chains": green_rows})
    return rep


RUNNERS = {"m1": run_theorem_m1, "symmetry": run_symmetry_suite, "chain": run_chain_suite}


def run_plan(plan: ExperimentPlan, suites=None, out_dir=None, plots=True):
    """Run suites in order; with out_dir, write one JSON report per suite (and SVG plots)."""
    suites = plan["suites"] if suites is None else suites
    reports = []
    for name in suites:
        rep = RUNNERS[name](plan)
        if out_dir is not None:
            rep.write(out_dir)
            if plots:
                write_plots(rep, out_dir)
        reports.append(rep)
    return reports
