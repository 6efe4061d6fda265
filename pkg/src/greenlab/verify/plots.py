"""SVG line charts of suite measurements."""
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "greenlab"


def _legend(ax):
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=7)


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def log_bound_plot(meas, path):
    """|G_ε| against log(K/r), one series per pole."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, prof in sorted(meas.get("log_bound", {}).items()):
        r = np.asarray(prof["r"])
        o = np.argsort(-r)
        ax.plot(np.log(prof["K"] / r[o]), np.asarray(prof["G"])[o], "o-", ms=3, label=key)
    ax.set_xlabel("log(K/r)")
    ax.set_ylabel("|G_ε(x, y)|")
    _legend(ax)
    return _save(fig, path)


def ratio_cloud_plot(meas, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for fam in ("local", "annulus", "holder"):
        pts = [(e["R"], e["ratio"]) for e in meas.get(fam, [])]
        if pts:
            R, v = np.array(pts).T
            ax.loglog(R, v, ".", label=fam)
    ax.set_xlabel("R")
    ax.set_ylabel("scaled ratio")
    _legend(ax)
    return _save(fig, path)


def weak_l2_plot(meas, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key, rows in sorted(meas.get("weak_l2", {}).items()):
        eps = [r["eps"] for r in rows]
        ax.semilogx(eps, [r["DG"] for r in rows], "o-", label=f"DG {key}")
        ax.semilogx(eps, [r["Pi"] for r in rows], "s--", label=f"Π {key}")
    ax.set_xlabel("ε")
    ax.set_ylabel("weak-L2")
    _legend(ax)
    return _save(fig, path)


def chain_average_plot(meas, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for i, ch in enumerate(meas.get("green_chains", [])):
        ax.plot(np.abs(ch["averages"]), ".-", label=f"ρ={ch['rho']:.3g}" if i < 6 else None)
    ax.set_xlabel("ball index j")
    ax.set_ylabel("|ball average of G_ε|")
    _legend(ax)
    return _save(fig, path)


PLOTS = {"m1": [("m1_log_bound.svg", log_bound_plot), ("m1_ratios.svg", ratio_cloud_plot),
                ("m1_weak_l2.svg", weak_l2_plot)],
         "chain": [("chain_averages.svg", chain_average_plot)]}


def write_plots(report, out_dir):
    if report.aborted:
        return []
    os.makedirs(out_dir, exist_ok=True)
    return [fn(report.measurements, os.path.join(out_dir, name)) for name, fn in PLOTS.get(report.suite, [])]
