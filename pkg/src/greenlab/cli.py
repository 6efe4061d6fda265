"""greenlab command line: certify, chain, green, verify, report.

Exit status: 0 success, 1 contract failure, 2 invalid usage.
"""
import argparse
import glob
import json
import os
import sys

import numpy as np

from .errors import GeometryContractViolation, GreenlabError, InvalidParameter, OutOfScale, TooClose
from .geometry import certify_flatness, certify_lipschitz, chain_invariants, chain_of_balls
from .green import approx_green, green_table, probe_points
from .verify import RUNNERS, SUITES, ExperimentPlan, SuiteReport, load_preset, merge_reports
from .verify.plots import write_plots
from .verify.report import jsonable

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _point(text):
    try:
        vals = [float(v) for v in text.replace(";", ",").split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'x1,x2', got {text!r}") from None
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected two coordinates, got {text!r}")
    return np.array(vals)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="plan JSON path or bundled preset name (default: disk)")
    common.add_argument("--out", help="output directory (GREENLAB_OUT overrides)")
    common.add_argument("--threads", type=int, help="worker threads, 0 = auto")
    common.add_argument("--seed", type=int)
    common.add_argument("overrides", nargs="*", metavar="key=value", help="dotted-key plan overrides")
    p = argparse.ArgumentParser(prog="greenlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("certify", parents=[common], help="flatness or Lipschitz certificate of the domain")
    c = sub.add_parser("chain", parents=[common], help="chain of balls from x toward a far point, avoiding y")
    c.add_argument("--x", type=_point, required=True)
    c.add_argument("--y", type=_point, required=True)
    g = sub.add_parser("green", parents=[common], help="approximated Green function table (CSV)")
    g.add_argument("--pole", type=_point, required=True)
    g.add_argument("--eps", type=float, required=True)
    v = sub.add_parser("verify", parents=[common], help="run verification suites")
    v.add_argument("--suite", choices=list(SUITES) + ["all"], default="all")
    sub.add_parser("report", parents=[common], help="merge JSON reports in the output directory")
    return p


def load_plan(args):
    cfg = args.config or "disk"
    if os.path.isfile(cfg):
        try:
            with open(cfg) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {cfg!r}: {exc}") from None
    elif os.path.sep in cfg or cfg.endswith(".json"):
        raise UsageError(f"config file {cfg!r} does not exist")
    else:
        data = load_preset(cfg)
    plan = ExperimentPlan.from_dict(data).with_overrides(args.overrides)
    extra = []
    if args.threads is not None:
        extra.append((["threads"], args.threads))
    if args.seed is not None:
        extra.append((["seed"], args.seed))
    out = os.environ.get("GREENLAB_OUT") or args.out
    if out:
        extra.append((["out"], out))
    return plan.with_overrides(extra)


def _out_dir(plan):
    out = plan["out"]
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out!r}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out!r} is not writable")
    return out


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _dump(obj):
    return json.dumps(jsonable(obj), sort_keys=True, indent=1) + "\n"


def cmd_certify(plan, args):
    out = _out_dir(plan)
    dom = plan.build_domain()
    c = plan["certify"]
    gamma, lip = c["gamma"], c["lipschitz"]
    if gamma is None and lip is None:
        gamma, lip = dom.gamma, dom.lipschitz
    R0 = c["R0"] or dom.R0
    if gamma is not None:
        rep = certify_flatness(dom, gamma, R0, c["sample_density"])
    elif lip is not None:
        rep = certify_lipschitz(dom, lip, R0, c["sample_density"])
    else:
        raise UsageError("no gamma or lipschitz constant given and the domain declares none")
    d = dict(rep.to_dict(), domain=dom.name)
    text = _dump(d)
    _write(os.path.join(out, "certify.json"), text)
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_chain(plan, args):
    out = _out_dir(plan)
    dom = plan.build_domain()
    try:
        ch = chain_of_balls(dom, args.x, args.y, check=False)
    except (OutOfScale, TooClose, InvalidParameter) as exc:
        raise UsageError(str(exc)) from None
    rep = chain_invariants(dom, ch)
    text = _dump(ch.to_dict(rep))
    _write(os.path.join(out, "chain.json"), text)
    sys.stdout.write(text)
    return EXIT_OK if rep["all"] else EXIT_FAIL


def cmd_green(plan, args):
    out = _out_dir(plan)
    dom = plan.build_domain()
    cf = plan.build_coefficients()
    if not (0 < args.eps <= dom.R0):
        raise UsageError(f"--eps must satisfy ε ∈ (0, R0] with R0 = {dom.R0}")
    if not dom.contains(args.pole)[0]:
        raise UsageError("--pole must be an interior point of the domain")
    mesh = plan.build_mesh(dom, cf, args.pole)
    cols = approx_green(dom, cf, mesh, args.pole, args.eps)
    table = green_table(cols, probe_points(dom, args.pole, args.eps, n_dir=plan["probes"]["n_dir"],
                                           factor=plan["probes"]["factor"]))
    text = table.to_csv(os.path.join(out, "green.csv"))
    sys.stdout.write(text)
    info = {k: v for k, v in cols[0].info.items()}
    _write(os.path.join(out, "green_info.json"), _dump({"pole": args.pole, "eps": args.eps, "info": info,
                                                           "dofs": 2 * (mesh.n_vertices + mesh.n_edges)}))
    return EXIT_OK


def cmd_verify(plan, args):
    out = _out_dir(plan)
    suites = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in suites:
        rep = RUNNERS[name](plan)
        rep.write(out)
        write_plots(rep, out)
        status = "PASS" if rep.passed else "FAIL"
        why = "" if rep.passed else " (" + ", ".join(rep.failures) + ")"
        print(f"{status} {name}{why}")
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(plan, args):
    out = _out_dir(plan)
    paths = sorted(p for p in glob.glob(os.path.join(out, "*.json"))
                   if os.path.basename(p)[:-5] in SUITES)
    if not paths:
        raise UsageError(f"no suite reports found in {out!r}")
    reports = [SuiteReport.load(p) for p in paths]
    summary = merge_reports(reports)
    text = _dump(summary)
    _write(os.path.join(out, "summary.json"), text)
    for rep in reports:
        write_plots(rep, out)
    sys.stdout.write(text)
    return EXIT_OK if summary["passed"] else EXIT_FAIL


COMMANDS = {"certify": cmd_certify, "chain": cmd_chain, "green": cmd_green, "verify": cmd_verify,
            "report": cmd_report}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        plan = load_plan(args)
        return COMMANDS[args.command](plan, args)
    except (UsageError, InvalidParameter) as exc:
        print(f"greenlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeometryContractViolation as exc:
        print(f"greenlab {args.command}: contract failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except GreenlabError as exc:
        print(f"greenlab {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
