"""Experiment plans: one JSON document with per-suite blocks and dotted-key overrides."""
import copy
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from ..coefficients import from_descriptor
from ..errors import InvalidParameter
from ..geometry import (PolygonalDomain, flat_disk, flat_ellipse, flat_stadium, lipschitz_disk,
                        lipschitz_square)
from ..mesh import triangulate

DOMAIN_PRESETS = {"disk": lipschitz_disk, "square": lipschitz_square, "flat_disk": flat_disk,
                  "flat_ellipse": flat_ellipse, "flat_stadium": flat_stadium}

SUITES = ("m1", "symmetry", "chain")

# every accepted key appears here; None marks an optional value
DEFAULTS = {
    "domain": {"preset": "disk", "vertices": None, "name": None, "gamma": None, "R0": None,
               "lipschitz": None, "diameter_K": None},
    "coefficients": {"kind": "identity", "contrast": None, "grid": None, "skew": None, "lambda": None,
                     "scale": None, "frequency": None, "adjoint": None},
    "mesh": {"h": 0.05, "grading_ratio": 10.0},
    "poles": [[0.1, 0.05]],
    "eps": {"J": 5, "values": None},
    "probes": {"n_dir": 8, "factor": 2.0},
    "suites": list(SUITES),
    "out": "greenlab_out",
    "seed": 0,
    "threads": 0,
    "certify": {"gamma": None, "lipschitz": None, "R0": None, "sample_density": 8},
    "m1": {"local_q": [1.0, 1.5], "local_R": [1.0, 0.5, 0.25],
           "annulus_q": [2.2, 2.5], "annulus_eps": 0.0078125, "annulus_R": [0.015625, 0.0625],
           "annulus_points": 9, "holder_R": [0.125, 0.25, 0.5, 1.0], "holder_budget": 2000,
           "q0": None, "q0_h": [0.1, 0.05], "q0_grid": [2.1, 2.25, 2.5, 2.75, 3.0, 3.5, 4.0],
           "q0_R": [0.1, 0.4], "slope_tol": 0.15, "variation_tol": 0.25, "stokeslet_tol": 0.2,
           "baseline": None, "baseline_tol": 0.10},
    "symmetry": {"n_pairs": 20, "eps": [0.1, 0.12], "h": 0.08, "tol": 1e-7, "corrupt_shift": 0.02},
    "chain": {"n_pairs": 100, "domains": ["flat_disk", "flat_ellipse", "flat_stadium"],
              "green_pairs": 4, "green_eps": 0.0078125, "spread_tol": 0.10},
}

_FREE_KEYS = {"poles", "suites", "out", "seed", "threads"}


def _merge(base, update, path=""):
    out = copy.deepcopy(base)
    for key, val in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise InvalidParameter(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise InvalidParameter(f"{where!r} must be an object")
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def parse_override(text):
    """'a.b=value' → (['a', 'b'], value), the value parsed as JSON when possible."""
    if "=" not in text:
        raise InvalidParameter(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    return key.strip().split("."), val


def load_preset(name):
    try:
        text = resources.files("greenlab.presets").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise InvalidParameter(f"unknown preset {name!r}") from None
    return json.loads(text)


@dataclass
class ExperimentPlan:
    config: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d):
        return cls(_merge(DEFAULTS, d or {}))

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def preset(cls, name):
        return cls.from_dict(load_preset(name))

    def with_overrides(self, overrides):
        cfg = copy.deepcopy(self.config)
        for text in overrides:
            keys, val = parse_override(text) if isinstance(text, str) else text
            node, ref = cfg, DEFAULTS
            for k in keys[:-1]:
                if k not in ref or not isinstance(ref[k], dict):
                    raise InvalidParameter(f"unknown configuration key {'.'.join(keys)!r}")
                node, ref = node[k], ref[k]
            if keys[-1] not in ref or isinstance(ref[keys[-1]], dict):
                raise InvalidParameter(f"unknown configuration key {'.'.join(keys)!r}")
            node[keys[-1]] = val
        return ExperimentPlan(cfg)

    def to_dict(self):
        return copy.deepcopy(self.config)

    def to_json(self):
        return json.dumps(self.config, sort_keys=True, indent=1)

    def __getitem__(self, key):
        return self.config[key]

    # --- builders -------------------------------------------------------------
    def build_domain(self) -> PolygonalDomain:
        d = self.config["domain"]
        if d["vertices"] is not None:
            dom = PolygonalDomain(np.asarray(d["vertices"], float), d["diameter_K"], d["gamma"], d["R0"],
                                  d["lipschitz"], d["name"] or "polygon")
        else:
            if d["preset"] not in DOMAIN_PRESETS:
                raise InvalidParameter(f"unknown domain preset {d['preset']!r}; known: {sorted(DOMAIN_PRESETS)}")
            dom = DOMAIN_PRESETS[d["preset"]]()
            if any(d[k] is not None for k in ("gamma", "R0", "lipschitz")):
                gamma = d["gamma"] if d["gamma"] is not None else (None if d["lipschitz"] is not None else dom.gamma)
                lip = d["lipschitz"] if d["lipschitz"] is not None else (None if d["gamma"] is not None else dom.lipschitz)
                dom = dom.with_certificate(gamma, d["R0"] or dom.R0, lip)
        if dom.R0 is None:
            raise InvalidParameter("the domain needs a certified R0")
        return dom

    def build_coefficients(self):
        return from_descriptor({k: v for k, v in self.config["coefficients"].items() if v is not None})

    def build_mesh(self, domain, coefficients, pole=None, h=None):
        m = self.config["mesh"]
        h = m["h"] if h is None else h
        grading = None if pole is None else (np.asarray(pole, float), m["grading_ratio"])
        return triangulate(domain, h, grading=grading, coefficients=coefficients)

    def eps_list(self, R0):
        e = self.config["eps"]
        if e["values"] is not None:
            return [float(v) for v in e["values"]]
        return [R0 * 2.0 ** (-j) for j in range(int(e["J"]) + 1)]

    @property
    def poles(self):
        return [np.asarray(p, float) for p in self.config["poles"]]

    # --- preconditions ----------------------------------------------------------
    def check(self, suite, domain=None):
        """Precondition violations for a suite, each citing the violated range."""
        domain = self.build_domain() if domain is None else domain
        R0 = domain.R0
        bad = []

        def scale_ok(name, fractions):
            for f in fractions:
                if not (0 < f <= 1):
                    bad.append(f"{suite}.{name}: R = {f:g}·R0 violates R ∈ (0, R0]")

        if suite not in SUITES:
            return [f"unknown suite {suite!r}"]
        if suite in ("m1", "symmetry"):
            for y in self.poles:
                if not domain.contains(y)[0]:
                    bad.append(f"pole {y.tolist()} is not an interior point of the domain")
            for eps in self.eps_list(R0):
                if not (0 < eps <= R0):
                    bad.append(f"ε = {eps:g} violates ε ∈ (0, R0]")
        if suite == "m1":
            m1 = self.config["m1"]
            scale_ok("local_R", m1["local_R"])
            scale_ok("holder_R", m1["holder_R"])
            scale_ok("annulus_R", m1["annulus_R"])
            scale_ok("q0_R", m1["q0_R"])
            for q in m1["local_q"]:
                if not (1 <= q < 2):
                    bad.append(f"m1.local_q: q = {q:g} violates 1 ≤ q < 2")
            for q in m1["annulus_q"]:
                if not q > 2:
                    bad.append(f"m1.annulus_q: q = {q:g} violates 2 < q ≤ q0")
            lo, hi = m1["annulus_R"]
            if hi < 4 * lo:
                bad.append("m1.annulus_R must span two octaves")
            if lo < 2 * m1["annulus_eps"]:
                bad.append("m1.annulus_R must start at ≥ 2ε")
            if not (0 < m1["annulus_eps"] <= 1):
                bad.append("m1.annulus_eps violates ε ∈ (0, R0]")
        if suite == "symmetry":
            for eps in self.config["symmetry"]["eps"]:
                if not (0 < eps <= R0):
                    bad.append(f"symmetry.eps = {eps:g} violates ε ∈ (0, R0]")
        if suite == "chain":
            for name in self.config["chain"]["domains"]:
                if name not in DOMAIN_PRESETS:
                    bad.append(f"chain.domains: unknown domain {name!r}")
                elif DOMAIN_PRESETS[name]().gamma is None:
                    bad.append(f"chain.domains: {name!r} carries no flatness certificate")
        return bad
