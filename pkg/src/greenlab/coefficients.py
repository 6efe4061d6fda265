"""Coefficient tensors A_{αβ}(x) for the Stokes operator D_α(A_{αβ} D_β u).

A field is stored as a 4×4 matrix per point with rows indexed by (α, i)
and columns by (β, j), i.e. ``M[2α+i, 2β+j] = A_{αβ}[i, j]``.  The quadratic
form Σ A_{αβ}ξ_β·ξ_α is then ξᵀMξ, and the adjoint tensor (A_{βα})ᵀ is Mᵀ.
"""
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import InvalidParameter

BLOCKS = [(0, 0), (0, 1), (1, 0), (1, 1)]


@dataclass(frozen=True, eq=False)
class CoefficientField:
    kind: str                      # constant | piecewise_constant_grid | closed_form
    matrix_fn: Callable            # (n, 2) points -> (n, 4, 4)
    lam: float
    name: str = "custom"
    descriptor: dict = field(default_factory=dict)
    grid: Optional[Tuple[float, float, float, float, int]] = None   # x0, y0, x1, y1, cells per side
    base: Optional["CoefficientField"] = None                       # set on adjoint views

    def matrices(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.matrix_fn(x)

    def blocks(self, x):
        """Array of shape (n, 2, 2, 2, 2) indexed [point, α, β, i, j]."""
        M = self.matrices(x)
        return M.reshape(-1, 2, 2, 2, 2).transpose(0, 1, 3, 2, 4)

    def grid_lines(self):
        """Interior cell faces (vertical x-values, horizontal y-values)."""
        if self.grid is None:
            return np.zeros(0), np.zeros(0)
        x0, y0, x1, y1, n = self.grid
        k = np.arange(1, n)
        return x0 + (x1 - x0) * k / n, y0 + (y1 - y0) * k / n

    @property
    def is_symmetric(self):
        pts = np.random.default_rng(0).uniform(-1, 1, (64, 2))
        M = self.matrices(pts)
        return bool(np.allclose(M, M.transpose(0, 2, 1), atol=0, rtol=0))

    def scaled(self, a):
        if a <= 0:
            raise InvalidParameter("scale factor must be positive")
        fn = self.matrix_fn
        d = dict(self.descriptor, scale=a * self.descriptor.get("scale", 1.0))
        return CoefficientField(self.kind, lambda x: a * fn(x), min(a * self.lam, self.lam / a),
                                f"{a:g}*{self.name}", d, self.grid)

    def to_json(self):
        return json.dumps(self.descriptor, sort_keys=True)


def evaluate(f: CoefficientField, x):
    """The four 2×2 blocks at a single point, keyed by (α, β) ∈ {1,2}²."""
    B = f.blocks(np.asarray(x, float).reshape(1, 2))[0]
    return {(a + 1, b + 1): B[a, b].copy() for a, b in BLOCKS}


def adjoint(f: CoefficientField) -> CoefficientField:
    """Adjoint tensor (A_{βα})ᵀ, i.e. the transposed 4×4 matrix; same λ."""
    if f.base is not None:
        return f.base
    fn = f.matrix_fn
    d = dict(f.descriptor, adjoint=not f.descriptor.get("adjoint", False))
    return CoefficientField(f.kind, lambda x: np.swapaxes(fn(x), 1, 2), f.lam, f"adjoint({f.name})",
                            d, f.grid, base=f)


# --- ellipticity --------------------------------------------------------------

@dataclass
class EllipticityReport:
    passed: bool
    lam: float
    min_coercivity: float
    max_block_norm: float
    n_points: int


def certify_ellipticity(f: CoefficientField, n=10_000, box=(-1.5, -1.5, 1.5, 1.5), seed=0, lam=None):
    """Check ξᵀMξ ≥ λ|ξ|² and |A_{αβ}| ≤ 1/λ on random (x, ξ) samples.

    Coercivity is measured both through random ξ and the exact minimum
    eigenvalue of the symmetric part at each sampled point.
    """
    lam = f.lam if lam is None else lam
    rng = np.random.default_rng(seed)
    x = rng.uniform(box[:2], box[2:], (n, 2))
    M = f.matrices(x)
    xi = rng.normal(size=(n, 4))
    q = np.einsum("ni,nij,nj->n", xi, M, xi) / np.sum(xi * xi, axis=1)
    sym = 0.5 * (M + M.transpose(0, 2, 1))
    emin = np.linalg.eigvalsh(sym)[:, 0]
    coer = float(min(q.min(), emin.min()))
    B = f.blocks(x)
    norms = np.linalg.norm(B.reshape(n * 4, 2, 2), ord=2, axis=(1, 2))
    bmax = float(norms.max())
    tol = 1e-12
    ok = coer >= lam * (1 - tol) and bmax <= (1 / lam) * (1 + tol)
    return EllipticityReport(bool(ok), float(lam), coer, bmax, n)


# --- presets ------------------------------------------------------------------

_I4 = np.eye(4)
# antisymmetric coupling between the (1,1)/(2,2) and (1,2)/(2,1) components
_S = np.zeros((4, 4))
_S[0, 3], _S[3, 0], _S[1, 2], _S[2, 1] = 1.0, -1.0, 1.0, -1.0


def constant(M, lam=None, name="constant"):
    M = np.asarray(M, float).reshape(4, 4)
    if lam is None:
        lam = _constant_lambda(M)
    return CoefficientField("constant", lambda x: np.broadcast_to(M, (len(x), 4, 4)).copy(), lam, name,
                            {"kind": name, "lambda": lam})


def _constant_lambda(M):
    emin = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    B = M.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 2, 2)
    bmax = np.linalg.norm(B, ord=2, axis=(1, 2)).max()
    return float(min(emin, 1.0 / bmax, 1.0))


def identity():
    f = constant(_I4, 1.0, "identity")
    f.descriptor.update(kind="identity", contrast=1.0, grid=0)
    return f


def scaled_identity(a):
    f = constant(a * _I4, min(a, 1.0 / a), "scaled_identity")
    f.descriptor.update(kind="scaled_identity", contrast=float(a), grid=0)
    return f


def cell_index(x, grid):
    """Cell indices with faces assigned to the lower-left cell; outside points clamp."""
    x0, y0, x1, y1, n = grid
    hx, hy = (x1 - x0) / n, (y1 - y0) / n
    i = np.clip(np.ceil((x[:, 0] - x0) / hx).astype(int) - 1, 0, n - 1)
    j = np.clip(np.ceil((x[:, 1] - y0) / hy).astype(int) - 1, 0, n - 1)
    return i, j


def checkerboard(contrast, m=2, box=(-1.0, -1.0, 1.0, 1.0), skew=0.0):
    """Alternating c·(I + s·S) with c ∈ {1, κ} on a 2ᵐ × 2ᵐ grid.

    ``skew = 0`` gives the isotropic checkerboard δ_{αβ}I / κδ_{αβ}I; a nonzero
    skew adds an antisymmetric coupling, making the operator non-self-adjoint.
    """
    if contrast <= 0:
        raise InvalidParameter("contrast must be positive")
    n = 2 ** int(m)
    grid = (box[0], box[1], box[2], box[3], n)
    base = _I4 + skew * _S

    def fn(x):
        i, j = cell_index(x, grid)
        c = np.where((i + j) % 2 == 0, 1.0, contrast)
        return c[:, None, None] * base

    cmin, cmax = min(1.0, contrast), max(1.0, contrast)
    if skew == 0:
        lam = cmin / cmax
        name = "checkerboard"
    else:
        lam = min(cmin, 1.0 / max(cmax, cmax * abs(skew)))
        name = "skew_checkerboard"
    desc = {"kind": name, "contrast": float(contrast), "grid": int(m), "lambda": float(lam)}
    if skew:
        desc["skew"] = float(skew)
    return CoefficientField("piecewise_constant_grid", fn, float(lam), name, desc, grid)


def skew_checkerboard(contrast, m=2, skew=0.5, box=(-1.0, -1.0, 1.0, 1.0)):
    return checkerboard(contrast, m, box, skew)


def rotated_anisotropic(contrast=0.25, frequency=1.0):
    """A_{αβ}(x) = a_{αβ}(x) I with a = Q(θ) diag(1, μ) Q(θ)ᵀ, θ = π·f·x¹x²."""
    mu = float(contrast)
    if not (0 < mu <= 1):
        raise InvalidParameter("anisotropy contrast must lie in (0, 1]")

    def fn(x):
        th = np.pi * frequency * x[:, 0] * x[:, 1]
        c, s = np.cos(th), np.sin(th)
        a11 = c * c + mu * s * s
        a22 = s * s + mu * c * c
        a12 = (1 - mu) * c * s
        a = np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)  # (n, α, β)
        M = np.einsum("nab,ij->naibj", a, np.eye(2)).reshape(len(x), 4, 4)
        return M

    desc = {"kind": "rotated_anisotropic", "contrast": mu, "grid": 0, "lambda": mu, "frequency": frequency}
    return CoefficientField("closed_form", fn, mu, "rotated_anisotropic", desc)


PRESETS = {
    "identity": lambda d: identity(),
    "scaled_identity": lambda d: scaled_identity(d.get("contrast", 1.0)),
    "checkerboard": lambda d: checkerboard(d.get("contrast", 10.0), d.get("grid", 2)),
    "skew_checkerboard": lambda d: skew_checkerboard(d.get("contrast", 10.0), d.get("grid", 2),
                                                     d.get("skew", 0.5)),
    "rotated_anisotropic": lambda d: rotated_anisotropic(d.get("contrast", 0.25), d.get("frequency", 1.0)),
}


def from_descriptor(d) -> CoefficientField:
    """Build a preset from {"kind", "contrast", "grid", "lambda"}; a declared λ must be certified."""
    if isinstance(d, str):
        d = json.loads(d)
    kind = d.get("kind")
    if kind not in PRESETS:
        raise InvalidParameter(f"unknown coefficient preset {kind!r}; known: {sorted(PRESETS)}")
    f = PRESETS[kind](d)
    declared = d.get("lambda")
    if declared is not None and declared > f.lam * (1 + 1e-12):
        raise InvalidParameter(f"declared lambda {declared} exceeds the certified bound {f.lam}")
    if d.get("scale", 1.0) != 1.0:
        f = f.scaled(d["scale"])
    if d.get("adjoint"):
        f = adjoint(f)
    return f
