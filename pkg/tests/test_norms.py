import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenlab.errors import FitError, InvalidParameter
from greenlab.mesh import triangulate
from greenlab.norms import (ClosedForm, Region, empirical_q0, holder_seminorm, inequality_ratio, log_slope_fit,
                            lq_norm, region_points, region_rule, weak_l2, weak_l2_values)


@pytest.fixture(scope="module")
def dmesh(disk):
    return triangulate(disk, 0.05, grading=(np.zeros(2), 10.0))


@pytest.fixture(scope="module")
def smesh(square):
    return triangulate(square, 0.1)


def _const(mesh, c):
    return ClosedForm(mesh, lambda x: np.full(len(x), c), lambda x: np.zeros((len(x), 2)))


def _inv_r(mesh, y):
    return ClosedForm(mesh, lambda x: 1.0 / np.linalg.norm(x - y, axis=1))


# --- regions --------------------------------------------------------------------------

def test_region_measures(disk, dmesh):
    c, r = np.array([0.2, -0.1]), 0.3
    ball = region_rule(dmesh, Region.ball(c, r))
    assert ball.measure == pytest.approx(np.pi * r * r, rel=1e-12)
    ann = region_rule(dmesh, Region.annulus(c, r))
    assert ann.measure == pytest.approx(disk.area - np.pi * r * r, rel=1e-12)
    assert region_rule(dmesh, Region.domain()).measure == pytest.approx(disk.area, rel=1e-13)
    edge = region_rule(dmesh, Region.ball(disk.vertices[0], 0.1))
    assert edge.measure == pytest.approx(disk.clipped_area(disk.vertices[0], 0.1), rel=1e-12)
    assert region_rule(dmesh, Region.ball(c, r)) is ball


# --- weak L2 --------------------------------------------------------------------------------

def test_weak_l2_constant(dmesh):
    c, R = 3.0, 0.25
    v = weak_l2(_const(dmesh, c), Region.ball((0.1, 0.1), R), quantity="u").value
    assert v == pytest.approx(c * np.sqrt(np.pi * R * R), rel=1e-12)


def test_weak_l2_inverse_distance(dmesh):
    # on Ω \ B_δ(y) the superlevel sets of 1/r are rings, t·|{1/r > t}|^{1/2} = √π·(1 − t²δ²)^{1/2}
    # peaks at t = 1; excising B_δ keeps every superlevel set above mesh scale
    y, delta = np.zeros(2), 0.02
    v = weak_l2(_inv_r(dmesh, y), Region.annulus(y, delta), quantity="u").value
    assert v == pytest.approx(np.sqrt(np.pi * (1 - delta ** 2)), rel=0.01)


def test_weak_l2_values_ties():
    assert weak_l2_values([2.0, 2.0, 1.0], [0.5, 0.5, 1.0]) == pytest.approx(2.0)
    assert weak_l2_values([1.0, 1.0], [0.25, 0.75]) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(v=st.lists(st.floats(0, 100), min_size=1, max_size=30), w=st.floats(0.01, 2))
def test_weak_l2_bounded_by_l2(v, w):
    v = np.array(v)
    wts = np.full(len(v), w)
    top = v.max()
    # scaled so that squaring tiny samples does not underflow the L2 oracle
    l2 = top * np.sqrt(np.sum(wts * (v / top) ** 2)) if top > 0 else 0.0
    assert weak_l2_values(v, wts) <= l2 * (1 + 1e-12) + 1e-300
    assert weak_l2_values(v, wts) <= v.max() * np.sqrt(wts.sum()) * (1 + 1e-12) + 1e-300


# --- Lq ----------------------------------------------------------------------------------------

@pytest.mark.parametrize("q", [1.0, 1.5, 2.2, 4.0])
def test_lq_constant_ball(dmesh, q):
    c, R = 2.0, 0.3
    v = lq_norm(_const(dmesh, c), q, Region.ball((0.0, 0.2), R), "u").value
    assert v == pytest.approx(c * (np.pi * R * R) ** (1 / q), rel=1e-12)


def test_lq_nesting(dmesh):
    f = _inv_r(dmesh, np.array([0.31, -0.2]))
    for q in (1.0, 2.0, 3.0):
        a = lq_norm(f, q, Region.ball((0.3, -0.2), 0.1), "u").value
        b = lq_norm(f, q, Region.ball((0.3, -0.2), 0.2), "u").value
        assert a <= b


def test_lq_annulus_oracle(dmesh):
    y = np.zeros(2)
    R, S = 0.2, 0.6
    f = _inv_r(dmesh, y)
    inner = lq_norm(f, 1.0, Region.annulus(y, R), "u", order=6).value
    outer = lq_norm(f, 1.0, Region.annulus(y, S), "u", order=6).value
    assert inner - outer == pytest.approx(2 * np.pi * (S - R), abs=1e-6)


def test_lq_errors(dmesh):
    with pytest.raises(InvalidParameter):
        lq_norm(_const(dmesh, 1.0), 0.5, quantity="u")
    with pytest.raises(InvalidParameter):
        lq_norm(_const(dmesh, 1.0), 2.0, quantity="p")


# --- Hölder ------------------------------------------------------------------------------------

def test_holder_constant(square, smesh):
    assert holder_seminorm(_const(smesh, 5.0), 0.5, square, (0.5, 0.5), 0.2).value == 0.0


def test_holder_linear_exact_on_pairs(square, smesh):
    f = ClosedForm(smesh, lambda x: x[:, 0])
    budget = 500
    v = holder_seminorm(f, 0.5, square, (0.5, 0.5), 0.2, budget).value
    n = int((1 + np.sqrt(1 + 8 * budget)) // 2)
    pts = region_points(square, smesh, (0.5, 0.5), 0.2, n)
    i, j = np.triu_indices(len(pts), 1)
    d = np.linalg.norm(pts[i] - pts[j], axis=1)
    assert v == pytest.approx(np.max(np.abs(pts[i, 0] - pts[j, 0]) / np.sqrt(d)), rel=1e-12)
    assert v <= np.sqrt(0.4) * (1 + 1e-12)


def test_holder_root_corner(square, smesh):
    f = ClosedForm(smesh, lambda x: np.linalg.norm(x, axis=1) ** 0.5)
    vals = [holder_seminorm(f, 0.5, square, (0.0, 0.0), 1.0, b).value for b in (50, 500, 5000)]
    assert vals[0] <= vals[1] <= vals[2] <= 1.0 + 1e-12
    assert vals[2] >= 0.99


# --- log slope ---------------------------------------------------------------------------------

def test_log_slope_synthetic():
    K = 2.0
    r = np.repeat(0.01 * 2.0 ** np.arange(6), 3)
    s, c, res = log_slope_fit(3 * np.log(K / r) + 1, r, K)
    assert (s, c) == (pytest.approx(3.0), pytest.approx(1.0)) and res <= 1e-12


def test_log_slope_errors():
    r = 0.01 * 2.0 ** np.arange(5)
    with pytest.raises(FitError):
        log_slope_fit(np.log(1 / r), r, 1.0)
    r = np.linspace(0.1, 0.2, 8)
    with pytest.raises(FitError):
        log_slope_fit(np.log(1 / r), r, 1.0)
    r = 0.01 * 2.0 ** np.arange(6)
    with pytest.raises(FitError):
        log_slope_fit(np.log(1 / r), r, 1.0, eps=0.01)


def test_log_slope_residual_grows_with_noise():
    rng = np.random.default_rng(0)
    r = 0.01 * 2.0 ** np.arange(7)
    clean = 0.08 * np.log(2 / r)
    noise = rng.normal(size=len(r))
    res = [log_slope_fit(clean + a * noise, r, 2.0)[2] for a in (0.0, 1e-3, 1e-2)]
    assert res[0] < res[1] < res[2]


# --- inequality ratios --------------------------------------------------------------------------

def test_ratio_constant_is_zero(disk, dmesh):
    f = _const(dmesh, 4.0)
    for kind, q in (("sobolev_poincare_local", 1.5), ("sobolev_poincare_global", 1.5), ("morrey", 4.0)):
        assert inequality_ratio(kind, f, disk, (0.1, 0.0), 0.4, q).value == 0.0


def test_ratio_local_sp_affine(disk, dmesh):
    a = np.array([0.6, -0.8])
    f = ClosedForm(dmesh, lambda x: x @ a, lambda x: np.broadcast_to(a, (len(x), 2)))
    R, x0 = 0.4, np.array([0.1, 0.05])
    rep = inequality_ratio("sobolev_poincare_local", f, disk, x0, R, 1.5)
    r = R / 8
    lhs = (5 * np.pi / 8 * r ** 8 / 8) ** (1 / 6)       # ‖a·(z − x0)‖_{L6(B_r)} with |a| = 1
    rhs = (np.pi * R * R) ** (1 / 1.5)
    assert rep.value == pytest.approx(lhs / rhs, rel=1e-6)


def test_ratio_morrey_linear(disk, dmesh):
    f = ClosedForm(dmesh, lambda x: x[:, 0], lambda x: np.column_stack([np.ones(len(x)), np.zeros(len(x))]))
    R, x0, budget = disk.R0, np.array([0.05, 0.0]), 2000
    rep = inequality_ratio("morrey", f, disk, x0, R, 4.0, budget)
    n = int((1 + np.sqrt(1 + 8 * budget)) // 2)
    pts = region_points(disk, dmesh, x0, R / 8, n)
    i, j = np.triu_indices(len(pts), 1)
    d = np.linalg.norm(pts[i] - pts[j], axis=1)
    lhs = np.max(np.abs(pts[i, 0] - pts[j, 0]) / np.sqrt(d))
    assert rep.value == pytest.approx(lhs / (np.pi * R * R) ** 0.25, rel=1e-6)


def test_ratio_scale_gate(disk, dmesh):
    with pytest.raises(InvalidParameter, match=r"R ∈ \(0, R0\]"):
        inequality_ratio("reverse_holder", _const(dmesh, 1.0), disk, (0, 0), 2 * disk.R0, 2.5)
    with pytest.raises(InvalidParameter):
        inequality_ratio("morrey", _const(dmesh, 1.0), disk, (0, 0), 0.1, 1.5)
    with pytest.raises(InvalidParameter):
        inequality_ratio("nope", _const(dmesh, 1.0), disk, (0, 0), 0.1)


def test_empirical_q0_logic():
    grid = [2.1, 2.5, 3.0, 4.0]
    stable = [[1.0, 1.1, 1.2, 1.3], [1.01, 1.12, 1.25, 1.31]]
    assert empirical_q0(stable, grid)[0] == 4.0
    broken = [[1.0, 1.1, 1.2, 1.3], [1.01, 1.12, 2.0, 1.31]]
    assert empirical_q0(broken, grid)[0] == 2.5
    assert empirical_q0([[1.0, np.inf], [1.0, np.inf]], [2.1, 2.5])[0] == 2.1
    assert empirical_q0([[1.0], [3.0]], [2.1])[0] == 2.0
