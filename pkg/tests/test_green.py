import numpy as np
import pytest

from greenlab.coefficients import identity, scaled_identity
from greenlab.errors import InvalidPairing, InvalidParameter, ResolutionError
from greenlab.green import (GreenTable, approx_green, duality_identity, eps_ladder, eps_sequence_study,
                            green_table, green_values, probe_points, representation_check)
from greenlab.mesh import triangulate
from greenlab.norms import log_slope_fit
from greenlab.stokes_fem import assemble
from greenlab.verify.studies import log_bound_profile

X = np.array([-0.3, 0.25])
Y = np.array([0.3, -0.2])


@pytest.fixture(scope="module")
def mesh(disk, skew):
    return triangulate(disk, 0.1, coefficients=skew)


@pytest.fixture(scope="module")
def skew_cols(disk, skew, mesh):
    direct = approx_green(disk, skew, mesh, Y, 0.1)
    adj = approx_green(disk, skew, mesh, X, 0.12, adjoint=True)
    return direct, adj


def test_columns_basic(skew_cols):
    direct, _ = skew_cols
    for c in direct:
        assert c.info["residual"] <= 1e-9
        assert c.info["velocity_mean_relative"] <= 1e-10
        assert c.info["divergence"] <= 1e-8
        assert np.isfinite(c.info["apriori_q2.2"])


def test_duality_nonsymmetric(skew_cols):
    direct, adj = skew_cols
    res = duality_identity(direct, adj)
    assert res.relative <= 1e-7
    # pointwise the direct and adjoint Green functions differ
    G, _ = green_values(direct, [[0.0, 0.5]])
    Ga, _ = green_values(adj, [[0.0, 0.5]])
    assert not np.allclose(G, Ga)


def test_duality_self_adjoint_symmetry(disk):
    cf = identity()
    mesh = triangulate(disk, 0.12)
    sysm = assemble(mesh, cf)
    gy = approx_green(disk, cf, mesh, Y, 0.1, system=sysm, q_list=())
    gx = approx_green(disk, cf, mesh, X, 0.1, system=sysm, q_list=())
    ax = approx_green(disk, cf, mesh, X, 0.1, adjoint=True, q_list=())
    assert duality_identity(gy, ax).relative <= 1e-9
    # ⨍_{B(x)} G^{lk}(·, y) = ⨍_{B(y)} G^{kl}(·, x) with only direct solves
    D = np.column_stack([c.ball_average(X, 0.1) for c in gy])
    E = np.column_stack([c.ball_average(Y, 0.1) for c in gx])
    assert np.allclose(D, E.T, atol=1e-12 * np.abs(D).max())


def test_duality_negative_control(disk, skew, mesh, skew_cols):
    direct, _ = skew_cols
    wrong = approx_green(disk, identity(), mesh, X, 0.12, adjoint=True, q_list=())
    assert duality_identity(direct, wrong).relative > 1e-2


def test_duality_needs_common_mesh(disk, skew_cols):
    direct, _ = skew_cols
    other = triangulate(disk, 0.2)
    adj = approx_green(disk, identity(), other, X, 0.12, adjoint=True, q_list=())
    with pytest.raises(InvalidPairing):
        duality_identity(direct, adj)


def test_resolution_error(disk):
    coarse = triangulate(disk, 0.3)
    with pytest.raises(ResolutionError):
        approx_green(disk, identity(), coarse, Y, 0.005)


def test_representation_same_mesh(disk, skew, mesh, skew_cols):
    direct, _ = skew_cols
    zero = representation_check(disk, skew, mesh, Y, 0.1, green_cols=direct)
    assert np.all(zero.lhs == 0) and np.all(zero.rhs == 0) and zero.max_defect == 0
    one = representation_check(disk, skew, mesh, Y, 0.1, g=lambda x: np.ones(len(x)), green_cols=direct)
    assert one.max_defect <= 1e-7

    def fa(x):
        F = np.zeros((len(x), 2, 2))
        F[:, 0, 0] = np.cos(x[:, 1])
        F[:, 1, 1] = np.sin(x[:, 0])
        return F

    flux = representation_check(disk, skew, mesh, Y, 0.1, f_alpha=fa, green_cols=direct)
    assert flux.max_defect <= 1e-7 and np.abs(flux.lhs).max() > 0


def test_representation_cross_mesh(disk, skew, mesh, skew_cols):
    direct, _ = skew_cols
    fine = triangulate(disk, 0.05, coefficients=skew)
    r = representation_check(disk, skew, fine, Y, 0.1, g=lambda x: np.ones(len(x)),
                             green_mesh=mesh, green_cols=direct)
    assert r.max_defect <= 0.02


def test_table_csv(tmp_path, skew_cols, disk):
    direct, _ = skew_cols
    pts = probe_points(disk, Y, 0.1)
    table = green_table(direct, pts)
    text = table.to_csv(tmp_path / "g.csv")
    lines = text.splitlines()
    assert lines[0] == ",".join(GreenTable.HEADER)
    assert len(lines) == len(pts) + 1
    assert np.all(table.distances >= 0.2 - 1e-12)
    with pytest.raises(InvalidParameter):
        green_table(direct, [Y])


def test_eps_ladder():
    assert eps_ladder(0.5, 2) == [0.5, 0.25, 0.125]
    with pytest.raises(InvalidParameter):
        eps_ladder(0.5, 7)


def test_eps_halving_far_field(disk):
    cf = identity()
    y = np.array([0.1, 0.05])
    mesh = triangulate(disk, 0.05, grading=(y, 10.0))
    sysm = assemble(mesh, cf)
    far = y + np.array([[0.5, 0.0], [0.0, -0.6], [-0.5, 0.3]])
    G1, _ = green_values(approx_green(disk, cf, mesh, y, 0.04, system=sysm, q_list=()), far)
    G2, _ = green_values(approx_green(disk, cf, mesh, y, 0.02, system=sysm, q_list=()), far)
    assert np.max(np.abs(G1 - G2)) <= 0.01 * np.max(np.abs(G1))


def test_eps_sequence_cauchy(disk):
    cf = identity()
    y = np.array([0.1, 0.05])
    mesh = triangulate(disk, 0.1, grading=(y, 10.0))
    probes = y + np.array([[0.6, 0.0], [0.0, 0.6]])
    rows = eps_sequence_study(disk, cf, mesh, y, eps_ladder(disk.R0, 4)[1:], probes=probes)
    G = np.array([r["probe_G"] for r in rows])
    diffs = np.abs(np.diff(G, axis=0)).max(axis=(1, 2))
    assert np.all(diffs[1:] < diffs[:-1])
    assert all("local_ratio" in r for r in rows if r["eps"] <= disk.R0 / 8)


def test_scaled_coefficients_halve_slope(disk):
    y = disk.centroid
    eps = disk.R0 / 64
    mesh = triangulate(disk, 0.1, grading=(y, 10.0))
    slopes = []
    for cf in (identity(), scaled_identity(2.0)):
        prof = log_bound_profile(approx_green(disk, cf, mesh, y, eps, q_list=()), disk)
        slopes.append(log_slope_fit(prof["G"], prof["r"], prof["K"], eps)[0])
    assert slopes[1] / slopes[0] == pytest.approx(0.5, rel=1e-8)
