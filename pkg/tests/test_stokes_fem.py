import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenlab.coefficients import checkerboard, identity, skew_checkerboard
from greenlab.errors import CompatibilityError, InvalidParameter
from greenlab.mesh import triangulate
from greenlab.stokes_fem import (assemble, load_vector, mollified_delta, operator_norm_probe, p2_gradients,
                                 p2_values, solve_conormal)
from greenlab.verify.studies import manufactured_study


@pytest.fixture(scope="module")
def sq_mesh(square):
    return triangulate(square, 0.1)


@pytest.fixture(scope="module")
def sq_system(sq_mesh):
    return assemble(sq_mesh, identity())


@settings(max_examples=30, deadline=None)
@given(l1=st.floats(0, 1), l2=st.floats(0, 1))
def test_p2_partition_of_unity(l1, l2):
    if l1 + l2 > 1:
        l1, l2 = 1 - l1, 1 - l2
    L = np.array([[1 - l1 - l2, l1, l2]])
    assert p2_values(L).sum() == pytest.approx(1.0, abs=1e-14)
    dl = np.array([[[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]])
    assert np.allclose(p2_gradients(L, dl).sum(axis=-2), 0.0, atol=1e-13)


def test_identity_velocity_block_is_vector_laplacian(sq_system):
    A, n2 = sq_system.A.toarray(), sq_system.n2
    assert np.abs(A[:n2, n2:]).max() == 0 and np.abs(A[n2:, :n2]).max() == 0
    assert np.allclose(A[:n2, :n2], A[n2:, n2:], atol=1e-14)
    assert np.allclose(A, A.T, atol=1e-13)
    # scalar P2 stiffness annihilates constants and is positive semidefinite
    assert np.abs(A[:n2, :n2] @ np.ones(n2)).max() <= 1e-12
    assert np.linalg.eigvalsh(A[:n2, :n2]).min() >= -1e-10


def test_constant_velocity_mode(sq_system):
    n2 = sq_system.n2
    one = np.concatenate([np.ones(n2), np.zeros(n2)])
    assert np.abs(sq_system.A @ one).max() <= 1e-12
    # a constant velocity has zero divergence pairing against every pressure basis function
    assert np.abs(sq_system.B @ one).max() <= 1e-13
    assert sq_system.C @ one == pytest.approx([1.0, 0.0], abs=1e-13)


def test_adjoint_is_transpose(disk, skew):
    mesh = triangulate(disk, 0.2, coefficients=skew)
    K = assemble(mesh, skew).K
    Ka = assemble(mesh, skew, adjoint=True).K
    assert abs(Ka - K.T).max() <= 1e-12
    assert abs(K - K.T).max() > 1e-3


def test_zero_data_gives_zero(sq_system):
    fld = solve_conormal(sq_system)
    assert not np.any(fld.velocity) and not np.any(fld.pressure)


def test_divergence_constraint(sq_system):
    fld = solve_conormal(sq_system, g=lambda x: np.ones(len(x)))
    _, Du, _, w, _ = fld.at_quadrature(4)
    div = Du[..., 0, 0] + Du[..., 1, 1]
    assert np.sum(w * div) == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(fld.mean_velocity()) <= 1e-12


def test_compatibility_error(sq_system):
    with pytest.raises(CompatibilityError):
        solve_conormal(sq_system, f=lambda x: np.ones((len(x), 2)))


def test_linearity(sq_system):
    rng = np.random.default_rng(0)
    M = rng.normal(size=(2, 2))

    def fa(x):
        return np.sin(x[:, 0] + 2 * x[:, 1])[:, None, None] * M

    a = solve_conormal(sq_system, f_alpha=fa)
    b = solve_conormal(sq_system, f_alpha=lambda x: 10 * fa(x))
    assert np.allclose(b.velocity, 10 * a.velocity, rtol=1e-10, atol=1e-13)
    assert np.allclose(b.pressure, 10 * a.pressure, rtol=1e-10, atol=1e-13)


def test_load_vector_layout(sq_mesh, sq_system):
    b = load_vector(sq_mesh, g=lambda x: np.ones(len(x)))
    assert b.shape == (sq_system.size,)
    assert b[2 * sq_system.n2:2 * sq_system.n2 + sq_mesh.n_vertices].sum() == pytest.approx(1.0, abs=1e-13)


def test_manufactured_quick():
    res = manufactured_study((0.2, 0.1))
    assert res["slope_u_l2"] > 2.5 and res["slope_p_l2"] > 1.5
    assert res["rows"][-1]["residual"] <= 1e-9


# --- mollified delta ----------------------------------------------------------------------

def test_interior_delta(sq_mesh, square):
    eps = 0.1
    y = np.array([0.5, 0.5])
    md = mollified_delta(sq_mesh, square, y, eps)
    assert md.clipped_area == pytest.approx(np.pi * eps * eps, rel=1e-13)
    assert md.value(y)[0] == pytest.approx(-1 / (np.pi * eps * eps) + 1.0)
    assert md.value([0.9, 0.9])[0] == pytest.approx(1.0)
    assert abs(md.weights.sum()) <= 1e-13            # load on a constant test function


def test_clipped_delta_affine_load(sq_mesh, square):
    r, d = 0.1, 0.03
    y = np.array([0.5, d])
    md = mollified_delta(sq_mesh, square, y, r)
    seg = r * r * np.arccos(d / r) - d * np.sqrt(r * r - d * d)
    area = np.pi * r * r - seg
    assert md.clipped_area == pytest.approx(area, rel=1e-12)
    # φ = (x², 0): ⨍_{Ω_ε(y)} x² − ⨍_Ω x² from the circular-segment centroid
    avg = d + 2 * (r * r - d * d) ** 1.5 / (3 * area)
    nodes = sq_mesh.p2_nodes
    assert md.weights @ nodes[:, 1] == pytest.approx(avg - 0.5, abs=1e-8)
    assert md.weights @ nodes[:, 0] == pytest.approx(0.0, abs=1e-12)


def test_delta_errors(sq_mesh, square):
    with pytest.raises(InvalidParameter):
        mollified_delta(sq_mesh, square, np.array([0.5, 0.5]), 0.0)
    with pytest.raises(InvalidParameter):
        mollified_delta(sq_mesh, square, np.array([1.5, 0.5]), 0.1)
    with pytest.raises(InvalidParameter):
        mollified_delta(sq_mesh, square, np.array([0.5, 0.5]), 2 * square.R0)


# --- solvability constant ---------------------------------------------------------------------

@pytest.mark.slow
def test_operator_norm_probe_refinement(square):
    meshes = [triangulate(square, h) for h in (0.2, 0.1, 0.05)]
    one = [r["constant"] for r in operator_norm_probe(meshes, identity(), q=2.0)]
    ten = [r["constant"] for r in operator_norm_probe(meshes, checkerboard(10.0, box=(0, 0, 1, 1)), q=2.0)]
    for vals in (one, ten):
        assert max(abs(b - a) / a for a, b in zip(vals, vals[1:])) <= 0.15
    assert min(ten) > max(one)
