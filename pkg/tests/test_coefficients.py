import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenlab.coefficients import (adjoint, cell_index, certify_ellipticity, checkerboard, constant, evaluate,
                                   from_descriptor, identity, rotated_anisotropic, scaled_identity,
                                   skew_checkerboard)
from greenlab.errors import InvalidParameter


def test_identity_blocks():
    B = evaluate(identity(), (0.3, -0.2))
    for (a, b), M in B.items():
        assert np.array_equal(M, np.eye(2) if a == b else np.zeros((2, 2)))
    assert identity().lam == 1.0 and identity().is_symmetric


def test_checkerboard_cells():
    cf = checkerboard(10.0, m=2)
    x = np.array([[-0.9, -0.9], [-0.4, -0.9], [0.1, 0.1], [0.6, 0.1]])
    c = cf.matrices(x)[:, 0, 0]
    assert c.tolist() == [1.0, 10.0, 1.0, 10.0]
    assert cf.lam == pytest.approx(0.1)
    # every cell: eigenvalues of the symmetric part lie in [λ, 1/λ]
    pts = np.array([[-0.75 + 0.5 * i, -0.75 + 0.5 * j] for i in range(4) for j in range(4)])
    ev = np.linalg.eigvalsh(cf.matrices(pts))
    assert ev.min() >= cf.lam - 1e-15 and ev.max() <= 1 / cf.lam + 1e-12


def test_cell_faces_go_lower_left():
    grid = (-1.0, -1.0, 1.0, 1.0, 4)
    i, j = cell_index(np.array([[-0.5, -0.5], [-0.5 + 1e-12, 0.0], [-5.0, 5.0]]), grid)
    assert i.tolist() == [0, 1, 0] and j.tolist() == [0, 1, 3]


@pytest.mark.parametrize("cf", [identity(), checkerboard(10.0), skew_checkerboard(10.0), rotated_anisotropic(0.25),
                                scaled_identity(2.0)], ids=lambda c: c.name)
def test_ellipticity_certified(cf):
    rep = certify_ellipticity(cf, n=10_000)
    assert rep.passed, rep


def test_false_lambda_rejected():
    assert not certify_ellipticity(checkerboard(10.0), lam=0.5).passed
    with pytest.raises(InvalidParameter):
        from_descriptor({"kind": "checkerboard", "contrast": 10.0, "lambda": 0.5})


def test_adjoint_involution_and_identity():
    cf = skew_checkerboard(10.0)
    assert not cf.is_symmetric
    x = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    assert adjoint(adjoint(cf)) is cf
    assert np.array_equal(adjoint(cf).matrices(x), np.swapaxes(cf.matrices(x), 1, 2))
    assert np.array_equal(adjoint(identity()).matrices(x), identity().matrices(x))


def test_adjoint_single_block_perturbation():
    M = np.eye(4)
    M[0, 2] = 0.3      # A_{12}[0, 0] only
    cf = constant(M)
    A = evaluate(cf, (0, 0))
    Ad = evaluate(adjoint(cf), (0, 0))
    assert Ad[(2, 1)][0, 0] == pytest.approx(0.3) and Ad[(1, 2)][0, 0] == 0.0
    for key in ((1, 1), (2, 2)):
        assert np.array_equal(A[key], Ad[key])


def test_descriptor_roundtrip():
    for cf in (identity(), checkerboard(10.0), skew_checkerboard(4.0, skew=0.25), rotated_anisotropic(0.5)):
        back = from_descriptor(cf.to_json())
        x = np.random.default_rng(1).uniform(-1, 1, (20, 2))
        assert np.allclose(back.matrices(x), cf.matrices(x))
    with pytest.raises(InvalidParameter):
        from_descriptor({"kind": "nope"})


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.1, 10.0))
def test_scaled_identity_lambda(a):
    cf = scaled_identity(a)
    assert cf.lam == pytest.approx(min(a, 1 / a))
    assert certify_ellipticity(cf, n=200).passed


@settings(max_examples=20, deadline=None)
@given(kappa=st.floats(0.05, 20.0), skew=st.floats(0.0, 1.0))
def test_checkerboard_property(kappa, skew):
    cf = checkerboard(kappa, skew=skew)
    assert certify_ellipticity(cf, n=500).passed
