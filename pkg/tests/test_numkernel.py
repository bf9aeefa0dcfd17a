import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pinblock.errors import ValidationError
from pinblock.numkernel import (Tolerance, block_components, cluster_values, is_orthogonal,
                                nullspace_basis, numeric_rank, off_block_residual,
                                orthonormal_completion, sym_eig)

from conftest import path_laplacian


def test_tolerance_rejects_nonpositive():
    with pytest.raises(ValidationError):
        Tolerance(rank_rel=0.0)
    with pytest.raises(ValidationError):
        Tolerance(zero_abs=-1.0)


def test_path_laplacian_closed_form_spectrum():
    # eigenvalues of the path Laplacian are -2 + 2 cos(pi k / n)
    n = 7
    w, v = sym_eig(path_laplacian(n))
    expected = np.sort(-2 + 2 * np.cos(np.pi * np.arange(n) / n))
    assert np.allclose(w, expected, atol=1e-12)
    assert is_orthogonal(v)


def test_sym_eig_sign_convention():
    _, v = sym_eig(path_laplacian(5))
    for j in range(v.shape[1]):
        first = v[np.flatnonzero(np.abs(v[:, j]) > 1e-12)[0], j]
        assert first > 0


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ValidationError):
        sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_numeric_rank_known_cases():
    assert numeric_rank(np.zeros((3, 3))) == 0
    assert numeric_rank(np.eye(4)) == 4
    u = np.arange(1.0, 5.0)
    assert numeric_rank(np.outer(u, u)) == 1


def test_nullspace_of_laplacian_is_ones():
    k = nullspace_basis(path_laplacian(6))
    assert k.shape == (6, 1)
    assert np.allclose(np.abs(k[:, 0]), 1 / np.sqrt(6))


def test_orthonormal_completion_keeps_leading_columns():
    q = np.linalg.qr(np.random.default_rng(3).standard_normal((6, 2)))[0]
    full = orthonormal_completion(q)
    assert np.allclose(full[:, :2], q)
    assert is_orthogonal(full)


def test_orthonormal_completion_rejects_non_orthonormal():
    with pytest.raises(ValidationError):
        orthonormal_completion(np.ones((3, 1)))


def test_cluster_values_groups_near_duplicates():
    groups = cluster_values(np.array([-3.0, -3.0 + 1e-12, -1.0, 0.0]))
    assert [g.tolist() for g in groups] == [[0, 1], [2], [3]]


def test_block_components_and_residual():
    m = np.zeros((5, 5))
    m[0, 3] = m[3, 0] = 1.0
    m[1, 2] = m[2, 1] = 2.0
    m[4, 4] = 1.0
    comps = block_components([m])
    assert [c.tolist() for c in comps] == [[0, 3], [1, 2], [4]]
    assert off_block_residual(m, comps) == 0.0
    assert off_block_residual(m, [np.arange(3), np.arange(3, 5)]) == pytest.approx(np.sqrt(2.0))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 10**6))
def test_sym_eig_reconstructs(n, seed):
    a = np.random.default_rng(seed).standard_normal((n, n))
    a = a + a.T
    w, v = sym_eig(a)
    assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-10)
    assert np.all(np.diff(w) >= -1e-12)
