import numpy as np
import pytest

from pinblock import netmodel
from pinblock.control import (build_Tc, controllable_dim, kalman_matrix, kalman_rank,
                              pbh_controllable_dim)
from pinblock.numkernel import is_orthogonal

from conftest import pair_from_edges, path_laplacian


def test_kalman_matrix_shape_and_first_block(fig2_pair):
    k = kalman_matrix(fig2_pair.L, fig2_pair.R, normalize=False)
    assert k.shape == (5, 25)
    assert np.array_equal(k[:, :5], fig2_pair.R)


def test_fixture_controllable_dimensions(fig2_pair, fig5_pair):
    assert controllable_dim(fig2_pair.L, fig2_pair.R) == 2
    assert controllable_dim(fig5_pair.L, fig5_pair.R) == 8


def test_path_pinned_at_end_is_controllable():
    L = path_laplacian(6)
    R = np.diag([1.0, 0, 0, 0, 0, 0])
    assert controllable_dim(L, R) == 6


def test_path_pinned_in_middle_loses_antisymmetric_modes():
    # odd path pinned at the centre: the mirror symmetry hides antisymmetric modes
    L = path_laplacian(5)
    R = np.diag([0.0, 0, 1, 0, 0])
    assert controllable_dim(L, R) == 3


@pytest.mark.parametrize("seed", range(15))
def test_three_rank_estimates_agree_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    net = netmodel.gen_erdos_renyi(9, 0.3, seed=seed)
    pair = netmodel.build_pair(netmodel.pick_pins(net, int(rng.integers(1, 9)), seed=seed))
    c = controllable_dim(pair.L, pair.R)
    assert c == pbh_controllable_dim(pair.L, pair.R)
    assert c == kalman_rank(pair.L, pair.R)


def test_Tc_split(fig5_pair):
    split = build_Tc(fig5_pair.L, fig5_pair.R)
    assert split.c == 8
    assert is_orthogonal(split.Tc)
    assert split.coupling_residual < 1e-10
    assert np.allclose(split.Lu, np.diag(np.diag(split.Lu)), atol=1e-10)
    lt = split.Tc.T @ fig5_pair.L @ split.Tc
    assert np.allclose(np.sort(np.linalg.eigvalsh(lt)), np.sort(np.linalg.eigvalsh(fig5_pair.L)))


def test_fully_pinned_is_fully_controllable():
    pair = pair_from_edges(4, [(1, 2), (2, 3), (3, 4)], (1, 2, 3, 4))
    split = build_Tc(pair.L, pair.R)
    assert split.c == 4 and split.Lu.shape == (0, 0)
