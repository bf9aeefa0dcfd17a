import numpy as np
import pytest

from pinblock import netmodel
from pinblock.control import controllable_dim
from pinblock.errors import ValidationError
from pinblock.netmodel import LaplacianPair
from pinblock.numkernel import is_orthogonal
from pinblock.sbdcore import (build_commutant_system, canonical_permute, sample_commuting_P,
                              sbd_transform)

from conftest import pair_from_edges


def test_canonical_permute_puts_pins_first(fig5_pair):
    canon, perm = canonical_permute(fig5_pair)
    assert perm[:3].tolist() == [0, 1, 5]
    assert np.array_equal(np.diag(canon.R), [1, 1, 1] + [0] * 7)


def test_canonical_permute_rejects_non_binary_R():
    with pytest.raises(ValidationError):
        canonical_permute(LaplacianPair(L=np.zeros((2, 2)), R=np.diag([0.5, 0.0])))


def test_commutant_kernel_contains_identity(fig5_pair):
    canon, _ = canonical_permute(fig5_pair)
    system = build_commutant_system(canon)
    ident = np.concatenate([np.eye(3).ravel(order="F"), np.eye(7).ravel(order="F")])
    z = system.kernel
    assert np.linalg.norm(ident - z @ (z.T @ ident)) < 1e-10
    assert np.linalg.norm(system.S @ ident) < 1e-10


def test_sampled_P_commutes(fig5_pair):
    canon, _ = canonical_permute(fig5_pair)
    system = build_commutant_system(canon)
    p1, p2, _ = sample_commuting_P(system, 3)
    p = np.zeros((10, 10))
    p[:3, :3], p[3:, 3:] = p1, p2
    assert np.linalg.norm(p @ canon.L - canon.L @ p) < 1e-10
    assert np.linalg.norm(p @ canon.R - canon.R @ p) < 1e-12


def test_fig2_blocks(fig2_pair):
    dec = sbd_transform(fig2_pair, seed=0)
    assert dec.sizes == [2, 1, 1, 1]
    assert [b.cls for b in dec.blocks] == ["qc", "ru", "ru", "ru"]
    assert np.allclose(dec.blocks[0].spectrum, [-5.0, 0.0], atol=1e-9)
    scalars = sorted(float(b.L[0, 0]) for b in dec.blocks[1:])
    assert np.allclose(scalars, [-(3 + np.sqrt(2)), -3.0, -(3 - np.sqrt(2))], atol=1e-9)


def test_fig5_blocks(fig5_pair):
    dec = sbd_transform(fig5_pair, seed=0)
    assert dec.sizes == [7, 1, 1, 1]
    assert [b.cls for b in dec.blocks] == ["qc", "rc", "qu", "ru"]


@pytest.mark.parametrize("seed", range(10))
def test_sbd_properties_random(seed):
    rng = np.random.default_rng(seed)
    net = netmodel.gen_erdos_renyi(12, 0.25, seed=seed)
    pair = netmodel.build_pair(netmodel.pick_pins(net, int(rng.integers(1, 12)), seed=seed))
    dec = sbd_transform(pair, seed=seed)
    assert is_orthogonal(dec.T)
    assert dec.residual_L < 1e-8 * np.linalg.norm(pair.L)
    assert dec.residual_R < 1e-8
    assert dec.driven_size == controllable_dim(pair.L, pair.R)
    assert all(b.size == 1 for b in dec.blocks if b.kind == "undriven")
    w = np.linalg.eigvalsh(dec.RT)
    assert np.all(np.minimum(np.abs(w), np.abs(w - 1)) < 1e-8)
    assert np.trace(dec.RT) == pytest.approx(pair.s)


def test_seed_independence_of_sizes(fig5_pair):
    sizes = {tuple(sbd_transform(fig5_pair, seed=s).sizes) for s in range(5)}
    assert sizes == {(7, 1, 1, 1)}


def test_disconnected_pinned_components_split():
    pair = pair_from_edges(5, [(1, 2), (3, 4), (4, 5)], (1, 3))
    dec = sbd_transform(pair, seed=0)
    assert dec.size_multiset() == (3, 2)
