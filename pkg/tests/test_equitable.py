import json

import numpy as np
import pytest

from pinblock import netmodel
from pinblock.equitable import (Partition, build_Tq, check_equitable, coarsest_equitable,
                                contrast_rows, equitable_partition, indicator, quotient_pair)
from pinblock.numkernel import is_orthogonal

from conftest import pair_from_edges


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def brute_force_coarsest(ext):
    """Fewest-cluster equitable partition by enumerating every set partition."""
    n = ext.shape[0] - 1
    best = None
    for part in set_partitions(list(range(n))):
        p = Partition(tuple(sorted(tuple(sorted(c)) for c in part)))
        if check_equitable(ext, p) < 1e-12 and (best is None or p.m < best.m):
            best = p
    return best


def test_fig2_partition(fig2_pair):
    part = equitable_partition(fig2_pair)
    assert part.clusters == ((0,), (1, 2, 3, 4))


def test_fig5_partition_has_eight_clusters(fig5_pair):
    part = equitable_partition(fig5_pair)
    assert part.m == 8
    assert (0, 1) in part.clusters


@pytest.mark.parametrize("seed", range(12))
def test_matches_brute_force_on_small_graphs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    net = netmodel.gen_erdos_renyi(n, 0.5, seed=seed)
    net = netmodel.pick_pins(net, int(rng.integers(1, n + 1)), seed=seed)
    ext = netmodel.build_extended(netmodel.build_pair(net))
    assert coarsest_equitable(ext) == brute_force_coarsest(ext)


def test_partition_is_fixpoint(fig5_pair):
    ext = netmodel.build_extended(fig5_pair)
    part = coarsest_equitable(ext)
    assert check_equitable(ext, part) < 1e-12
    assert coarsest_equitable(ext, initial=part) == part


def test_irrational_weights_use_tolerant_splitting():
    w = np.sqrt(2.0)
    pair = pair_from_edges(4, [(1, 2, w), (1, 3, w), (2, 4, 1.0), (3, 4, 1.0)], (1,))
    part = equitable_partition(pair)
    assert part.clusters == ((0,), (1, 2), (3,))


def test_path_all_pinned_is_one_cluster():
    pair = pair_from_edges(4, [(1, 2), (2, 3), (3, 4)], (1, 2, 3, 4))
    # every row of the extended Laplacian sums to -1, so one cluster suffices
    assert equitable_partition(pair).clusters == ((0, 1, 2, 3),)


def test_partition_json_round_trip(fig5_pair):
    part = equitable_partition(fig5_pair)
    assert Partition.from_json(part.to_json()) == part
    assert json.loads(part.to_json())[0] == [1, 2]


def test_contrast_rows_are_orthonormal():
    for k in range(1, 7):
        c = contrast_rows(k)
        assert c.shape == (k - 1, k)
        assert np.allclose(c @ c.T, np.eye(k - 1))
        assert np.allclose(c.sum(axis=1), 0)
    assert np.allclose(contrast_rows(2), [[-1 / np.sqrt(2), 1 / np.sqrt(2)]])


def test_Tq_block_diagonalizes(fig5_pair):
    part = equitable_partition(fig5_pair)
    e = indicator(part)
    tq, owner = build_Tq(e)
    assert is_orthogonal(tq)
    assert owner.size == fig5_pair.n - part.m
    m = part.m
    lt = tq @ fig5_pair.L @ tq.T
    rt = tq @ fig5_pair.R @ tq.T
    assert np.abs(lt[:m, m:]).max() < 1e-12
    assert np.abs(rt[:m, m:]).max() < 1e-12
    q = quotient_pair(fig5_pair, e)
    assert np.allclose(q.L, lt[:m, :m])
    assert np.allclose(q.R, rt[:m, :m])
