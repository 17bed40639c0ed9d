from itertools import combinations

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from bipartite_crd import ArgumentError, PartitionConfig, balanced_partition
from bipartite_crd.partition import (
    cut_weight,
    init_greedy_line,
    init_random,
    line_order,
    partition_labels,
    swap_refine,
)


def random_symmetric(rng, n, density=0.5):
    w = np.triu(rng.uniform(0.1, 1.0, (n, n)) * (rng.random((n, n)) < density), 1)
    return w + w.T


def cliques(sizes):
    n = sum(sizes)
    w = np.zeros((n, n))
    lo = 0
    for s in sizes:
        w[lo:lo + s, lo:lo + s] = 1.0
        lo += s
    np.fill_diagonal(w, 0)
    return w


def path(n):
    w = np.zeros((n, n))
    i = np.arange(n - 1)
    w[i, i + 1] = w[i + 1, i] = 1.0
    return w


def best_bipartition_cut(w):
    n = w.shape[0]
    best = np.inf
    for sub in combinations(range(1, n), n // 2 - 1):
        lab = np.ones(n, dtype=int)
        lab[[0, *sub]] = 0
        best = min(best, cut_weight(w, lab))
    return best


@st.composite
def weighted_graphs(draw, max_n=14):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    density = draw(st.floats(0.0, 1.0))
    return random_symmetric(np.random.default_rng(seed), n, density)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(k=1), dict(k=2, tolerance=-0.1), dict(k=2, init="spectral"),
                                    dict(k=2, max_passes=-1)])
    def test_rejects(self, kw):
        with pytest.raises(ArgumentError):
            PartitionConfig(**kw)

    def test_too_few_units(self):
        with pytest.raises(ArgumentError):
            balanced_partition(np.zeros((3, 3)), PartitionConfig(k=4))

    def test_asymmetric_rejected(self):
        w = np.zeros((4, 4))
        w[0, 1] = 1.0
        with pytest.raises(ArgumentError):
            balanced_partition(w, PartitionConfig(k=2))


class TestExamples:
    def test_two_cliques(self):
        w = cliques([5, 5])
        perm = np.random.default_rng(0).permutation(10)
        w = w[np.ix_(perm, perm)]
        for init in ("greedy_line", "random"):
            c = balanced_partition(w, PartitionConfig(k=2, init=init, seed=3))
            assert cut_weight(w, c.labels) == 0.0
            block = (perm >= 5).astype(int)
            assert len(set(zip(block, c.labels))) == 2

    def test_local_optimality(self, rng):
        for _ in range(20):
            w = random_symmetric(rng, 8)
            lab = balanced_partition(w, PartitionConfig(k=2, seed=1)).labels
            base = cut_weight(w, lab)
            for u in np.flatnonzero(lab == 0):
                for v in np.flatnonzero(lab == 1):
                    swapped = lab.copy()
                    swapped[u], swapped[v] = 1, 0
                    assert base <= cut_weight(w, swapped) + 1e-12

    def test_near_optimal_on_random_instances(self):
        rng = np.random.default_rng(2024)
        good = 0
        for _ in range(100):
            w = random_symmetric(rng, 8)
            got = cut_weight(w, balanced_partition(w, PartitionConfig(k=2)).labels)
            good += got <= 1.2 * best_bipartition_cut(w) + 1e-12
        assert good >= 95

    def test_path_halves(self):
        lab = init_greedy_line(path(10), 2, seed=4)
        assert set(lab[:5]) == {lab[0]} and set(lab[5:]) == {lab[9]} and lab[0] != lab[9]

    def test_path_order(self):
        order = line_order(path(7), seed=5)
        assert order.tolist() in (list(range(7)), list(range(6, -1, -1)))

    def test_empty_weights_is_permutation_segments(self):
        n, k, seed = 12, 3, 8
        lab = init_greedy_line(sp.csr_matrix((n, n)), k, seed)
        perm = np.random.default_rng(seed).permutation(n)
        assert np.array_equal(lab[perm], np.repeat(np.arange(k), n // k))

    def test_zero_weights_return_init(self):
        cfg = PartitionConfig(k=3, seed=2)
        res = partition_labels(np.zeros((9, 9)), cfg)
        assert np.array_equal(res.labels, init_greedy_line(np.zeros((9, 9)), 3, 2))
        assert res.passes == 0

    def test_random_init_segments(self):
        lab = init_random(11, 4, seed=1)
        sizes = np.bincount(lab)
        assert sizes.max() - sizes.min() <= 1


class TestInvariants:
    @given(weighted_graphs(), st.integers(2, 4), st.integers(0, 1000))
    def test_segments_balanced(self, w, k, seed):
        if w.shape[0] < k:
            return
        sizes = np.bincount(init_greedy_line(w, k, seed), minlength=k)
        assert sizes.max() - sizes.min() <= 1

    @given(weighted_graphs(), st.integers(2, 4), st.integers(0, 1000), st.sampled_from(["greedy_line", "random"]))
    def test_valid_monotone_deterministic(self, w, k, seed, init):
        if w.shape[0] < k:
            return
        cfg = PartitionConfig(k=k, seed=seed, init=init, tolerance=0.0)
        res = partition_labels(w, cfg)
        assert np.all(np.diff(res.cut_history) <= 1e-9)
        assert res.cut_history[-1] == pytest.approx(cut_weight(w, res.labels), abs=1e-9)
        c = balanced_partition(w, cfg)
        assert np.array_equal(c.labels, res.labels)
        assert c.sizes.max() - c.sizes.min() <= 1

    def test_max_passes_zero_is_init(self, rng):
        w = random_symmetric(rng, 10)
        res = partition_labels(w, PartitionConfig(k=2, max_passes=0))
        assert np.array_equal(res.labels, init_greedy_line(w, 2, 0))

    def test_zero_weight_nodes_move_freely(self):
        # nodes 4 and 5 carry no balance weight and should join the cluster they attach to
        w = np.zeros((6, 6))
        for a, b in [(0, 1), (2, 3), (4, 0), (4, 1), (5, 2), (5, 3)]:
            w[a, b] = w[b, a] = 1.0
        nw = np.array([1, 1, 1, 1, 0, 0])
        res = swap_refine(w, np.array([0, 1, 0, 1, 1, 0]), 2, node_weights=nw)
        lab = res.labels
        assert cut_weight(w, lab) == 0.0
        assert np.bincount(lab[:4]).tolist() == [2, 2]
