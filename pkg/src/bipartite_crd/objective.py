"""Clustering objectives over experimental units.

``objective_h`` is the cross-cluster mass of the folded graph, the quantity
that governs the difference-in-means bias under the linear outcome model.
``objective_trvar`` is the same sum with the dose normalization applied on
both sides (its minimizer maximizes the trace of the dose variance).
``direct_cut_cost`` is the plain cut of the bipartite graph itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError
from .graph import NORMALIZED, BipartiteGraph, FoldedGraph, NormalizationMode, fold_graph

__all__ = [
    "Clustering",
    "objective_h",
    "objective_trvar",
    "direct_cut_cost",
    "cov_trace",
    "cov_trace_samples",
    "assignment_covariances",
    "partition_input",
    "trvar_graph",
    "direct_graph",
    "best_interference_labels",
]


def _balanced(sizes: np.ndarray, tolerance: float) -> bool:
    lo, hi = int(sizes.min()), int(sizes.max())
    return hi - lo <= 1 or hi <= (1.0 + tolerance) * lo * (1 + 1e-12)


@dataclass(frozen=True, eq=False)
class Clustering:
    """Cluster labels over experimental units.

    Every label lies in ``[0, k)`` and every cluster is nonempty.  Sizes must
    differ by at most one, or else satisfy ``largest / smallest <= 1 + tolerance``.
    """

    labels: np.ndarray
    k: int
    tolerance: float = 0.0

    def __post_init__(self) -> None:
        lab = np.asarray(self.labels)
        if lab.ndim != 1:
            raise ArgumentError("labels must be a vector")
        if lab.size and not np.all(lab == np.floor(lab)):
            raise ArgumentError("labels must be integers")
        lab = lab.astype(np.int64)
        if self.k < 1:
            raise ArgumentError("k must be positive")
        if self.tolerance < 0:
            raise ArgumentError("tolerance must be nonnegative")
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise ArgumentError(f"labels must lie in [0, {self.k})")
        sizes = np.bincount(lab, minlength=self.k)
        if np.any(sizes == 0):
            raise ArgumentError("every cluster must be nonempty")
        if not _balanced(sizes, self.tolerance):
            raise ArgumentError(f"cluster sizes {sizes.min()}..{sizes.max()} exceed tolerance {self.tolerance}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "k", int(self.k))

    @classmethod
    def from_labels(cls, labels, tolerance: float = 0.0) -> "Clustering":
        """Relabel arbitrary cluster ids densely (in order of first appearance)."""
        lab = np.asarray(labels)
        _, first, inv = np.unique(lab, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        return cls(rank[inv.ravel()], k=int(first.size), tolerance=tolerance)

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)

    def one_hot(self) -> sp.csr_matrix:
        return sp.csr_matrix((np.ones(self.n), (np.arange(self.n), self.labels)), shape=(self.n, self.k))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Clustering):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    def __hash__(self) -> int:
        return hash((self.k, self.labels.tobytes()))


def _check_size(n: int, c: Clustering) -> None:
    if c.n != n:
        raise ArgumentError(f"clustering covers {c.n} units, graph has {n}")


def objective_h(folded: FoldedGraph, c: Clustering) -> float:
    """Sum of folded weights ``c_ij`` over ordered pairs in different clusters."""
    _check_size(folded.n, c)
    coo = folded.matrix.tocoo()
    cross = c.labels[coo.row] != c.labels[coo.col]
    return float(np.sum(coo.data[cross]))


def objective_trvar(g: BipartiteGraph, c: Clustering) -> float:
    """``sum_i sum_{j not in C(i)} sum_s w_is w_js / T_s**2``."""
    _check_size(g.n_experimental, c)
    t = g.col_sums
    per_cluster = (g.matrix.T @ c.one_hot()).toarray()  # M x K
    cross = t**2 - np.sum(per_cluster**2, axis=1)
    live = t > 0
    return float(np.sum(cross[live] / t[live] ** 2))


def direct_cut_cost(g: BipartiteGraph, joint_labels) -> float:
    """Weight of bipartite edges whose endpoints carry different labels.

    ``joint_labels`` lists the experimental units first, then the
    interference units.
    """
    lab = np.asarray(joint_labels)
    if lab.size != g.n_experimental + g.n_interference:
        raise ArgumentError(f"expected {g.n_experimental + g.n_interference} labels, got {lab.size}")
    le, ls = lab[: g.n_experimental], lab[g.n_experimental:]
    cut = le[g.exp_index] != ls[g.int_index]
    return float(np.sum(g.weight[cut]))


def assignment_covariances(k: int, k_t: int) -> tuple[float, float]:
    """Covariance of ``(Z_i, Z_j)`` under a balanced cluster design.

    Returns ``(same_cluster, cross_cluster)``.  For units in different
    clusters ``E[Z_i Z_j] = ((K_T - K_C)**2 - K) / (K (K - 1))``.
    """
    if not 0 < k_t < k:
        raise ArgumentError(f"k_t must satisfy 0 < k_t < k, got k_t={k_t}, k={k}")
    k_c = k - k_t
    mean = (k_t - k_c) / k
    same = 1.0 - mean**2
    cross = ((k_t - k_c) ** 2 - k) / (k * (k - 1)) - mean**2
    return same, cross


def cov_trace(folded: FoldedGraph, c: Clustering, k_t: int, method: str = "exact",
              draws: int = 100_000, seed: int = 0) -> float:
    """Trace of ``Cov(Z, e)`` under the balanced design on ``c`` with ``k_t`` treated clusters."""
    _check_size(folded.n, c)
    same, cross = assignment_covariances(c.k, k_t)
    if method == "exact":
        coo = folded.linear_map.tocoo()
        in_same = c.labels[coo.row] == c.labels[coo.col]
        return float(same * np.sum(coo.data[in_same]) + cross * np.sum(coo.data[~in_same]))
    if method in ("monte_carlo", "mc"):
        return float(np.mean(cov_trace_samples(folded, c, k_t, draws, seed)))
    raise ArgumentError(f"unknown method {method!r}")


def cov_trace_samples(folded: FoldedGraph, c: Clustering, k_t: int, draws: int, seed: int = 0) -> np.ndarray:
    """Per-draw values of ``sum_i (z_i - E z_i)(e_i - E e_i)``; their mean estimates the trace."""
    from .design import DesignSpec, sample_matrix

    _check_size(folded.n, c)
    z = sample_matrix(DesignSpec.balanced_cluster(c, k_t, seed=seed), draws).astype(float)
    e = folded.apply(z)
    mean_z = (2 * k_t - c.k) / c.k
    mean_e = folded.apply(np.full(folded.n, mean_z))
    return np.sum((z - mean_z) * (e - mean_e), axis=1)


def trvar_graph(g: BipartiteGraph) -> sp.csr_matrix:
    """Pairwise weights ``sum_s w_is w_js / T_s**2`` (diagonal kept)."""
    t = g.col_sums
    inv = np.zeros_like(t)
    np.divide(1.0, t, out=inv, where=t > 0)
    b = g.matrix @ sp.diags(inv)
    return (b @ b.T).tocsr()


def direct_graph(g: BipartiteGraph) -> tuple[sp.csr_matrix, np.ndarray]:
    """Symmetric adjacency over ``N + M`` nodes and node weights (1 experimental, 0 interference)."""
    w = g.matrix
    adj = sp.bmat([[None, w], [w.T, None]], format="csr")
    node_weights = np.concatenate([np.ones(g.n_experimental), np.zeros(g.n_interference)])
    return adj, node_weights


def partition_input(g: BipartiteGraph, objective: str = "h",
                    mode: NormalizationMode = NORMALIZED) -> tuple[sp.csr_matrix, Optional[np.ndarray]]:
    """Symmetric weights (and node weights, for ``direct``) to hand to the partitioner."""
    if objective == "h":
        return fold_graph(g, mode).symmetrized(), None
    if objective == "trvar":
        m = trvar_graph(g)
        return FoldedGraph(n=g.n_experimental, matrix=m).symmetrized(), None
    if objective == "direct":
        return direct_graph(g)
    raise ArgumentError(f"unknown objective {objective!r}")


def best_interference_labels(g: BipartiteGraph, exp_labels, k: Optional[int] = None) -> np.ndarray:
    """Interference labels minimizing the bipartite cut for fixed experimental labels.

    Each interference unit joins the cluster holding most of its edge weight
    (lowest label on ties; label 0 when it has no edges).
    """
    lab = np.asarray(exp_labels, dtype=np.int64)
    if lab.size != g.n_experimental:
        raise ArgumentError(f"expected {g.n_experimental} experimental labels, got {lab.size}")
    k = int(lab.max()) + 1 if k is None else k
    onehot = sp.csr_matrix((np.ones(lab.size), (np.arange(lab.size), lab)), shape=(lab.size, k))
    mass = (g.matrix.T @ onehot).toarray()
    return np.argmax(mass, axis=1).astype(np.int64)
