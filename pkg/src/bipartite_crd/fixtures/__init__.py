"""Counterexample graphs where common clustering heuristics disagree with the folded objective.

``direct``: two joint (experimental plus interference) labelings with the
same bipartite cut of 4, of which only the first minimizes the folded
objective.  ``dose_variance``: groups ``A`` and ``B`` hang off hubs
``s1`` and ``s2`` with unit weights, and two middle units tie to both hubs
with weight ``n``.  Splitting the middle units (Clustering 1) keeps the
folded objective low; placing both with group ``B`` (Clustering 2) maximizes
dose variance.
"""

from __future__ import annotations

from importlib import resources
from typing import NamedTuple

import numpy as np

from ..graph import BipartiteGraph
from ..objective import Clustering

__all__ = ["DirectFixture", "DoseVarianceFixture", "direct_counterexample", "dose_variance_counterexample",
           "load_direct", "load_dose_variance", "DIRECT_WEIGHTS"]

DIRECT_WEIGHTS = np.array([
    [0, 1, 1, 0, 1],
    [0, 0, 1, 0, 0],
    [1, 1, 0, 0, 1],
    [1, 0, 0, 0, 1],
    [1, 1, 0, 1, 0],
    [1, 0, 1, 1, 0],
], dtype=float)
DIRECT_LABELS_1 = np.array([0, 0, 1, 1, 1, 0, 1, 1, 0, 0, 1])
DIRECT_LABELS_2 = np.array([0, 0, 1, 0, 1, 1, 1, 1, 0, 1, 0])


class DirectFixture(NamedTuple):
    graph: BipartiteGraph
    labels_1: np.ndarray
    labels_2: np.ndarray

    def clustering(self, which: int) -> Clustering:
        lab = self.labels_1 if which == 1 else self.labels_2
        return Clustering(lab[: self.graph.n_experimental], k=2)


class DoseVarianceFixture(NamedTuple):
    graph: BipartiteGraph
    clustering_1: Clustering
    clustering_2: Clustering


def direct_counterexample() -> DirectFixture:
    return DirectFixture(BipartiteGraph.from_matrix(DIRECT_WEIGHTS), DIRECT_LABELS_1.copy(), DIRECT_LABELS_2.copy())


def dose_variance_counterexample(n: int = 50) -> DoseVarianceFixture:
    """Units ``0..n-1`` form group A, ``n..2n-1`` group B, ``2n`` and ``2n+1`` are the middle units."""
    if n < 2 or n % 2:
        raise ValueError("n must be an even number of at least 2")
    w = np.zeros((2 * n + 2, 2))
    w[:n, 0] = 1.0
    w[n:2 * n, 1] = 1.0
    w[2 * n:, :] = float(n)
    lab1 = np.r_[np.zeros(n), np.ones(n), 0, 1].astype(np.int64)
    lab2 = np.r_[np.zeros(n + 1), np.ones(n + 1)].astype(np.int64)
    return DoseVarianceFixture(BipartiteGraph.from_matrix(w), Clustering(lab1, 2), Clustering(lab2, 2))


def _path(name: str):
    return resources.files(__name__).joinpath(name)


def load_direct() -> DirectFixture:
    """The committed copy of :func:`direct_counterexample`."""
    from ..io import read_graph, read_labels

    with resources.as_file(_path("direct_graph.tsv")) as gp:
        g = read_graph(gp)
    labs = []
    for which in (1, 2):
        with resources.as_file(_path(f"direct_labels_{which}.csv")) as lp:
            le, ls = read_labels(lp)
        labs.append(np.r_[le, ls])
    return DirectFixture(g, labs[0], labs[1])


def load_dose_variance() -> DoseVarianceFixture:
    """The committed copy of :func:`dose_variance_counterexample` at ``n = 50``."""
    from ..io import read_clustering, read_graph

    with resources.as_file(_path("dose_variance_graph.tsv")) as gp:
        g = read_graph(gp)
    cs = []
    for which in (1, 2):
        with resources.as_file(_path(f"dose_variance_clustering_{which}.csv")) as cp:
            cs.append(read_clustering(cp, tolerance=0.0))
    return DoseVarianceFixture(g, cs[0], cs[1])
