"""Synthetic bipartite graph families: block model and power-law affinity graphs."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ArgumentError
from .graph import BipartiteGraph

__all__ = [
    "SbmSpec",
    "PowerLawSpec",
    "generate_sbm",
    "generate_powerlaw",
    "zipf_sample",
    "zipf_samples",
    "ZIPF_SUPPORT",
]

ZIPF_SUPPORT = 10**6


@dataclass(frozen=True)
class SbmSpec:
    n_experimental: int
    n_interference: int
    n_groups: int
    p_in: float
    p_out: float
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_groups < 1:
            raise ArgumentError("n_groups must be positive")
        if self.n_experimental % self.n_groups or self.n_interference % self.n_groups:
            raise ArgumentError("unit counts must be divisible by n_groups")
        for name in ("p_in", "p_out"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ArgumentError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class PowerLawSpec:
    n_experimental: int
    n_classes: int
    lam: float
    p: float
    q: float
    zipf_exponent: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_experimental < 0 or self.n_classes < 1:
            raise ArgumentError("n_experimental must be >= 0 and n_classes >= 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ArgumentError("lam must lie in [0, 1]")
        if self.p <= 0 or self.q <= 0:
            raise ArgumentError("affinities p and q must be positive")
        if self.zipf_exponent <= 1:
            raise ArgumentError("zipf_exponent must exceed 1")


def generate_sbm(spec: SbmSpec) -> tuple[BipartiteGraph, np.ndarray, np.ndarray]:
    """Bipartite stochastic block model with unit-weight edges.

    Groups are contiguous index blocks on both sides.  Returns the graph and
    the group labels of the experimental and interference units.
    """
    rng = np.random.default_rng(spec.seed)
    n, m, k = spec.n_experimental, spec.n_interference, spec.n_groups
    exp_labels = np.arange(n) // (n // k) if n else np.zeros(0, dtype=np.int64)
    int_labels = np.arange(m) // (m // k) if m else np.zeros(0, dtype=np.int64)
    same = exp_labels[:, None] == int_labels[None, :]
    prob = np.where(same, spec.p_in, spec.p_out)
    hit = rng.random((n, m)) < prob
    ii, ss = np.nonzero(hit)
    edges = np.column_stack([ii, ss, np.ones(ii.size)])
    return BipartiteGraph(n, m, edges), exp_labels, int_labels


@lru_cache(maxsize=16)
def _zipf_cdf(exponent: float) -> np.ndarray:
    k = np.arange(1, ZIPF_SUPPORT + 1, dtype=float)
    pmf = k ** (-exponent)
    # sum smallest terms first for an accurate normalizer
    cdf = np.cumsum(pmf[::-1])[::-1]
    total = cdf[0]
    cdf = 1.0 - np.concatenate([cdf[1:], [0.0]]) / total
    cdf[-1] = 1.0
    cdf.setflags(write=False)
    return cdf


def zipf_samples(exponent: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` values with ``P(X = k)`` proportional to ``k**-exponent``, ``1 <= k <= 10**6``."""
    if exponent <= 1:
        raise ArgumentError("Zipf exponent must exceed 1")
    u = rng.random(size)
    return np.searchsorted(_zipf_cdf(float(exponent)), u, side="right") + 1


def zipf_sample(exponent: float, rng: np.random.Generator) -> int:
    return int(zipf_samples(exponent, 1, rng)[0])


def generate_powerlaw(spec: PowerLawSpec) -> tuple[BipartiteGraph, np.ndarray, np.ndarray]:
    """Bipartite preferential attachment with latent-class affinities.

    Each experimental unit draws ``2 * Zipf`` stubs.  A stub opens a new
    interference unit with probability ``lam``; otherwise it attaches to an
    existing unit with probability proportional to its weighted degree plus
    ``p`` (same class) or ``q`` (other class).  Repeated ``(i, s)`` stubs
    merge into one edge whose weight counts them.

    Returns the graph plus class labels of experimental and interference units.
    """
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_experimental, spec.n_classes
    exp_classes = rng.permutation(np.arange(n) % k)
    stubs = 2 * zipf_samples(spec.zipf_exponent, n, rng)
    p_same = spec.p / (spec.p + (k - 1) * spec.q)

    degree: list[float] = []
    int_classes: list[int] = []
    weights: dict[tuple[int, int], float] = {}
    for i in range(n):
        ci = int(exp_classes[i])
        for _ in range(int(stubs[i])):
            if not degree or rng.random() < spec.lam:
                if k == 1 or rng.random() < p_same:
                    cs = ci
                else:
                    cs = int(rng.integers(k - 1))
                    cs += cs >= ci
                degree.append(0.0)
                int_classes.append(cs)
                s = len(degree) - 1
            else:
                deg = np.asarray(degree)
                cls = np.asarray(int_classes)
                score = deg + np.where(cls == ci, spec.p, spec.q)
                s = int(rng.choice(score.size, p=score / score.sum()))
            degree[s] += 1.0
            weights[(i, s)] = weights.get((i, s), 0.0) + 1.0

    edges = [(i, s, w) for (i, s), w in weights.items()]
    g = BipartiteGraph(n, len(degree), edges)
    return g, exp_classes, np.asarray(int_classes, dtype=np.int64)

