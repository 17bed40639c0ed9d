"""Randomized treatment-assignment samplers.

Each draw is a pure function of ``(seed, draw_index)``: the generator for a
draw is seeded with ``SeedSequence([seed, draw_index])``, so replicates can
be produced in any order or in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ArgumentError
from .graph import Assignment
from .objective import Clustering

__all__ = [
    "DesignSpec",
    "sample_assignment",
    "sample_matrix",
    "treated_counts",
    "draw_rng",
    "unit_clustering",
]

KINDS = ("balanced_cluster", "unit_bernoulli", "cluster_bernoulli")


def draw_rng(seed: int, draw_index: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, draw_index, *stream])))


@dataclass(frozen=True, eq=False)
class DesignSpec:
    kind: str
    clustering: Optional[Clustering] = None
    k_t: Optional[int] = None
    p: Optional[float] = None
    n: Optional[int] = None
    seed: int = 0
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ArgumentError(f"unknown design kind {self.kind!r}")
        if self.kind == "balanced_cluster":
            if self.clustering is None or self.k_t is None:
                raise ArgumentError("balanced_cluster needs a clustering and k_t")
            if not 0 < self.k_t < self.clustering.k:
                raise ArgumentError(f"k_t must satisfy 0 < k_t < k={self.clustering.k}, got {self.k_t}")
        elif self.kind == "unit_bernoulli":
            if self.n is None or self.p is None:
                raise ArgumentError("unit_bernoulli needs n and p")
            if not 0.0 <= self.p <= 1.0:
                raise ArgumentError("p must lie in [0, 1]")
        else:
            if self.clustering is None or self.p is None:
                raise ArgumentError("cluster_bernoulli needs a clustering and p")
            if not 0.0 < self.p < 1.0:
                raise ArgumentError("p must lie in (0, 1)")
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    @classmethod
    def balanced_cluster(cls, clustering: Clustering, k_t: int, seed: int = 0, name: str = "") -> "DesignSpec":
        return cls("balanced_cluster", clustering=clustering, k_t=k_t, seed=seed, name=name)

    @classmethod
    def unit_bernoulli(cls, n: int, p: float = 0.5, seed: int = 0, name: str = "") -> "DesignSpec":
        return cls("unit_bernoulli", n=n, p=p, seed=seed, name=name)

    @classmethod
    def cluster_bernoulli(cls, clustering: Clustering, p: float = 0.5, seed: int = 0, name: str = "") -> "DesignSpec":
        return cls("cluster_bernoulli", clustering=clustering, p=p, seed=seed, name=name)

    @property
    def n_units(self) -> int:
        return self.n if self.clustering is None else self.clustering.n

    def with_seed(self, seed: int) -> "DesignSpec":
        return DesignSpec(self.kind, self.clustering, self.k_t, self.p, self.n, seed, self.name)


def unit_clustering(n: int) -> Clustering:
    """Every unit its own cluster; with ``k_t = n // 2`` this is complete randomization."""
    return Clustering(np.arange(n), k=n)


def _draw(spec: DesignSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "balanced_cluster":
        c = spec.clustering
        treated = np.zeros(c.k, dtype=bool)
        treated[rng.permutation(c.k)[: spec.k_t]] = True
        return np.where(treated[c.labels], 1, -1).astype(np.int8)
    if spec.kind == "unit_bernoulli":
        return np.where(rng.random(spec.n) < spec.p, 1, -1).astype(np.int8)
    c = spec.clustering
    treated = rng.random(c.k) < spec.p
    return np.where(treated[c.labels], 1, -1).astype(np.int8)


def sample_assignment(spec: DesignSpec, draw_index: int) -> Assignment:
    """Draw number ``draw_index`` of the design."""
    z = _draw(spec, draw_rng(spec.seed, draw_index))
    k = k_t = None
    if spec.clustering is not None:
        k = spec.clustering.k
        k_t = spec.k_t if spec.k_t is not None else len(np.unique(spec.clustering.labels[z == 1]))
    return Assignment(z, k=k, k_t=k_t, design=spec.name, seed=spec.seed, draw_index=draw_index)


def sample_matrix(spec: DesignSpec, draws: int, start: int = 0) -> np.ndarray:
    """Rows ``start .. start + draws - 1`` of the design as a ``(draws, N)`` int8 array."""
    out = np.empty((draws, spec.n_units), dtype=np.int8)
    for r in range(draws):
        out[r] = _draw(spec, draw_rng(spec.seed, start + r))
    return out


def treated_counts(a) -> tuple[int, int]:
    z = a.z if isinstance(a, Assignment) else np.asarray(a)
    n_t = int(np.sum(z == 1))
    return n_t, int(z.size) - n_t
