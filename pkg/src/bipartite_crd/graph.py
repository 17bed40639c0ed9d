"""Bipartite interference graphs, doses/exposures, and the folded unit graph.

Experimental units (indexed ``i``) receive treatment ``z_i in {-1, +1}``;
interference units (indexed ``s``) are never treated.  An edge ``(i, s, w)``
carries a nonnegative weight.  The dose of ``s`` averages the assignments of
its neighbours, and the exposure of ``i`` averages the doses of its
neighbours.  Both stages are linear, so exposures are ``C @ z`` for the
folded matrix ``C`` built by :func:`fold_graph`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sp

from .errors import ArgumentError

__all__ = [
    "NormalizationMode",
    "NORMALIZED",
    "BipartiteGraph",
    "Assignment",
    "ExposureProfile",
    "FoldedGraph",
    "compute_doses",
    "compute_exposures",
    "exposures",
    "exposure_profile",
    "fold_graph",
]


@dataclass(frozen=True)
class NormalizationMode:
    """Whether doses and exposures are weighted averages or plain weighted sums."""

    dose_normalized: bool = True
    exposure_normalized: bool = True

    @classmethod
    def from_code(cls, code: str) -> "NormalizationMode":
        """Parse a two-letter code: dose letter then exposure letter, ``n``/``u``.

        ``nn`` is the fully normalized mode; ``un`` has an unnormalized dose
        and a normalized exposure.
        """
        if len(code) != 2 or any(ch not in "nu" for ch in code):
            raise ArgumentError(f"normalization code must be one of nn/nu/un/uu, got {code!r}")
        return cls(dose_normalized=code[0] == "n", exposure_normalized=code[1] == "n")

    @property
    def code(self) -> str:
        return ("n" if self.dose_normalized else "u") + ("n" if self.exposure_normalized else "u")

    @property
    def fully_normalized(self) -> bool:
        return self.dose_normalized and self.exposure_normalized


NORMALIZED = NormalizationMode()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _exact_sums(index: np.ndarray, weights: np.ndarray, size: int) -> np.ndarray:
    """Correctly rounded per-unit sums, independent of summation order."""
    out = np.zeros(size)
    if index.size == 0:
        return out
    order = np.argsort(index, kind="stable")
    idx, w = index[order], weights[order]
    starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
    for lo, hi in zip(starts, np.r_[starts[1:], idx.size]):
        out[idx[lo]] = math.fsum(w[lo:hi])
    return out


class BipartiteGraph:
    """Weighted edges between ``n_experimental`` and ``n_interference`` units.

    Edges are canonicalized (sorted by ``(i, s)``) and validated on
    construction; the object is immutable afterwards.
    """

    __slots__ = ("n_experimental", "n_interference", "exp_index", "int_index", "weight",
                 "row_sums", "col_sums", "_matrix")

    def __init__(self, n_experimental: int, n_interference: int, edges=()) -> None:
        if n_experimental < 0 or n_interference < 0:
            raise ArgumentError("unit counts must be nonnegative")
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=float)
        if arr.size == 0:
            arr = np.zeros((0, 3))
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ArgumentError("edges must be (exp_index, int_index, weight) triples")
        ii, ss, ww = arr[:, 0], arr[:, 1], arr[:, 2]
        if not (np.all(ii == np.floor(ii)) and np.all(ss == np.floor(ss))):
            raise ArgumentError("unit indices must be integers")
        ii = ii.astype(np.int64)
        ss = ss.astype(np.int64)
        if ii.size and (ii.min() < 0 or ii.max() >= n_experimental):
            raise ArgumentError("experimental index out of range")
        if ss.size and (ss.min() < 0 or ss.max() >= n_interference):
            raise ArgumentError("interference index out of range")
        if not np.all(np.isfinite(ww)):
            raise ArgumentError("edge weights must be finite")
        if np.any(ww < 0):
            raise ArgumentError("edge weights must be nonnegative")
        order = np.lexsort((ss, ii))
        ii, ss, ww = ii[order], ss[order], ww[order]
        if ii.size > 1:
            dup = (ii[1:] == ii[:-1]) & (ss[1:] == ss[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ArgumentError(f"duplicate edge ({ii[k]}, {ss[k]})")
        self.n_experimental = int(n_experimental)
        self.n_interference = int(n_interference)
        self.exp_index = _frozen(ii)
        self.int_index = _frozen(ss)
        self.weight = _frozen(ww)
        self.row_sums = _frozen(_exact_sums(ii, ww, self.n_experimental))
        self.col_sums = _frozen(_exact_sums(ss, ww, self.n_interference))
        self._matrix = None

    @classmethod
    def from_matrix(cls, w) -> "BipartiteGraph":
        """Build from a dense or sparse ``N x M`` weight matrix (zeros are non-edges)."""
        coo = sp.coo_matrix(w)
        keep = coo.data != 0
        edges = np.column_stack([coo.row[keep], coo.col[keep], coo.data[keep]])
        return cls(coo.shape[0], coo.shape[1], edges)

    @property
    def n_edges(self) -> int:
        return int(self.weight.size)

    @property
    def matrix(self) -> sp.csr_matrix:
        """The ``N x M`` weight matrix in CSR form."""
        if self._matrix is None:
            m = sp.csr_matrix((self.weight, (self.exp_index, self.int_index)),
                              shape=(self.n_experimental, self.n_interference))
            m.sort_indices()
            self._matrix = m
        return self._matrix

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for i, s, w in zip(self.exp_index, self.int_index, self.weight):
            yield int(i), int(s), float(w)

    @property
    def isolated_experimental(self) -> np.ndarray:
        """Mask of experimental units with zero total edge weight."""
        return self.row_sums == 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (self.n_experimental == other.n_experimental
                and self.n_interference == other.n_interference
                and np.array_equal(self.exp_index, other.exp_index)
                and np.array_equal(self.int_index, other.int_index)
                and np.array_equal(self.weight, other.weight))

    def __hash__(self) -> int:
        return hash((self.n_experimental, self.n_interference, self.weight.tobytes(),
                     self.exp_index.tobytes(), self.int_index.tobytes()))

    def __repr__(self) -> str:
        return (f"BipartiteGraph(n_experimental={self.n_experimental}, "
                f"n_interference={self.n_interference}, n_edges={self.n_edges})")


@dataclass(frozen=True, eq=False)
class Assignment:
    """A treatment vector ``z in {-1, +1}^N`` and the design that drew it."""

    z: np.ndarray
    k: Optional[int] = None
    k_t: Optional[int] = None
    design: str = ""
    seed: Optional[int] = None
    draw_index: Optional[int] = None

    def __post_init__(self) -> None:
        z = np.asarray(self.z)
        if z.ndim != 1:
            raise ArgumentError("assignment must be a vector")
        if z.size and not np.all((z == 1) | (z == -1)):
            raise ArgumentError("assignment entries must be exactly -1 or +1")
        z = _frozen(z.astype(np.int8))
        object.__setattr__(self, "z", z)

    def __len__(self) -> int:
        return int(self.z.size)


def _as_z(z) -> np.ndarray:
    if isinstance(z, Assignment):
        return z.z.astype(float)
    return np.asarray(z, dtype=float)


def _safe_recip(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=float)
    np.divide(1.0, x, out=out, where=x != 0)
    return out


def compute_doses(g: BipartiteGraph, z, mode: NormalizationMode = NORMALIZED) -> np.ndarray:
    """Dose of every interference unit; isolated interference units get 0.

    ``z`` may be a single assignment (length ``N``) or a stack of assignments
    with shape ``(draws, N)``.
    """
    zz = _as_z(z)
    if zz.shape[-1] != g.n_experimental:
        raise ArgumentError(f"assignment length {zz.shape[-1]} != {g.n_experimental} experimental units")
    d = np.asarray(g.matrix.T @ zz.T).T
    if mode.dose_normalized:
        d = d * _safe_recip(g.col_sums)
    return d


def compute_exposures(g: BipartiteGraph, doses, mode: NormalizationMode = NORMALIZED) -> np.ndarray:
    """Exposure of every experimental unit from interference-unit doses.

    Isolated experimental units are reported as NaN ("self-exposed"); use
    :func:`exposures` to resolve them to their own assignment.
    """
    dd = np.asarray(doses, dtype=float)
    if dd.shape[-1] != g.n_interference:
        raise ArgumentError(f"dose length {dd.shape[-1]} != {g.n_interference} interference units")
    e = np.asarray(g.matrix @ dd.T).T
    if mode.exposure_normalized:
        e = e * _safe_recip(g.row_sums)
    iso = g.isolated_experimental
    if iso.any():
        e = np.array(e, dtype=float, copy=True)
        e[..., iso] = np.nan
    return e


def exposures(g: BipartiteGraph, z, mode: NormalizationMode = NORMALIZED) -> np.ndarray:
    """Two-stage exposures with the self-exposed sentinel resolved to ``z_i``."""
    zz = _as_z(z)
    e = compute_exposures(g, compute_doses(g, zz, mode), mode)
    return np.where(np.isnan(e), zz, e)


@dataclass(frozen=True, eq=False)
class ExposureProfile:
    doses: np.ndarray
    exposures: np.ndarray
    mode: NormalizationMode = NORMALIZED


def exposure_profile(g: BipartiteGraph, z, mode: NormalizationMode = NORMALIZED) -> ExposureProfile:
    d = compute_doses(g, z, mode)
    e = compute_exposures(g, d, mode)
    return ExposureProfile(doses=_frozen(d), exposures=_frozen(np.where(np.isnan(e), _as_z(z), e)), mode=mode)


@dataclass(frozen=True, eq=False)
class FoldedGraph:
    """Directed influence graph on experimental units.

    ``matrix[i, j]`` is the influence of ``z_j`` on ``e_i`` (the diagonal is
    kept).  Rows of isolated units are empty; :meth:`apply` and
    :attr:`linear_map` treat them as self-exposed.
    """

    n: int
    matrix: sp.csr_matrix
    mode: NormalizationMode = NORMALIZED
    isolated: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        coo = self.matrix.tocoo()
        return {(int(i), int(j)): float(v) for i, j, v in zip(coo.row, coo.col, coo.data)}

    @property
    def linear_map(self) -> sp.csr_matrix:
        """The matrix ``C`` with ``e = C z`` exactly, isolated units mapped to themselves."""
        if not self.isolated.any():
            return self.matrix
        return (self.matrix + sp.diags(self.isolated.astype(float))).tocsr()

    def apply(self, z) -> np.ndarray:
        """Exposures ``C z`` for one assignment or a ``(draws, N)`` stack."""
        zz = _as_z(z)
        if zz.shape[-1] != self.n:
            raise ArgumentError(f"assignment length {zz.shape[-1]} != {self.n}")
        return np.asarray(self.linear_map @ zz.T).T

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def symmetrized(self) -> sp.csr_matrix:
        """``C + C^T`` with the diagonal removed, the input for partitioning."""
        s = (self.matrix + self.matrix.T).tolil()
        s.setdiag(0)
        s = s.tocsr()
        s.eliminate_zeros()
        return s


def fold_graph(g: BipartiteGraph, mode: NormalizationMode = NORMALIZED) -> FoldedGraph:
    """Fold the bipartite graph onto experimental units.

    ``c_ij = sum_s a(i, s) b(j, s)`` with ``a = w_is / S_i`` (or ``w_is``
    when exposures are unnormalized) and ``b = w_js / T_s`` (or ``w_js``
    when doses are unnormalized).
    """
    w = g.matrix
    a = w
    if mode.exposure_normalized:
        a = sp.diags(_safe_recip(g.row_sums)) @ w
    b = w
    if mode.dose_normalized:
        b = w @ sp.diags(_safe_recip(g.col_sums))
    c = (a @ b.T).tocsr()
    c.eliminate_zeros()
    c.sort_indices()
    return FoldedGraph(n=g.n_experimental, matrix=c, mode=mode,
                       isolated=_frozen(g.isolated_experimental.copy()))
