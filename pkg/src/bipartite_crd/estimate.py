"""Difference-in-means and inverse-propensity estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, EstimationError
from .graph import NORMALIZED, Assignment, BipartiteGraph, NormalizationMode, fold_graph

__all__ = [
    "PropensityTable",
    "IpsResult",
    "VarianceResult",
    "dim_estimate",
    "dim_estimates",
    "pure_exposure",
    "estimate_propensities",
    "ips_estimate",
    "ips_variance_bernoulli",
]


def _z(a) -> np.ndarray:
    return np.asarray(a.z if isinstance(a, Assignment) else a, dtype=float)


def dim_estimate(y, a) -> float:
    """Treated-arm mean minus control-arm mean."""
    yy, z = np.asarray(y, dtype=float), _z(a)
    if yy.shape != z.shape:
        raise ArgumentError("outcomes and assignment differ in length")
    t = z == 1
    n_t = int(t.sum())
    if n_t == 0 or n_t == z.size:
        raise EstimationError("difference in means needs units in both arms")
    return float(yy[t].mean() - yy[~t].mean())


def dim_estimates(y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Row-wise :func:`dim_estimate` over ``(draws, N)`` stacks."""
    yy, zz = np.asarray(y, dtype=float), np.asarray(z, dtype=float)
    t = zz == 1
    n_t = t.sum(axis=1)
    n_c = zz.shape[1] - n_t
    if np.any(n_t == 0) or np.any(n_c == 0):
        raise EstimationError("difference in means needs units in both arms")
    return np.where(t, yy, 0.0).sum(axis=1) / n_t - np.where(t, 0.0, yy).sum(axis=1) / n_c


def pure_exposure(z, e, delta_exposure: float) -> np.ndarray:
    """Full-exposure indicator ``|z_i - e_i| < delta_exposure``."""
    return np.abs(np.asarray(e, dtype=float) - _z(z)) < delta_exposure


@dataclass(frozen=True, eq=False)
class PropensityTable:
    """Per-unit probabilities of full treatment and full control."""

    p_treated: np.ndarray
    p_control: np.ndarray
    draws: int
    delta_exposure: float

    def __post_init__(self) -> None:
        for name in ("p_treated", "p_control"):
            p = np.asarray(getattr(self, name), dtype=float)
            if np.any(p < 0) or np.any(p > 1):
                raise ArgumentError(f"{name} must lie in [0, 1]")
            p.setflags(write=False)
            object.__setattr__(self, name, p)
        if self.draws < 1:
            raise ArgumentError("draws must be positive")

    @property
    def n(self) -> int:
        return int(self.p_treated.size)


def estimate_propensities(spec, g: BipartiteGraph, delta_exposure: float, draws: int,
                          mode: NormalizationMode = NORMALIZED, start: int = 0,
                          chunk: int = 2000) -> PropensityTable:
    """Monte-Carlo full-exposure frequencies over draws ``start .. start + draws - 1`` of ``spec``."""
    from .design import sample_matrix

    if draws < 1:
        raise ArgumentError("draws must be positive")
    if spec.n_units != g.n_experimental:
        raise ArgumentError("design and graph differ in unit count")
    folded = fold_graph(g, mode)
    hits_t = np.zeros(g.n_experimental)
    hits_c = np.zeros(g.n_experimental)
    for lo in range(0, draws, chunk):
        z = sample_matrix(spec, min(chunk, draws - lo), start + lo).astype(float)
        pure = pure_exposure(z, folded.apply(z), delta_exposure)
        hits_t += np.sum(pure & (z == 1), axis=0)
        hits_c += np.sum(pure & (z == -1), axis=0)
    return PropensityTable(hits_t / draws, hits_c / draws, draws, delta_exposure)


@dataclass(frozen=True)
class IpsResult:
    estimate: float
    skipped: int


def ips_estimate(y, a, e, table: PropensityTable) -> IpsResult:
    """``(1/N) sum_i Y_i [1{treated}/P_i(T) - 1{control}/P_i(C)]`` over fully exposed units.

    Fully exposed units whose propensity is zero are left out and counted
    in ``skipped``.
    """
    yy, z, ee = np.asarray(y, dtype=float), _z(a), np.asarray(e, dtype=float)
    n = z.size
    if yy.shape != (n,) or ee.shape != (n,) or table.n != n:
        raise ArgumentError("outcomes, assignment, exposures and table must share one length")
    pure = pure_exposure(z, ee, table.delta_exposure)
    ft, fc = pure & (z == 1), pure & (z == -1)
    ok_t, ok_c = table.p_treated > 0, table.p_control > 0
    skipped = int(np.sum(ft & ~ok_t) + np.sum(fc & ~ok_c))
    inv_t = np.divide(1.0, table.p_treated, out=np.zeros(n), where=ok_t)
    inv_c = np.divide(1.0, table.p_control, out=np.zeros(n), where=ok_c)
    total = np.sum(yy * ft * inv_t) - np.sum(yy * fc * inv_c)
    return IpsResult(float(total / n), skipped)


@dataclass(frozen=True, eq=False)
class VarianceResult:
    value: float
    infinite: np.ndarray

    @property
    def any_infinite(self) -> bool:
        return bool(self.infinite.any())


def ips_variance_bernoulli(y_pure_t, y_pure_c, table: PropensityTable) -> VarianceResult:
    """``(1/N**2) sum_i [Y_iT**2 / P_i(T) + Y_iC**2 / P_i(C)]``.

    Units with a zero propensity (and a nonzero pure outcome) are flagged in
    ``infinite``; the value is then ``inf``.
    """
    yt, yc = np.asarray(y_pure_t, dtype=float), np.asarray(y_pure_c, dtype=float)
    n = table.n
    if yt.shape != (n,) or yc.shape != (n,):
        raise ArgumentError("pure outcome vectors must match the table length")
    pt, pc = table.p_treated, table.p_control
    bad = ((pt == 0) & (yt != 0)) | ((pc == 0) & (yc != 0))
    if bad.any():
        return VarianceResult(float("inf"), bad)
    term_t = np.divide(yt**2, pt, out=np.zeros(n), where=pt > 0)
    term_c = np.divide(yc**2, pc, out=np.zeros(n), where=pc > 0)
    return VarianceResult(float(np.sum(term_t + term_c) / n**2), bad)
