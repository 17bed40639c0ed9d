"""Bias oracles and the Monte-Carlo experiment runner."""

from __future__ import annotations

import csv
import itertools
import math
import os
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .design import DesignSpec, draw_rng, sample_matrix, unit_clustering
from .errors import ArgumentError, EstimationError, ResourceError
from .estimate import PropensityTable, dim_estimates, estimate_propensities, ips_estimate, pure_exposure
from .graph import NORMALIZED, BipartiteGraph, FoldedGraph, NormalizationMode, fold_graph
from .objective import Clustering, objective_h, objective_trvar
from .outcome import (
    DeltaModel,
    LinearModel,
    LipschitzModel,
    MarketplaceModel,
    marketplace_tau_samples,
    true_tate,
)

__all__ = [
    "MAX_ENUMERATION",
    "RESULTS_COLUMNS",
    "SCHEMA_VERSION",
    "Metric",
    "EvalReport",
    "BoundCheck",
    "exact_bias_linear",
    "enumerate_assignments",
    "brute_force_bias",
    "brute_force_folded_bias",
    "exact_propensities",
    "brute_force_ips_bias",
    "lemma_bound_check",
    "run_experiment",
    "sbm_two_hop_isolation_prob",
    "write_results",
    "read_results",
]

MAX_ENUMERATION = 100_000
SCHEMA_VERSION = 1
RESULTS_COLUMNS = ("schema", "design", "objective_h", "objective_trvar", "metric",
                   "value", "ci_lo", "ci_hi", "draws", "seed")


def _require_equal_sizes(c: Clustering) -> None:
    if np.unique(c.sizes).size != 1:
        raise ArgumentError("the closed-form bias needs clusters of equal size")


def _cross_mass(folded: FoldedGraph, c: Clustering, weights: Optional[np.ndarray] = None) -> float:
    coo = folded.matrix.tocoo()
    cross = c.labels[coo.row] != c.labels[coo.col]
    vals = coo.data[cross]
    if weights is not None:
        vals = vals * weights[coo.row[cross]]
    return float(np.sum(vals))


def exact_bias_linear(folded: FoldedGraph, c: Clustering, gamma) -> float:
    """``E[tau_DIM] - tau = -(2/N) (K/(K-1)) sum_i sum_{j not in C(i)} gamma_i c_ij``.

    The value does not depend on the number of treated clusters.
    """
    if not folded.mode.fully_normalized:
        raise ArgumentError("closed-form bias needs fully normalized doses and exposures")
    gam = np.asarray(gamma, dtype=float)
    if gam.shape != (folded.n,) or c.n != folded.n:
        raise ArgumentError("gamma and clustering must cover every experimental unit")
    _require_equal_sizes(c)
    k = c.k
    return -2.0 / folded.n * k / (k - 1) * _cross_mass(folded, c, gam)


def enumerate_assignments(c: Clustering, k_t: int) -> np.ndarray:
    """Every balanced assignment with ``k_t`` treated clusters, one per row."""
    if not 0 < k_t < c.k:
        raise ArgumentError(f"k_t must satisfy 0 < k_t < k={c.k}")
    count = math.comb(c.k, k_t)
    if count > MAX_ENUMERATION:
        raise ResourceError(f"{count} assignments exceed the enumeration limit {MAX_ENUMERATION}")
    treated = np.zeros((count, c.k), dtype=bool)
    for r, subset in enumerate(itertools.combinations(range(c.k), k_t)):
        treated[r, list(subset)] = True
    return np.where(treated[:, c.labels], 1, -1).astype(np.int8)


def brute_force_folded_bias(folded: FoldedGraph, c: Clustering, k_t: int, model) -> float:
    """Exact DIM bias by averaging over all balanced assignments (expected outcomes per assignment)."""
    if isinstance(model, MarketplaceModel) or not hasattr(model, "expected_outcomes"):
        raise ArgumentError(f"{type(model).__name__} has no closed-form conditional outcome")
    if c.n != folded.n:
        raise ArgumentError("clustering and graph differ in unit count")
    z = enumerate_assignments(c, k_t).astype(float)
    e = folded.apply(z)
    y = model.expected_outcomes(z, e)
    return float(np.mean(dim_estimates(y, z)) - true_tate(model, folded))


def brute_force_bias(g: BipartiteGraph, c: Clustering, k_t: int, model,
                     mode: NormalizationMode = NORMALIZED) -> float:
    """Exact ``E[tau_DIM] - tau`` by enumerating every ``k_t``-subset of clusters."""
    return brute_force_folded_bias(fold_graph(g, mode), c, k_t, model)


def exact_propensities(g: BipartiteGraph, c: Clustering, k_t: int, delta_exposure: float,
                       mode: NormalizationMode = NORMALIZED) -> PropensityTable:
    """Full-exposure probabilities computed over every balanced assignment."""
    z = enumerate_assignments(c, k_t).astype(float)
    pure = pure_exposure(z, fold_graph(g, mode).apply(z), delta_exposure)
    return PropensityTable(np.mean(pure & (z == 1), axis=0), np.mean(pure & (z == -1), axis=0),
                           z.shape[0], delta_exposure)


def brute_force_ips_bias(g: BipartiteGraph, c: Clustering, k_t: int, model, delta_exposure: float,
                         mode: NormalizationMode = NORMALIZED) -> float:
    """Exact IPS bias with exact propensities, enumerating every balanced assignment."""
    folded = fold_graph(g, mode)
    table = exact_propensities(g, c, k_t, delta_exposure, mode)
    z = enumerate_assignments(c, k_t).astype(float)
    e = folded.apply(z)
    y = model.expected_outcomes(z, e)
    est = [ips_estimate(y[r], z[r], e[r], table).estimate for r in range(z.shape[0])]
    return float(np.mean(est) - true_tate(model, folded))


class BoundCheck(NamedTuple):
    measured: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound + 1e-10


def lemma_bound_check(folded: FoldedGraph, c: Clustering, k_t: int, model) -> BoundCheck:
    """``|brute-force bias|`` next to its theoretical ceiling.

    Lipschitz models: ``(2/N) (K/(K-1)) L H``.  Delta models:
    ``(2B/(N delta)) (K/(K-1)) H``.
    """
    _require_equal_sizes(c)
    scale = 2.0 / folded.n * c.k / (c.k - 1) * objective_h(folded, c)
    if isinstance(model, LipschitzModel):
        bound = abs(model.lipschitz) * scale
    elif isinstance(model, DeltaModel):
        bound = model.bound / model.delta * scale
    else:
        raise ArgumentError("bounds are defined for Lipschitz and delta models")
    return BoundCheck(abs(brute_force_folded_bias(folded, c, k_t, model)), bound)


def sbm_two_hop_isolation_prob(p: float, q: float, m: int, n: int, k: int) -> float:
    """``(1 - p q) ** (2 M N / K**2)``."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ArgumentError("p and q must lie in [0, 1]")
    power = 2.0 * m * n / k**2
    pq = p * q
    if power == 0:
        return 1.0
    if pq >= 1.0:
        return 0.0
    return float(math.exp(power * math.log1p(-pq)))


@dataclass(frozen=True)
class Metric:
    value: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Summary of one design's replicated estimates."""

    design: str
    objective_h: float
    objective_trvar: float
    tau: float
    metrics: dict[str, Metric]
    draws: int
    seed: int
    runtime: float = 0.0
    estimates: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    ips_skipped: int = 0
    dim_skipped: int = 0

    def __getitem__(self, name: str) -> Metric:
        return self.metrics[name]

    @property
    def bias(self) -> float:
        return self.metrics["bias"].value

    @property
    def se(self) -> float:
        return self.metrics["se"].value


def _summary(est: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Rows of (mean, bias, |rel bias|, std, rmse) for stacked resamples."""
    mean = est.mean(axis=-1)
    t = tau.mean(axis=-1)
    bias = mean - t
    std = est.std(axis=-1)
    rmse = np.sqrt(np.mean((est - t[..., None]) ** 2, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(bias) / np.abs(t)
    return np.stack([mean, bias, rel, std, rmse], axis=-1)


_NAMES = ("mean", "bias", "rel_bias", "std", "rmse")


def _metrics(est: np.ndarray, tau_samples: np.ndarray, rng: np.random.Generator,
             resamples: int, prefix: str = "") -> dict[str, Metric]:
    point = _summary(est, tau_samples)
    boot = np.empty((resamples, len(_NAMES)))
    chunk = max(1, 2_000_000 // max(est.size, 1))
    for lo in range(0, resamples, chunk):
        b = min(chunk, resamples - lo)
        ei = rng.integers(est.size, size=(b, est.size))
        ti = rng.integers(tau_samples.size, size=(b, tau_samples.size)) if tau_samples.size > 1 else np.zeros((b, 1), dtype=np.int64)
        boot[lo:lo + b] = _summary(est[ei], tau_samples[ti])
    lo_q, hi_q = np.percentile(boot, [2.5, 97.5], axis=0)
    out = {prefix + name: Metric(float(point[i]), float(lo_q[i]), float(hi_q[i])) for i, name in enumerate(_NAMES)}
    se = est.std(ddof=1) / math.sqrt(est.size)
    if tau_samples.size > 1:
        se = math.hypot(se, tau_samples.std(ddof=1) / math.sqrt(tau_samples.size))
    out[prefix + "se"] = Metric(float(se), float("nan"), float("nan"))
    return out


def _outcomes(model, z: np.ndarray, e: np.ndarray, seed: int) -> np.ndarray:
    if isinstance(model, (LinearModel, LipschitzModel)):
        return model.outcomes(z, e)
    y = np.empty(z.shape)
    for r in range(z.shape[0]):
        y[r] = model.outcomes(z[r], e[r], draw_rng(seed, r, 2))
    return y


def _model_size(model) -> Optional[int]:
    if isinstance(model, LinearModel):
        return model.coef.n
    if isinstance(model, LipschitzModel):
        return int(model.alpha.size)
    if isinstance(model, MarketplaceModel):
        return model.spec.n_customers
    return None


def run_experiment(g: BipartiteGraph, designs: Sequence[DesignSpec], model, draws: int,
                   master_seed: int = 0, mode: NormalizationMode = NORMALIZED,
                   ips_delta: Optional[float] = None, propensity_draws: int = 10_000,
                   resamples: int = 1000) -> list[EvalReport]:
    """Replicate every design ``draws`` times and summarize the DIM estimates.

    Assignments for each design come from ``design.with_seed(master_seed)``;
    outcome noise and bootstrap resampling use streams derived from
    ``master_seed`` alone, so reports are reproducible bit for bit.
    """
    if draws < 2:
        raise ArgumentError("draws must be at least 2")
    size = _model_size(model)
    if size is not None and size != g.n_experimental:
        raise ArgumentError(f"model covers {size} units, graph has {g.n_experimental}")
    folded = fold_graph(g, mode)
    if isinstance(model, MarketplaceModel):
        tau_samples = marketplace_tau_samples(model.spec, model.tau_reps, master_seed)
    else:
        tau_samples = np.array([true_tate(model, folded)])
    reports = []
    for idx, design in enumerate(designs):
        t0 = time.perf_counter()
        if design.n_units != g.n_experimental:
            raise ArgumentError(f"design {design.name!r} covers {design.n_units} units, graph has {g.n_experimental}")
        spec = design.with_seed(master_seed)
        z = sample_matrix(spec, draws).astype(float)
        e = folded.apply(z)
        y = _outcomes(model, z, e, master_seed)
        # Bernoulli designs can leave an arm empty; such draws have no DIM estimate
        both = (z == 1).any(axis=1) & (z == -1).any(axis=1)
        if both.sum() < 2:
            raise EstimationError(f"design {design.name!r}: fewer than two draws with both arms populated")
        est = dim_estimates(y[both], z[both])
        rng = draw_rng(master_seed, idx, 4)
        metrics = _metrics(est, tau_samples, rng, resamples)
        skipped = 0
        if ips_delta is not None:
            table = estimate_propensities(spec, g, ips_delta, propensity_draws, mode, start=draws)
            ips = [ips_estimate(y[r], z[r], e[r], table) for r in range(draws)]
            skipped = sum(r.skipped for r in ips)
            metrics.update(_metrics(np.array([r.estimate for r in ips]), tau_samples, rng, resamples, "ips_"))
        clustering = design.clustering if design.clustering is not None else unit_clustering(g.n_experimental)
        reports.append(EvalReport(
            design=design.name,
            objective_h=objective_h(folded, clustering),
            objective_trvar=objective_trvar(g, clustering),
            tau=float(tau_samples.mean()),
            metrics=metrics,
            draws=draws,
            seed=master_seed,
            runtime=time.perf_counter() - t0,
            estimates=est,
            ips_skipped=skipped,
            dim_skipped=int(draws - both.sum()),
        ))
    return reports


def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_results(reports: Sequence[EvalReport], path: str) -> None:
    """Append one row per (design, metric) to a results CSV, writing the header for a new file."""
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(RESULTS_COLUMNS)
        for r in reports:
            rows = [("tau", Metric(r.tau, float("nan"), float("nan")))] + sorted(r.metrics.items())
            for name in ("ips_skipped", "dim_skipped"):
                if getattr(r, name):
                    rows.append((name, Metric(float(getattr(r, name)), float("nan"), float("nan"))))
            for name, m in rows:
                w.writerow([SCHEMA_VERSION, r.design, _fmt(r.objective_h), _fmt(r.objective_trvar), name,
                            _fmt(m.value), _fmt(m.ci_lo), _fmt(m.ci_hi), r.draws, r.seed])


def read_results(path: str) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != RESULTS_COLUMNS:
        raise ArgumentError(f"{path}: unexpected results columns")
    return rows
