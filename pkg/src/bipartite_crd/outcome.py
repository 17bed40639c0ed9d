"""Potential-outcome simulators.

Every model maps an assignment ``z`` and exposures ``e`` to outcomes ``Y``;
the array arguments may be single vectors or ``(draws, N)`` stacks.  The
marketplace model ignores exposures and simulates applications and bookings
directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ArgumentError
from .graph import BipartiteGraph, FoldedGraph

__all__ = [
    "LinearCoefficients",
    "LinearModel",
    "LipschitzModel",
    "DeltaModel",
    "MarketplaceSpec",
    "MarketplaceModel",
    "MarketRound",
    "OutcomeModel",
    "SHAPES",
    "simulate_linear",
    "simulate_lipschitz",
    "simulate_delta",
    "true_tate",
    "marketplace_types",
    "marketplace_round",
    "marketplace_tau_samples",
    "build_history_graph",
]

SHAPES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda x: np.asarray(x, dtype=float),
    "abs": np.abs,
    "clamp": lambda x: np.clip(x, -0.5, 0.5),
    "sin": np.sin,
}


def _vec(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ArgumentError(f"{name} must be a vector")
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


def _zv(z) -> np.ndarray:
    return np.asarray(getattr(z, "z", z), dtype=float)


@dataclass(frozen=True, eq=False)
class LinearCoefficients:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "gamma"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        if not (self.alpha.size == self.beta.size == self.gamma.size):
            raise ArgumentError("alpha, beta and gamma must have equal length")

    @property
    def n(self) -> int:
        return int(self.alpha.size)

    @classmethod
    def sbm_preset(cls, n: int, seed: int = 0) -> "LinearCoefficients":
        """alpha ~ N(0, 1), beta ~ N(1, 1), gamma ~ N(-1, 1), one frozen draw per seed."""
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, 1.0, n), rng.normal(1.0, 1.0, n), rng.normal(-1.0, 1.0, n))

    @classmethod
    def constant(cls, n: int, alpha: float = 0.0, beta: float = 0.0, gamma: float = 0.0) -> "LinearCoefficients":
        return cls(np.full(n, alpha), np.full(n, beta), np.full(n, gamma))


def _check_len(n: int, *arrays: np.ndarray) -> None:
    for a in arrays:
        if a.shape[-1] != n:
            raise ArgumentError(f"length mismatch: expected {n}, got {a.shape[-1]}")


def simulate_linear(coef: LinearCoefficients, z, e) -> np.ndarray:
    """``Y = alpha + beta * z + gamma * e``."""
    zz, ee = _zv(z), np.asarray(e, dtype=float)
    _check_len(coef.n, zz, ee)
    return coef.alpha + coef.beta * zz + coef.gamma * ee


def simulate_lipschitz(alpha, beta, lipschitz: float, shape: str, z, e) -> np.ndarray:
    """``Y = alpha + beta * z + L * g(e)`` for a 1-Lipschitz shape ``g``."""
    if shape not in SHAPES:
        raise ArgumentError(f"unknown shape {shape!r}; choose from {sorted(SHAPES)}")
    zz, ee = _zv(z), np.asarray(e, dtype=float)
    a, b = np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float)
    _check_len(a.size, zz, ee)
    return a + b * zz + lipschitz * SHAPES[shape](ee)


def simulate_delta(z, e, model: "DeltaModel", rng: np.random.Generator) -> np.ndarray:
    """``Y = -z`` where ``|e - z| < delta``, otherwise ``Uniform(-1, 1)``."""
    zz, ee = _zv(z), np.asarray(e, dtype=float)
    _check_len(zz.shape[-1], ee)
    pure = np.abs(ee - zz) < model.delta
    noise = rng.uniform(-1.0, 1.0, size=zz.shape)
    return np.where(pure, -zz, noise)


@dataclass(frozen=True, eq=False)
class LinearModel:
    coef: LinearCoefficients
    kind: str = field(default="linear", init=False)

    def outcomes(self, z, e, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return simulate_linear(self.coef, z, e)

    expected_outcomes = outcomes

    def unit_effects(self, full_exposure: np.ndarray) -> np.ndarray:
        c = self.coef
        return 2.0 * c.beta + 2.0 * c.gamma * full_exposure


@dataclass(frozen=True, eq=False)
class LipschitzModel:
    alpha: np.ndarray
    beta: np.ndarray
    lipschitz: float
    shape: str = "identity"
    kind: str = field(default="lipschitz", init=False)

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ArgumentError(f"unknown shape {self.shape!r}; choose from {sorted(SHAPES)}")
        object.__setattr__(self, "alpha", _vec(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _vec(self.beta, "beta"))

    def outcomes(self, z, e, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return simulate_lipschitz(self.alpha, self.beta, self.lipschitz, self.shape, z, e)

    expected_outcomes = outcomes

    def unit_effects(self, full_exposure: np.ndarray) -> np.ndarray:
        g = SHAPES[self.shape]
        return 2.0 * self.beta + self.lipschitz * (g(full_exposure) - g(-full_exposure))


@dataclass(frozen=True, eq=False)
class DeltaModel:
    """Outcomes equal ``-z`` inside the delta-ball around ``z``, uniform noise outside."""

    delta: float
    bound: float = 2.0
    kind: str = field(default="delta", init=False)

    def __post_init__(self) -> None:
        if not self.delta > 0:
            raise ArgumentError("delta must be positive")

    def outcomes(self, z, e, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        if rng is None:
            raise ArgumentError("the delta model needs a random generator")
        return simulate_delta(z, e, self, rng)

    def expected_outcomes(self, z, e) -> np.ndarray:
        zz, ee = _zv(z), np.asarray(e, dtype=float)
        return np.where(np.abs(ee - zz) < self.delta, -zz, 0.0)

    def unit_effects(self, full_exposure: np.ndarray) -> np.ndarray:
        return np.full(np.shape(full_exposure), -2.0)


@dataclass(frozen=True)
class MarketplaceSpec:
    n_customers: int
    n_listings: int
    n_types: int = 20
    phi_same: float = 0.016
    phi_diff: float = 0.0001
    alpha_lift: float = 1.0
    rounds_history: int = 12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_customers < 0 or self.n_listings < 0 or self.n_types < 1:
            raise ArgumentError("counts must be nonnegative and n_types positive")
        for name in ("phi_same", "phi_diff"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ArgumentError(f"{name} must lie in [0, 1]")
        if self.alpha_lift < 0:
            raise ArgumentError("alpha_lift must be nonnegative")
        if self.rounds_history < 0:
            raise ArgumentError("rounds_history must be nonnegative")

    @classmethod
    def from_config(cls, text: str) -> "MarketplaceSpec":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        casts = {"n_customers": int, "n_listings": int, "n_types": int, "rounds_history": int,
                 "seed": int, "phi_same": float, "phi_diff": float, "alpha_lift": float}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ArgumentError(f"line {lineno}: expected key=value")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in casts:
                raise ArgumentError(f"line {lineno}: unknown key {key!r}")
            try:
                kw[key] = casts[key](val)
            except ValueError as exc:
                raise ArgumentError(f"line {lineno}: bad value for {key}: {val!r}") from exc
        return cls(**kw)

    def to_config(self) -> str:
        return "".join(f"{k} = {getattr(self, k)}\n" for k in self.__dataclass_fields__)


@dataclass(frozen=True, eq=False)
class MarketRound:
    """One application/booking round.

    ``accepted_by[s]`` is the customer listing ``s`` booked (-1 if none);
    ``y[i]`` is 1 when at least one listing accepted customer ``i``.
    """

    accepted_by: np.ndarray
    y: np.ndarray
    n_applications: int
    n_clamped: int


def marketplace_types(spec: MarketplaceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Customer and listing types, fixed by ``spec.seed``."""
    rng = np.random.default_rng([spec.seed, 0])
    return rng.integers(spec.n_types, size=spec.n_customers), rng.integers(spec.n_types, size=spec.n_listings)


def _base_probs(spec: MarketplaceSpec) -> np.ndarray:
    ct, lt = marketplace_types(spec)
    return np.where(ct[:, None] == lt[None, :], spec.phi_same, spec.phi_diff)


def _lifted(spec: MarketplaceSpec, base: np.ndarray, z: Optional[np.ndarray]) -> tuple[np.ndarray, int]:
    if z is None:
        return base, 0
    lift = np.where(np.asarray(z) == 1, spec.alpha_lift, 1.0)
    p = base * lift[:, None]
    over = p > 1.0
    return np.minimum(p, 1.0), int(np.count_nonzero(over))


def _resolve(probs: np.ndarray, u_apply: np.ndarray, u_accept: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    apps = u_apply < probs
    n, m = probs.shape
    has = apps.any(axis=0)
    winner = np.argmax(np.where(apps, u_accept, -1.0), axis=0) if n else np.zeros(m, dtype=np.int64)
    accepted = np.where(has, winner, -1)
    y = np.zeros(n, dtype=np.int8)
    y[accepted[has]] = 1
    return accepted, y, int(np.count_nonzero(apps))


def marketplace_round(spec: MarketplaceSpec, z, rng: np.random.Generator) -> MarketRound:
    """Customers apply independently; each listing with applications accepts one uniformly.

    ``z=None`` means every customer is in control.  Treated customers have
    their application probabilities multiplied by ``alpha_lift`` (clamped
    at 1; clamped entries are counted in ``n_clamped``).
    """
    zz = None if z is None else np.asarray(getattr(z, "z", z))
    if zz is not None and zz.shape != (spec.n_customers,):
        raise ArgumentError("assignment length must equal n_customers")
    probs, clamped = _lifted(spec, _base_probs(spec), zz)
    shape = (spec.n_customers, spec.n_listings)
    accepted, y, n_apps = _resolve(probs, rng.random(shape), rng.random(shape))
    return MarketRound(accepted, y, n_apps, clamped)


def marketplace_tau_samples(spec: MarketplaceSpec, reps: int, seed: int = 0) -> np.ndarray:
    """Per-replication all-treated minus all-control booking rates, common random numbers."""
    from .design import draw_rng

    base = _base_probs(spec)
    treated, _ = _lifted(spec, base, np.ones(spec.n_customers))
    shape = (spec.n_customers, spec.n_listings)
    out = np.empty(reps)
    for r in range(reps):
        rng = draw_rng(seed, r, 3)
        u1, u2 = rng.random(shape), rng.random(shape)
        _, y1, _ = _resolve(treated, u1, u2)
        _, y0, _ = _resolve(base, u1, u2)
        out[r] = y1.mean() - y0.mean()
    return out


def build_history_graph(spec: MarketplaceSpec, weights: str = "bookings") -> BipartiteGraph:
    """Customer-listing graph from ``rounds_history`` all-control rounds.

    ``weights="bookings"`` counts successful bookings of ``i`` at ``s``;
    ``"applications"`` counts applications instead.
    """
    if weights not in ("bookings", "applications"):
        raise ArgumentError("weights must be 'bookings' or 'applications'")
    from .design import draw_rng

    base = _base_probs(spec)
    shape = (spec.n_customers, spec.n_listings)
    counts = np.zeros(shape)
    for r in range(spec.rounds_history):
        rng = draw_rng(spec.seed, r, 1)
        u1, u2 = rng.random(shape), rng.random(shape)
        if weights == "applications":
            counts += u1 < base
            continue
        accepted, _, _ = _resolve(base, u1, u2)
        s = np.flatnonzero(accepted >= 0)
        counts[accepted[s], s] += 1
    return BipartiteGraph.from_matrix(counts)


@dataclass(frozen=True, eq=False)
class MarketplaceModel:
    """Booking outcomes from live rounds; ``rounds > 1`` averages several rounds per draw."""

    spec: MarketplaceSpec
    tau_reps: int = 500
    rounds: int = 1
    kind: str = field(default="marketplace", init=False)

    def __post_init__(self) -> None:
        if self.rounds < 1 or self.tau_reps < 1:
            raise ArgumentError("rounds and tau_reps must be positive")

    def outcomes(self, z, e, rng: np.random.Generator) -> np.ndarray:
        zz = np.asarray(getattr(z, "z", z))
        if zz.ndim == 2:
            return np.stack([self.outcomes(row, None, rng) for row in zz])
        ys = [marketplace_round(self.spec, zz, rng).y for _ in range(self.rounds)]
        return np.mean(ys, axis=0)


OutcomeModel = Union[LinearModel, LipschitzModel, DeltaModel, MarketplaceModel]


def true_tate(model: OutcomeModel, folded: Optional[FoldedGraph] = None, n: Optional[int] = None,
              seed: int = 0) -> float:
    """Average total treatment effect ``mean(Y(all treated) - Y(all control))``.

    Exposure-based models evaluate their pure outcomes at ``e = C 1`` (all
    ones when ``folded`` is omitted, i.e. normalized exposures).  The
    marketplace effect is a common-random-numbers Monte-Carlo estimate.
    """
    if isinstance(model, MarketplaceModel):
        return float(np.mean(marketplace_tau_samples(model.spec, model.tau_reps, seed)))
    if not hasattr(model, "unit_effects"):
        raise ArgumentError(f"no closed-form effect for {type(model).__name__}")
    if folded is not None:
        full = folded.apply(np.ones(folded.n))
    else:
        if n is None:
            n = _model_size(model)
        if n is None:
            raise ArgumentError("unit count required for this model")
        full = np.ones(n)
    return float(np.mean(model.unit_effects(full)))


def _model_size(model: OutcomeModel) -> Optional[int]:
    if isinstance(model, LinearModel):
        return model.coef.n
    if isinstance(model, LipschitzModel):
        return int(model.alpha.size)
    return None
