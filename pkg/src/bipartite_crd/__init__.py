"""Cluster-randomized designs for bipartite experiments with interference."""

from .design import DesignSpec, sample_assignment, sample_matrix, unit_clustering
from .errors import ArgumentError, EstimationError, ResourceError
from .estimate import PropensityTable, dim_estimate, estimate_propensities, ips_estimate, ips_variance_bernoulli
from .gen import PowerLawSpec, SbmSpec, generate_powerlaw, generate_sbm
from .graph import (
    NORMALIZED,
    Assignment,
    BipartiteGraph,
    FoldedGraph,
    NormalizationMode,
    compute_doses,
    compute_exposures,
    exposures,
    fold_graph,
)
from .harness import (
    EvalReport,
    brute_force_bias,
    exact_bias_linear,
    lemma_bound_check,
    run_experiment,
    sbm_two_hop_isolation_prob,
)
from .objective import Clustering, cov_trace, direct_cut_cost, objective_h, objective_trvar
from .outcome import (
    DeltaModel,
    LinearCoefficients,
    LinearModel,
    LipschitzModel,
    MarketplaceModel,
    MarketplaceSpec,
    build_history_graph,
    marketplace_round,
    true_tate,
)
from .partition import PartitionConfig, balanced_partition

__version__ = "0.1.0"
