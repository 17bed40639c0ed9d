"""Acceptance criteria 1 to 11.

Each test records a one-line summary that the terminal report prints as
``criterion N: PASS|FAIL  details``.
"""

import filecmp
import math
from itertools import combinations

import numpy as np
import pytest

from bipartite_crd import (
    Clustering,
    DeltaModel,
    DesignSpec,
    LinearCoefficients,
    LinearModel,
    LipschitzModel,
    MarketplaceModel,
    MarketplaceSpec,
    PartitionConfig,
    SbmSpec,
    build_history_graph,
    fold_graph,
    generate_sbm,
    run_experiment,
)
from bipartite_crd.cli import main
from bipartite_crd.design import unit_clustering
from bipartite_crd.estimate import estimate_propensities
from bipartite_crd.fixtures import load_direct, load_dose_variance
from bipartite_crd.harness import brute_force_bias, exact_bias_linear, lemma_bound_check, sbm_two_hop_isolation_prob
from bipartite_crd.objective import cov_trace, direct_cut_cost, objective_h, objective_trvar, partition_input
from bipartite_crd.outcome import SHAPES
from bipartite_crd.partition import partition_labels
from conftest import balanced_labels, random_graph

pytestmark = pytest.mark.slow


@pytest.fixture
def verdict(record_property):
    def record(n, ok, detail):
        record_property("criterion", (n, detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return record


def h_partition(g, k, seed=0, objective="h"):
    weights, node_weights = partition_input(g, objective)
    res = partition_labels(weights, PartitionConfig(k=k, seed=seed), node_weights)
    return Clustering(res.labels[: g.n_experimental], k, tolerance=0.10)


def cis_disjoint(a, b):
    return a.ci_hi < b.ci_lo or b.ci_hi < a.ci_lo


def test_criterion_01_closed_form_bias(verdict):
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        k = int(rng.choice([2, 3, 4]))
        n = k * int(rng.integers(1, 12 // k + 1))
        g = random_graph(rng, n, int(rng.integers(1, 17)), density=float(rng.uniform(0.1, 0.7)))
        c = Clustering(balanced_labels(rng, n, k), k)
        model = LinearModel(LinearCoefficients(*rng.normal(size=(3, n))))
        exact = exact_bias_linear(fold_graph(g), c, model.coef.gamma)
        brute = brute_force_bias(g, c, int(rng.integers(1, k)), model)
        worst = max(worst, abs(exact - brute))
    ok = worst <= 1e-10
    verdict(1, ok, f"max |exact - brute force| = {worst:.2e} over 200 instances (tol 1e-10)")
    assert ok


def test_criterion_02_monte_carlo_consistency(verdict):
    worst = 0.0
    for seed in range(20):
        g, labels, _ = generate_sbm(SbmSpec(60, 80, 4, 0.3, 0.03, seed=seed))
        c = Clustering(labels, 4)
        model = LinearModel(LinearCoefficients.sbm_preset(60, seed))
        rep = run_experiment(g, [DesignSpec.balanced_cluster(c, 2)], model, 10_000, master_seed=seed,
                             resamples=100)[0]
        worst = max(worst, abs(rep.bias - exact_bias_linear(fold_graph(g), c, model.coef.gamma)) / rep.se)
    ok = worst < 3
    verdict(2, ok, f"max |MC bias - exact| / SE = {worst:.2f} over 20 instances (limit 3)")
    assert ok


def test_criterion_03_minimax_covariance(verdict):
    rng = np.random.default_rng(3)
    clusterings = []
    for sub in combinations(range(1, 8), 3):
        lab = np.ones(8, dtype=int)
        lab[[0, *sub]] = 0
        clusterings.append(Clustering(lab, 2))
    agree = 0
    for _ in range(50):
        f = fold_graph(random_graph(rng, 8, int(rng.integers(2, 10)), density=float(rng.uniform(0.15, 0.6))))
        h = np.array([objective_h(f, c) for c in clusterings])
        cov = np.array([cov_trace(f, c, 1) for c in clusterings])
        arg_h = set(np.flatnonzero(h <= h.min() + 1e-9))
        arg_cov = set(np.flatnonzero(cov >= cov.max() - 1e-9))
        agree += arg_h == arg_cov
    ok = agree == 50
    verdict(3, ok, f"argmin H == argmax TrCov on {agree}/50 graphs (35 bipartitions each)")
    assert ok


def test_criterion_04_counterexamples(verdict):
    d = load_direct()
    f = fold_graph(d.graph)
    cost = (direct_cut_cost(d.graph, d.labels_1), direct_cut_cost(d.graph, d.labels_2))
    h_direct = (objective_h(f, d.clustering(1)), objective_h(f, d.clustering(2)))
    v = load_dose_variance()
    fv = fold_graph(v.graph)
    h_dose = (objective_h(fv, v.clustering_1), objective_h(fv, v.clustering_2))
    trv = (objective_trvar(v.graph, v.clustering_1), objective_trvar(v.graph, v.clustering_2))
    ok = (cost == (4.0, 4.0) and h_direct[0] < h_direct[1]
          and trv[1] < trv[0] and h_dose[1] > h_dose[0] and v.clustering_1 != v.clustering_2)
    verdict(4, ok, f"direct cut {cost[0]:g}/{cost[1]:g}, H {h_direct[0]:.4f} < {h_direct[1]:.4f}; "
                   f"n=50: dose-var clustering TrVar {trv[1]:.4f} < {trv[0]:.4f}, H {h_dose[1]:.3f} > {h_dose[0]:.3f}")
    assert ok


def test_criterion_05_zero_interference(verdict):
    g, _, _ = generate_sbm(SbmSpec(200, 400, 10, 0.5, 0.0, seed=5))
    c = h_partition(g, 10)
    model = LinearModel(LinearCoefficients.sbm_preset(200, 5))
    clustered, unit = run_experiment(
        g, [DesignSpec.balanced_cluster(c, 5, name="H"), DesignSpec.balanced_cluster(unit_clustering(200), 100)],
        model, 2000, master_seed=5)
    ok = abs(clustered.bias) < 3 * clustered.se and abs(unit.bias) > 10 * clustered.se
    verdict(5, ok, f"H bias {clustered.bias:.4f} ({abs(clustered.bias) / clustered.se:.2f} SE); "
                   f"unit bias {unit.bias:.4f} ({abs(unit.bias) / clustered.se:.0f} clustered SE)")
    assert ok


def test_criterion_06_table1_ordering(verdict):
    g, labels, _ = generate_sbm(SbmSpec(1000, 2000, 20, 0.5, 0.005, seed=6))
    designs = [
        DesignSpec.balanced_cluster(h_partition(g, 20), 10, name="H"),
        DesignSpec.balanced_cluster(Clustering(labels, 20), 10, name="true"),
        DesignSpec.balanced_cluster(h_partition(g, 20, objective="direct"), 10, name="direct"),
    ]
    model = LinearModel(LinearCoefficients.sbm_preset(1000, 6))
    h, true, direct = run_experiment(g, designs, model, 2000, master_seed=6)
    bh, bt, bd = abs(h.bias), abs(true.bias), abs(direct.bias)
    first = bh <= 1.1 * bt or (bh < bt and cis_disjoint(h["bias"], true["bias"]))
    second = bh < bd and cis_disjoint(h["bias"], direct["bias"])
    ok = first and second
    objs = "/".join(f"{r.objective_h:.2f}" for r in (h, true, direct))
    verdict(6, ok, f"|bias| H {bh:.4f}, true {bt:.4f}, direct {bd:.4f} (objective H {objs}); "
                   f"H<=1.1*true {first}, H<direct with disjoint CIs {second}")
    assert ok


def test_criterion_07_table2_trend(verdict):
    g, _, _ = generate_sbm(SbmSpec(200, 400, 10, 0.5, 0.005, seed=7))
    c = h_partition(g, 10)
    clustered = run_experiment(g, [DesignSpec.balanced_cluster(c, 5)], DeltaModel(0.5), 1000, master_seed=7)[0]
    unit = run_experiment(g, [DesignSpec.balanced_cluster(unit_clustering(200), 100)], DeltaModel(0.1), 1000,
                          master_seed=7)[0]
    rb_h, rb_u = clustered["rel_bias"].value, unit["rel_bias"].value
    ok = rb_h < 0.05 and abs(rb_u - 1.0) <= 0.05
    verdict(7, ok, f"delta=0.5 H relative bias {rb_h:.4f} (< 0.05); delta=0.1 unit relative bias {rb_u:.4f} (1 +- 0.05)")
    assert ok


def test_criterion_08_lemma_bounds(verdict):
    rng = np.random.default_rng(8)
    checks = failures = 0
    tight = 0.0
    for _ in range(50):
        k = int(rng.choice([2, 3, 4]))
        n = k * int(rng.integers(1, 12 // k + 1))
        g = random_graph(rng, n, int(rng.integers(1, 12)), density=float(rng.uniform(0.15, 0.6)))
        f = fold_graph(g)
        c = Clustering(balanced_labels(rng, n, k), k)
        k_t = int(rng.integers(1, k))
        a, b, lip = rng.normal(size=n), rng.normal(size=n), float(rng.uniform(0.1, 3.0))
        for shape in SHAPES:
            chk = lemma_bound_check(f, c, k_t, LipschitzModel(a, b, lip, shape))
            checks += 1
            failures += not chk.holds
            if shape == "identity":
                tight = max(tight, abs(chk.measured - chk.bound))
        for delta in (0.1, 0.3, 0.5):
            checks += 1
            failures += not lemma_bound_check(f, c, k_t, DeltaModel(delta)).holds
    ok = failures == 0 and tight <= 1e-10
    verdict(8, ok, f"{checks - failures}/{checks} bound checks hold; identity-shape gap {tight:.1e}")
    assert ok


def test_criterion_09_ips(verdict):
    g, _, _ = generate_sbm(SbmSpec(40, 80, 4, 0.1, 0.005, seed=3))
    c = h_partition(g, 8)
    rep = run_experiment(g, [DesignSpec.cluster_bernoulli(c, 0.5)], DeltaModel(0.5), 2000, master_seed=9,
                         ips_delta=0.5, propensity_draws=50_000, resamples=200)[0]
    ips_ok = rep.ips_skipped == 0 and abs(rep["ips_bias"].value) < 3 * rep["ips_se"].value

    dense, labels, _ = generate_sbm(SbmSpec(1000, 2000, 20, 0.5, 0.005, seed=9))
    table = estimate_propensities(DesignSpec.balanced_cluster(Clustering(labels, 20), 10, seed=9), dense, 0.1, 2000)
    p_max = float(max(table.p_treated.max(), table.p_control.max()))

    value = sbm_two_hop_isolation_prob(0.005, 0.5, 2000, 1000, 20)
    iso_ok = abs(math.log10(value) - math.log10(1e-11)) <= 1.0
    ok = ips_ok and p_max < 1e-3 and iso_ok
    verdict(9, ok, f"IPS bias {rep['ips_bias'].value:.4f} ({abs(rep['ips_bias'].value) / rep['ips_se'].value:.2f} SE, "
                   f"{rep.ips_skipped} skipped); dense max propensity {p_max:.1e}; isolation prob {value:.3e}")
    assert ok


def test_criterion_10_marketplace(verdict):
    spec = MarketplaceSpec(250, 500, 20, 0.016, 0.0001, alpha_lift=2.0, seed=0)
    g = build_history_graph(spec)
    c = h_partition(g, 20)
    model = MarketplaceModel(spec, tau_reps=500)
    h, unit = run_experiment(
        g, [DesignSpec.balanced_cluster(c, 10, name="H"), DesignSpec.balanced_cluster(unit_clustering(250), 125)],
        model, 500, master_seed=10)
    ratio = max(h["std"].value, unit["std"].value) / min(h["std"].value, unit["std"].value)
    ok = abs(h.bias) < abs(unit.bias) and cis_disjoint(h["bias"], unit["bias"]) and ratio <= 1.5
    verdict(10, ok, f"bias H {h.bias:.4f} [{h['bias'].ci_lo:.4f}, {h['bias'].ci_hi:.4f}] vs unit {unit.bias:.4f} "
                    f"[{unit['bias'].ci_lo:.4f}, {unit['bias'].ci_hi:.4f}]; std ratio {ratio:.2f}")
    assert ok


def test_criterion_11_cli_determinism(verdict, tmp_path, capsys):
    cfg = tmp_path / "market.cfg"
    cfg.write_text("n_customers = 30\nn_listings = 40\nn_types = 3\nphi_same = 0.2\nphi_diff = 0.01\n"
                   "alpha_lift = 2\nseed = 4\n")

    def pipeline(tag):
        d = tmp_path / tag
        d.mkdir()
        out = {}

        def run(name, argv, stdout_file=None):
            code = main([str(a) for a in argv])
            assert code == 0, (name, capsys.readouterr().err)
            text = capsys.readouterr().out
            if stdout_file:
                (d / stdout_file).write_text(text)
            out[name] = d / (stdout_file or name)

        run("sbm.tsv", ["gen", "sbm", "--n-exp", 40, "--n-int", 60, "--groups", 4, "--p-in", 0.4, "--p-out", 0.02,
                        "--seed", 11, "-o", d / "sbm.tsv", "--labels", d / "sbm_labels.csv"])
        out["sbm_labels.csv"] = d / "sbm_labels.csv"
        run("pl.tsv", ["gen", "powerlaw", "--n-exp", 30, "--classes", 3, "--lam", 0.5, "--p", 1, "--q", 0.02,
                       "--seed", 11, "-o", d / "pl.tsv"])
        run("market.tsv", ["gen", "market", "--config", cfg, "-o", d / "market.tsv"])
        run("folded.tsv", ["fold", "--graph", d / "sbm.tsv", "-o", d / "folded.tsv"])
        run("c.csv", ["partition", "--graph", d / "folded.tsv", "--k", 4, "--seed", 2, "-o", d / "c.csv"])
        run("c_direct.csv", ["partition", "--bipartite", d / "sbm.tsv", "--objective", "direct", "--k", 4,
                             "-o", d / "c_direct.csv"])
        for obj in ("h", "trvar", "direct"):
            run(f"objective_{obj}", ["objective", "--graph", d / "sbm.tsv", "--clustering", d / "c.csv",
                                     "--objective", obj], f"objective_{obj}.txt")
        run("a.csv", ["design", "--clustering", d / "c.csv", "--k-t", 2, "--seed", 3, "--draw-index", 5,
                      "-o", d / "a.csv"])
        run("eval", ["evaluate", "--graph", d / "sbm.tsv", "--clustering", d / "c.csv", "--design", "complete",
                     "--draws", 200, "--seed", 1, "--ips-delta", 0.5, "--propensity-draws", 500,
                     "--resamples", 100, "-o", d / "results.csv"], "eval.txt")
        out["results.csv"] = d / "results.csv"
        run("eval_delta", ["evaluate", "--graph", d / "sbm.tsv", "--clustering", d / "c.csv", "--model", "delta",
                           "--draws", 100, "--resamples", 50, "-o", d / "results.csv"], "eval_delta.txt")
        run("report", ["report", "--results", d / "results.csv", "-o", d / "report.tsv"])
        out["report"] = d / "report.tsv"
        return out

    a, b = pipeline("first"), pipeline("second")
    same = [name for name in a if filecmp.cmp(a[name], b[name], shallow=False)]
    ok = len(same) == len(a)
    verdict(11, ok, f"{len(same)}/{len(a)} CLI outputs byte-identical across reruns")
    assert ok
