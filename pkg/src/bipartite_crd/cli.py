"""Command-line interface.

Exit status: 0 on success, 2 for invalid arguments or inputs, 3 when a
computation would exceed its resource limit.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io
from .design import DesignSpec, sample_assignment, unit_clustering
from .errors import ArgumentError, EstimationError, ResourceError
from .gen import PowerLawSpec, SbmSpec, generate_powerlaw, generate_sbm
from .graph import NormalizationMode, fold_graph
from .harness import Metric, brute_force_bias, read_results, run_experiment, write_results
from .objective import (
    Clustering,
    best_interference_labels,
    direct_cut_cost,
    objective_h,
    objective_trvar,
    partition_input,
)
from .outcome import (
    SHAPES,
    DeltaModel,
    LinearCoefficients,
    LinearModel,
    LipschitzModel,
    MarketplaceModel,
    build_history_graph,
)
from .partition import PartitionConfig, partition_labels


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _mode(code: str) -> NormalizationMode:
    return NormalizationMode.from_code(code)


def cmd_gen(args: argparse.Namespace) -> None:
    if args.family == "sbm":
        g, le, ls = generate_sbm(SbmSpec(args.n_exp, args.n_int, args.groups, args.p_in, args.p_out, args.seed))
    elif args.family == "powerlaw":
        g, le, ls = generate_powerlaw(PowerLawSpec(args.n_exp, args.classes, args.lam, args.p, args.q,
                                                   args.zipf_exponent, args.seed))
    else:
        from .outcome import marketplace_types

        spec = io.read_marketplace(args.config)
        g = build_history_graph(spec, args.weights)
        le, ls = marketplace_types(spec)
    io.write_graph(g, args.output)
    if args.labels:
        io.write_labels(le, ls, args.labels)


def cmd_fold(args: argparse.Namespace) -> None:
    io.write_folded(fold_graph(io.read_graph(args.graph), _mode(args.mode)), args.output)


def cmd_objective(args: argparse.Namespace) -> None:
    g = io.read_graph(args.graph)
    c = io.read_clustering(args.clustering, tolerance=args.tolerance)
    if args.objective == "h":
        value = objective_h(fold_graph(g, _mode(args.mode)), c)
    elif args.objective == "trvar":
        value = objective_trvar(g, c)
    else:
        value = direct_cut_cost(g, np.r_[c.labels, best_interference_labels(g, c.labels, c.k)])
    print(_fmt(value))


def cmd_partition(args: argparse.Namespace) -> None:
    cfg = PartitionConfig(args.k, args.tolerance, args.max_passes, args.init, args.seed)
    node_weights = None
    if args.bipartite:
        g = io.read_graph(args.bipartite)
        weights, node_weights = partition_input(g, args.objective, _mode(args.mode))
        n = g.n_experimental
    elif args.graph:
        weights = io.read_folded(args.graph).symmetrized()
        n = weights.shape[0]
    else:
        raise ArgumentError("pass --graph (folded TSV) or --bipartite (graph TSV)")
    res = partition_labels(weights, cfg, node_weights)
    c = Clustering(res.labels[:n], k=args.k, tolerance=args.tolerance)
    io.write_clustering(c, args.output)
    if args.verbose:
        print("cut_history", " ".join(_fmt(v) for v in res.cut_history), file=sys.stderr)


def _design_from(kind: str, clustering: Optional[Clustering], n: Optional[int], k_t: Optional[int],
                 p: float, name: str) -> DesignSpec:
    if kind == "complete":
        if n is None:
            raise ArgumentError("complete randomization needs --n")
        return DesignSpec.balanced_cluster(unit_clustering(n), n // 2 if k_t is None else k_t, name=name)
    if kind == "unit_bernoulli":
        if n is None:
            raise ArgumentError("unit_bernoulli needs --n")
        return DesignSpec.unit_bernoulli(n, p, name=name)
    if clustering is None:
        raise ArgumentError(f"{kind} needs --clustering")
    if kind == "cluster_bernoulli":
        return DesignSpec.cluster_bernoulli(clustering, p, name=name)
    return DesignSpec.balanced_cluster(clustering, clustering.k // 2 if k_t is None else k_t, name=name)


def cmd_design(args: argparse.Namespace) -> None:
    c = io.read_clustering(args.clustering, args.tolerance) if args.clustering else None
    n = args.n if args.n is not None else (c.n if c is not None else None)
    spec = _design_from(args.kind, c, n, args.k_t, args.p, args.kind).with_seed(args.seed)
    io.write_assignment(sample_assignment(spec, args.draw_index), args.output)


def _model(args: argparse.Namespace, n: int):
    coef = io.read_coefficients(args.coeffs) if args.coeffs else None
    if args.model in ("linear", "lipschitz") and coef is None:
        coef = LinearCoefficients.sbm_preset(n, args.seed)
    if args.model == "linear":
        return LinearModel(coef)
    if args.model == "lipschitz":
        return LipschitzModel(coef.alpha, coef.beta, args.lipschitz, args.shape)
    if args.model == "delta":
        return DeltaModel(args.delta)
    if not args.market:
        raise ArgumentError("the marketplace model needs --market CONFIG")
    return MarketplaceModel(io.read_marketplace(args.market), tau_reps=args.tau_reps, rounds=args.market_rounds)


def cmd_evaluate(args: argparse.Namespace) -> None:
    g = io.read_graph(args.graph)
    n = g.n_experimental
    designs = []
    for path in args.clustering or []:
        c = io.read_clustering(path, args.tolerance)
        designs.append(_design_from("balanced_cluster", c, n, args.k_t, 0.5, Path(path).stem))
    for kind in args.design or []:
        designs.append(_design_from(kind, None, n, None, args.p, kind))
    if not designs:
        raise ArgumentError("pass at least one --clustering or --design")
    model = _model(args, n)
    reports = run_experiment(g, designs, model, args.draws, args.seed, _mode(args.mode),
                             ips_delta=args.ips_delta, propensity_draws=args.propensity_draws,
                             resamples=args.resamples)
    if args.exact_bias:
        for d, r in zip(designs, reports):
            if d.kind == "balanced_cluster":
                exact = brute_force_bias(g, d.clustering, d.k_t, model, _mode(args.mode))
                r.metrics["exact_bias"] = Metric(exact, float("nan"), float("nan"))
    if args.output:
        write_results(reports, args.output)
    for r in reports:
        b = r["bias"]
        print(f"{r.design}\tbias={_fmt(b.value)}\tci=[{_fmt(b.ci_lo)}, {_fmt(b.ci_hi)}]\t"
              f"std={_fmt(r['std'].value)}\trmse={_fmt(r['rmse'].value)}")


def cmd_report(args: argparse.Namespace) -> None:
    rows = read_results(args.results)
    metrics = args.metric or ["bias", "rel_bias", "std", "rmse"]
    keys: list[tuple[str, str, str]] = []
    table: dict[tuple[str, str, str], dict[str, dict[str, str]]] = {}
    for r in rows:
        key = (r["design"], r["draws"], r["seed"])
        if key not in table:
            keys.append(key)
            table[key] = {}
        table[key][r["metric"]] = r
    header = ["design", "draws", "seed", "objective_h"] + metrics
    out = ["\t".join(header)]
    for key in keys:
        cells = list(key)
        first = next(iter(table[key].values()))
        cells.append(first["objective_h"])
        for m in metrics:
            r = table[key].get(m)
            cells.append("-" if r is None else f"{float(r['value']):.4f} [{float(r['ci_lo']):.4f}, {float(r['ci_hi']):.4f}]")
        out.append("\t".join(cells))
    text = "\n".join(out) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bipartite-crd", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic bipartite graph")
    gsub = gen.add_subparsers(dest="family", required=True)
    sbm = gsub.add_parser("sbm")
    sbm.add_argument("--n-exp", type=int, required=True)
    sbm.add_argument("--n-int", type=int, required=True)
    sbm.add_argument("--groups", type=int, required=True)
    sbm.add_argument("--p-in", type=float, required=True)
    sbm.add_argument("--p-out", type=float, required=True)
    pl = gsub.add_parser("powerlaw")
    pl.add_argument("--n-exp", type=int, required=True)
    pl.add_argument("--classes", type=int, required=True)
    pl.add_argument("--lam", type=float, required=True)
    pl.add_argument("--p", type=float, required=True)
    pl.add_argument("--q", type=float, required=True)
    pl.add_argument("--zipf-exponent", type=float, default=3.0)
    mk = gsub.add_parser("market", help="history graph of an all-control marketplace")
    mk.add_argument("--config", required=True)
    mk.add_argument("--weights", choices=("bookings", "applications"), default="bookings")
    for p in (sbm, pl, mk):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--labels", help="also write unit_id,label,side")
    gen.set_defaults(func=cmd_gen)

    fold = sub.add_parser("fold", help="fold the bipartite graph onto experimental units")
    fold.add_argument("--graph", required=True)
    fold.add_argument("--mode", default="nn")
    fold.add_argument("-o", "--output", required=True)
    fold.set_defaults(func=cmd_fold)

    obj = sub.add_parser("objective", help="evaluate a clustering objective")
    obj.add_argument("--graph", required=True)
    obj.add_argument("--clustering", required=True)
    obj.add_argument("--objective", choices=("h", "trvar", "direct"), default="h")
    obj.add_argument("--mode", default="nn")
    obj.add_argument("--tolerance", type=float, default=0.10)
    obj.set_defaults(func=cmd_objective)

    part = sub.add_parser("partition", help="balanced clustering by local search")
    part.add_argument("--graph", help="folded graph TSV")
    part.add_argument("--bipartite", help="bipartite graph TSV, folded per --objective")
    part.add_argument("--objective", choices=("h", "trvar", "direct"), default="h")
    part.add_argument("--mode", default="nn")
    part.add_argument("--k", type=int, required=True)
    part.add_argument("--tolerance", type=float, default=0.10)
    part.add_argument("--max-passes", type=int, default=20)
    part.add_argument("--init", choices=("greedy_line", "random"), default="greedy_line")
    part.add_argument("--seed", type=int, default=0)
    part.add_argument("-v", "--verbose", action="store_true")
    part.add_argument("-o", "--output", required=True)
    part.set_defaults(func=cmd_partition)

    des = sub.add_parser("design", help="draw one treatment assignment")
    des.add_argument("--kind", choices=("balanced_cluster", "cluster_bernoulli", "unit_bernoulli", "complete"),
                     default="balanced_cluster")
    des.add_argument("--clustering")
    des.add_argument("--n", type=int)
    des.add_argument("--k-t", type=int)
    des.add_argument("--p", type=float, default=0.5)
    des.add_argument("--tolerance", type=float, default=0.10)
    des.add_argument("--seed", type=int, default=0)
    des.add_argument("--draw-index", type=int, default=0)
    des.add_argument("-o", "--output", required=True)
    des.set_defaults(func=cmd_design)

    ev = sub.add_parser("evaluate", help="Monte-Carlo bias, std and RMSE of the DIM estimator")
    ev.add_argument("--graph", required=True)
    ev.add_argument("--clustering", action="append", help="balanced cluster design (repeatable)")
    ev.add_argument("--design", action="append", choices=("complete", "unit_bernoulli"),
                    help="unit-level design (repeatable)")
    ev.add_argument("--k-t", type=int)
    ev.add_argument("--p", type=float, default=0.5)
    ev.add_argument("--tolerance", type=float, default=0.10)
    ev.add_argument("--model", choices=("linear", "lipschitz", "delta", "marketplace"), default="linear")
    ev.add_argument("--coeffs")
    ev.add_argument("--lipschitz", type=float, default=1.0)
    ev.add_argument("--shape", choices=sorted(SHAPES), default="identity")
    ev.add_argument("--delta", type=float, default=0.5)
    ev.add_argument("--market")
    ev.add_argument("--tau-reps", type=int, default=500)
    ev.add_argument("--market-rounds", type=int, default=1, help="booking rounds averaged per draw")
    ev.add_argument("--mode", default="nn")
    ev.add_argument("--draws", type=int, default=1000)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--ips-delta", type=float)
    ev.add_argument("--propensity-draws", type=int, default=10_000)
    ev.add_argument("--resamples", type=int, default=1000)
    ev.add_argument("--exact-bias", action="store_true",
                    help="also enumerate every balanced assignment for the exact bias")
    ev.add_argument("-o", "--output")
    ev.set_defaults(func=cmd_evaluate)

    rep = sub.add_parser("report", help="tabulate a results CSV")
    rep.add_argument("--results", required=True)
    rep.add_argument("--metric", action="append")
    rep.add_argument("-o", "--output")
    rep.set_defaults(func=cmd_report)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ArgumentError, EstimationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
