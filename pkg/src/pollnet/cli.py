"""Command-line entry points for the staged experiment pipeline.

Stages share one experiment config (JSON) and one output directory; each
subcommand reads the artifacts of its predecessors from that directory,
so ``ingest -> simulate -> embed -> train -> evaluate`` can be driven
step by step, or all at once with ``run``/``sweep``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import analytics, classifier, embeddings, graphs, simulate
from .experiment import (
    ExperimentSpec,
    StageError,
    read_summary,
    resolve_dataset,
    resolve_eligibility,
    run_experiment,
    sweep,
)


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="experiment spec (JSON)")
    sub.add_argument("--seed", type=int, default=None,
                     help="override: use this single seed instead of the spec's list")
    sub.add_argument("--out", default=None, help="override the spec's output directory")
    sub.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pollnet",
        description="Simulate peer-to-peer poll dissemination and detect ineligible participants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("ingest", "load or synthesize the social graph and write its canonical form"),
        ("stats", "structural diagnostics (clustering, rich club, communities)"),
        ("simulate", "run the dissemination protocol and export the trace"),
        ("embed", "random-walk embeddings of the dissemination graph"),
        ("train", "train the ineligibility classifier"),
        ("evaluate", "score the trained classifier on the test split"),
        ("run", "full pipeline over every seed in the spec"),
        ("sweep", "grid over eligibility x honesty x roots x seeds"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _common_flags(p)
        if name == "stats":
            p.add_argument("--dissemination", action="store_true",
                           help="measure the dissemination graph of the chosen seed instead of the social graph")
    return parser


def _load_spec(args) -> ExperimentSpec:
    spec = ExperimentSpec.from_json(args.config)
    if args.out:
        spec.output_dir = args.out
    if args.seed is not None:
        spec.seeds = [args.seed]
    return spec


def _one_seed(spec: ExperimentSpec) -> int:
    return spec.seeds[0]


def _prepare_graph(spec: ExperimentSpec):
    graph = resolve_dataset(spec.dataset)
    labels, achieved, rule, target = resolve_eligibility(graph, spec.eligibility)
    return graph, labels, achieved, rule, target


def _cmd_ingest(args) -> int:
    spec = _load_spec(args)
    graph, labels, achieved, rule, target = _prepare_graph(spec)
    graph_dir = os.path.join(spec.output_dir, "graph")
    paths = graphs.save_canonical(graph, graph_dir, spec.dataset.attribute_name)
    if spec.dataset.kind == "files":
        # re-load the raw file to report the component histogram before pruning
        raw = graphs.load_edge_list(spec.dataset.edges, fmt=spec.dataset.fmt)
        _, hist = graphs.largest_connected_component(raw)
    else:
        _, hist = graphs.largest_connected_component(graph)
    hist_path = os.path.join(graph_dir, "components.csv")
    with open(hist_path, "wt", encoding="utf-8") as fh:
        fh.write("component_size,count\n")
        for size, count in sorted(hist.items()):
            fh.write(f"{size},{count}\n")
    with open(os.path.join(graph_dir, "eligibility.json"), "wt", encoding="utf-8") as fh:
        json.dump({"rule": rule.to_dict(), "achieved_fraction": achieved,
                   "target_fraction": target}, fh, indent=2)
    with open(os.path.join(graph_dir, "labels.csv"), "wt", encoding="utf-8") as fh:
        fh.write("node,eligible\n")
        for v, e in enumerate(labels):
            fh.write(f"{v},{int(e)}\n")
    print(f"graph: {graph.n_nodes} nodes, {graph.n_edges} edges "
          f"(mean degree {graph.avg_degree:.2f})")
    print(f"eligible fraction: {achieved:.2%} (rule {rule.to_dict()})")
    print(f"canonical form in {graph_dir} ({', '.join(sorted(paths))})")
    return 0


def _cmd_stats(args) -> int:
    spec = _load_spec(args)
    if getattr(args, "dissemination", False):
        seed = _one_seed(spec)
        sim_dir = os.path.join(spec.output_dir, f"seed_{seed}", "sim")
        dgraph = simulate.DisseminationGraph.load(sim_dir)
        indptr, indices, _ = dgraph.undirected()
        graph = graphs.SocialGraph(indptr=indptr, indices=indices.astype(np.int32))
        label = f"dissemination graph (seed {seed})"
    else:
        graph, *_ = _prepare_graph(spec)
        label = "social graph"
    report = analytics.structure_report(graph, seed=_one_seed(spec))
    stats_dir = os.path.join(spec.output_dir, "structure")
    os.makedirs(stats_dir, exist_ok=True)
    with open(os.path.join(stats_dir, "structure.json"), "wt", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    with open(os.path.join(stats_dir, "rich_club.csv"), "wt", encoding="utf-8") as fh:
        fh.write("k,phi\n")
        for k, phi in sorted(report.rich_club.items()):
            fh.write(f"{k},{phi}\n")
    with open(os.path.join(stats_dir, "communities.csv"), "wt", encoding="utf-8") as fh:
        fh.write("community_rank,size\n")
        for i, size in enumerate(report.community_sizes):
            fh.write(f"{i},{size}\n")
    print(f"{label}: {report.n_nodes} nodes, mean degree {report.avg_degree:.2f}")
    print(f"average clustering: {report.avg_clustering:.4f}")
    print(f"communities: {len(report.community_sizes)} "
          f"(largest {report.community_sizes[0] if report.community_sizes else 0}, "
          f"modularity {report.modularity:.4f})")
    print(f"reports in {stats_dir}")
    return 0


def _cmd_simulate(args) -> int:
    spec = _load_spec(args)
    seed = _one_seed(spec)
    graph, labels, achieved, *_ = _prepare_graph(spec)
    config = spec.sim_config(seed)
    centrality = analytics.betweenness_for_ranking(graph)
    profiles = simulate.assign_roles(graph, labels, centrality, config, seed)
    trace = simulate.run_dissemination(graph, profiles, config, seed)
    dgraph = simulate.build_dissemination_graph(trace, labels)
    sim_dir = os.path.join(spec.output_dir, f"seed_{seed}", "sim")
    trace.save(sim_dir)
    dgraph.save(sim_dir)
    cov = simulate.coverage(trace, graph)
    hist = simulate.participation_histogram(trace)
    with open(os.path.join(sim_dir, "coverage.json"), "wt", encoding="utf-8") as fh:
        json.dump({"coverage": cov, "n_forwards": trace.n_forwards,
                   "n_participations": trace.n_participations}, fh)
    with open(os.path.join(sim_dir, "participation_hist.csv"), "wt", encoding="utf-8") as fh:
        fh.write("group,participations,nodes\n")
        for count, nodes in sorted(hist.nonroot.items()):
            fh.write(f"nonroot,{count},{nodes}\n")
        for count, nodes in sorted(hist.root.items()):
            fh.write(f"root,{count},{nodes}\n")
    print(f"seed {seed}: coverage {cov:.4f}, {trace.n_forwards} forwards, "
          f"{trace.n_participations} participations")
    print(f"dissemination graph: {dgraph.n_nodes} nodes, {dgraph.n_edges} edges "
          f"({float(np.mean(dgraph.ineligible)):.2%} ineligible)")
    print(f"artifacts in {sim_dir}")
    return 0


def _cmd_embed(args) -> int:
    spec = _load_spec(args)
    seed = _one_seed(spec)
    sim_dir = os.path.join(spec.output_dir, f"seed_{seed}", "sim")
    dgraph = simulate.DisseminationGraph.load(sim_dir)
    params = spec.embedding
    corpus = embeddings.generate_walks(
        dgraph, params.walk_length, params.walks_per_node, params.p, params.q,
        seed=seed, weighted=params.weighted,
    )
    emb = embeddings.train_skipgram(
        corpus, dim=params.dim, window=params.window, negatives=params.negatives,
        epochs=params.epochs, learning_rate=params.learning_rate, seed=seed,
    )
    emb_dir = os.path.join(spec.output_dir, f"seed_{seed}", "embed")
    os.makedirs(emb_dir, exist_ok=True)
    corpus.save(os.path.join(emb_dir, "walks.txt"))
    emb.save(emb_dir)
    print(f"seed {seed}: {len(corpus)} walks, dim {emb.dim}, "
          f"epoch losses {['%.4f' % l for l in emb.losses]}")
    print(f"embeddings in {emb_dir}")
    return 0


def _load_embed_artifacts(spec: ExperimentSpec, seed: int):
    sim_dir = os.path.join(spec.output_dir, f"seed_{seed}", "sim")
    emb_dir = os.path.join(spec.output_dir, f"seed_{seed}", "embed")
    dgraph = simulate.DisseminationGraph.load(sim_dir)
    emb = embeddings.EmbeddingMatrix.load(emb_dir)
    return dgraph, emb


def _cmd_train(args) -> int:
    spec = _load_spec(args)
    seed = _one_seed(spec)
    dgraph, emb = _load_embed_artifacts(spec, seed)
    split = classifier.stratified_split(dgraph.ineligible, spec.split_ratios, seed)
    model, history = classifier.train_classifier(
        dgraph, emb.vectors, dgraph.ineligible, split, spec.classifier_params, seed
    )
    model_dir = os.path.join(spec.output_dir, f"seed_{seed}", "model")
    model.save(model_dir, {"seed": seed, "best_epoch": history.best_epoch,
                           "best_val_f1": history.best_val_f1,
                           "hyper": spec.classifier_params.to_dict()})
    print(f"seed {seed}: best epoch {history.best_epoch} "
          f"(validation F1 {history.best_val_f1:.4f})")
    print(f"model in {model_dir}")
    return 0


def _cmd_evaluate(args) -> int:
    spec = _load_spec(args)
    seed = _one_seed(spec)
    dgraph, emb = _load_embed_artifacts(spec, seed)
    model_dir = os.path.join(spec.output_dir, f"seed_{seed}", "model")
    model = classifier.SageModel.load(model_dir)
    split = classifier.stratified_split(dgraph.ineligible, spec.split_ratios, seed)
    metrics = classifier.evaluate(model, dgraph, emb.vectors, dgraph.ineligible, split.test)
    with open(os.path.join(model_dir, "metrics.json"), "wt", encoding="utf-8") as fh:
        json.dump({"test": metrics.to_dict()}, fh, indent=2)
    print(f"seed {seed} test metrics: f1={metrics.f1:.4f} accuracy={metrics.accuracy:.4f} "
          f"precision={metrics.precision:.4f} recall={metrics.recall:.4f}")
    return 0


def _cmd_run(args) -> int:
    spec = _load_spec(args)
    result = run_experiment(spec)
    print(f"{len(result.rows)} seed(s) complete; summary in "
          f"{os.path.join(result.output_dir, 'summary.csv')}")
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config, "rt", encoding="utf-8") as fh:
        spec_dict = json.load(fh)
    if args.out:
        spec_dict["output_dir"] = args.out
    if args.seed is not None:
        spec_dict["seeds"] = [args.seed]
    table = sweep(spec_dict, workers=max(1, args.threads))
    n_err = sum(1 for r in table if r["stat"] == "error")
    n_cells = sum(1 for r in table if r["stat"] == "agg") + n_err
    print(f"{n_cells} cells, {n_err} failed")
    return 1 if n_err == n_cells and n_cells else 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "simulate": _cmd_simulate,
    "embed": _cmd_embed,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error in {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error in stage '{args.command}': {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
