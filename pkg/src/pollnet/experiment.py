"""End-to-end experiment orchestration: ingest, simulate, embed, train, report.

An experiment spec is a plain JSON document; running it produces every
intermediate artifact on disk plus one summary row per seed in a stable
CSV schema, so sweeps stay plottable and reproducible bit for bit.
"""

from __future__ import annotations

import csv
import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytics, classifier, embeddings, graphs, simulate

SUMMARY_COLUMNS = [
    "dataset", "n_nodes", "eligibility_target", "eligibility_achieved",
    "honesty_ratio", "root_ratio", "seed", "coverage", "dgraph_nodes",
    "dgraph_edges", "ineligible_fraction", "f1", "accuracy", "precision",
    "recall", "best_epoch",
]

SWEEP_COLUMNS = [
    "dataset", "eligibility", "honesty_ratio", "root_ratio", "stat", "seed",
    "coverage", "f1", "accuracy", "precision", "recall",
    "coverage_std", "f1_std", "accuracy_std", "precision_std", "recall_std",
    "error",
]


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that produced it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - tag and rethrow whatever the stage raised
        raise StageError(name, exc) from exc


@dataclass
class DatasetSpec:
    """Where the social graph comes from: files on disk or a synthetic twin."""

    kind: str  # files | synthetic
    name: str = "dataset"
    # files
    edges: str | None = None
    fmt: str = "whitespace"
    attributes: str | None = None
    attribute_name: str = "attribute"
    largest_component: bool = True
    # synthetic
    n: int = 1000
    avg_degree: float = 16.0
    attribute_law: dict = field(default_factory=lambda: {"law": "lognormal", "mean": 3.0, "sigma": 1.0})
    graph_seed: int = 7

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in ("files", "synthetic"):
            raise ValueError("dataset.kind must be 'files' or 'synthetic'")
        if kind == "files" and not d.get("edges"):
            raise ValueError("dataset.kind 'files' needs an 'edges' path")
        d.setdefault("name", "dataset")
        allowed = {f for f in cls.__dataclass_fields__}  # noqa: C416
        unknown = set(d) - allowed
        if unknown:
            raise ValueError(f"unknown dataset keys: {sorted(unknown)}")
        return cls(kind=kind, **d)

    def to_dict(self) -> dict:
        base = {"kind": self.kind, "name": self.name}
        if self.kind == "files":
            base.update(edges=self.edges, fmt=self.fmt, attributes=self.attributes,
                        attribute_name=self.attribute_name,
                        largest_component=self.largest_component)
        else:
            base.update(n=self.n, avg_degree=self.avg_degree,
                        attribute_law=self.attribute_law, graph_seed=self.graph_seed)
        return base

    def cache_key(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class EmbeddingParams:
    dim: int = 64
    walk_length: int = 20
    walks_per_node: int = 10
    p: float = 1.0
    q: float = 1.0
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    weighted: bool = True  # forward multiplicities carry most of the class signal

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingParams":
        return cls(**d)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExperimentSpec:
    """Everything one experiment needs, serializable to JSON."""

    dataset: DatasetSpec
    eligibility: dict  # EligibilityRule dict, or {"target_fraction": f, "kind": "ge"}
    simulation: dict = field(default_factory=dict)  # SimulationConfig kwargs, sans seed
    embedding: EmbeddingParams = field(default_factory=EmbeddingParams)
    classifier_params: classifier.TrainParams = field(default_factory=classifier.TrainParams)
    split_ratios: tuple[float, float, float] = (0.70, 0.15, 0.15)
    seeds: list[int] = field(default_factory=lambda: [1])
    output_dir: str = "out"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        required = {"dataset", "eligibility", "output_dir"}
        missing = required - set(d)
        if missing:
            raise ValueError(f"experiment spec missing keys: {sorted(missing)}")
        seeds = d.get("seeds", [1])
        if not isinstance(seeds, list) or not seeds:
            raise ValueError("seeds must be a non-empty list")
        return cls(
            dataset=DatasetSpec.from_dict(d["dataset"]),
            eligibility=dict(d["eligibility"]),
            simulation=dict(d.get("simulation", {})),
            embedding=EmbeddingParams.from_dict(d.get("embedding", {})),
            classifier_params=classifier.TrainParams.from_dict(d.get("classifier", {})),
            split_ratios=tuple(d.get("split_ratios", (0.70, 0.15, 0.15))),
            seeds=[int(s) for s in seeds],
            output_dir=d["output_dir"],
        )

    @classmethod
    def from_json(cls, path: str | os.PathLike) -> "ExperimentSpec":
        with open(path, "rt", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_dict(),
            "eligibility": self.eligibility,
            "simulation": self.simulation,
            "embedding": self.embedding.to_dict(),
            "classifier": self.classifier_params.to_dict(),
            "split_ratios": list(self.split_ratios),
            "seeds": self.seeds,
            "output_dir": self.output_dir,
        }

    def sim_config(self, seed: int) -> simulate.SimulationConfig:
        return simulate.SimulationConfig(**{**self.simulation, "seed": seed})


_GRAPH_CACHE: dict[str, graphs.SocialGraph] = {}
_BETWEENNESS_CACHE: dict[str, np.ndarray] = {}


def resolve_dataset(spec: DatasetSpec, use_cache: bool = True) -> graphs.SocialGraph:
    """Build or load the social graph described by the dataset spec."""
    key = spec.cache_key()
    if use_cache and key in _GRAPH_CACHE:
        return _GRAPH_CACHE[key]
    if spec.kind == "synthetic":
        graph = graphs.generate_synthetic_graph(
            spec.n, spec.avg_degree, spec.attribute_law, seed=spec.graph_seed
        )
    else:
        graph = graphs.load_edge_list(spec.edges, fmt=spec.fmt)
        if spec.attributes:
            graph, _ = graphs.attach_attributes(graph, spec.attributes, spec.attribute_name)
        if spec.largest_component:
            graph, _ = graphs.largest_connected_component(graph)
    if use_cache:
        _GRAPH_CACHE[key] = graph
    return graph


def ranking_centrality(spec: DatasetSpec, graph: graphs.SocialGraph,
                       use_cache: bool = True) -> np.ndarray:
    """Betweenness for root selection, cached per dataset (it only depends on the graph)."""
    key = spec.cache_key()
    if use_cache and key in _BETWEENNESS_CACHE:
        return _BETWEENNESS_CACHE[key]
    scores = analytics.betweenness_for_ranking(graph)
    if use_cache:
        _BETWEENNESS_CACHE[key] = scores
    return scores


def resolve_eligibility(
    graph: graphs.SocialGraph, eligibility: dict
) -> tuple[np.ndarray, float, graphs.EligibilityRule, float | None]:
    """Labels, achieved fraction, the concrete rule, and the target (when given)."""
    if "target_fraction" in eligibility:
        target = float(eligibility["target_fraction"])
        rule = graphs.rule_for_fraction(graph, target, kind=eligibility.get("kind", "ge"))
    else:
        target = None
        rule = graphs.EligibilityRule.from_dict(eligibility)
    labels, achieved = graphs.apply_eligibility(graph, rule)
    return labels, achieved, rule, target


@dataclass
class ExperimentResult:
    rows: list[dict]
    files: list[str]
    output_dir: str


def _append_summary_row(path: str, row: dict) -> None:
    new_file = not os.path.exists(path)
    with open(path, "at", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        if new_file:
            writer.writeheader()
        writer.writerow(row)


def read_summary(path: str | os.PathLike) -> list[dict]:
    with open(path, "rt", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def run_experiment(spec: ExperimentSpec, quiet: bool = False) -> ExperimentResult:
    """Run the full pipeline for every seed in the spec.

    Artifacts land under ``spec.output_dir``; partially completed stages
    keep whatever they already wrote, and failures carry the stage name.
    """
    out = spec.output_dir
    os.makedirs(out, exist_ok=True)
    files: list[str] = []
    rows: list[dict] = []

    graph = _stage("ingest", resolve_dataset, spec.dataset)
    graph_dir = os.path.join(out, "graph")
    files.extend(_stage("ingest", graphs.save_canonical, graph, graph_dir,
                        spec.dataset.attribute_name).values())
    labels, achieved, rule, target = _stage("eligibility", resolve_eligibility, graph, spec.eligibility)
    elig_path = os.path.join(out, "graph", "eligibility.json")
    with open(elig_path, "wt", encoding="utf-8") as fh:
        json.dump({"rule": rule.to_dict(), "achieved_fraction": achieved,
                   "target_fraction": target, "eligible_count": int(labels.sum())}, fh, indent=2)
    files.append(elig_path)
    labels_path = os.path.join(out, "graph", "labels.csv")
    with open(labels_path, "wt", encoding="utf-8") as fh:
        fh.write("node,eligible\n")
        for v, e in enumerate(labels):
            fh.write(f"{v},{int(e)}\n")
    files.append(labels_path)

    centrality = _stage("analytics", ranking_centrality, spec.dataset, graph)

    spec_path = os.path.join(out, "experiment.json")
    with open(spec_path, "wt", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
    files.append(spec_path)

    summary_path = os.path.join(out, "summary.csv")
    for seed in spec.seeds:
        row, seed_files = _run_seed(spec, graph, labels, achieved, target, centrality, seed, out)
        files.extend(seed_files)
        rows.append(row)
        _append_summary_row(summary_path, row)
        if not quiet:
            print(
                f"[{spec.dataset.name} seed {seed}] coverage={row['coverage']:.4f} "
                f"f1={row['f1']:.4f} accuracy={row['accuracy']:.4f}"
            )
    files.append(summary_path)
    return ExperimentResult(rows=rows, files=files, output_dir=out)


def _run_seed(spec, graph, labels, achieved, target, centrality, seed, out):
    files: list[str] = []
    config = spec.sim_config(seed)
    seed_dir = os.path.join(out, f"seed_{seed}")
    sim_dir = os.path.join(seed_dir, "sim")

    profiles = _stage("roles", simulate.assign_roles, graph, labels, centrality, config, seed)
    trace = _stage("simulate", simulate.run_dissemination, graph, profiles, config, seed)
    cov = simulate.coverage(trace, graph)
    dgraph = _stage("simulate", simulate.build_dissemination_graph, trace, labels)
    files.extend(_stage("simulate", trace.save, sim_dir).values())
    files.extend(_stage("simulate", dgraph.save, sim_dir).values())
    cov_path = os.path.join(sim_dir, "coverage.json")
    with open(cov_path, "wt", encoding="utf-8") as fh:
        json.dump({"coverage": cov, "n_forwards": trace.n_forwards,
                   "n_participations": trace.n_participations}, fh)
    files.append(cov_path)
    hist = simulate.participation_histogram(trace)
    hist_path = os.path.join(sim_dir, "participation_hist.csv")
    with open(hist_path, "wt", encoding="utf-8") as fh:
        fh.write("group,participations,nodes\n")
        for count, nodes in sorted(hist.nonroot.items()):
            fh.write(f"nonroot,{count},{nodes}\n")
        for count, nodes in sorted(hist.root.items()):
            fh.write(f"root,{count},{nodes}\n")
    files.append(hist_path)

    emb_dir = os.path.join(seed_dir, "embed")
    static = _stage("embed", _embed_dgraph, dgraph, spec.embedding, seed, emb_dir, files)

    model_dir = os.path.join(seed_dir, "model")
    split = _stage("train", classifier.stratified_split, dgraph.ineligible,
                   spec.split_ratios, seed)
    model, history = _stage(
        "train", classifier.train_classifier, dgraph, static.vectors,
        dgraph.ineligible, split, spec.classifier_params, seed,
    )
    files.extend(_stage("train", model.save, model_dir, {
        "seed": seed, "best_epoch": history.best_epoch,
        "best_val_f1": history.best_val_f1,
        "hyper": spec.classifier_params.to_dict(),
    }).values())

    metrics = _stage("evaluate", classifier.evaluate, model, dgraph, static.vectors,
                     dgraph.ineligible, split.test)
    metrics_path = os.path.join(model_dir, "metrics.json")
    with open(metrics_path, "wt", encoding="utf-8") as fh:
        json.dump({"test": metrics.to_dict(), "best_epoch": history.best_epoch,
                   "best_val_f1": history.best_val_f1}, fh, indent=2)
    files.append(metrics_path)

    row = {
        "dataset": spec.dataset.name,
        "n_nodes": graph.n_nodes,
        "eligibility_target": "" if target is None else f"{target:.4f}",
        "eligibility_achieved": f"{achieved:.4f}",
        "honesty_ratio": config.honesty_ratio,
        "root_ratio": config.root_ratio,
        "seed": seed,
        "coverage": round(cov, 6),
        "dgraph_nodes": dgraph.n_nodes,
        "dgraph_edges": dgraph.n_edges,
        "ineligible_fraction": round(float(np.mean(dgraph.ineligible)), 6),
        "f1": round(metrics.f1, 6),
        "accuracy": round(metrics.accuracy, 6),
        "precision": round(metrics.precision, 6),
        "recall": round(metrics.recall, 6),
        "best_epoch": history.best_epoch,
    }
    return row, files


def _embed_dgraph(dgraph, params: EmbeddingParams, seed: int, emb_dir: str, files: list):
    corpus = embeddings.generate_walks(
        dgraph, params.walk_length, params.walks_per_node, params.p, params.q,
        seed=seed, weighted=params.weighted,
    )
    os.makedirs(emb_dir, exist_ok=True)
    corpus_path = os.path.join(emb_dir, "walks.txt")
    corpus.save(corpus_path)
    files.append(corpus_path)
    emb = embeddings.train_skipgram(
        corpus, dim=params.dim, window=params.window, negatives=params.negatives,
        epochs=params.epochs, learning_rate=params.learning_rate, seed=seed,
    )
    files.extend(emb.save(emb_dir).values())
    return emb


# --- sweeps -------------------------------------------------------------


def expand_grid(spec_dict: dict) -> list[dict]:
    """Cartesian product of the listed eligibility/honesty/root values."""
    base = dict(spec_dict)
    elig = base.get("eligibility", {})
    fractions = elig.get("target_fraction", 0.5)
    fractions = fractions if isinstance(fractions, list) else [fractions]
    sim = dict(base.get("simulation", {}))
    honesty = sim.get("honesty_ratio", 0.6)
    honesty = honesty if isinstance(honesty, list) else [honesty]
    roots = sim.get("root_ratio", 0.01)
    roots = roots if isinstance(roots, list) else [roots]
    cells = []
    for f, h, r in itertools.product(fractions, honesty, roots):
        cell = json.loads(json.dumps(base))  # deep copy
        cell["eligibility"] = {**elig, "target_fraction": f}
        cell["simulation"] = {**sim, "honesty_ratio": h, "root_ratio": r}
        cell["output_dir"] = os.path.join(
            base["output_dir"], f"e{f:g}_h{h:g}_r{r:g}".replace(".", "p")
        )
        cells.append(cell)
    return cells


def _run_cell(cell_dict: dict) -> tuple[dict, list[dict], str]:
    """One sweep cell; returns (cell key, per-seed rows, error message)."""
    key = {
        "eligibility": cell_dict["eligibility"]["target_fraction"],
        "honesty_ratio": cell_dict["simulation"]["honesty_ratio"],
        "root_ratio": cell_dict["simulation"]["root_ratio"],
        "dataset": cell_dict["dataset"].get("name", "dataset"),
    }
    try:
        result = run_experiment(ExperimentSpec.from_dict(cell_dict), quiet=True)
        return key, result.rows, ""
    except StageError as exc:
        return key, [], str(exc)


def sweep(spec_dict: dict, workers: int = 1, quiet: bool = False) -> list[dict]:
    """Run the grid, then write per-run and aggregate rows to ``sweep.csv``.

    Cells are isolated; a failing cell contributes an error row and the
    rest continue. With ``workers > 1`` cells run on a process pool.
    """
    cells = expand_grid(spec_dict)
    if not cells:
        raise ValueError("empty sweep grid")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(c) for c in cells]

    table: list[dict] = []
    for key, rows, error in outcomes:
        if error:
            table.append({**{c: "" for c in SWEEP_COLUMNS}, **key,
                          "stat": "error", "error": error})
            if not quiet:
                print(f"cell {key}: {error}")
            continue
        metric_rows = []
        for row in rows:
            rec = {**{c: "" for c in SWEEP_COLUMNS}, **key, "stat": "run",
                   "seed": row["seed"], "coverage": row["coverage"], "f1": row["f1"],
                   "accuracy": row["accuracy"], "precision": row["precision"],
                   "recall": row["recall"], "error": ""}
            metric_rows.append(rec)
        table.extend(metric_rows)
        agg = {**{c: "" for c in SWEEP_COLUMNS}, **key, "stat": "agg", "error": ""}
        for metric in ("coverage", "f1", "accuracy", "precision", "recall"):
            vals = np.array([float(r[metric]) for r in metric_rows])
            agg[metric] = round(float(vals.mean()), 6)
            agg[f"{metric}_std"] = round(float(vals.std(ddof=0)), 6)
        table.append(agg)

    out = spec_dict["output_dir"]
    os.makedirs(out, exist_ok=True)
    sweep_path = os.path.join(out, "sweep.csv")
    with open(sweep_path, "wt", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(table)
    if not quiet:
        print(f"sweep results written to {sweep_path}")
    return table
