"""Loading, validation, and preparation of attributed social graphs.

Graphs are stored as compressed sparse adjacency (CSR-style ``indptr`` /
``indices`` arrays) over dense node ids ``0..N-1``. Ingestion from edge
lists remaps arbitrary node tokens to dense ids and keeps the original
tokens around as a sidecar id map so results can be traced back to the
source data.
"""

from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised when an input file cannot be parsed into a graph."""


_DELIMITERS = {"csv": ",", "tsv": "\t", "whitespace": None}


@dataclass
class SocialGraph:
    """Undirected simple graph with one numeric attribute per node.

    ``indices[indptr[v]:indptr[v+1]]`` is the sorted neighbor list of node
    ``v``. Adjacency is symmetric, has no self-loops and no duplicate
    edges; ``validate()`` checks all of that by full scan.
    """

    indptr: np.ndarray
    indices: np.ndarray
    attribute: np.ndarray | None = None
    id_map: list[str] | None = None  # dense id -> original token

    @property
    def n_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def avg_degree(self) -> float:
        return 2.0 * self.n_edges / self.n_nodes if self.n_nodes else 0.0

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = np.searchsorted(row, v)
        return i < len(row) and row[i] == v

    def adjacency_lists(self) -> list[list[int]]:
        """Plain-list adjacency, the fastest form for Python event loops."""
        return [self.neighbors(v).tolist() for v in range(self.n_nodes)]

    def edge_array(self) -> np.ndarray:
        """All edges as an (m, 2) array with u < v, sorted."""
        src = np.repeat(np.arange(self.n_nodes), self.degrees)
        mask = src < self.indices
        return np.column_stack([src[mask], self.indices[mask]])

    def validate(self) -> None:
        """Full-scan check of the structural invariants; raises on violation."""
        n = self.n_nodes
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise ValueError("corrupt indptr")
        for v in range(n):
            row = self.neighbors(v)
            if len(row) == 0:
                continue
            if np.any(np.diff(row) <= 0):
                raise ValueError(f"neighbor list of node {v} not strictly sorted")
            if np.any(row == v):
                raise ValueError(f"self-loop at node {v}")
            if np.any(row < 0) or np.any(row >= n):
                raise ValueError(f"neighbor id out of range at node {v}")
        # symmetry
        for v in range(n):
            for u in self.neighbors(v):
                if not self.has_edge(int(u), v):
                    raise ValueError(f"asymmetric edge ({v}, {u})")
        if self.attribute is not None:
            if len(self.attribute) != n:
                raise ValueError("attribute length does not match node count")
            if not np.all(np.isfinite(self.attribute)):
                raise ValueError("non-finite attribute value")

    @classmethod
    def from_edges(
        cls,
        edges: np.ndarray | Sequence[tuple[int, int]],
        n_nodes: int | None = None,
        attribute: np.ndarray | None = None,
        id_map: list[str] | None = None,
    ) -> "SocialGraph":
        """Build a graph from integer edge pairs, dropping self-loops and duplicates."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n_nodes is None:
            n_nodes = int(edges.max()) + 1 if len(edges) else 0
        edges = edges[edges[:, 0] != edges[:, 1]]
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        if len(lo):
            uniq = np.unique(lo * np.int64(n_nodes) + hi)
            lo, hi = uniq // n_nodes, uniq % n_nodes
        both_src = np.concatenate([lo, hi])
        both_dst = np.concatenate([hi, lo])
        order = np.lexsort((both_dst, both_src))
        indices = both_dst[order].astype(np.int32)
        counts = np.bincount(both_src, minlength=n_nodes)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        return cls(indptr=indptr, indices=indices, attribute=attribute, id_map=id_map)


@dataclass
class EligibilityRule:
    """Deterministic predicate over the node attribute.

    ``kind`` is one of ``ge`` (attribute >= cutoff), ``le`` (<= cutoff) or
    ``between`` (closed interval ``[low, high]``). Comparisons are
    inclusive, so ties at the cutoff count as eligible.
    """

    kind: str
    cutoff: float = 0.0
    low: float = 0.0
    high: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("ge", "le", "between"):
            raise ValueError(f"unknown eligibility kind {self.kind!r}")

    def evaluate(self, attribute: np.ndarray) -> np.ndarray:
        if self.kind == "ge":
            return attribute >= self.cutoff
        if self.kind == "le":
            return attribute <= self.cutoff
        return (attribute >= self.low) & (attribute <= self.high)

    def to_dict(self) -> dict:
        if self.kind == "between":
            return {"kind": "between", "low": self.low, "high": self.high}
        return {"kind": self.kind, "cutoff": self.cutoff}

    @classmethod
    def from_dict(cls, d: dict) -> "EligibilityRule":
        if d["kind"] == "between":
            return cls(kind="between", low=float(d["low"]), high=float(d["high"]))
        return cls(kind=d["kind"], cutoff=float(d["cutoff"]))


@dataclass
class AttributeLaw:
    """Sampling law for synthetic node attributes."""

    law: str  # uniform | normal | lognormal | exponential
    params: dict = field(default_factory=dict)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        p = self.params
        if self.law == "uniform":
            return rng.uniform(p.get("low", 0.0), p.get("high", 1.0), size=n)
        if self.law == "normal":
            return rng.normal(p.get("mean", 0.0), p.get("std", 1.0), size=n)
        if self.law == "lognormal":
            return rng.lognormal(p.get("mean", 0.0), p.get("sigma", 1.0), size=n)
        if self.law == "exponential":
            return rng.exponential(p.get("scale", 1.0), size=n)
        raise ValueError(f"unknown attribute law {self.law!r}")

    def to_dict(self) -> dict:
        return {"law": self.law, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeLaw":
        d = dict(d)
        return cls(law=d.pop("law"), params=d)


def _split_line(line: str, delim: str | None) -> list[str]:
    return line.split(delim) if delim is not None else line.split()


def load_edge_list(path: str | os.PathLike, fmt: str = "whitespace") -> SocialGraph:
    """Load an undirected simple graph from a two-column edge file.

    Node tokens may be arbitrary strings; they are remapped to dense ids
    ``0..N-1`` in sorted token order (numeric sort when every token parses
    as an integer). Duplicate edges and self-loops are dropped. Lines that
    are empty or start with ``#`` are skipped.
    """
    if fmt not in _DELIMITERS:
        raise ValueError(f"unknown edge list format {fmt!r}")
    delim = _DELIMITERS[fmt]
    pairs: list[tuple[str, str]] = []
    with open(path, "rt", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p for p in _split_line(line, delim) if p != ""]
            if len(parts) < 2:
                raise GraphFormatError(f"{path}: line {lineno}: expected two node tokens, got {line!r}")
            pairs.append((parts[0], parts[1]))
    if not pairs:
        raise GraphFormatError(f"{path}: no edges found")
    tokens = sorted({t for pair in pairs for t in pair}, key=_token_sort_key(pairs))
    index = {t: i for i, t in enumerate(tokens)}
    edges = np.array([(index[a], index[b]) for a, b in pairs], dtype=np.int64)
    return SocialGraph.from_edges(edges, n_nodes=len(tokens), id_map=tokens)


def _token_sort_key(pairs: Iterable[tuple[str, str]]):
    tokens = {t for pair in pairs for t in pair}
    try:
        for t in tokens:
            int(t)
        return lambda t: (0, int(t), t)
    except ValueError:
        return lambda t: (1, 0, t)


def attach_attributes(
    graph: SocialGraph, path: str | os.PathLike, attribute_name: str
) -> tuple[SocialGraph, int]:
    """Attach a numeric per-node attribute from a CSV table.

    The table must have a header naming an id column (first column) and
    the requested attribute column, or exactly two headerless columns
    ``id,value``. Original ids are matched through the graph's id map.
    Nodes without a value are removed together with their incident edges;
    the second return value is the number of dropped nodes.

    Raises GraphFormatError for non-numeric values (naming the row) and
    ValueError when more than half of the nodes would be dropped.
    """
    values: dict[str, float] = {}
    with open(path, "rt", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise GraphFormatError(f"{path}: empty attribute table")
    header = rows[0]
    col = None
    if attribute_name in header:
        col = header.index(attribute_name)
        data_rows = rows[1:]
        start_line = 2
    elif len(header) == 2 and not _is_number(header[1]):
        raise GraphFormatError(f"{path}: column {attribute_name!r} not found in header {header}")
    else:
        col = 1
        data_rows = rows
        start_line = 1
    for offset, row in enumerate(data_rows):
        lineno = start_line + offset
        if len(row) <= col:
            raise GraphFormatError(f"{path}: row {lineno}: missing value column")
        raw = row[col].strip()
        if raw == "":
            continue  # explicit missing value
        if not _is_number(raw):
            raise GraphFormatError(f"{path}: row {lineno}: non-numeric value {raw!r}")
        values[row[0].strip()] = float(raw)

    tokens = graph.id_map if graph.id_map is not None else [str(i) for i in range(graph.n_nodes)]
    attr = np.full(graph.n_nodes, np.nan)
    for v, tok in enumerate(tokens):
        if tok in values:
            attr[v] = values[tok]
    keep = np.isfinite(attr)
    dropped = int(np.count_nonzero(~keep))
    if dropped > graph.n_nodes // 2:
        raise ValueError(
            f"{dropped} of {graph.n_nodes} nodes lack attribute {attribute_name!r}; refusing to drop a majority"
        )
    if dropped == 0:
        return (
            SocialGraph(graph.indptr, graph.indices, attribute=attr, id_map=graph.id_map),
            0,
        )
    sub = induced_subgraph(graph, np.flatnonzero(keep))
    sub.attribute = attr[keep]
    return sub, dropped


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def induced_subgraph(graph: SocialGraph, nodes: np.ndarray) -> SocialGraph:
    """Induced subgraph on ``nodes`` with ids re-densified in sorted order."""
    nodes = np.sort(np.asarray(nodes, dtype=np.int64))
    remap = np.full(graph.n_nodes, -1, dtype=np.int64)
    remap[nodes] = np.arange(len(nodes))
    edges = graph.edge_array()
    mask = (remap[edges[:, 0]] >= 0) & (remap[edges[:, 1]] >= 0)
    new_edges = remap[edges[mask]]
    id_map = None
    if graph.id_map is not None:
        id_map = [graph.id_map[v] for v in nodes]
    attr = graph.attribute[nodes] if graph.attribute is not None else None
    return SocialGraph.from_edges(new_edges, n_nodes=len(nodes), attribute=attr, id_map=id_map)


def connected_components(graph: SocialGraph) -> np.ndarray:
    """Component label per node, labels ordered by first-seen node id."""
    n = graph.n_nodes
    labels = np.full(n, -1, dtype=np.int64)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            v = stack.pop()
            for u in graph.neighbors(v):
                if labels[u] < 0:
                    labels[u] = current
                    stack.append(int(u))
        current += 1
    return labels


def largest_connected_component(graph: SocialGraph) -> tuple[SocialGraph, dict[int, int]]:
    """Induced subgraph on the largest component plus a size histogram.

    The histogram maps component size to the number of components of that
    size. Ties between equally large components break toward the one
    containing the lowest node id.
    """
    if graph.n_nodes == 0:
        raise ValueError("empty graph")
    labels = connected_components(graph)
    sizes = np.bincount(labels)
    histogram = {int(s): int(c) for s, c in zip(*np.unique(sizes, return_counts=True))}
    best = int(np.argmax(sizes))  # argmax takes the first (lowest label) on ties
    members = np.flatnonzero(labels == best)
    if len(members) == graph.n_nodes:
        return graph, histogram
    return induced_subgraph(graph, members), histogram


def apply_eligibility(graph: SocialGraph, rule: EligibilityRule) -> tuple[np.ndarray, float]:
    """Evaluate the eligibility rule on every node.

    Returns the boolean label vector and the eligible fraction. A fraction
    of exactly 0 or 1 makes the experiment degenerate and only triggers a
    warning, not an error.
    """
    if graph.attribute is None:
        raise ValueError("graph has no node attribute; attach one first")
    labels = rule.evaluate(graph.attribute)
    fraction = float(np.count_nonzero(labels)) / graph.n_nodes
    if fraction in (0.0, 1.0):
        warnings.warn(
            f"degenerate eligibility fraction {fraction:.2f}: every node is on the same side",
            stacklevel=2,
        )
    return labels, fraction


def rule_for_fraction(graph: SocialGraph, fraction: float, kind: str = "ge") -> EligibilityRule:
    """Pick a threshold whose achieved eligible fraction is closest to ``fraction``.

    The relationship between cutoff and fraction is a step function over the
    observed attribute values, so the achieved fraction is reported by
    ``apply_eligibility`` and may differ slightly from the request.
    """
    if graph.attribute is None:
        raise ValueError("graph has no node attribute")
    if not 0.0 < fraction < 1.0:
        raise ValueError("target fraction must lie strictly between 0 and 1")
    if kind not in ("ge", "le"):
        raise ValueError("threshold search supports only 'ge' or 'le' rules")
    values = np.sort(np.unique(graph.attribute))
    n = graph.n_nodes
    best_cut, best_err = float(values[0]), 2.0
    for cut in values:
        if kind == "ge":
            frac = np.count_nonzero(graph.attribute >= cut) / n
        else:
            frac = np.count_nonzero(graph.attribute <= cut) / n
        err = abs(frac - fraction)
        if err < best_err:
            best_cut, best_err = float(cut), err
    return EligibilityRule(kind=kind, cutoff=best_cut)


def generate_synthetic_graph(
    n: int,
    target_avg_degree: float,
    attribute_law: AttributeLaw | dict,
    seed: int,
) -> SocialGraph:
    """Preferential-attachment graph with i.i.d. node attributes.

    Each arriving node attaches to ``m = round(target_avg_degree / 2)``
    existing nodes chosen proportionally to degree, which yields an average
    degree close to the target (slightly below it, by ``m^2/n``). The result
    is connected by construction and deterministic under ``seed``.
    """
    if n < 10:
        raise ValueError("need at least 10 nodes")
    if target_avg_degree >= n:
        raise ValueError("target average degree must be below the node count")
    m = max(1, int(round(target_avg_degree / 2.0)))
    if m >= n:
        raise ValueError("attachment count must be below the node count")
    if isinstance(attribute_law, dict):
        attribute_law = AttributeLaw.from_dict(attribute_law)
    rng = np.random.default_rng(seed)

    # endpoint list doubles as the degree-proportional sampling urn
    urn: list[int] = []
    edges: list[tuple[int, int]] = []
    targets = list(range(m))
    for v in range(m, n):
        for t in targets:
            edges.append((v, t))
        urn.extend(targets)
        urn.extend([v] * m)
        chosen: set[int] = set()
        while len(chosen) < m:
            chosen.add(urn[int(rng.integers(0, len(urn)))])
        targets = sorted(chosen)
    attr = attribute_law.sample(n, rng)
    return SocialGraph.from_edges(np.array(edges, dtype=np.int64), n_nodes=n, attribute=attr)


# --- canonical on-disk form -------------------------------------------------
#
# A graph directory holds:
#   edges.txt        sorted "u v" lines over dense ids, u < v
#   attributes.csv   "node,value" rows (only when the graph is attributed)
#   id_map.csv       "dense,original" rows (only when tokens were remapped)
#   meta.json        node/edge counts and the attribute name


def save_canonical(graph: SocialGraph, directory: str | os.PathLike,
                   attribute_name: str = "attribute") -> dict[str, str]:
    """Write the canonical text form; returns the emitted file paths."""
    os.makedirs(directory, exist_ok=True)
    paths = {}
    edges_path = os.path.join(directory, "edges.txt")
    with open(edges_path, "wt", encoding="utf-8") as fh:
        for u, v in graph.edge_array():
            fh.write(f"{u} {v}\n")
    paths["edges"] = edges_path
    if graph.attribute is not None:
        attr_path = os.path.join(directory, "attributes.csv")
        with open(attr_path, "wt", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["node", attribute_name])
            for v, val in enumerate(graph.attribute):
                writer.writerow([v, repr(float(val))])
        paths["attributes"] = attr_path
    if graph.id_map is not None:
        map_path = os.path.join(directory, "id_map.csv")
        with open(map_path, "wt", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["dense", "original"])
            for v, tok in enumerate(graph.id_map):
                writer.writerow([v, tok])
        paths["id_map"] = map_path
    meta_path = os.path.join(directory, "meta.json")
    with open(meta_path, "wt", encoding="utf-8") as fh:
        json.dump(
            {
                "n_nodes": graph.n_nodes,
                "n_edges": graph.n_edges,
                "attribute_name": attribute_name if graph.attribute is not None else None,
            },
            fh,
            indent=2,
        )
    paths["meta"] = meta_path
    return paths


def load_canonical(directory: str | os.PathLike) -> SocialGraph:
    """Load a graph written by ``save_canonical``."""
    meta_path = os.path.join(directory, "meta.json")
    with open(meta_path, "rt", encoding="utf-8") as fh:
        meta = json.load(fh)
    n = int(meta["n_nodes"])
    edges = []
    with open(os.path.join(directory, "edges.txt"), "rt", encoding="utf-8") as fh:
        for line in fh:
            a, b = line.split()
            edges.append((int(a), int(b)))
    attr = None
    attr_path = os.path.join(directory, "attributes.csv")
    if meta.get("attribute_name") is not None and os.path.exists(attr_path):
        attr = np.empty(n)
        with open(attr_path, "rt", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                attr[int(row[0])] = float(row[1])
    id_map = None
    map_path = os.path.join(directory, "id_map.csv")
    if os.path.exists(map_path):
        with open(map_path, "rt", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            id_map = [row[1] for row in sorted(reader, key=lambda r: int(r[0]))]
    g = SocialGraph.from_edges(np.array(edges, dtype=np.int64), n_nodes=n, id_map=id_map)
    g.attribute = attr
    return g
