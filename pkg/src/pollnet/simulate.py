"""Ballot dissemination over a social graph, with full trace recording.

Roots release a fixed number of ballot copies; every delivery may consume
one unit of the receiving node's participation budget and one unit of the
copy's capacity, then the copy is forwarded to a few neighbors picked by a
per-node round-robin cursor. Honest nodes only ever forward to eligible
neighbors; dishonest nodes sometimes ignore the rule. The recorded trace
induces the directed dissemination graph that the classifier later reads.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from array import array
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .graphs import SocialGraph

POOL_ELIGIBLE = 0  # only eligible neighbors may receive
POOL_ALL = 1       # any neighbor may receive
POOL_INELIGIBLE = 2  # ineligible neighbors preferred (and only they receive)


@dataclass
class SimulationConfig:
    """Knobs of one dissemination run.

    ``alpha`` and ``beta`` parameterize the participation-budget law: a
    node of degree ``d`` draws its budget from an exponential whose rate
    puts an ``alpha`` share of the mass below ``beta * d`` participations.
    ``hop_cap`` bounds the length of any forwarding sequence; because a
    copy keeps forwarding through budget-exhausted regions without losing
    capacity, event volume roughly doubles per extra hop, so keep the cap
    near the ballot capacity.
    """

    honesty_ratio: float = 0.6
    root_ratio: float = 0.01
    ballots_per_root: int = 30
    root_bonus_participations: int = 30
    ballot_capacity: int = 7
    fan_out: int = 2
    dishonest_action_prob: float = 0.5
    hop_cap: int = 7
    alpha: float = 0.9
    beta: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.honesty_ratio < 1.0:
            raise ValueError("honesty_ratio must lie in (0, 1)")
        if not 0.0 < self.root_ratio < 1.0:
            raise ValueError("root_ratio must lie in (0, 1)")
        if not 0.0 <= self.dishonest_action_prob <= 1.0:
            raise ValueError("dishonest_action_prob must lie in [0, 1]")
        if self.fan_out < 1:
            raise ValueError("fan_out must be positive")
        if self.ballot_capacity < 0 or self.hop_cap < 0:
            raise ValueError("capacity and hop cap must be non-negative")
        if not 0.0 < self.alpha < 1.0 or self.beta <= 0.0:
            raise ValueError("alpha in (0,1) and beta > 0 required")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown simulation config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class NodeProfile:
    """Per-node simulation state, as seen for a single node."""

    eligible: bool
    honest: bool
    is_root: bool
    participation_budget: int
    rr_cursor: int
    participations_used: int


@dataclass
class NodeProfiles:
    """Struct-of-arrays form of the per-node state for a whole graph."""

    eligible: np.ndarray
    honest: np.ndarray
    is_root: np.ndarray
    budget: np.ndarray
    rr_cursor: np.ndarray
    participations_used: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.eligible)

    @property
    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.is_root)

    def profile(self, v: int) -> NodeProfile:
        return NodeProfile(
            eligible=bool(self.eligible[v]),
            honest=bool(self.honest[v]),
            is_root=bool(self.is_root[v]),
            participation_budget=int(self.budget[v]),
            rr_cursor=int(self.rr_cursor[v]),
            participations_used=int(self.participations_used[v]),
        )

    def validate(self) -> None:
        if np.any(self.is_root & ~(self.honest & self.eligible)):
            raise ValueError("a root is not honest and eligible")
        if np.any(self.participations_used > self.budget):
            raise ValueError("participations exceed budget")


@dataclass
class BallotState:
    """One propagating ballot copy."""

    id: int
    root_origin: int
    remaining_capacity: int
    hop_count: int = 0
    lineage: tuple[int, ...] = ()


def participation_rate(degree, alpha: float = 0.9, beta: float = 0.1):
    """Rate of the budget exponential: an ``alpha`` share of draws falls below ``beta * degree``."""
    return -math.log(1.0 - alpha) / (beta * np.asarray(degree, dtype=np.float64))


def sample_participation_budgets(
    degrees: np.ndarray, alpha: float, beta: float, rng: np.random.Generator
) -> np.ndarray:
    """Budget per node: max(floor(X), 1) with X exponential at the degree-tied rate."""
    degrees = np.asarray(degrees)
    if np.any(degrees < 1):
        raise ValueError("isolated node: participation budgets need degree >= 1")
    lam = participation_rate(degrees, alpha, beta)
    raw = rng.exponential(1.0 / lam)
    return np.maximum(np.floor(raw), 1.0).astype(np.int64)


def sample_participation_budget(
    degree: int, alpha: float, beta: float, rng: np.random.Generator
) -> int:
    if degree < 1:
        raise ValueError("isolated node: participation budgets need degree >= 1")
    return int(sample_participation_budgets(np.array([degree]), alpha, beta, rng)[0])


def assign_roles(
    graph: SocialGraph,
    eligible: np.ndarray,
    centrality: np.ndarray,
    config: SimulationConfig,
    seed: int | None = None,
) -> NodeProfiles:
    """Draw honesty flags, pick roots, and sample participation budgets.

    Exactly ``round(honesty_ratio * N)`` nodes become honest, drawn
    uniformly. Roots are the ``ceil(root_ratio * N)`` highest-centrality
    nodes among the honest and eligible ones, ties broken toward the lower
    node id; each root gets the bonus participation budget on top of its
    sampled one.
    """
    n = graph.n_nodes
    if len(eligible) != n or len(centrality) != n:
        raise ValueError("labels and centrality must cover every node")
    rng = np.random.default_rng(config.seed if seed is None else seed)
    honest = np.zeros(n, dtype=bool)
    n_honest = int(round(config.honesty_ratio * n))
    honest[rng.permutation(n)[:n_honest]] = True

    n_roots = math.ceil(config.root_ratio * n)
    candidates = np.flatnonzero(honest & np.asarray(eligible, dtype=bool))
    if len(candidates) < n_roots:
        raise ValueError(
            f"need {n_roots} roots but only {len(candidates)} honest and eligible nodes exist"
        )
    order = np.lexsort((candidates, -np.asarray(centrality)[candidates]))
    roots = candidates[order[:n_roots]]
    is_root = np.zeros(n, dtype=bool)
    is_root[roots] = True

    budgets = sample_participation_budgets(graph.degrees, config.alpha, config.beta, rng)
    budgets[roots] += config.root_bonus_participations
    return NodeProfiles(
        eligible=np.asarray(eligible, dtype=bool).copy(),
        honest=honest,
        is_root=is_root,
        budget=budgets,
        rr_cursor=np.zeros(n, dtype=np.int64),
        participations_used=np.zeros(n, dtype=np.int64),
    )


def _pool_kind(
    honest: bool, eligible: bool, has_ineligible_neighbor: bool,
    p_mal: float, rng: np.random.Generator,
) -> int:
    """Decide which neighbors may receive this forward.

    Honest senders always restrict to eligible neighbors. A dishonest
    sender draws a uniform value per encounter: below ``p_mal`` it acts
    maliciously (any neighbor; an ineligible sender prefers its ineligible
    neighbors when it has any), otherwise it behaves like an honest one.
    """
    if honest:
        return POOL_ELIGIBLE
    if rng.random() < p_mal:
        if not eligible and has_ineligible_neighbor:
            return POOL_INELIGIBLE
        return POOL_ALL
    return POOL_ELIGIBLE


def _scan_targets(
    neighbors: Sequence[int], start: int, fan_out: int, kind: int,
    eligible, lineage,
) -> tuple[list[int], int]:
    """Advance the round-robin cursor over ``neighbors``, taking up to ``fan_out``.

    The scan walks the sorted neighbor list cyclically from ``start``,
    skipping nodes outside the pool or already on the copy's path, and
    stops after one full cycle or once enough targets are taken. Returns
    the targets in scan order plus the new cursor position.
    """
    d = len(neighbors)
    if d == 0:
        return [], start
    taken: list[int] = []
    examined = 0
    while examined < d and len(taken) < fan_out:
        t = neighbors[(start + examined) % d]
        examined += 1
        if kind == POOL_ALL:
            ok = True
        elif kind == POOL_ELIGIBLE:
            ok = bool(eligible[t])
        else:
            ok = not eligible[t]
        if ok and t not in lineage:
            taken.append(t)
    return taken, (start + examined) % d


def select_forward_targets(
    node: int,
    ballot: BallotState,
    profiles: NodeProfiles,
    graph: SocialGraph,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> list[int]:
    """Pick forward targets for one ballot held at ``node``.

    Mutates the node's round-robin cursor. An empty list is a normal
    outcome (no allowed neighbor outside the copy's path).
    """
    neighbors = graph.neighbors(node).tolist()
    has_inelig = any(not profiles.eligible[t] for t in neighbors)
    kind = _pool_kind(
        bool(profiles.honest[node]), bool(profiles.eligible[node]),
        has_inelig, config.dishonest_action_prob, rng,
    )
    lineage = ballot.lineage if node in ballot.lineage else ballot.lineage + (node,)
    taken, cursor = _scan_targets(
        neighbors, int(profiles.rr_cursor[node]), config.fan_out, kind,
        profiles.eligible, lineage,
    )
    profiles.rr_cursor[node] = cursor
    return taken


@dataclass
class DisseminationTrace:
    """Ordered forward and participation events of one run.

    Copies are numbered in creation order: the ``ballots_per_root * R``
    root-released copies first, then one copy per forward event in event
    order, so the copy created by forward row ``i`` has id
    ``n_initial_copies + i`` and its parent copy is ``f_parent[i]``. That
    is enough to reconstruct every copy's full lineage from the trace
    alone. The ``step`` of a forward is the step at which the receiver
    obtains the copy; root-released copies arrive at step 0.
    """

    n_nodes: int
    roots: np.ndarray
    n_initial_copies: int
    f_step: np.ndarray
    f_src: np.ndarray
    f_dst: np.ndarray
    f_ballot: np.ndarray
    f_parent: np.ndarray
    p_step: np.ndarray
    p_node: np.ndarray
    p_ballot: np.ndarray
    p_copy: np.ndarray
    received: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_forwards(self) -> int:
        return len(self.f_src)

    @property
    def n_participations(self) -> int:
        return len(self.p_node)

    def participation_counts(self) -> np.ndarray:
        return np.bincount(self.p_node, minlength=self.n_nodes)

    def copy_receiver(self) -> np.ndarray:
        """Node that received each copy, root copies included."""
        per_root = self.meta.get("ballots_per_root", 0)
        root_nodes = np.repeat(self.roots, per_root) if per_root else np.empty(0, dtype=np.int64)
        return np.concatenate([root_nodes, self.f_dst.astype(np.int64)])

    def copy_parent(self) -> np.ndarray:
        """Parent copy id per copy (-1 for root-released copies)."""
        init = np.full(self.n_initial_copies, -1, dtype=np.int64)
        return np.concatenate([init, self.f_parent.astype(np.int64)])

    def trace_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.n_nodes).tobytes())
        h.update(np.int64(self.n_initial_copies).tobytes())
        h.update(np.ascontiguousarray(self.roots, dtype=np.int64).tobytes())
        for arr in (self.f_step, self.f_src, self.f_dst, self.f_ballot, self.f_parent,
                    self.p_step, self.p_node, self.p_ballot, self.p_copy, self.received):
            h.update(np.ascontiguousarray(arr, dtype=np.int64).tobytes())
        return h.hexdigest()

    def save(self, directory: str | os.PathLike) -> dict[str, str]:
        """Write the line-delimited event log plus a JSON sidecar."""
        os.makedirs(directory, exist_ok=True)
        log_path = os.path.join(directory, "events.log")
        with open(log_path, "wt", encoding="utf-8") as fh:
            i = j = 0
            np_, nf = self.n_participations, self.n_forwards
            # merge by processed copy id; a copy's participation precedes its forwards
            while i < np_ or j < nf:
                if j >= nf or (i < np_ and self.p_copy[i] <= self.f_parent[j]):
                    fh.write(f"P {self.p_step[i]} {self.p_node[i]} {self.p_ballot[i]} {self.p_copy[i]}\n")
                    i += 1
                else:
                    fh.write(f"F {self.f_step[j]} {self.f_src[j]} {self.f_dst[j]} {self.f_ballot[j]} {self.f_parent[j]}\n")
                    j += 1
        meta_path = os.path.join(directory, "trace.json")
        with open(meta_path, "wt", encoding="utf-8") as fh:
            json.dump(
                {
                    "n_nodes": self.n_nodes,
                    "roots": self.roots.tolist(),
                    "n_initial_copies": self.n_initial_copies,
                    "received": self.received.tolist(),
                    "meta": self.meta,
                },
                fh,
            )
        return {"events": log_path, "trace_meta": meta_path}

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "DisseminationTrace":
        with open(os.path.join(directory, "trace.json"), "rt", encoding="utf-8") as fh:
            info = json.load(fh)
        cols_f: list[list[int]] = [[], [], [], [], []]
        cols_p: list[list[int]] = [[], [], [], []]
        with open(os.path.join(directory, "events.log"), "rt", encoding="utf-8") as fh:
            for line in fh:
                parts = line.split()
                if parts[0] == "F":
                    for k in range(5):
                        cols_f[k].append(int(parts[k + 1]))
                else:
                    for k in range(4):
                        cols_p[k].append(int(parts[k + 1]))
        return cls(
            n_nodes=int(info["n_nodes"]),
            roots=np.array(info["roots"], dtype=np.int64),
            n_initial_copies=int(info["n_initial_copies"]),
            f_step=np.array(cols_f[0], dtype=np.int32),
            f_src=np.array(cols_f[1], dtype=np.int32),
            f_dst=np.array(cols_f[2], dtype=np.int32),
            f_ballot=np.array(cols_f[3], dtype=np.int32),
            f_parent=np.array(cols_f[4], dtype=np.int32),
            p_step=np.array(cols_p[0], dtype=np.int32),
            p_node=np.array(cols_p[1], dtype=np.int32),
            p_ballot=np.array(cols_p[2], dtype=np.int32),
            p_copy=np.array(cols_p[3], dtype=np.int32),
            received=np.array(info["received"], dtype=np.int64),
            meta=info.get("meta", {}),
        )


def run_dissemination(
    graph: SocialGraph,
    profiles: NodeProfiles,
    config: SimulationConfig,
    seed: int | None = None,
    max_events: int | None = None,
) -> DisseminationTrace:
    """Execute the protocol and record the full trace.

    Each root releases ``ballots_per_root`` copies addressed to itself at
    step 0. Processing a delivery appends the node to the copy's path,
    spends one budget and one capacity unit when both remain (a
    participation), and, while capacity is left and the hop cap is not
    reached, forwards child copies to the round-robin targets, enqueued in
    target-id order on a FIFO queue. The caller's profiles are not
    mutated; randomness is consumed only by dishonest pool decisions, so
    identical inputs and seed give byte-identical traces.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    n = graph.n_nodes
    nbrs = graph.adjacency_lists()
    eligible = profiles.eligible.tolist()
    honest = profiles.honest.tolist()
    budget = profiles.budget.tolist()
    cursor = profiles.rr_cursor.tolist()
    has_inelig = [any(not eligible[t] for t in row) for row in nbrs]
    roots = np.sort(profiles.roots)

    f_step, f_src, f_dst, f_ballot, f_parent = (array("i") for _ in range(5))
    p_step, p_node, p_ballot, p_copy = (array("i") for _ in range(4))
    received = [0] * n

    queue: deque = deque()
    copy_id = 0
    for r in roots.tolist():
        for b in range(config.ballots_per_root):
            queue.append((r, copy_id, config.ballot_capacity, 0, ()))
            copy_id += 1
    n_initial = copy_id
    per_root = config.ballots_per_root

    fan_out = config.fan_out
    hop_cap = config.hop_cap
    p_mal = config.dishonest_action_prob
    while queue:
        v, copy, cap, hop, lineage = queue.popleft()
        received[v] += 1
        lineage = lineage + (v,)
        bid = copy if copy < n_initial else f_ballot[copy - n_initial]
        if budget[v] > 0 and cap > 0:
            budget[v] -= 1
            cap -= 1
            p_step.append(hop)
            p_node.append(v)
            p_ballot.append(bid)
            p_copy.append(copy)
        if cap > 0 and hop < hop_cap:
            kind = _pool_kind(honest[v], eligible[v], has_inelig[v], p_mal, rng)
            taken, cursor[v] = _scan_targets(nbrs[v], cursor[v], fan_out, kind, eligible, lineage)
            if taken:
                nh = hop + 1
                for t in sorted(taken):
                    f_step.append(nh)
                    f_src.append(v)
                    f_dst.append(t)
                    f_ballot.append(bid)
                    f_parent.append(copy)
                    queue.append((t, copy_id, cap, nh, lineage))
                    copy_id += 1
        if max_events is not None and len(f_src) > max_events:
            raise RuntimeError(
                f"event budget exceeded ({max_events}); lower hop_cap or fan_out"
            )

    return DisseminationTrace(
        n_nodes=n,
        roots=roots,
        n_initial_copies=n_initial,
        f_step=np.frombuffer(f_step, dtype=np.int32).copy(),
        f_src=np.frombuffer(f_src, dtype=np.int32).copy(),
        f_dst=np.frombuffer(f_dst, dtype=np.int32).copy(),
        f_ballot=np.frombuffer(f_ballot, dtype=np.int32).copy(),
        f_parent=np.frombuffer(f_parent, dtype=np.int32).copy(),
        p_step=np.frombuffer(p_step, dtype=np.int32).copy(),
        p_node=np.frombuffer(p_node, dtype=np.int32).copy(),
        p_ballot=np.frombuffer(p_ballot, dtype=np.int32).copy(),
        p_copy=np.frombuffer(p_copy, dtype=np.int32).copy(),
        received=np.array(received, dtype=np.int64),
        meta={"config": config.to_dict(), "seed": int(config.seed if seed is None else seed),
              "ballots_per_root": per_root},
    )


def coverage(trace: DisseminationTrace, graph: SocialGraph) -> float:
    """Fraction of all graph nodes that received at least one ballot copy."""
    if trace.n_nodes != graph.n_nodes:
        raise ValueError("trace and graph disagree on the node count")
    return float(np.count_nonzero(trace.received > 0)) / graph.n_nodes


@dataclass
class ParticipationHistogram:
    """Participation counts per node, split into non-root and root nodes."""

    nonroot: dict[int, int]
    root: dict[int, int]


def participation_histogram(trace: DisseminationTrace) -> ParticipationHistogram:
    """Histogram of per-node participation counts among nodes that received a ballot."""
    counts = trace.participation_counts()
    is_root = np.zeros(trace.n_nodes, dtype=bool)
    is_root[trace.roots] = True
    reached = trace.received > 0
    def _hist(mask: np.ndarray) -> dict[int, int]:
        vals, freq = np.unique(counts[mask], return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, freq)}
    return ParticipationHistogram(
        nonroot=_hist(reached & ~is_root),
        root=_hist(reached & is_root),
    )


@dataclass
class DisseminationGraph:
    """Directed graph induced by the forward events, with ground truth.

    Nodes are every endpoint of a forward plus every participant; ids are
    re-densified, with ``node_ids`` mapping back to social-graph ids.
    Parallel forwards collapse into one edge whose weight is the
    multiplicity. The official response of a node is its last
    participation event.
    """

    node_ids: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    eligible: np.ndarray
    participated: np.ndarray
    last_ballot: np.ndarray
    last_step: np.ndarray
    received: np.ndarray
    _und: tuple | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def ineligible(self) -> np.ndarray:
        return ~self.eligible

    def undirected(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Symmetrized CSR view: (indptr, indices, weights), weights summed per direction."""
        if self._und is None:
            n = self.n_nodes
            s = np.concatenate([self.src, self.dst])
            d = np.concatenate([self.dst, self.src])
            w = np.concatenate([self.weight, self.weight]).astype(np.float64)
            key = s.astype(np.int64) * n + d
            uniq, inv = np.unique(key, return_inverse=True)
            weights = np.bincount(inv, weights=w)
            us = (uniq // n).astype(np.int64)
            ud = (uniq % n).astype(np.int32)
            indptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(us, minlength=n), out=indptr[1:])
            self._und = (indptr, ud, weights)
        return self._und

    def save(self, directory: str | os.PathLike) -> dict[str, str]:
        os.makedirs(directory, exist_ok=True)
        edges_path = os.path.join(directory, "dgraph_edges.csv")
        with open(edges_path, "wt", encoding="utf-8") as fh:
            fh.write("src,dst,weight\n")
            for s, d, w in zip(self.src, self.dst, self.weight):
                fh.write(f"{self.node_ids[s]},{self.node_ids[d]},{w}\n")
        nodes_path = os.path.join(directory, "dgraph_nodes.csv")
        with open(nodes_path, "wt", encoding="utf-8") as fh:
            fh.write("node,eligible,participated,last_ballot,last_step,received\n")
            for i in range(self.n_nodes):
                fh.write(
                    f"{self.node_ids[i]},{int(self.eligible[i])},{int(self.participated[i])},"
                    f"{self.last_ballot[i]},{self.last_step[i]},{self.received[i]}\n"
                )
        return {"dgraph_edges": edges_path, "dgraph_nodes": nodes_path}

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "DisseminationGraph":
        nodes, elig, part, lb, ls, rc = [], [], [], [], [], []
        with open(os.path.join(directory, "dgraph_nodes.csv"), "rt", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                a = line.strip().split(",")
                nodes.append(int(a[0])); elig.append(bool(int(a[1]))); part.append(bool(int(a[2])))
                lb.append(int(a[3])); ls.append(int(a[4])); rc.append(int(a[5]))
        node_ids = np.array(nodes, dtype=np.int64)
        index = {int(v): i for i, v in enumerate(node_ids)}
        src, dst, wt = [], [], []
        with open(os.path.join(directory, "dgraph_edges.csv"), "rt", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                a = line.strip().split(",")
                src.append(index[int(a[0])]); dst.append(index[int(a[1])]); wt.append(int(a[2]))
        return cls(
            node_ids=node_ids,
            src=np.array(src, dtype=np.int32),
            dst=np.array(dst, dtype=np.int32),
            weight=np.array(wt, dtype=np.int64),
            eligible=np.array(elig, dtype=bool),
            participated=np.array(part, dtype=bool),
            last_ballot=np.array(lb, dtype=np.int64),
            last_step=np.array(ls, dtype=np.int64),
            received=np.array(rc, dtype=np.int64),
        )


def build_dissemination_graph(
    trace: DisseminationTrace, eligible: np.ndarray
) -> DisseminationGraph:
    """Condense the trace into the directed dissemination graph with labels."""
    if trace.n_forwards == 0 and trace.n_participations == 0:
        raise ValueError("empty trace: no forwards and no participations")
    members = np.unique(np.concatenate([trace.f_src, trace.f_dst, trace.p_node]))
    members = members.astype(np.int64)
    index = np.full(trace.n_nodes, -1, dtype=np.int64)
    index[members] = np.arange(len(members))

    n = len(members)
    key = index[trace.f_src] * n + index[trace.f_dst]
    uniq, counts = np.unique(key, return_counts=True)
    src = (uniq // n).astype(np.int32)
    dst = (uniq % n).astype(np.int32)

    participated = np.zeros(n, dtype=bool)
    last_ballot = np.full(n, -1, dtype=np.int64)
    last_step = np.full(n, -1, dtype=np.int64)
    # participation events are stored in emission order; the last write wins
    pn = index[trace.p_node]
    participated[pn] = True
    last_ballot[pn] = trace.p_ballot
    last_step[pn] = trace.p_step

    return DisseminationGraph(
        node_ids=members,
        src=src,
        dst=dst,
        weight=counts.astype(np.int64),
        eligible=np.asarray(eligible, dtype=bool)[members],
        participated=participated,
        last_ballot=last_ballot,
        last_step=last_step,
        received=trace.received[members],
    )
