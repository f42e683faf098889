"""Structural graph measures: centralities, clustering, rich-club, communities.

Betweenness drives root selection for the dissemination protocol; the
remaining measures are diagnostics that characterize how hospitable a
graph's structure is to the detection task.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .graphs import SocialGraph

# exact betweenness up to this many nodes, pivot sampling beyond it
EXACT_BETWEENNESS_LIMIT = 50_000
DEFAULT_PIVOTS = 256


def degree_centrality(graph: SocialGraph) -> np.ndarray:
    """score(v) = |adj(v)|, as a float vector."""
    return graph.degrees.astype(np.float64)


@njit(cache=True)
def _brandes_accumulate(indptr, indices, sources, scale):
    """Single-source shortest-path dependency accumulation over unweighted BFS.

    Returns the summed dependencies over ``sources``, multiplied by
    ``scale``, with each unordered pair still counted twice (the caller
    halves the result).
    """
    n = len(indptr) - 1
    centrality = np.zeros(n)
    dist = np.empty(n, dtype=np.int64)
    sigma = np.empty(n)
    delta = np.empty(n)
    order = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for si in range(len(sources)):
        s = sources[si]
        dist[:] = -1
        sigma[:] = 0.0
        delta[:] = 0.0
        dist[s] = 0
        sigma[s] = 1.0
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        n_order = 0
        while head < tail:
            v = queue[head]
            head += 1
            order[n_order] = v
            n_order += 1
            for ei in range(indptr[v], indptr[v + 1]):
                w = indices[ei]
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue[tail] = w
                    tail += 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
        for oi in range(n_order - 1, 0, -1):
            w = order[oi]
            coeff = (1.0 + delta[w]) / sigma[w]
            for ei in range(indptr[w], indptr[w + 1]):
                v = indices[ei]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coeff
            centrality[w] += delta[w] * scale
    return centrality


def betweenness(
    graph: SocialGraph,
    mode: str = "exact",
    pivots: int | None = None,
    seed: int | None = None,
) -> np.ndarray:
    """Unnormalized betweenness centrality, each unordered pair counted once.

    ``exact`` accumulates shortest-path dependencies from every source.
    ``sampled`` accumulates from ``pivots`` sources drawn uniformly without
    replacement and scales by ``N / pivots``, which is an unbiased estimate
    of the exact score and degenerates to it at ``pivots == N``. Only the
    ranking matters for root selection, so no normalization is applied.
    """
    n = graph.n_nodes
    if mode == "exact":
        sources = np.arange(n, dtype=np.int64)
        scale = 1.0
    elif mode == "sampled":
        if pivots is None or pivots <= 0:
            raise ValueError("sampled mode needs a positive pivot count")
        if pivots > n:
            raise ValueError("cannot draw more pivots than nodes")
        rng = np.random.default_rng(seed)
        sources = np.sort(rng.choice(n, size=pivots, replace=False)).astype(np.int64)
        scale = n / pivots
    else:
        raise ValueError(f"unknown betweenness mode {mode!r}")
    acc = _brandes_accumulate(graph.indptr, graph.indices.astype(np.int64), sources, scale)
    return acc / 2.0


def betweenness_for_ranking(graph: SocialGraph, seed: int = 0) -> np.ndarray:
    """Betweenness scores sized to the graph: exact at desk scale, sampled beyond."""
    if graph.n_nodes <= EXACT_BETWEENNESS_LIMIT:
        return betweenness(graph, mode="exact")
    return betweenness(graph, mode="sampled", pivots=DEFAULT_PIVOTS, seed=seed)


def local_clustering(graph: SocialGraph) -> np.ndarray:
    """Per-node clustering coefficient, 0 for nodes of degree < 2."""
    n = graph.n_nodes
    nbr_sets = [set(graph.neighbors(v).tolist()) for v in range(n)]
    coeff = np.zeros(n)
    for v in range(n):
        d = len(nbr_sets[v])
        if d < 2:
            continue
        links = 0
        for u in nbr_sets[v]:
            links += len(nbr_sets[v] & nbr_sets[u])
        coeff[v] = links / (d * (d - 1))  # each triangle edge counted twice
    return coeff


def average_clustering(graph: SocialGraph) -> float:
    """Mean of the local clustering coefficients over all nodes."""
    if graph.n_nodes == 0:
        return 0.0
    return float(np.mean(local_clustering(graph)))


def rich_club(graph: SocialGraph, k: int) -> float | None:
    """Edge density among nodes of degree > k; None when fewer than 2 qualify."""
    if k < 0:
        raise ValueError("degree threshold must be non-negative")
    members = np.flatnonzero(graph.degrees > k)
    n_k = len(members)
    if n_k < 2:
        return None
    member_set = set(members.tolist())
    edges = 0
    for v in members:
        for u in graph.neighbors(int(v)):
            if u > v and int(u) in member_set:
                edges += 1
    return 2.0 * edges / (n_k * (n_k - 1))


def rich_club_curve(graph: SocialGraph) -> dict[int, float]:
    """phi(k) for every k where it is defined."""
    max_deg = int(graph.degrees.max()) if graph.n_nodes else 0
    curve = {}
    for k in range(max_deg):
        phi = rich_club(graph, k)
        if phi is not None:
            curve[k] = phi
    return curve


def modularity(graph: SocialGraph, labels: np.ndarray) -> float:
    """Newman modularity of a node partition."""
    m2 = float(len(graph.indices))  # 2m
    if m2 == 0:
        return 0.0
    labels = np.asarray(labels)
    intra = 0.0
    for v in range(graph.n_nodes):
        for u in graph.neighbors(v):
            if labels[u] == labels[v]:
                intra += 1.0
    deg = graph.degrees.astype(np.float64)
    deg_sums = np.bincount(labels, weights=deg)
    return intra / m2 - float(np.sum((deg_sums / m2) ** 2))


def louvain_communities(graph: SocialGraph, seed: int = 0) -> tuple[np.ndarray, float]:
    """Greedy modularity optimization with seeded, deterministic visit order.

    Runs the usual two-phase scheme: local moves until no single-node move
    improves modularity, then aggregation of communities into super-nodes,
    repeated until the partition stabilizes. Returns community labels
    (compacted to 0..k-1) and the partition's modularity, which is never
    below that of the all-singletons start.
    """
    rng = np.random.default_rng(seed)
    n = graph.n_nodes
    # working multigraph: adjacency dicts with edge weights and self-loops
    adj: list[dict[int, float]] = [
        {int(u): 1.0 for u in graph.neighbors(v)} for v in range(n)
    ]
    self_w = [0.0] * n
    node_members: list[list[int]] = [[v] for v in range(n)]
    final_labels = np.arange(n)
    m2 = float(len(graph.indices))
    if m2 == 0.0:
        return np.zeros(n, dtype=np.int64), 0.0

    while True:
        nn = len(adj)
        comm = list(range(nn))
        k_tot = [sum(adj[v].values()) + 2.0 * self_w[v] for v in range(nn)]
        sigma_tot = k_tot[:]
        moved_any = False
        improving = True
        while improving:
            improving = False
            for v in rng.permutation(nn):
                v = int(v)
                cv = comm[v]
                # weights from v to each neighboring community
                links: dict[int, float] = {}
                for u, w in adj[v].items():
                    links[comm[u]] = links.get(comm[u], 0.0) + w
                sigma_tot[cv] -= k_tot[v]
                best_c, best_gain = cv, 0.0
                base = links.get(cv, 0.0) - sigma_tot[cv] * k_tot[v] / m2
                for c, w_in in links.items():
                    if c == cv:
                        continue
                    gain = (w_in - sigma_tot[c] * k_tot[v] / m2) - base
                    if gain > best_gain + 1e-12 or (
                        abs(gain - best_gain) <= 1e-12 and best_gain > 0.0 and c < best_c
                    ):
                        best_c, best_gain = c, gain
                sigma_tot[best_c] += k_tot[v]
                if best_c != cv:
                    comm[v] = best_c
                    improving = True
                    moved_any = True
        if not moved_any:
            break
        # aggregate communities into super-nodes
        used = sorted(set(comm))
        remap = {c: i for i, c in enumerate(used)}
        comm = [remap[c] for c in comm]
        k = len(used)
        new_adj: list[dict[int, float]] = [dict() for _ in range(k)]
        new_self = [0.0] * k
        new_members: list[list[int]] = [[] for _ in range(k)]
        for v in range(nn):
            cv = comm[v]
            new_members[cv].extend(node_members[v])
            new_self[cv] += self_w[v]
            for u, w in adj[v].items():
                cu = comm[u]
                if cu == cv:
                    new_self[cv] += w / 2.0  # each intra edge seen from both ends
                else:
                    new_adj[cv][cu] = new_adj[cv].get(cu, 0.0) + w
        adj, self_w, node_members = new_adj, new_self, new_members
        for c, members in enumerate(node_members):
            for v in members:
                final_labels[v] = c
        if len(adj) == nn:
            break

    # compact labels and compute the final modularity on the original graph
    _, compact = np.unique(final_labels, return_inverse=True)
    return compact.astype(np.int64), modularity(graph, compact)


@dataclass
class StructureReport:
    """Bundle of the structural diagnostics for one graph."""

    n_nodes: int
    n_edges: int
    avg_degree: float
    avg_clustering: float
    rich_club: dict[int, float] = field(default_factory=dict)
    community_sizes: list[int] = field(default_factory=list)
    modularity: float = 0.0

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "n_edges": self.n_edges,
            "avg_degree": self.avg_degree,
            "avg_clustering": self.avg_clustering,
            "rich_club": {str(k): v for k, v in self.rich_club.items()},
            "community_sizes": self.community_sizes,
            "modularity": self.modularity,
        }


def structure_report(graph: SocialGraph, seed: int = 0) -> StructureReport:
    """Compute clustering, rich-club curve, and community sizes in one pass."""
    labels, q = louvain_communities(graph, seed=seed)
    sizes = sorted(np.bincount(labels).tolist(), reverse=True)
    return StructureReport(
        n_nodes=graph.n_nodes,
        n_edges=graph.n_edges,
        avg_degree=graph.avg_degree,
        avg_clustering=average_clustering(graph),
        rich_club=rich_club_curve(graph),
        community_sizes=sizes,
        modularity=q,
    )
