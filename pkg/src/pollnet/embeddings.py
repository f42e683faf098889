"""Static node embeddings from biased random walks and skip-gram training.

Walks run on the undirected simple view of the dissemination graph; edge
multiplicities are deliberately ignored here because the classifier already
consumes them as weights. Embeddings come from the input-side matrix of a
skip-gram model trained with negative sampling.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit


class AdjacencyView(NamedTuple):
    """Minimal CSR adjacency: what the walk generator needs from a graph."""

    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray | None = None


def _as_adjacency(graph) -> AdjacencyView:
    if hasattr(graph, "indptr") and hasattr(graph, "indices"):
        return AdjacencyView(np.asarray(graph.indptr), np.asarray(graph.indices))
    if hasattr(graph, "undirected"):
        indptr, indices, weights = graph.undirected()
        return AdjacencyView(indptr, indices, np.asarray(weights, dtype=np.float64))
    raise TypeError("expected an object with indptr/indices or an undirected() view")


@dataclass
class WalkCorpus:
    """A bag of node-id walks plus the parameters that produced them."""

    walks: list[list[int]]
    n_nodes: int
    walk_length: int
    walks_per_node: int
    p: float
    q: float

    def __len__(self) -> int:
        return len(self.walks)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "wt", encoding="utf-8") as fh:
            fh.write(f"# n_nodes={self.n_nodes} walk_length={self.walk_length} "
                     f"walks_per_node={self.walks_per_node} p={self.p} q={self.q}\n")
            for walk in self.walks:
                fh.write(" ".join(map(str, walk)) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "WalkCorpus":
        with open(path, "rt", encoding="utf-8") as fh:
            header = fh.readline().lstrip("# ").split()
            kv = dict(item.split("=") for item in header)
            walks = [[int(t) for t in line.split()] for line in fh if line.strip()]
        return cls(
            walks=walks,
            n_nodes=int(kv["n_nodes"]),
            walk_length=int(kv["walk_length"]),
            walks_per_node=int(kv["walks_per_node"]),
            p=float(kv["p"]),
            q=float(kv["q"]),
        )


def second_order_weights(
    prev: int, current: int, adjacency: AdjacencyView, p: float, q: float,
    weighted: bool = False,
) -> np.ndarray:
    """Unnormalized transition weights from ``current`` given the previous node.

    Returning to ``prev`` weighs ``1/p``, stepping to a common neighbor of
    ``prev`` weighs 1, and stepping farther away weighs ``1/q``. With
    ``weighted`` the bias is additionally multiplied by the edge weight.
    """
    indptr, indices, edge_w = adjacency
    nbrs = indices[indptr[current]:indptr[current + 1]]
    prev_nbrs = set(indices[indptr[prev]:indptr[prev + 1]].tolist())
    weights = np.empty(len(nbrs))
    for i, x in enumerate(nbrs):
        if x == prev:
            weights[i] = 1.0 / p
        elif int(x) in prev_nbrs:
            weights[i] = 1.0
        else:
            weights[i] = 1.0 / q
    if weighted and edge_w is not None:
        weights *= edge_w[indptr[current]:indptr[current + 1]]
    return weights


def generate_walks(
    graph,
    walk_length: int,
    walks_per_node: int,
    p: float = 1.0,
    q: float = 1.0,
    seed: int = 0,
    weighted: bool = False,
) -> WalkCorpus:
    """Second-order biased walks from every node, deterministic under ``seed``.

    With ``p == q == 1`` the bias disappears and all walks advance in one
    vectorized sweep; otherwise each walk is sampled step by step from the
    second-order weights. Walks truncate at degree-0 nodes, so isolated
    sources yield length-1 walks.

    By default transitions treat the graph as simple; ``weighted`` makes
    them proportional to edge weights instead, which is what the detection
    pipeline uses on dissemination graphs, where forward multiplicities
    carry most of the signal separating eligible from ineligible nodes.
    """
    if walk_length < 2:
        raise ValueError("walk_length must be at least 2")
    if p <= 0 or q <= 0:
        raise ValueError("p and q must be positive")
    adj = _as_adjacency(graph)
    n = len(adj.indptr) - 1
    if n == 0:
        raise ValueError("empty graph")
    rng = np.random.default_rng(seed)
    degrees = np.diff(adj.indptr)
    use_weights = weighted and adj.weights is not None

    if p == 1.0 and q == 1.0:
        if use_weights:
            walks = _weighted_walks(adj, degrees, n, walk_length, walks_per_node, rng)
        else:
            walks = _uniform_walks(adj, degrees, n, walk_length, walks_per_node, rng)
    else:
        walks = _biased_walks(adj, degrees, n, walk_length, walks_per_node, p, q,
                              use_weights, rng)
    return WalkCorpus(
        walks=walks, n_nodes=n, walk_length=walk_length,
        walks_per_node=walks_per_node, p=p, q=q,
    )


def _uniform_walks(adj, degrees, n, walk_length, walks_per_node, rng):
    sources = np.repeat(np.arange(n), walks_per_node)
    steps = [sources]
    cur = sources.copy()
    alive = degrees[cur] > 0
    for _ in range(walk_length - 1):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        c = cur[idx]
        offs = (rng.random(len(idx)) * degrees[c]).astype(np.int64)
        nxt = adj.indices[adj.indptr[c] + offs].astype(np.int64)
        col = np.full(n * walks_per_node, -1, dtype=np.int64)
        col[idx] = nxt
        steps.append(col)
        cur = np.where(alive, np.where(col >= 0, col, cur), cur)
        # an undirected graph cannot walk into a dead end, but keep the guard
        alive = alive & (degrees[cur] > 0)
    matrix = np.column_stack(steps)
    return [row[row >= 0].tolist() for row in matrix]


def _weighted_walks(adj, degrees, n, walk_length, walks_per_node, rng):
    prefix = np.concatenate([[0.0], np.cumsum(adj.weights)])
    sources = np.repeat(np.arange(n), walks_per_node)
    steps = [sources]
    cur = sources.copy()
    alive = degrees[cur] > 0
    for _ in range(walk_length - 1):
        if not alive.any():
            break
        idx = np.flatnonzero(alive)
        c = cur[idx]
        lo, hi = adj.indptr[c], adj.indptr[c + 1]
        r = prefix[lo] + rng.random(len(idx)) * (prefix[hi] - prefix[lo])
        pick = np.searchsorted(prefix, r, side="right") - 1
        pick = np.clip(pick, lo, hi - 1)
        col = np.full(n * walks_per_node, -1, dtype=np.int64)
        col[idx] = adj.indices[pick].astype(np.int64)
        steps.append(col)
        cur = np.where(alive, np.where(col >= 0, col, cur), cur)
        alive = alive & (degrees[cur] > 0)
    matrix = np.column_stack(steps)
    return [row[row >= 0].tolist() for row in matrix]


def _biased_walks(adj, degrees, n, walk_length, walks_per_node, p, q, use_weights, rng):
    walks = []
    for v in range(n):
        for _ in range(walks_per_node):
            walk = [v]
            if degrees[v] == 0:
                walks.append(walk)
                continue
            lo, hi = adj.indptr[v], adj.indptr[v + 1]
            if use_weights:
                first = np.cumsum(adj.weights[lo:hi])
                pick = int(np.searchsorted(first, rng.random() * first[-1], side="right"))
                pick = min(pick, hi - lo - 1)
            else:
                pick = int(rng.integers(0, hi - lo))
            walk.append(int(adj.indices[lo + pick]))
            while len(walk) < walk_length:
                cur = walk[-1]
                if degrees[cur] == 0:
                    break
                w = second_order_weights(walk[-2], cur, adj, p, q, weighted=use_weights)
                cum = np.cumsum(w)
                pick = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
                pick = min(pick, len(w) - 1)
                walk.append(int(adj.indices[adj.indptr[cur] + pick]))
            walks.append(walk)
    return walks


@dataclass
class EmbeddingMatrix:
    """Per-node embedding vectors plus training metadata."""

    vectors: np.ndarray
    dim: int
    epochs: int
    losses: list[float] = field(default_factory=list)
    seed: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.vectors)

    def save(self, directory: str | os.PathLike, prefix: str = "embeddings") -> dict[str, str]:
        os.makedirs(directory, exist_ok=True)
        npy = os.path.join(directory, f"{prefix}.npy")
        np.save(npy, self.vectors)
        meta = os.path.join(directory, f"{prefix}.json")
        with open(meta, "wt", encoding="utf-8") as fh:
            json.dump({"dim": self.dim, "node_count": self.n_nodes,
                       "epochs": self.epochs, "losses": self.losses, "seed": self.seed}, fh)
        csv_path = os.path.join(directory, f"{prefix}.csv")
        with open(csv_path, "wt", encoding="utf-8") as fh:
            fh.write("node," + ",".join(f"v{i}" for i in range(self.dim)) + "\n")
            for i, row in enumerate(self.vectors):
                fh.write(str(i) + "," + ",".join(repr(float(x)) for x in row) + "\n")
        return {"embeddings_npy": npy, "embeddings_meta": meta, "embeddings_csv": csv_path}

    @classmethod
    def load(cls, directory: str | os.PathLike, prefix: str = "embeddings") -> "EmbeddingMatrix":
        vectors = np.load(os.path.join(directory, f"{prefix}.npy"))
        with open(os.path.join(directory, f"{prefix}.json"), "rt", encoding="utf-8") as fh:
            meta = json.load(fh)
        return cls(vectors=vectors, dim=meta["dim"], epochs=meta["epochs"],
                   losses=meta["losses"], seed=meta["seed"])


def sgns_pair_loss(
    center: np.ndarray, context: np.ndarray, negatives: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Loss and analytic gradients for one (center, context, negatives) tuple.

    The loss is ``-log sigma(u.v) - sum_k log sigma(-u.n_k)``; gradients are
    returned for the center vector, the context vector, and each negative.
    """
    s_pos = _sigmoid(center @ context)
    s_neg = _sigmoid(negatives @ center)
    loss = -np.log(s_pos) - np.sum(np.log1p(-s_neg))
    g_center = (s_pos - 1.0) * context + s_neg @ negatives
    g_context = (s_pos - 1.0) * center
    g_negatives = s_neg[:, None] * center[None, :]
    return float(loss), g_center, g_context, g_negatives


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _corpus_pairs(walks_flat, boundaries, window, rng):
    """All (center, context) pairs of one epoch under per-center random windows."""
    total = len(walks_flat)
    radius = rng.integers(1, window + 1, size=total, dtype=np.int16)
    walk_id = np.repeat(
        np.arange(len(boundaries) - 1, dtype=np.int32), np.diff(boundaries)
    )
    centers, contexts = [], []
    for delta in range(1, window + 1):
        left = np.arange(0, total - delta, dtype=np.int64)
        right = left + delta
        same = walk_id[left] == walk_id[right]
        li, ri = left[same], right[same]
        m = radius[li] >= delta  # left token as center
        centers.append(walks_flat[li[m]]); contexts.append(walks_flat[ri[m]])
        m = radius[ri] >= delta  # right token as center
        centers.append(walks_flat[ri[m]]); contexts.append(walks_flat[li[m]])
    return np.concatenate(centers), np.concatenate(contexts)


@njit(cache=True)
def _sgns_sgd(w_in, w_out, centers, contexts, negs, lr0, step0, total_steps):
    """Sequential SGD over one chunk of pairs; returns the summed pair loss.

    Classic skip-gram update order: gradients for the center vector are
    accumulated while each output vector is updated in place, then applied
    to the center at the end of the pair.
    """
    dim = w_in.shape[1]
    k = negs.shape[1]
    acc = np.empty(dim)
    loss = 0.0
    for i in range(len(centers)):
        c = centers[i]
        o = contexts[i]
        lr = lr0 * max(1.0 - (step0 + i) / total_steps, 1e-4)
        acc[:] = 0.0
        dot = 0.0
        for d in range(dim):
            dot += w_in[c, d] * w_out[o, d]
        if dot > 60.0:
            dot = 60.0
        elif dot < -60.0:
            dot = -60.0
        s = 1.0 / (1.0 + np.exp(-dot))
        loss += -np.log(s + 1e-12)
        g = (s - 1.0) * lr
        for d in range(dim):
            acc[d] += g * w_out[o, d]
            w_out[o, d] -= g * w_in[c, d]
        for j in range(k):
            t = negs[i, j]
            dot = 0.0
            for d in range(dim):
                dot += w_in[c, d] * w_out[t, d]
            if dot > 60.0:
                dot = 60.0
            elif dot < -60.0:
                dot = -60.0
            s = 1.0 / (1.0 + np.exp(-dot))
            loss += -np.log(1.0 - s + 1e-12)
            g = s * lr
            for d in range(dim):
                acc[d] += g * w_out[t, d]
                w_out[t, d] -= g * w_in[c, d]
        for d in range(dim):
            w_in[c, d] -= acc[d]
    return loss


def train_skipgram(
    corpus: WalkCorpus,
    dim: int = 64,
    window: int = 10,
    negatives: int = 5,
    epochs: int = 5,
    learning_rate: float = 0.025,
    seed: int = 0,
    chunk_size: int = 1_000_000,
) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over the walk corpus.

    Maximizes ``sigma(u.v)`` for co-window pairs and ``sigma(-u.n)`` for
    negatives drawn proportionally to ``frequency^0.75``, via sequential
    stochastic gradient steps with a linearly decaying learning rate.
    Single-threaded and deterministic under ``seed``; returns the
    input-side vectors and the per-epoch mean pair loss.
    """
    if not corpus.walks:
        raise ValueError("empty walk corpus")
    rng = np.random.default_rng(seed)
    n = corpus.n_nodes
    w_in = (rng.random((n, dim)) - 0.5) / dim
    w_out = np.zeros((n, dim))

    walks_flat = np.concatenate([np.asarray(w, dtype=np.int32) for w in corpus.walks])
    boundaries = np.concatenate([[0], np.cumsum([len(w) for w in corpus.walks])])
    counts = np.bincount(walks_flat, minlength=n).astype(np.float64)
    noise = counts ** 0.75
    noise_cum = np.cumsum(noise / noise.sum())

    losses: list[float] = []
    step = 0
    total_steps = None
    for epoch in range(epochs):
        centers, contexts = _corpus_pairs(walks_flat, boundaries, window, rng)
        order = rng.permutation(len(centers))
        centers, contexts = centers[order], contexts[order]
        if total_steps is None:
            total_steps = max(1, epochs * len(centers))
        epoch_loss = 0.0
        for lo in range(0, len(centers), chunk_size):
            c = centers[lo:lo + chunk_size].astype(np.int64)
            o = contexts[lo:lo + chunk_size].astype(np.int64)
            neg = np.searchsorted(noise_cum, rng.random((len(c), negatives)))
            neg = np.minimum(neg, n - 1)
            epoch_loss += _sgns_sgd(w_in, w_out, c, o, neg, learning_rate, step, total_steps)
            step += len(c)
        mean_loss = epoch_loss / max(1, len(centers))
        if not np.isfinite(mean_loss):
            raise RuntimeError(f"skip-gram loss diverged at epoch {epoch}")
        losses.append(mean_loss)
    return EmbeddingMatrix(vectors=w_in, dim=dim, epochs=epochs, losses=losses, seed=seed)
