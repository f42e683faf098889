"""Message-passing classifier that flags ineligible participants.

A two-layer mean-aggregation trunk turns the 64-d static embeddings into
32-d dynamic ones; a linear head reads the concatenation of both. The
whole network trains jointly with full-batch gradient descent on a
class-weighted logistic loss, positive class being the ineligible nodes.
All gradients are derived by hand and checked against finite differences
in the test suite.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .simulate import DisseminationGraph

STATIC_DIM = 64
HIDDEN_DIM = 32


@dataclass
class Split:
    """Disjoint train/validation/test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def validate(self, n: int) -> None:
        allidx = np.concatenate([self.train, self.val, self.test])
        if len(np.unique(allidx)) != len(allidx):
            raise ValueError("split sets overlap")
        if len(allidx) != n:
            raise ValueError("split does not cover all nodes")


def stratified_split(
    labels: np.ndarray,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> Split:
    """Per-class shuffled partition at the given ratios, deterministic under seed."""
    labels = np.asarray(labels, dtype=bool)
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    rng = np.random.default_rng(seed)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in (False, True):
        idx = np.flatnonzero(labels == cls)
        if len(idx) == 0:
            raise ValueError(f"class {cls} is absent")
        if len(idx) < 10:
            raise ValueError(f"class {cls} has only {len(idx)} nodes; need at least 10")
        idx = rng.permutation(idx)
        n_tr = int(round(ratios[0] * len(idx)))
        n_val = min(int(round(ratios[1] * len(idx))), len(idx) - n_tr)
        parts[0].append(idx[:n_tr])
        parts[1].append(idx[n_tr:n_tr + n_val])
        parts[2].append(idx[n_tr + n_val:])
    return Split(
        train=np.sort(np.concatenate(parts[0])),
        val=np.sort(np.concatenate(parts[1])),
        test=np.sort(np.concatenate(parts[2])),
    )


@dataclass
class Metrics:
    """Confusion counts and the derived scores; positive class = ineligible."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    @property
    def precision(self) -> float:
        denom = self.tp + self.fp
        return self.tp / denom if denom else 0.0

    @property
    def recall(self) -> float:
        denom = self.tp + self.fn
        return self.tp / denom if denom else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2.0 * p * r / (p + r) if (p + r) > 0 else 0.0

    @classmethod
    def from_predictions(cls, y_true: np.ndarray, y_pred: np.ndarray) -> "Metrics":
        y_true = np.asarray(y_true, dtype=bool)
        y_pred = np.asarray(y_pred, dtype=bool)
        return cls(
            tp=int(np.count_nonzero(y_true & y_pred)),
            fp=int(np.count_nonzero(~y_true & y_pred)),
            fn=int(np.count_nonzero(y_true & ~y_pred)),
            tn=int(np.count_nonzero(~y_true & ~y_pred)),
        )

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
        }


@dataclass
class SageModel:
    """Parameters of the two-layer trunk plus the linear head.

    Layer 1 maps concat(self 64, neighbor-mean 64) -> 32; layer 2 maps
    concat(self 32, neighbor-mean 32) -> 32; the head maps
    concat(static 64, dynamic 32) -> 1 logit. Rectifier after each layer.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w_head: np.ndarray
    b_head: float

    PARAM_NAMES = ("w1", "b1", "w2", "b2", "w_head", "b_head")

    @classmethod
    def init(cls, seed: int = 0, static_dim: int = STATIC_DIM, hidden: int = HIDDEN_DIM) -> "SageModel":
        rng = np.random.default_rng(seed)
        def glorot(nin, nout):
            return rng.normal(0.0, np.sqrt(2.0 / (nin + nout)), size=(nin, nout))
        return cls(
            w1=glorot(2 * static_dim, hidden),
            b1=np.zeros(hidden),
            w2=glorot(2 * hidden, hidden),
            b2=np.zeros(hidden),
            w_head=glorot(static_dim + hidden, 1)[:, 0],
            b_head=0.0,
        )

    def copy(self) -> "SageModel":
        return SageModel(self.w1.copy(), self.b1.copy(), self.w2.copy(),
                         self.b2.copy(), self.w_head.copy(), float(self.b_head))

    def save(self, directory: str | os.PathLike, extra: dict | None = None) -> dict[str, str]:
        os.makedirs(directory, exist_ok=True)
        blob = os.path.join(directory, "model.npz")
        np.savez(blob, w1=self.w1, b1=self.b1, w2=self.w2, b2=self.b2,
                 w_head=self.w_head, b_head=np.array(self.b_head))
        header = os.path.join(directory, "model.json")
        info = {
            "static_dim": self.w1.shape[0] // 2,
            "hidden_dim": self.w1.shape[1],
            "head_dim": len(self.w_head),
        }
        if extra:
            info.update(extra)
        with open(header, "wt", encoding="utf-8") as fh:
            json.dump(info, fh, indent=2)
        return {"model_blob": blob, "model_header": header}

    @classmethod
    def load(cls, directory: str | os.PathLike) -> "SageModel":
        data = np.load(os.path.join(directory, "model.npz"))
        return cls(w1=data["w1"], b1=data["b1"], w2=data["w2"], b2=data["b2"],
                   w_head=data["w_head"], b_head=float(data["b_head"]))


def neighbor_mean_matrix(dgraph: DisseminationGraph) -> sp.csr_matrix:
    """Row-normalized weighted adjacency of the undirected dissemination graph.

    Row v averages v's neighbors with weights equal to edge multiplicities;
    rows of isolated nodes are all zero, which realizes the zero-vector
    neighbor term.
    """
    indptr, indices, weights = dgraph.undirected()
    n = dgraph.n_nodes
    mat = sp.csr_matrix((weights, indices.astype(np.int64), indptr), shape=(n, n))
    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    scale = np.divide(1.0, row_sums, out=np.zeros_like(row_sums), where=row_sums > 0)
    return sp.diags(scale) @ mat


def _forward_cache(model: SageModel, agg: sp.csr_matrix, static: np.ndarray) -> dict:
    x = static
    m0 = agg @ x
    c1 = np.hstack([x, m0])
    z1 = c1 @ model.w1 + model.b1
    h1 = np.maximum(z1, 0.0)
    m1 = agg @ h1
    c2 = np.hstack([h1, m1])
    z2 = c2 @ model.w2 + model.b2
    h2 = np.maximum(z2, 0.0)
    c3 = np.hstack([x, h2])
    logits = c3 @ model.w_head + model.b_head
    return {"c1": c1, "z1": z1, "h1": h1, "c2": c2, "z2": z2, "h2": h2,
            "c3": c3, "logits": logits}


def sage_forward(
    model: SageModel,
    dgraph: DisseminationGraph,
    static: np.ndarray,
    nodes: np.ndarray | None = None,
) -> np.ndarray:
    """Logits for ``nodes`` (all nodes when omitted)."""
    if static.shape[0] != dgraph.n_nodes:
        raise ValueError("static embeddings must cover every dissemination-graph node")
    if static.shape[1] != model.w1.shape[0] // 2:
        raise ValueError(
            f"static dimension {static.shape[1]} does not match model input {model.w1.shape[0] // 2}"
        )
    logits = _forward_cache(model, neighbor_mean_matrix(dgraph), static)["logits"]
    return logits if nodes is None else logits[np.asarray(nodes)]


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def weighted_bce(logits: np.ndarray, y: np.ndarray, weights: np.ndarray) -> float:
    """Mean of per-example weighted logistic losses, computed from logits."""
    z = logits
    # softplus(z) - y*z, numerically stable for both signs
    softplus = np.where(z > 0, z + np.log1p(np.exp(-z)), np.log1p(np.exp(z)))
    return float(np.mean(weights * (softplus - y * z)))


def loss_and_grads(
    model: SageModel,
    agg: sp.csr_matrix,
    agg_t: sp.csr_matrix,
    static: np.ndarray,
    y: np.ndarray,
    train_idx: np.ndarray,
    pos_weight: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Class-weighted logistic loss on the train nodes and its full gradient."""
    cache = _forward_cache(model, agg, static)
    n = static.shape[0]
    yt = y[train_idx].astype(np.float64)
    wt = np.where(yt > 0.5, pos_weight, 1.0)
    loss = weighted_bce(cache["logits"][train_idx], yt, wt)

    static_dim = model.w1.shape[0] // 2
    dz = np.zeros(n)
    dz[train_idx] = wt * (_sigmoid(cache["logits"][train_idx]) - yt) / len(train_idx)
    g_head = cache["c3"].T @ dz
    g_bhead = float(np.sum(dz))
    dh2 = np.outer(dz, model.w_head)[:, static_dim:]
    dz2 = dh2 * (cache["z2"] > 0)
    g_w2 = cache["c2"].T @ dz2
    g_b2 = dz2.sum(axis=0)
    dc2 = dz2 @ model.w2.T
    hidden = model.w2.shape[1]
    dh1 = dc2[:, :hidden] + agg_t @ dc2[:, hidden:]
    dz1 = dh1 * (cache["z1"] > 0)
    g_w1 = cache["c1"].T @ dz1
    g_b1 = dz1.sum(axis=0)
    return loss, {"w1": g_w1, "b1": g_b1, "w2": g_w2, "b2": g_b2,
                  "w_head": g_head, "b_head": g_bhead}


@dataclass
class TrainParams:
    epochs: int = 1000
    learning_rate: float = 0.1
    class_weighting: bool = True

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "learning_rate": self.learning_rate,
                "class_weighting": self.class_weighting}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainParams":
        return cls(**d)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_f1: float = 0.0


def train_classifier(
    dgraph: DisseminationGraph,
    static: np.ndarray,
    ineligible: np.ndarray,
    split: Split,
    params: TrainParams,
    seed: int = 0,
) -> tuple[SageModel, TrainHistory]:
    """Full-batch gradient descent; keeps the epoch with the best validation F1.

    The positive-class weight is the train-set negatives/positives ratio
    when class weighting is on, 1 otherwise. Raises if the loss leaves the
    finite range.
    """
    split.validate(dgraph.n_nodes)
    y = np.asarray(ineligible, dtype=np.float64)
    model = SageModel.init(seed=seed, static_dim=static.shape[1])
    agg = neighbor_mean_matrix(dgraph)
    agg_t = agg.T.tocsr()

    n_pos = int(np.sum(y[split.train]))
    n_neg = len(split.train) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("train split must contain both classes")
    pos_weight = (n_neg / n_pos) if params.class_weighting else 1.0

    history = TrainHistory()
    best = model.copy()
    for epoch in range(params.epochs):
        loss, grads = loss_and_grads(model, agg, agg_t, static, y, split.train, pos_weight)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged at epoch {epoch}")
        history.train_loss.append(loss)
        logits_val = _forward_cache(model, agg, static)["logits"][split.val]
        val_metrics = Metrics.from_predictions(y[split.val] > 0.5, _sigmoid(logits_val) >= 0.5)
        history.val_f1.append(val_metrics.f1)
        if val_metrics.f1 > history.best_val_f1 or history.best_epoch < 0:
            history.best_epoch = epoch
            history.best_val_f1 = val_metrics.f1
            best = model.copy()
        lr = params.learning_rate
        model.w1 -= lr * grads["w1"]
        model.b1 -= lr * grads["b1"]
        model.w2 -= lr * grads["w2"]
        model.b2 -= lr * grads["b2"]
        model.w_head -= lr * grads["w_head"]
        model.b_head -= lr * grads["b_head"]
    return best, history


def evaluate(
    model: SageModel,
    dgraph: DisseminationGraph,
    static: np.ndarray,
    ineligible: np.ndarray,
    nodes: np.ndarray,
) -> Metrics:
    """Threshold the predicted probability at 0.5 and score against ground truth."""
    nodes = np.asarray(nodes)
    if len(nodes) == 0:
        raise ValueError("empty evaluation node set")
    logits = sage_forward(model, dgraph, static, nodes)
    preds = _sigmoid(logits) >= 0.5
    return Metrics.from_predictions(np.asarray(ineligible, dtype=bool)[nodes], preds)
