"""Triplet mining, projection-head training, and unseen-node attachment.

Triplets follow the graph structure: the positive shares at least one
target neighbor with the anchor (the 2-hop co-neighbor relation of the
bipartite graph), the negative lives in a different connected component,
so no path joins it to the anchor. The head is a single trainable linear
projection over frozen 768-d text embeddings; it is trained with the
Euclidean triplet hinge max(0, ||h_a - h_p|| - ||h_a - h_n|| + margin)
and later gates unseen-idiom attachment by cosine similarity in head space.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import (
    DimMismatch,
    DuplicateId,
    EmptyTargetPool,
    EmptyTrainSplit,
    NoNegativesAvailable,
    NonFiniteLoss,
    NoSimilarNeighbor,
)
from .graph import BipartiteGraph
from .nn import AdamState, ParamStore, init_params, load_checkpoint, optimizer_step, save_checkpoint

DEFAULT_TAU = 0.75
DEFAULT_TOP_M = 5
DEFAULT_ATTACH_LIMIT = 5
DEFAULT_MARGIN = 1.0
DEFAULT_HEAD_DIM = 256


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int


def connected_components(graph: BipartiteGraph) -> np.ndarray:
    """Component id per combined node index (sources, then targets)."""
    n_src = graph.n_sources
    n = n_src + graph.n_targets
    adj: list[list[int]] = [[] for _ in range(n)]
    for s, t in graph.edges:
        adj[s].append(n_src + t)
        adj[n_src + t].append(s)
    comp = np.full(n, -1, dtype=np.int64)
    current = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        comp[start] = current
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = current
                    queue.append(v)
        current += 1
    return comp


def co_neighbor_sources(graph: BipartiteGraph, anchor: int) -> list[int]:
    """Sources sharing at least one target with the anchor, ascending."""
    targets = set(graph.source_neighbors(anchor))
    out = set()
    for s, t in graph.edges:
        if t in targets and s != anchor:
            out.add(s)
    return sorted(out)


def mine_triplets(
    graph: BipartiteGraph, per_anchor: int, rng: np.random.Generator
) -> list[Triplet]:
    """Sample up to per_anchor triplets for every source with a co-neighbor.

    Raises NoNegativesAvailable when every source sits in one connected
    component (then nothing is disconnected from anything).
    """
    comp = connected_components(graph)
    src_comp = comp[: graph.n_sources]
    if graph.n_sources and len(set(src_comp.tolist())) < 2:
        raise NoNegativesAvailable("all source nodes share one component")
    sources = np.arange(graph.n_sources)
    triplets: list[Triplet] = []
    for a in range(graph.n_sources):
        positives = co_neighbor_sources(graph, a)
        if not positives:
            continue
        negatives = sources[src_comp != src_comp[a]]
        if negatives.size == 0:
            continue
        k = min(per_anchor, len(positives))
        pos_pick = rng.choice(len(positives), size=k, replace=False)
        for p in pos_pick:
            n = int(negatives[rng.integers(negatives.size)])
            triplets.append(Triplet(a, positives[int(p)], n))
    return triplets


def triplet_loss(h_a, h_p, h_n, alpha: float = DEFAULT_MARGIN) -> float:
    """Euclidean hinge max(0, ||h_a-h_p|| - ||h_a-h_n|| + alpha)."""
    h_a = np.asarray(h_a, dtype=np.float64)
    h_p = np.asarray(h_p, dtype=np.float64)
    h_n = np.asarray(h_n, dtype=np.float64)
    if not (h_a.shape == h_p.shape == h_n.shape):
        raise DimMismatch(h_a.shape, (h_p.shape, h_n.shape))
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    d_p = np.linalg.norm(h_a - h_p)
    d_n = np.linalg.norm(h_a - h_n)
    return float(max(0.0, d_p - d_n + alpha))


@dataclass
class ProjectionHead:
    """Trainable linear stand-in for a contrastively tuned text encoder."""

    params: ParamStore
    margin: float = DEFAULT_MARGIN
    metadata: dict = field(default_factory=dict)

    @classmethod
    def init(
        cls,
        in_dim: int = 768,
        out_dim: int = DEFAULT_HEAD_DIM,
        margin: float = DEFAULT_MARGIN,
        seed: int = 0,
    ) -> "ProjectionHead":
        params = init_params(
            [("bcl.proj", (out_dim, in_dim)), ("bcl.bias", (out_dim,))], seed
        )
        return cls(params, margin, {"seed": seed})

    @property
    def out_dim(self) -> int:
        return self.params["bcl.proj"].shape[0]

    def project(self, x) -> np.ndarray:
        """Map (n, in_dim) or (in_dim,) vectors into head space."""
        w = np.asarray(self.params["bcl.proj"], dtype=np.float64)
        b = np.asarray(self.params["bcl.bias"], dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return w @ x + b
        return x @ w.T + b


def save_head(head: ProjectionHead, path: str | Path) -> None:
    save_checkpoint(head.params.astype(np.float32), path)


def load_head(path: str | Path, margin: float = DEFAULT_MARGIN) -> ProjectionHead:
    return ProjectionHead(load_checkpoint(path), margin)


def triplet_loss_and_grads(params, x_a, x_p, x_n, alpha: float):
    """Mean triplet hinge over a batch plus gradients for the head params.

    Distances are guarded against exact zeros so the (sub)gradient stays
    finite when anchor and positive coincide.
    """
    w = np.asarray(params["bcl.proj"], dtype=np.float64)
    b = np.asarray(params["bcl.bias"], dtype=np.float64)
    h_a = x_a @ w.T + b
    h_p = x_p @ w.T + b
    h_n = x_n @ w.T + b
    diff_p = h_a - h_p
    diff_n = h_a - h_n
    d_p = np.linalg.norm(diff_p, axis=1)
    d_n = np.linalg.norm(diff_n, axis=1)
    margins = d_p - d_n + alpha
    active = margins > 0
    n = x_a.shape[0]
    loss = float(np.sum(np.maximum(margins, 0.0)) / n)

    safe_p = np.maximum(d_p, 1e-12)
    safe_n = np.maximum(d_n, 1e-12)
    g_a = np.where(active[:, None], diff_p / safe_p[:, None] - diff_n / safe_n[:, None], 0.0) / n
    g_p = np.where(active[:, None], -diff_p / safe_p[:, None], 0.0) / n
    g_n = np.where(active[:, None], diff_n / safe_n[:, None], 0.0) / n

    d_w = g_a.T @ x_a + g_p.T @ x_p + g_n.T @ x_n
    d_b = (g_a + g_p + g_n).sum(axis=0)
    return loss, ParamStore({"bcl.proj": d_w, "bcl.bias": d_b})


@dataclass(frozen=True)
class HeadConfig:
    out_dim: int = DEFAULT_HEAD_DIM
    margin: float = DEFAULT_MARGIN
    lr: float = 1e-3
    epochs: int = 30
    batch_size: int = 64
    seed: int = 0


def train_head(
    triplets: list[Triplet],
    features: np.ndarray,
    config: HeadConfig = HeadConfig(),
) -> ProjectionHead:
    """Adam on the mean triplet loss over shuffled minibatches.

    ``features`` holds one row per source node, indexed by the triplet
    fields. Deterministic for a fixed config.seed.
    """
    if not triplets:
        raise EmptyTrainSplit("no triplets to train on")
    x = np.asarray(features, dtype=np.float64)
    head = ProjectionHead.init(x.shape[1], config.out_dim, config.margin, config.seed)
    params = head.params.astype(np.float64)
    state = AdamState(params, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    idx = np.arange(len(triplets))
    a_idx = np.array([t.anchor for t in triplets])
    p_idx = np.array([t.positive for t in triplets])
    n_idx = np.array([t.negative for t in triplets])
    for _ in range(config.epochs):
        order = rng.permutation(idx)
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, grads = triplet_loss_and_grads(
                params, x[a_idx[batch]], x[p_idx[batch]], x[n_idx[batch]], config.margin
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"head training diverged (loss={loss})")
            optimizer_step(params, grads, state)
    head.params = params
    head.metadata["epochs"] = config.epochs
    return head


def head_cosines(head: ProjectionHead, query_vec, vectors) -> np.ndarray:
    """Cosine similarity in head space between one query and many rows."""
    hq = head.project(np.asarray(query_vec, dtype=np.float64))
    hv = head.project(np.asarray(vectors, dtype=np.float64))
    nq = np.linalg.norm(hq)
    nv = np.linalg.norm(hv, axis=1)
    denom = np.maximum(nq * nv, 1e-12)
    return (hv @ hq) / denom


def attach_unseen(
    unseen_id: str,
    unseen_vec,
    graph: BipartiteGraph,
    features: EmbeddingMatrix,
    head: ProjectionHead,
    top_m: int = DEFAULT_TOP_M,
    tau: float = DEFAULT_TAU,
    attach_limit: int = DEFAULT_ATTACH_LIMIT,
    rng: np.random.Generator | None = None,
):
    """Wire an unseen source idiom into a copy of the graph.

    Finds the top_m most head-similar seen sources (gated by tau), pools
    their target neighbors, samples up to attach_limit distinct targets,
    and returns (new_graph, new_features, new_source_index, attached
    target indices). The input graph and features are never mutated.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if unseen_id in graph.source_ids or unseen_id in graph.target_ids:
        raise DuplicateId(unseen_id)
    if graph.n_sources == 0:
        raise NoSimilarNeighbor("graph has no source nodes")
    source_vecs = features.rows_for(graph.source_ids)
    sims = head_cosines(head, unseen_vec, source_vecs)
    if float(np.max(sims)) < tau:
        raise NoSimilarNeighbor(
            f"max head-space similarity {np.max(sims):.4f} < tau {tau}"
        )
    order = sorted(range(graph.n_sources), key=lambda s: (-sims[s], graph.source_ids[s]))
    top = order[:top_m]
    pool = sorted({t for s in top for t in graph.source_neighbors(s)})
    if not pool:
        raise EmptyTargetPool("top similar sources have no target neighbors")
    n_attach = min(attach_limit, len(pool))
    picks = rng.choice(len(pool), size=n_attach, replace=False)
    attached = sorted(pool[int(p)] for p in picks)

    new_index = graph.n_sources
    new_graph = BipartiteGraph(
        graph.source_ids + (unseen_id,),
        graph.target_ids,
        graph.edges | {(new_index, t) for t in attached},
        graph.source_lang,
        graph.target_lang,
    )
    new_features = features.extended(unseen_id, unseen_vec)
    return new_graph, new_features, new_index, attached
