"""Inductive two-layer mean-aggregation encoder plus MLP link decoder.

Per layer, every node concatenates its own vector with the mean of its
neighbors' vectors and goes through a learnable linear map:

    h'_v = act(W @ [h_v || mean_{u in N(v)} h_u] + b)

Layer 1 uses ReLU, layer 2 is linear. Link probability for a (source,
target) pair is sigmoid(MLP([h_i || h_j])) with one ReLU hidden layer.
All gradients are derived by hand (see link_loss_and_grads) and verified
against finite differences in the test suite. Math runs in float64 over a
sparse row-normalized adjacency operator; isolated nodes aggregate to the
zero vector, which keeps the update well-defined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .embeddings import EmbeddingMatrix
from .errors import ShapeMismatch
from .nn import ParamStore, init_params, load_checkpoint, save_checkpoint

DEFAULT_IN_DIM = 768
DEFAULT_HIDDEN_DIM = 64


def _param_shapes(in_dim: int, hidden: int) -> list[tuple[str, tuple[int, ...]]]:
    return [
        ("sage1.weight", (hidden, 2 * in_dim)),
        ("sage1.bias", (hidden,)),
        ("sage2.weight", (hidden, 2 * hidden)),
        ("sage2.bias", (hidden,)),
        ("mlp1.weight", (hidden, 2 * hidden)),
        ("mlp1.bias", (hidden,)),
        ("mlp2.weight", (1, hidden)),
        ("mlp2.bias", (1,)),
    ]


@dataclass(frozen=True)
class SageLayerParams:
    weight: np.ndarray  # (out, 2*in)
    bias: np.ndarray    # (out,)
    activation: str = "relu"  # "relu" | "identity"


@dataclass
class LinkPredictor:
    """Two aggregation layers + pair decoder, with training metadata."""

    params: ParamStore
    in_dim: int = DEFAULT_IN_DIM
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    metadata: dict = field(default_factory=dict)

    @classmethod
    def init(
        cls,
        in_dim: int = DEFAULT_IN_DIM,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        seed: int = 0,
    ) -> "LinkPredictor":
        params = init_params(_param_shapes(in_dim, hidden_dim), seed)
        return cls(params, in_dim, hidden_dim, {"seed": seed})

    @property
    def layer1(self) -> SageLayerParams:
        return SageLayerParams(self.params["sage1.weight"], self.params["sage1.bias"], "relu")

    @property
    def layer2(self) -> SageLayerParams:
        return SageLayerParams(self.params["sage2.weight"], self.params["sage2.bias"], "identity")


# -- graph -> arrays --------------------------------------------------------


@dataclass
class GraphArrays:
    """Dense feature matrix plus the sparse mean-aggregation operator.

    Combined node indexing: sources (real sources first, duplicates after)
    occupy [0, n_src), targets occupy [n_src, n_src + n_tgt).
    """

    ids: tuple[str, ...]
    n_src: int
    n_tgt: int
    n_real_src: int
    x: np.ndarray            # (n, d) float64
    adj: sp.csr_matrix       # row-normalized, (n, n)
    adj_t: sp.csr_matrix

    @property
    def n_nodes(self) -> int:
        return self.n_src + self.n_tgt

    def target_combined(self, t: int) -> int:
        return self.n_src + t


def aggregation_operator(graph) -> sp.csr_matrix:
    """Row-normalized bidirectional adjacency; zero rows for isolated nodes."""
    n_src = graph.n_sources
    n = n_src + graph.n_targets
    rows: list[int] = []
    cols: list[int] = []
    for s, t in sorted(graph.edges):
        u, v = s, n_src + t
        rows.extend((u, v))
        cols.extend((v, u))
    adj = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.float64), (rows, cols)), shape=(n, n)
    )
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.zeros_like(deg)
    nz = deg > 0
    inv[nz] = 1.0 / deg[nz]
    return sp.diags(inv) @ adj


def graph_arrays(graph, features) -> GraphArrays:
    """Materialize features and the aggregation operator for a graph.

    ``features`` is an EmbeddingMatrix keyed by node id, or a ready-made
    (n_real_nodes, d) array ordered real-sources-then-targets. Duplicate
    source nodes reuse their original's feature row.
    """
    n_real_src = getattr(graph, "n_real_sources", graph.n_sources)
    feature_of = getattr(graph, "feature_source_index", lambda s: s)
    real_ids = list(graph.source_ids[:n_real_src]) + list(graph.target_ids)

    if isinstance(features, EmbeddingMatrix):
        base = np.asarray(features.rows_for(real_ids), dtype=np.float64)
    else:
        base = np.asarray(features, dtype=np.float64)
        if base.shape[0] != len(real_ids):
            raise ShapeMismatch(
                f"feature rows {base.shape[0]} != real node count {len(real_ids)}"
            )

    n_src = graph.n_sources
    x = np.empty((n_src + graph.n_targets, base.shape[1]), dtype=np.float64)
    for s in range(n_src):
        x[s] = base[feature_of(s)]
    x[n_src:] = base[n_real_src:]

    adj = aggregation_operator(graph)
    return GraphArrays(
        ids=tuple(graph.source_ids) + tuple(graph.target_ids),
        n_src=n_src,
        n_tgt=graph.n_targets,
        n_real_src=n_real_src,
        x=x,
        adj=adj,
        adj_t=adj.T.tocsr(),
    )


def combined_neighbors(graph, node: int) -> list[int]:
    """Neighbor indices of a combined-index node, ascending."""
    n_src = graph.n_sources
    if node < n_src:
        return sorted(n_src + t for s, t in graph.edges if s == node)
    t = node - n_src
    return sorted(s for s, t2 in graph.edges if t2 == t)


def mean_aggregate(node: int, graph, features) -> np.ndarray:
    """Elementwise mean over the node's neighbors; zero vector if none.

    ``features`` is a (n_nodes, d) array in combined node order. Invariant
    to neighbor permutation by construction (unordered mean).
    """
    feats = np.asarray(features, dtype=np.float64)
    nbrs = combined_neighbors(graph, node)
    if not nbrs:
        return np.zeros(feats.shape[1], dtype=np.float64)
    return feats[nbrs].mean(axis=0)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "identity":
        return z
    raise ValueError(f"unknown activation {activation!r}")


def _sage_apply(weight, bias, activation, x, adj):
    """One synchronous layer over all nodes; returns (output, pre-activation, concat)."""
    agg = adj @ x
    concat = np.hstack([x, agg])
    z = concat @ np.asarray(weight, dtype=np.float64).T + np.asarray(bias, dtype=np.float64)
    return _activate(z, activation), z, concat


def sage_forward(layer: SageLayerParams, graph, features) -> np.ndarray:
    """Apply one layer to every node simultaneously."""
    x = np.asarray(features, dtype=np.float64)
    if 2 * x.shape[1] != layer.weight.shape[1]:
        raise ShapeMismatch(
            f"feature dim {x.shape[1]} incompatible with weight {layer.weight.shape}"
        )
    h, _, _ = _sage_apply(layer.weight, layer.bias, layer.activation, x, aggregation_operator(graph))
    return h


def _encode(params, ga: GraphArrays):
    """Two-layer forward over the whole graph, caching for backward."""
    h1, z1, c1 = _sage_apply(
        params["sage1.weight"], params["sage1.bias"], "relu", ga.x, ga.adj
    )
    h2, _, c2 = _sage_apply(
        params["sage2.weight"], params["sage2.bias"], "identity", h1, ga.adj
    )
    return h2, {"z1": z1, "c1": c1, "h1": h1, "c2": c2}


def encode_graph(model: LinkPredictor, graph, features) -> np.ndarray:
    """Embed every node of the graph; rows follow combined node order."""
    ga = graph if isinstance(graph, GraphArrays) else graph_arrays(graph, features)
    if ga.x.shape[1] != model.in_dim:
        raise ShapeMismatch(f"feature dim {ga.x.shape[1]} != model in_dim {model.in_dim}")
    h2, _ = _encode(model.params.astype(np.float64), ga)
    return h2


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _decode(params, h_i, h_j):
    """Pairwise decoder forward; returns (probs, logits, cache)."""
    zcat = np.hstack([h_i, h_j])
    w1 = np.asarray(params["mlp1.weight"], dtype=np.float64)
    b1 = np.asarray(params["mlp1.bias"], dtype=np.float64)
    w2 = np.asarray(params["mlp2.weight"], dtype=np.float64)
    b2 = np.asarray(params["mlp2.bias"], dtype=np.float64)
    pre1 = zcat @ w1.T + b1
    a1 = np.maximum(pre1, 0.0)
    logits = (a1 @ w2.T + b2).ravel()
    return _sigmoid(logits), logits, {"zcat": zcat, "pre1": pre1, "a1": a1}


# Saturated sigmoids round to exactly 0.0/1.0 in float64; retrieval-facing
# probabilities are nudged into the open interval (ranking is unaffected).
_PROB_EPS = 1e-12


def decode_link(model: LinkPredictor, h_i, h_j) -> float:
    """Link probability for one embedded pair, in (0, 1)."""
    h_i = np.asarray(h_i, dtype=np.float64).reshape(1, -1)
    h_j = np.asarray(h_j, dtype=np.float64).reshape(1, -1)
    if h_i.shape[1] != model.hidden_dim or h_j.shape[1] != model.hidden_dim:
        raise ShapeMismatch(
            f"embedding dims ({h_i.shape[1]}, {h_j.shape[1]}) != {model.hidden_dim}"
        )
    probs, _, _ = _decode(model.params, h_i, h_j)
    return float(np.clip(probs[0], _PROB_EPS, 1.0 - _PROB_EPS))


def decode_pairs(model: LinkPredictor, embeddings: np.ndarray, pairs_i, pairs_j) -> np.ndarray:
    """Vectorized decode for many (i, j) combined-index pairs."""
    i = np.asarray(pairs_i, dtype=np.int64)
    j = np.asarray(pairs_j, dtype=np.int64)
    probs, _, _ = _decode(model.params, embeddings[i], embeddings[j])
    return np.clip(probs, _PROB_EPS, 1.0 - _PROB_EPS)


def score_source_against_targets(
    model: LinkPredictor, embeddings: np.ndarray, ga: GraphArrays, source: int
) -> np.ndarray:
    """Probabilities of source (combined index) linking to every real target."""
    tgt = np.arange(ga.n_src, ga.n_src + ga.n_tgt)
    src = np.full(ga.n_tgt, source, dtype=np.int64)
    return decode_pairs(model, embeddings, src, tgt)


def link_loss_and_grads(params, ga: GraphArrays, pos_pairs, neg_pairs):
    """Mean BCE over labeled pairs plus hand-derived parameter gradients.

    The loss is evaluated from the logits (softplus form), which is exactly
    the BCE of the sigmoid output but numerically stable, so the analytic
    gradients correspond to the returned value everywhere.
    """
    pos = list(pos_pairs)
    neg = list(neg_pairs)
    pairs = pos + neg
    n_pairs = len(pairs)
    if n_pairs == 0:
        raise ValueError("no pairs to score")
    i_idx = np.fromiter((s for s, _ in pairs), dtype=np.int64, count=n_pairs)
    j_idx = np.fromiter((ga.n_src + t for _, t in pairs), dtype=np.int64, count=n_pairs)
    y = np.zeros(n_pairs, dtype=np.float64)
    y[: len(pos)] = 1.0

    h2, enc = _encode(params, ga)
    probs, logits, dec = _decode(params, h2[i_idx], h2[j_idx])
    # mean(softplus(logit) - y*logit) == -mean(y log p + (1-y) log(1-p))
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))

    hidden = h2.shape[1]
    w2 = np.asarray(params["mlp2.weight"], dtype=np.float64)
    w1 = np.asarray(params["mlp1.weight"], dtype=np.float64)
    sage2_w = np.asarray(params["sage2.weight"], dtype=np.float64)

    g_logit = (probs - y) / n_pairs
    d_mlp2_w = (g_logit[None, :] @ dec["a1"])
    d_mlp2_b = np.array([g_logit.sum()])
    g_a1 = np.outer(g_logit, w2.ravel())
    g_pre1 = g_a1 * (dec["pre1"] > 0)
    d_mlp1_w = g_pre1.T @ dec["zcat"]
    d_mlp1_b = g_pre1.sum(axis=0)
    g_z = g_pre1 @ w1
    d_h2 = np.zeros_like(h2)
    np.add.at(d_h2, i_idx, g_z[:, :hidden])
    np.add.at(d_h2, j_idx, g_z[:, hidden:])

    # layer 2 (identity): h2 = c2 @ W2.T + b2, c2 = [h1 || adj h1]
    d_sage2_w = d_h2.T @ enc["c2"]
    d_sage2_b = d_h2.sum(axis=0)
    d_c2 = d_h2 @ sage2_w
    d_h1 = d_c2[:, :hidden] + ga.adj_t @ d_c2[:, hidden:]

    # layer 1 (relu): h1 = relu(c1 @ W1.T + b1), c1 = [x || adj x]
    d_z1 = d_h1 * (enc["z1"] > 0)
    d_sage1_w = d_z1.T @ enc["c1"]
    d_sage1_b = d_z1.sum(axis=0)

    grads = ParamStore(
        {
            "sage1.weight": d_sage1_w,
            "sage1.bias": d_sage1_b,
            "sage2.weight": d_sage2_w,
            "sage2.bias": d_sage2_b,
            "mlp1.weight": d_mlp1_w,
            "mlp1.bias": d_mlp1_b,
            "mlp2.weight": d_mlp2_w,
            "mlp2.bias": d_mlp2_b,
        }
    )
    return loss, grads


# -- persistence ------------------------------------------------------------


def save_model(model: LinkPredictor, path: str | Path) -> None:
    """Write the checkpoint plus a JSON sidecar (<path>.json) of metadata."""
    save_checkpoint(model.params.astype(np.float32), path)
    sidecar = {
        "in_dim": model.in_dim,
        "hidden_dim": model.hidden_dim,
        "metadata": model.metadata,
    }
    Path(str(path) + ".json").write_text(
        json.dumps(sidecar, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def load_model(path: str | Path) -> LinkPredictor:
    params = load_checkpoint(path)
    sidecar_path = Path(str(path) + ".json")
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        in_dim = sidecar["in_dim"]
        hidden_dim = sidecar["hidden_dim"]
        metadata = sidecar.get("metadata", {})
    else:
        hidden_dim, twice_in = params["sage1.weight"].shape
        in_dim = twice_in // 2
        metadata = {}
    return LinkPredictor(params, in_dim, hidden_dim, metadata)
