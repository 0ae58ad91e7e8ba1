"""Synthetic planted instances for demos, calibration, and verification.

Every builder is deterministic in its rng and returns ids that follow the
``<lang>:<n>`` convention used by the corpus loaders. Features are unit
vectors drawn around community (or per-pair) centroids, so the expected
structure is recoverable from features alone and the graph adds the
planted relational signal on top.
"""

from __future__ import annotations

import numpy as np

from .embeddings import EmbeddingMatrix
from .graph import BipartiteGraph


def _noisy_unit(center: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    v = center + noise * rng.normal(size=center.shape) / np.sqrt(center.size)
    return v / np.linalg.norm(v)


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    x = rng.normal(size=(n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def planted_communities(
    rng: np.random.Generator,
    n_communities: int = 10,
    per_side: int = 20,
    dim: int = 768,
    p_edge: float = 0.8,
    noise: float = 0.3,
    langs: tuple[str, str] = ("aa", "bb"),
) -> tuple[BipartiteGraph, np.ndarray, np.ndarray]:
    """Dense intra-community bipartite graph with noisy community features.

    Returns (graph, features, community), where features is a float32
    (2 * n_communities * per_side, dim) array in combined node order and
    community holds each side's community label per index.
    """
    n = n_communities * per_side
    centers = _unit_rows(rng, n_communities, dim)
    community = np.repeat(np.arange(n_communities), per_side)
    feats = np.empty((2 * n, dim))
    for row, c in enumerate(list(community) + list(community)):
        feats[row] = _noisy_unit(centers[c], noise, rng)
    edges = set()
    for i in range(n):
        for j in range(n):
            if community[i] == community[j] and rng.random() < p_edge:
                edges.add((i, j))
    graph = BipartiteGraph(
        tuple(f"{langs[0]}:{i}" for i in range(n)),
        tuple(f"{langs[1]}:{j}" for j in range(n)),
        frozenset(edges),
        langs[0],
        langs[1],
    )
    return graph, feats.astype(np.float32), community


def two_community_toy(
    rng: np.random.Generator,
    per_side: int = 10,
    dim: int = 768,
    noise: float = 0.1,
    langs: tuple[str, str] = ("aa", "bb"),
) -> tuple[BipartiteGraph, np.ndarray]:
    """Fully separable toy: every intra-community pair is an edge.

    Trained on all edges, non-edges are exactly the inter-community pairs,
    so the binary task has zero Bayes error.
    """
    graph, feats, _ = planted_communities(
        rng, n_communities=2, per_side=per_side, dim=dim, p_edge=1.0,
        noise=noise, langs=langs,
    )
    return graph, feats


def planted_bijection(
    rng: np.random.Generator,
    n_pairs: int = 60,
    dim: int = 64,
    noise: float = 0.15,
    langs: tuple[str, str] = ("aa", "bb"),
    latents: np.ndarray | None = None,
) -> tuple[BipartiteGraph, np.ndarray, np.ndarray]:
    """One-to-one graph: source i is connected exactly to target i.

    Both sides perturb a shared per-pair latent direction; pass the
    returned latents to a second call to build a composable chain
    (A-B and B-C share B's latent geometry).
    """
    if latents is None:
        latents = _unit_rows(rng, n_pairs, dim)
    feats = np.empty((2 * n_pairs, dim))
    for row in range(2 * n_pairs):
        feats[row] = _noisy_unit(latents[row % n_pairs], noise, rng)
    graph = BipartiteGraph(
        tuple(f"{langs[0]}:{i}" for i in range(n_pairs)),
        tuple(f"{langs[1]}:{i}" for i in range(n_pairs)),
        frozenset((i, i) for i in range(n_pairs)),
        langs[0],
        langs[1],
    )
    return graph, feats.astype(np.float32), latents


def cold_heavy_communities(
    rng: np.random.Generator,
    n_communities: int = 6,
    src_per: int = 10,
    tgt_per: int = 10,
    dim: int = 64,
    noise: float = 0.25,
    cold_degrees: tuple[int, int] = (1, 3),
    warm_degrees: tuple[int, int] = (5, 8),
    langs: tuple[str, str] = ("aa", "bb"),
) -> tuple[BipartiteGraph, np.ndarray]:
    """Community graph where alternating targets are deliberately cold.

    Even-indexed targets draw their degree from cold_degrees (half-open
    range), odd-indexed from warm_degrees, all within their community.
    """
    n_s = n_communities * src_per
    n_t = n_communities * tgt_per
    centers = _unit_rows(rng, n_communities, dim)
    comm_s = np.repeat(np.arange(n_communities), src_per)
    comm_t = np.repeat(np.arange(n_communities), tgt_per)
    feats = np.empty((n_s + n_t, dim))
    for row, c in enumerate(list(comm_s) + list(comm_t)):
        feats[row] = _noisy_unit(centers[c], noise, rng)
    edges = set()
    for j in range(n_t):
        members = np.flatnonzero(comm_s == comm_t[j])
        lo, hi = cold_degrees if j % 2 == 0 else warm_degrees
        k = int(rng.integers(lo, hi))
        for s in rng.choice(members, size=min(k, members.size), replace=False):
            edges.add((int(s), j))
    graph = BipartiteGraph(
        tuple(f"{langs[0]}:{i}" for i in range(n_s)),
        tuple(f"{langs[1]}:{j}" for j in range(n_t)),
        frozenset(edges),
        langs[0],
        langs[1],
    )
    return graph, feats.astype(np.float32)


def features_as_matrix(graph: BipartiteGraph, feats: np.ndarray) -> EmbeddingMatrix:
    """Wrap a combined-order feature array as an id-keyed EmbeddingMatrix."""
    ids = list(graph.source_ids) + list(graph.target_ids)
    return EmbeddingMatrix(ids, feats)
