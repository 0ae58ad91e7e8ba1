"""Cold-start augmentation by duplicating the neighbors of cold targets.

A target node with fewer than ``delta`` neighbors is *cold*. For every
cold target t and each of its source neighbors s, we add ``copies`` fresh
source nodes that reuse s's feature vector and are wired only to t. The
duplicates are a training-time sampling device: inference never ranks or
returns them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import BipartiteGraph

DEFAULT_DELTA = 3
DEFAULT_COPIES = 2


@dataclass(frozen=True)
class ColdWarmPartition:
    """Disjoint cover of target indices by degree against the delta cutoff."""

    cold: frozenset[int]
    warm: frozenset[int]
    delta: int


@dataclass(frozen=True)
class AugmentedGraph:
    """A base graph plus duplicate source nodes and their edges.

    ``duplicates`` maps a duplicate's combined source index (>= number of
    real sources) to the original source index whose features it copies.
    """

    base: BipartiteGraph
    dup_ids: tuple[str, ...]
    duplicates: dict[int, int] = field(hash=False)
    added_edges: frozenset[tuple[int, int]]

    # Combined indexing: real sources first, then duplicates, targets unchanged.

    @property
    def source_ids(self) -> tuple[str, ...]:
        return self.base.source_ids + self.dup_ids

    @property
    def target_ids(self) -> tuple[str, ...]:
        return self.base.target_ids

    @property
    def edges(self) -> frozenset[tuple[int, int]]:
        return self.base.edges | self.added_edges

    @property
    def n_sources(self) -> int:
        return len(self.source_ids)

    @property
    def n_targets(self) -> int:
        return self.base.n_targets

    @property
    def n_real_sources(self) -> int:
        return len(self.base.source_ids)

    @property
    def source_lang(self) -> str:
        return self.base.source_lang

    @property
    def target_lang(self) -> str:
        return self.base.target_lang

    @property
    def features(self):
        return self.base.features

    def is_duplicate_source(self, s: int) -> bool:
        return s >= self.n_real_sources

    def feature_source_index(self, s: int) -> int:
        """Real source index whose feature vector node s uses."""
        return self.duplicates.get(s, s)

    def duplicate_source_of_id(self, s: int) -> str | None:
        """Original id for a duplicate source index, None for real sources."""
        orig = self.duplicates.get(s)
        return None if orig is None else self.base.source_ids[orig]

    def target_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_targets, dtype=np.int64)
        for _, t in self.edges:
            deg[t] += 1
        return deg


def classify_nodes(graph: BipartiteGraph, delta: int = DEFAULT_DELTA) -> ColdWarmPartition:
    """Partition targets: cold iff degree < delta, warm otherwise."""
    if delta < 1:
        raise ValueError("delta must be >= 1")
    deg = graph.target_degrees()
    cold = frozenset(int(t) for t in np.flatnonzero(deg < delta))
    warm = frozenset(range(graph.n_targets)) - cold
    return ColdWarmPartition(cold, warm, delta)


def augment_graph(
    graph: BipartiteGraph,
    delta: int = DEFAULT_DELTA,
    copies: int = DEFAULT_COPIES,
) -> AugmentedGraph:
    """Duplicate each cold target's source neighbors and wire copies to it.

    Deterministic: targets are visited in index order, neighbors ascending,
    and duplicates are named ``<src_id>#dup<k>@<tgt_id>``. Cold targets
    with zero neighbors have nothing to copy and stay unchanged.
    """
    if copies < 1:
        raise ValueError("copies must be >= 1")
    part = classify_nodes(graph, delta)
    n_real = graph.n_sources
    dup_ids: list[str] = []
    duplicates: dict[int, int] = {}
    added: set[tuple[int, int]] = set()
    for t in sorted(part.cold):
        for s in graph.target_neighbors(t):
            for k in range(1, copies + 1):
                dup_id = f"{graph.source_ids[s]}#dup{k}@{graph.target_ids[t]}"
                idx = n_real + len(dup_ids)
                dup_ids.append(dup_id)
                duplicates[idx] = s
                added.add((idx, t))
    return AugmentedGraph(graph, tuple(dup_ids), duplicates, frozenset(added))
