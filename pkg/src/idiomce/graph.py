"""Bipartite idiom graph: node set = source idioms + target idioms.

Edges are stored once as (source index, target index) pairs; message
passing later treats them as bidirectional. The JSON file format keeps
opaque node ids only — dense indices are assigned in memory and never
persisted, so files stay mergeable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import CorruptGraph, DuplicateId
from .errors import MissingEmbedding


@dataclass(frozen=True)
class BipartiteGraph:
    """Source/target idiom nodes plus the undirected cross-side edge set.

    ``features`` optionally references a node EmbeddingMatrix (text
    embeddings); it is compared by identity only and never serialized.
    """

    source_ids: tuple[str, ...]
    target_ids: tuple[str, ...]
    edges: frozenset[tuple[int, int]]
    source_lang: str = ""
    target_lang: str = ""
    features: EmbeddingMatrix | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        seen: set[str] = set()
        for id_ in self.source_ids + self.target_ids:
            if id_ in seen:
                raise DuplicateId(id_)
            seen.add(id_)
        n_s, n_t = len(self.source_ids), len(self.target_ids)
        for s, t in self.edges:
            if not (0 <= s < n_s and 0 <= t < n_t):
                raise CorruptGraph(f"edge ({s}, {t}) references invalid index")
        if self.features is not None:
            for id_ in self.source_ids + self.target_ids:
                if id_ not in self.features:
                    raise MissingEmbedding(id_)

    # -- basic accessors ------------------------------------------------

    @property
    def n_sources(self) -> int:
        return len(self.source_ids)

    @property
    def n_targets(self) -> int:
        return len(self.target_ids)

    def source_index(self, id_: str) -> int:
        try:
            return self.source_ids.index(id_)
        except ValueError:
            raise KeyError(id_) from None

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def with_features(self, features: EmbeddingMatrix) -> "BipartiteGraph":
        return replace(self, features=features)

    def with_edges(self, edges) -> "BipartiteGraph":
        return replace(self, edges=frozenset(edges))

    # -- degree / adjacency helpers --------------------------------------

    def target_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_targets, dtype=np.int64)
        for _, t in self.edges:
            deg[t] += 1
        return deg

    def source_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_sources, dtype=np.int64)
        for s, _ in self.edges:
            deg[s] += 1
        return deg

    def target_neighbors(self, t: int) -> list[int]:
        """Source indices adjacent to target t, ascending."""
        return sorted(s for s, t2 in self.edges if t2 == t)

    def source_neighbors(self, s: int) -> list[int]:
        """Target indices adjacent to source s, ascending."""
        return sorted(t for s2, t in self.edges if s2 == s)


def empty_graph(source_lang: str = "", target_lang: str = "") -> BipartiteGraph:
    return BipartiteGraph((), (), frozenset(), source_lang, target_lang)


# -- persistence ----------------------------------------------------------


def save_graph(graph, path: str | Path) -> None:
    """Write a graph (plain or augmented) to JSON.

    Duplicate source nodes carry a ``duplicate_of`` annotation naming the
    original; plain graphs have no such key. Node and edge order are
    canonical (sources, then targets; edges sorted by id pair), so equal
    graphs serialize to identical bytes.
    """
    nodes = []
    duplicate_of = getattr(graph, "duplicate_source_of_id", None)
    for i, id_ in enumerate(graph.source_ids):
        node = {"id": id_, "role": "source"}
        if duplicate_of is not None:
            orig = duplicate_of(i)
            if orig is not None:
                node["duplicate_of"] = orig
        nodes.append(node)
    for id_ in graph.target_ids:
        nodes.append({"id": id_, "role": "target"})
    edges = sorted(
        (graph.source_ids[s], graph.target_ids[t]) for s, t in graph.edges
    )
    obj = {
        "source_lang": graph.source_lang,
        "target_lang": graph.target_lang,
        "nodes": nodes,
        "edges": [[a, b] for a, b in edges],
    }
    Path(path).write_text(
        json.dumps(obj, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )


def load_graph(path: str | Path):
    """Load a graph JSON file.

    Returns a BipartiteGraph, or an AugmentedGraph when any node carries a
    ``duplicate_of`` annotation.
    """
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptGraph(f"{path}: invalid JSON ({exc.msg})") from exc
    for key in ("source_lang", "target_lang", "nodes", "edges"):
        if key not in obj:
            raise CorruptGraph(f"{path}: missing key {key!r}")

    source_ids: list[str] = []
    target_ids: list[str] = []
    dup_of: dict[str, str] = {}
    for node in obj["nodes"]:
        if "id" not in node or "role" not in node:
            raise CorruptGraph(f"{path}: node missing id/role: {node!r}")
        role = node["role"]
        if role == "source":
            source_ids.append(node["id"])
            if "duplicate_of" in node:
                dup_of[node["id"]] = node["duplicate_of"]
        elif role == "target":
            target_ids.append(node["id"])
        else:
            raise CorruptGraph(f"{path}: unknown role {role!r}")

    s_index = {id_: i for i, id_ in enumerate(source_ids)}
    t_index = {id_: i for i, id_ in enumerate(target_ids)}
    edges = set()
    for pair in obj["edges"]:
        if len(pair) != 2:
            raise CorruptGraph(f"{path}: edge {pair!r} is not a pair")
        a, b = pair
        if a not in s_index or b not in t_index:
            raise CorruptGraph(f"{path}: edge ({a!r}, {b!r}) names unknown id")
        edges.add((s_index[a], t_index[b]))

    if not dup_of:
        return BipartiteGraph(
            tuple(source_ids), tuple(target_ids), frozenset(edges),
            obj["source_lang"], obj["target_lang"],
        )

    # Re-assemble the augmented form: originals first, duplicates after.
    from .nodedup import AugmentedGraph

    real_ids = [id_ for id_ in source_ids if id_ not in dup_of]
    dup_ids = [id_ for id_ in source_ids if id_ in dup_of]
    real_index = {id_: i for i, id_ in enumerate(real_ids)}
    for dup, orig in dup_of.items():
        if orig not in real_index:
            raise CorruptGraph(f"{path}: duplicate_of names unknown id {orig!r}")
    combined = real_ids + dup_ids
    remap = {s_index[id_]: i for i, id_ in enumerate(combined)}
    base_edges = set()
    added = set()
    n_real = len(real_ids)
    for s, t in edges:
        s_new = remap[s]
        if s_new < n_real:
            base_edges.add((s_new, t))
        else:
            added.add((s_new, t))
    base = BipartiteGraph(
        tuple(real_ids), tuple(target_ids), frozenset(base_edges),
        obj["source_lang"], obj["target_lang"],
    )
    duplicates = {
        n_real + j: real_index[dup_of[id_]] for j, id_ in enumerate(dup_ids)
    }
    return AugmentedGraph(base, tuple(dup_ids), duplicates, frozenset(added))
