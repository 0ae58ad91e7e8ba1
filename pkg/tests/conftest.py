import numpy as np
import pytest

from idiomce.embeddings import EmbeddingMatrix
from idiomce.graph import BipartiteGraph


def random_unit_rows(rng, n, dim):
    x = rng.normal(size=(n, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_features(source_ids, target_ids, dim, rng):
    ids = list(source_ids) + list(target_ids)
    return EmbeddingMatrix(ids, random_unit_rows(rng, len(ids), dim).astype(np.float32))


def make_random_graph(rng, n_s, n_t, p, prefix=("s", "t")):
    source_ids = tuple(f"{prefix[0]}{i}" for i in range(n_s))
    target_ids = tuple(f"{prefix[1]}{j}" for j in range(n_t))
    edges = frozenset(
        (i, j) for i in range(n_s) for j in range(n_t) if rng.random() < p
    )
    return BipartiteGraph(source_ids, target_ids, edges, "aa", "bb")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
