import numpy as np
import pytest

from idiomce.contrastive import (
    HeadConfig,
    ProjectionHead,
    Triplet,
    attach_unseen,
    connected_components,
    load_head,
    mine_triplets,
    save_head,
    train_head,
    triplet_loss,
    triplet_loss_and_grads,
)
from idiomce.embeddings import EmbeddingMatrix
from idiomce.errors import (
    DimMismatch,
    EmptyTargetPool,
    EmptyTrainSplit,
    NoNegativesAvailable,
    NoSimilarNeighbor,
)
from idiomce.graph import BipartiteGraph
from idiomce.nn import finite_difference_check, init_params

from conftest import make_random_graph, random_unit_rows


# --- triplet loss (hand values) -------------------------------------------------

def test_loss_margin_satisfied_zero():
    h_a = np.array([0.0, 0.0])
    h_n = np.array([2.0, 0.0])  # ||a-n|| = 2, ||a-p|| = 0, alpha = 1 -> 0
    assert triplet_loss(h_a, h_a, h_n, 1.0) == 0.0


def test_loss_negative_equals_anchor():
    h_a = np.array([0.0, 0.0])
    h_p = np.array([1.0, 0.0])  # max(0, 1 - 0 + 1) = 2
    assert triplet_loss(h_a, h_p, h_a, 1.0) == pytest.approx(2.0)


def test_loss_degenerate_equality_gives_alpha():
    h = np.array([0.3, -0.7])
    assert triplet_loss(h, h, h, 1.0) == pytest.approx(1.0)


def test_loss_nonnegative_random(rng):
    for _ in range(200):
        a, p, n = rng.normal(size=(3, 6))
        val = triplet_loss(a, p, n, 1.0)
        assert val >= 0.0
        d_p = np.linalg.norm(a - p)
        d_n = np.linalg.norm(a - n)
        if d_p + 1.0 <= d_n:
            assert val == 0.0
        else:
            assert val > 0.0


def test_loss_dim_mismatch():
    with pytest.raises(DimMismatch):
        triplet_loss(np.ones(3), np.ones(4), np.ones(3), 1.0)


# --- mining ----------------------------------------------------------------------

def two_component_graph():
    # Component 1: s0 - t0 - s1 (s0, s1 are co-neighbors); component 2: s2 - t1.
    return BipartiteGraph(
        ("s0", "s1", "s2"),
        ("t0", "t1"),
        frozenset({(0, 0), (1, 0), (2, 1)}),
    )


def bfs_has_path(graph, a, b):
    from collections import deque

    n_src = graph.n_sources
    adj = {}
    for s, t in graph.edges:
        adj.setdefault(s, []).append(n_src + t)
        adj.setdefault(n_src + t, []).append(s)
    seen = {a}
    queue = deque([a])
    while queue:
        u = queue.popleft()
        if u == b:
            return True
        for v in adj.get(u, []):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return False


def test_mine_two_components():
    triplets = mine_triplets(two_component_graph(), 2, np.random.default_rng(0))
    assert triplets  # s0 and s1 both have a co-neighbor and s2 as negative
    for t in triplets:
        assert t.negative == 2
        assert {t.anchor, t.positive} <= {0, 1}
        assert t.anchor != t.positive


def test_mine_fully_connected_raises():
    g = BipartiteGraph(("s0", "s1"), ("t0",), frozenset({(0, 0), (1, 0)}))
    with pytest.raises(NoNegativesAvailable):
        mine_triplets(g, 2, np.random.default_rng(0))


def test_anchor_without_coneighbor_contributes_nothing():
    # s2 shares no target with anyone, so it is never an anchor.
    triplets = mine_triplets(two_component_graph(), 3, np.random.default_rng(1))
    assert all(t.anchor != 2 for t in triplets)


def test_mined_triplets_satisfy_definition_via_bfs(rng):
    for trial in range(20):
        g = make_random_graph(rng, 8, 8, 0.12)
        try:
            triplets = mine_triplets(g, 2, np.random.default_rng(trial))
        except NoNegativesAvailable:
            continue
        for t in triplets:
            # positive shares >= 1 target with anchor
            shared = set(g.source_neighbors(t.anchor)) & set(g.source_neighbors(t.positive))
            assert shared
            # negative has no path to the anchor
            assert not bfs_has_path(g, t.anchor, t.negative)


def test_mining_deterministic(rng):
    g = make_random_graph(rng, 8, 8, 0.15)
    try:
        a = mine_triplets(g, 2, np.random.default_rng(5))
        b = mine_triplets(g, 2, np.random.default_rng(5))
    except NoNegativesAvailable:
        pytest.skip("sampled graph fully connected")
    assert a == b


# --- head training ----------------------------------------------------------------

def test_train_head_requires_triplets():
    with pytest.raises(EmptyTrainSplit):
        train_head([], np.zeros((1, 4)))


def test_train_head_reduces_separable_loss(rng):
    # Two feature clusters; anchors and positives share a cluster, negatives
    # sit in the other -> linearly improvable.
    dim = 16
    c0, c1 = random_unit_rows(rng, 2, dim)
    n_per = 30
    cluster0 = c0 + 0.05 * rng.normal(size=(n_per, dim))
    cluster1 = c1 + 0.05 * rng.normal(size=(n_per, dim))
    feats = np.vstack([cluster0, cluster1])
    triplets = [
        Triplet(i, (i + 1) % n_per, n_per + int(rng.integers(n_per)))
        for i in range(n_per)
    ]
    config = HeadConfig(out_dim=8, epochs=40, seed=0)

    def mean_loss(params):
        a = feats[[t.anchor for t in triplets]]
        p = feats[[t.positive for t in triplets]]
        n = feats[[t.negative for t in triplets]]
        loss, _ = triplet_loss_and_grads(params, a, p, n, config.margin)
        return loss

    initial = mean_loss(ProjectionHead.init(dim, 8, 1.0, 0).params.astype(np.float64))
    head = train_head(triplets, feats, config)
    final = mean_loss(head.params.astype(np.float64))
    assert final <= 0.5 * initial


def test_train_head_deterministic(rng):
    feats = rng.normal(size=(10, 8))
    triplets = [Triplet(0, 1, 5), Triplet(2, 3, 7)]
    cfg = HeadConfig(out_dim=4, epochs=5, seed=3)
    h1 = train_head(triplets, feats, cfg)
    h2 = train_head(triplets, feats, cfg)
    assert h1.params == h2.params


def test_triplet_gradients_match_finite_differences():
    # Frozen construction: every hinge active with margin in (0.3, 0.6),
    # distances bounded away from zero, and no accidentally tiny projection
    # gradient, so the quotient is dominated by neither kinks nor noise.
    pr = np.random.default_rng(0)
    params = init_params([("bcl.proj", (4, 8)), ("bcl.bias", (4,))], seed=0)
    for name in params.names():
        params[name] = params[name] + 0.1 * pr.normal(size=params[name].shape).astype(np.float32)
    w = params["bcl.proj"].astype(np.float64)
    b = params["bcl.bias"].astype(np.float64)
    pool = 600
    xa = pr.normal(size=(pool, 8))
    xp = xa + 1.5 * pr.normal(size=(pool, 8)) / np.sqrt(8)
    xn = xa + 1.2 * pr.normal(size=(pool, 8)) / np.sqrt(8)
    ha, hp, hn = xa @ w.T + b, xp @ w.T + b, xn @ w.T + b
    d_p = np.linalg.norm(ha - hp, axis=1)
    d_n = np.linalg.norm(ha - hn, axis=1)
    m = d_p - d_n + 1.0
    keep = np.flatnonzero((m > 0.3) & (m < 0.6) & (d_p > 0.5) & (d_n > 0.5))[:8]
    assert len(keep) == 8
    xa, xp, xn = xa[keep], xp[keep], xn[keep]
    _, grads = triplet_loss_and_grads(params.astype(np.float64), xa, xp, xn, 1.0)
    assert np.min(np.abs(grads["bcl.proj"])) > 2e-3

    err = finite_difference_check(
        lambda p: triplet_loss_and_grads(p, xa, xp, xn, 1.0), params, eps=1e-3
    )
    assert err < 1e-4


def test_head_checkpoint_roundtrip(tmp_path):
    head = ProjectionHead.init(16, 8, 1.0, seed=2)
    save_head(head, tmp_path / "h.idcm")
    loaded = load_head(tmp_path / "h.idcm")
    assert loaded.params == head.params.astype(np.float32)
    assert "bcl.proj" in loaded.params


# --- attach_unseen ------------------------------------------------------------------

def attachment_fixture(rng):
    g = BipartiteGraph(
        ("s0", "s1", "s2"),
        ("t0", "t1", "t2"),
        frozenset({(0, 0), (0, 1), (1, 1), (2, 2)}),
    )
    feats = EmbeddingMatrix(
        list(g.source_ids) + list(g.target_ids),
        random_unit_rows(rng, 6, 12).astype(np.float32),
    )
    head = ProjectionHead.init(12, 6, 1.0, seed=0)
    return g, feats, head


def test_identical_embedding_attaches_via_that_source(rng):
    g, feats, head = attachment_fixture(rng)
    vec = feats.row("s0")
    new_g, new_f, idx, attached = attach_unseen(
        "u:0", vec, g, feats, head, top_m=1, rng=np.random.default_rng(0)
    )
    # top-1 similar is s0 itself (cosine exactly 1 in head space),
    # so attachments come from s0's targets {t0, t1}.
    assert set(attached) <= {0, 1}
    assert idx == 3
    assert new_g.source_ids[-1] == "u:0"
    assert "u:0" in new_f
    # copy-on-attach: original untouched
    assert "u:0" not in g.source_ids
    assert len(g.edges) == 4


def test_tau_unmet_raises(rng):
    g, feats, head = attachment_fixture(rng)
    # tau above the attainable cosine range: no source can clear the gate.
    q = rng.normal(size=12)
    with pytest.raises(NoSimilarNeighbor):
        attach_unseen("u:1", q, g, feats, head, tau=1.1, rng=np.random.default_rng(0))


def test_pool_smaller_than_limit_attaches_all(rng):
    g, feats, head = attachment_fixture(rng)
    vec = feats.row("s2")
    _, _, _, attached = attach_unseen(
        "u:2", vec, g, feats, head, top_m=1, attach_limit=5,
        rng=np.random.default_rng(0),
    )
    assert attached == [2]  # s2 has a single target


def test_empty_target_pool(rng):
    g = BipartiteGraph(("s0",), ("t0",), frozenset())
    feats = EmbeddingMatrix(["s0", "t0"], random_unit_rows(rng, 2, 8).astype(np.float32))
    head = ProjectionHead.init(8, 4, 1.0, seed=0)
    with pytest.raises(EmptyTargetPool):
        attach_unseen("u:3", feats.row("s0"), g, feats, head,
                      rng=np.random.default_rng(0))


def test_attach_deterministic_per_seed(rng):
    g, feats, head = attachment_fixture(rng)
    vec = feats.row("s0")
    a = attach_unseen("u:4", vec, g, feats, head, rng=np.random.default_rng(9))
    b = attach_unseen("u:4", vec, g, feats, head, rng=np.random.default_rng(9))
    assert a[0] == b[0]
    assert a[3] == b[3]


def test_components_cover_all_nodes(rng):
    g = make_random_graph(rng, 6, 6, 0.2)
    comp = connected_components(g)
    assert comp.shape == (12,)
    assert np.all(comp >= 0)
    for s, t in g.edges:
        assert comp[s] == comp[6 + t]
