"""Knowledge-graph construction against brute-force statistical oracles.

The oracles below re-implement the population moments, the inclusive
quartile interpolation, the rule choice, and the whole edge construction
with plain Python so they share no code path with the library.
"""

import math

import numpy as np
import pytest

from idiomce.corpus import IdiomRecord
from idiomce.embeddings import EmbeddingMatrix
from idiomce.errors import (
    DegenerateDistribution,
    DimMismatch,
    EmptySide,
    MissingEmbedding,
    TooFewSamples,
    ZeroVector,
)
from idiomce.kgbuild import (
    RuleKind,
    ThresholdConfig,
    build_graph,
    build_graph_with_rules,
    calibrate_threshold,
    compute_moments,
    cosine_similarity,
)

from conftest import random_unit_rows


# --- oracles -----------------------------------------------------------------

def oracle_moments(xs):
    n = len(xs)
    mean = sum(xs) / n
    m2 = sum((x - mean) ** 2 for x in xs) / n
    m3 = sum((x - mean) ** 3 for x in xs) / n
    m4 = sum((x - mean) ** 4 for x in xs) / n
    return {
        "mean": mean,
        "std": math.sqrt(m2),
        "skew": m3 / m2 ** 1.5 if m2 > 0 else float("nan"),
        "kurt": m4 / m2 ** 2 - 3.0 if m2 > 0 else float("nan"),
    }


def oracle_quartile(xs, p):
    s = sorted(xs)
    h = (len(s) - 1) * p
    lo = math.floor(h)
    hi = math.ceil(h)
    return s[lo] + (s[hi] - s[lo]) * (h - lo)


def oracle_rule(xs, z=2.5, iqr_k=1.5, skew_gate=0.5, kurt_gate=1.0):
    m = oracle_moments(xs)
    q1 = oracle_quartile(xs, 0.25)
    q3 = oracle_quartile(xs, 0.75)
    if abs(m["skew"]) <= skew_gate and abs(m["kurt"]) <= kurt_gate:
        return "zscore", m["mean"] + z * m["std"]
    return "iqr", q3 + iqr_k * (q3 - q1)


def oracle_edges_per_source(sim_rows):
    """Per-source calibration + thresholding, straight from the definitions."""
    edges = set()
    for i, row in enumerate(sim_rows):
        vals = list(row)
        m = oracle_moments(vals)
        if m["std"] == 0.0:
            continue
        _, cutoff = oracle_rule(vals)
        for j, v in enumerate(vals):
            if v >= cutoff:
                edges.add((i, j))
    return edges


# --- cosine ------------------------------------------------------------------

def test_cosine_identical():
    assert cosine_similarity([1, 0], [1, 0]) == pytest.approx(1.0)


def test_cosine_orthogonal():
    assert cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)


def test_cosine_hand_value():
    # dot = 2 + 2 + 4 = 8, norms 3 * 3 = 9.
    assert cosine_similarity([1, 2, 2], [2, 1, 2]) == pytest.approx(8.0 / 9.0)


def test_cosine_zero_vector():
    with pytest.raises(ZeroVector):
        cosine_similarity([0.0, 0.0], [1.0, 0.0])


def test_cosine_dim_mismatch():
    with pytest.raises(DimMismatch):
        cosine_similarity([1.0], [1.0, 0.0])


# --- moments -----------------------------------------------------------------

def test_moments_one_to_five():
    # Oracle by hand: m2 = 2, m4 = 6.8, so g2 = 6.8/4 - 3 = -1.3.
    stats = compute_moments([1, 2, 3, 4, 5])
    assert stats.mean == pytest.approx(3.0)
    assert stats.skewness == pytest.approx(0.0, abs=1e-12)
    assert stats.excess_kurtosis == pytest.approx(-1.3)
    assert stats.q1 == pytest.approx(2.0)
    assert stats.q3 == pytest.approx(4.0)
    assert stats.iqr == pytest.approx(2.0)


def test_symmetric_sample_zero_skew(rng):
    base = rng.normal(size=50)
    sym = np.concatenate([base, -base])  # exactly symmetric around 0
    assert compute_moments(sym).skewness == pytest.approx(0.0, abs=1e-9)


def test_all_equal_degenerate():
    with pytest.raises(DegenerateDistribution):
        compute_moments([0.7, 0.7, 0.7, 0.7])


def test_too_few_samples():
    with pytest.raises(TooFewSamples):
        compute_moments([1.0, 2.0, 3.0])


def test_moments_match_oracle_on_random_samples(rng):
    for _ in range(300):
        n = int(rng.integers(4, 40))
        xs = rng.normal(size=n) * rng.uniform(0.1, 3.0) + rng.uniform(-1, 1)
        stats = compute_moments(xs)
        o = oracle_moments(list(xs))
        assert abs(stats.mean - o["mean"]) < 1e-9
        assert abs(stats.std - o["std"]) < 1e-9
        assert abs(stats.skewness - o["skew"]) < 1e-9
        assert abs(stats.excess_kurtosis - o["kurt"]) < 1e-9
        assert abs(stats.q1 - oracle_quartile(list(xs), 0.25)) < 1e-9
        assert abs(stats.q3 - oracle_quartile(list(xs), 0.75)) < 1e-9


# --- threshold calibration -----------------------------------------------------

def test_near_normal_sample_uses_zscore(rng):
    xs = rng.normal(size=2000)
    stats = compute_moments(xs)
    rule = calibrate_threshold(stats)
    assert rule.kind is RuleKind.ZSCORE
    assert rule.cutoff == pytest.approx(stats.mean + 2.5 * stats.std)


def test_skewed_sample_uses_iqr():
    xs = [1.0, 1.0, 1.0, 1.0, 10.0]
    stats = compute_moments(xs)
    assert abs(stats.skewness) > 0.5  # oracle: heavily right-skewed
    rule = calibrate_threshold(stats)
    assert rule.kind is RuleKind.IQR
    assert rule.cutoff == pytest.approx(stats.q3 + 1.5 * stats.iqr)


def test_fixed_override_wins(rng):
    stats = compute_moments(rng.normal(size=100))
    rule = calibrate_threshold(stats, ThresholdConfig(fixed_cutoff=0.5))
    assert rule.kind is RuleKind.FIXED
    assert rule.cutoff == 0.5


# --- build_graph ----------------------------------------------------------------

def planted_pair_features():
    # Two nearly-aligned pairs: s1~t1, s2~t2, cross-similarity low.
    ids = ["a:1", "a:2", "b:1", "b:2"]
    rows = np.array(
        [
            [1.0, 0.0],
            [0.0, 1.0],
            [0.9, np.sqrt(1 - 0.81)],
            [np.sqrt(1 - 0.81), 0.9],
        ],
        dtype=np.float32,
    )
    return ids, rows


def test_fixed_threshold_two_by_two():
    ids, rows = planted_pair_features()
    feats = EmbeddingMatrix(ids, rows)
    src = [IdiomRecord("a:1", "aa", "x"), IdiomRecord("a:2", "aa", "y")]
    tgt = [IdiomRecord("b:1", "bb", "x"), IdiomRecord("b:2", "bb", "y")]
    g = build_graph(src, tgt, feats, ThresholdConfig(fixed_cutoff=0.5))
    assert g.edges == {(0, 0), (1, 1)}
    assert g.source_lang == "aa" and g.target_lang == "bb"


def test_missing_embedding_named():
    feats = EmbeddingMatrix(["a:1"], np.array([[1.0, 0.0]], dtype="float32"))
    src = [IdiomRecord("a:1", "aa", "x")]
    tgt = [IdiomRecord("b:1", "bb", "x")]
    with pytest.raises(MissingEmbedding) as exc:
        build_graph(src, tgt, feats)
    assert exc.value.id == "b:1"


def test_empty_side():
    feats = EmbeddingMatrix(["a:1"], np.array([[1.0, 0.0]], dtype="float32"))
    with pytest.raises(EmptySide):
        build_graph([IdiomRecord("a:1", "aa", "x")], [], feats)


def test_isolated_sources_retained(rng):
    # One source far from every target still appears as a node.
    ids = ["a:0", "b:0", "b:1", "b:2", "b:3"]
    rows = np.vstack([[0.0, 1.0], random_unit_rows(rng, 4, 2)]).astype(np.float32)
    feats = EmbeddingMatrix(ids, rows)
    src = [IdiomRecord("a:0", "aa", "x")]
    tgt = [IdiomRecord(f"b:{i}", "bb", "y") for i in range(4)]
    g = build_graph(src, tgt, feats, ThresholdConfig(fixed_cutoff=2.0))
    assert g.n_sources == 1 and g.n_targets == 4
    assert g.edges == frozenset()


def test_build_graph_matches_oracle_on_random_instances(rng):
    for _ in range(50):
        n_s, n_t = 20, 20
        ids = [f"a:{i}" for i in range(n_s)] + [f"b:{j}" for j in range(n_t)]
        rows = random_unit_rows(rng, n_s + n_t, 16).astype(np.float32)
        feats = EmbeddingMatrix(ids, rows)
        src = [IdiomRecord(f"a:{i}", "aa", "x") for i in range(n_s)]
        tgt = [IdiomRecord(f"b:{j}", "bb", "y") for j in range(n_t)]
        g = build_graph(src, tgt, feats)

        # Independent recomputation from the stored float32 rows.
        x = feats.array.astype(np.float64)
        sims = [
            [float(np.clip(np.dot(x[i], x[n_s + j]) /
                           (np.linalg.norm(x[i]) * np.linalg.norm(x[n_s + j])), -1, 1))
             for j in range(n_t)]
            for i in range(n_s)
        ]
        assert set(g.edges) == oracle_edges_per_source(sims)


def test_rebuild_is_identical(rng):
    ids = [f"a:{i}" for i in range(10)] + [f"b:{j}" for j in range(10)]
    feats = EmbeddingMatrix(ids, random_unit_rows(rng, 20, 8).astype(np.float32))
    src = [IdiomRecord(f"a:{i}", "aa", "x") for i in range(10)]
    tgt = [IdiomRecord(f"b:{j}", "bb", "y") for j in range(10)]
    g1 = build_graph(src, tgt, feats)
    g2 = build_graph(src, tgt, feats)
    assert g1 == g2


def test_fixed_cutoff_monotone(rng):
    ids = [f"a:{i}" for i in range(8)] + [f"b:{j}" for j in range(8)]
    feats = EmbeddingMatrix(ids, random_unit_rows(rng, 16, 8).astype(np.float32))
    src = [IdiomRecord(f"a:{i}", "aa", "x") for i in range(8)]
    tgt = [IdiomRecord(f"b:{j}", "bb", "y") for j in range(8)]
    previous = None
    for cutoff in (-1.0, -0.5, 0.0, 0.3, 0.8, 1.1):
        g = build_graph(src, tgt, feats, ThresholdConfig(fixed_cutoff=cutoff))
        if previous is not None:
            assert g.edges <= previous  # raising the cutoff never adds edges
        previous = g.edges


def test_global_scope_single_rule(rng):
    ids = [f"a:{i}" for i in range(6)] + [f"b:{j}" for j in range(10)]
    feats = EmbeddingMatrix(ids, random_unit_rows(rng, 16, 8).astype(np.float32))
    src = [IdiomRecord(f"a:{i}", "aa", "x") for i in range(6)]
    tgt = [IdiomRecord(f"b:{j}", "bb", "y") for j in range(10)]
    g, rules = build_graph_with_rules(src, tgt, feats, ThresholdConfig(scope="global"))
    assert len(set(rules)) == 1
    # Oracle: one distribution over all 60 pairs, definitional cosine.
    x = feats.array.astype(np.float64)
    all_vals = [
        float(np.dot(x[i], x[6 + j]) / (np.linalg.norm(x[i]) * np.linalg.norm(x[6 + j])))
        for i in range(6)
        for j in range(10)
    ]
    kind, cutoff = oracle_rule(all_vals)
    assert rules[0].kind.value == kind
    assert rules[0].cutoff == pytest.approx(cutoff, abs=1e-9)
