"""Knowledge-graph construction from cultural-feature similarity.

For every source idiom we compute cosine similarity against all target
idioms, then keep only the outlier pairs of that distribution. The outlier
cutoff is calibrated from the sample's shape: near-normal samples use a
z-score rule, skewed or heavy-tailed samples fall back to the IQR fence,
and a fixed cutoff can be forced through the config.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import IdiomRecord
from .embeddings import EmbeddingMatrix
from .errors import (
    DegenerateDistribution,
    DimMismatch,
    EmptySide,
    MissingEmbedding,
    TooFewSamples,
    ZeroVector,
)
from .graph import BipartiteGraph


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two vectors, in [-1, 1]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimMismatch(u.shape, v.shape)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu < 1e-12 or nv < 1e-12:
        raise ZeroVector("cosine undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


@dataclass(frozen=True)
class SimilarityStats:
    """Population moments and quartiles of one similarity sample."""

    mean: float
    std: float
    skewness: float       # g1 = m3 / m2^1.5
    excess_kurtosis: float  # g2 = m4 / m2^2 - 3
    q1: float
    q3: float
    iqr: float
    n: int


def compute_moments(samples) -> SimilarityStats:
    """Population moments plus quartiles by inclusive linear interpolation."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    n = x.size
    if n < 4:
        raise TooFewSamples(f"need >= 4 samples, got {n}")
    mean = float(np.mean(x))
    d = x - mean
    m2 = float(np.mean(d ** 2))
    if m2 == 0.0:
        raise DegenerateDistribution("zero variance sample")
    m3 = float(np.mean(d ** 3))
    m4 = float(np.mean(d ** 4))
    q1 = float(np.quantile(x, 0.25))
    q3 = float(np.quantile(x, 0.75))
    return SimilarityStats(
        mean=mean,
        std=float(np.sqrt(m2)),
        skewness=m3 / m2 ** 1.5,
        excess_kurtosis=m4 / m2 ** 2 - 3.0,
        q1=q1,
        q3=q3,
        iqr=q3 - q1,
        n=n,
    )


class RuleKind(str, Enum):
    ZSCORE = "zscore"
    IQR = "iqr"
    FIXED = "fixed"


@dataclass(frozen=True)
class ThresholdRule:
    kind: RuleKind
    cutoff: float


@dataclass(frozen=True)
class ThresholdConfig:
    """Knobs for outlier-threshold calibration.

    scope: "per_source" calibrates one rule per source similarity row;
    "global" calibrates a single rule over all pairs. fixed_cutoff, when
    set, overrides calibration entirely.
    """

    scope: str = "per_source"
    z: float = 2.5
    iqr_k: float = 1.5
    skew_gate: float = 0.5
    kurtosis_gate: float = 1.0
    fixed_cutoff: float | None = None

    def __post_init__(self):
        if self.scope not in ("per_source", "global"):
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.z <= 0:
            raise ValueError("z must be > 0")


def calibrate_threshold(stats: SimilarityStats, config: ThresholdConfig = ThresholdConfig()) -> ThresholdRule:
    """Pick the outlier rule for one similarity sample.

    Near-normal shape (|skew| <= skew_gate and |excess kurtosis| <=
    kurtosis_gate) uses mean + z*std; anything else uses the upper IQR
    fence q3 + iqr_k*iqr. A configured fixed cutoff wins regardless.
    """
    if config.fixed_cutoff is not None:
        return ThresholdRule(RuleKind.FIXED, float(config.fixed_cutoff))
    if stats.std == 0.0:
        raise DegenerateDistribution("zero variance sample")
    if (
        abs(stats.skewness) <= config.skew_gate
        and abs(stats.excess_kurtosis) <= config.kurtosis_gate
    ):
        return ThresholdRule(RuleKind.ZSCORE, stats.mean + config.z * stats.std)
    return ThresholdRule(RuleKind.IQR, stats.q3 + config.iqr_k * stats.iqr)


def similarity_matrix(
    source_ids, target_ids, features: EmbeddingMatrix
) -> np.ndarray:
    """All-pairs cosine similarities, sources x targets, via normalized rows."""
    xs = np.asarray(features.rows_for(source_ids), dtype=np.float64)
    xt = np.asarray(features.rows_for(target_ids), dtype=np.float64)
    # Feature rows are unit norm already; renormalize defensively so the
    # matrix is a true cosine even for hand-built matrices.
    for x in (xs, xt):
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms < 1e-12):
            raise ZeroVector("zero feature row")
        x /= norms[:, None]
    return np.clip(xs @ xt.T, -1.0, 1.0)


def build_graph_with_rules(
    source: list[IdiomRecord],
    target: list[IdiomRecord],
    cultural_features: EmbeddingMatrix,
    config: ThresholdConfig = ThresholdConfig(),
) -> tuple[BipartiteGraph, list[ThresholdRule | None]]:
    """Build the bipartite graph and report the rule applied per source.

    A rule entry is None for a source whose similarity row was degenerate
    (zero variance): outliers are undefined there, so the source is kept
    isolated rather than failing the whole build. In global scope the same
    single rule is reported for every source.
    """
    if not source or not target:
        raise EmptySide("both sides need at least one idiom")
    for rec in source + target:
        if rec.id not in cultural_features:
            raise MissingEmbedding(rec.id)
    source_ids = tuple(r.id for r in source)
    target_ids = tuple(r.id for r in target)
    sims = similarity_matrix(source_ids, target_ids, cultural_features)

    rules: list[ThresholdRule | None] = []
    edges: set[tuple[int, int]] = set()
    if config.scope == "global" or config.fixed_cutoff is not None:
        if config.fixed_cutoff is not None:
            rule = ThresholdRule(RuleKind.FIXED, float(config.fixed_cutoff))
        else:
            rule = calibrate_threshold(compute_moments(sims.ravel()), config)
        rules = [rule] * len(source_ids)
        for i in range(len(source_ids)):
            for j in np.flatnonzero(sims[i] >= rule.cutoff):
                edges.add((i, int(j)))
    else:
        for i in range(len(source_ids)):
            try:
                rule = calibrate_threshold(compute_moments(sims[i]), config)
            except DegenerateDistribution:
                rules.append(None)  # outliers undefined: source stays isolated
                continue
            rules.append(rule)
            for j in np.flatnonzero(sims[i] >= rule.cutoff):
                edges.add((i, int(j)))

    graph = BipartiteGraph(
        source_ids,
        target_ids,
        frozenset(edges),
        source_lang=source[0].lang,
        target_lang=target[0].lang,
    )
    return graph, rules


def build_graph(
    source: list[IdiomRecord],
    target: list[IdiomRecord],
    cultural_features: EmbeddingMatrix,
    config: ThresholdConfig = ThresholdConfig(),
) -> BipartiteGraph:
    """Connect each source idiom to the outlier-similar target idioms.

    Isolated nodes are retained: a source whose whole row falls below its
    cutoff simply contributes no edges.
    """
    graph, _ = build_graph_with_rules(source, target, cultural_features, config)
    return graph
