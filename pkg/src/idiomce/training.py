"""Link-predictor training: edge splits, negative sampling, and the loop.

Each run: split the base edge set, keep message passing on the train
edges only, optionally apply cold-start duplication to that train graph,
then do full-batch epochs (one Adam step per epoch) against the train
positives plus freshly sampled 1:1 negatives. Model selection is best
validation AUC across epochs. Splitting happens *before* augmentation so
held-out edges can never leak through duplicates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    EmptyTrainSplit,
    ExhaustedNonEdges,
    LengthMismatch,
    NonFiniteLoss,
    TooFewEdges,
)
from .gnn import (
    LinkPredictor,
    _encode,
    decode_pairs,
    graph_arrays,
    link_loss_and_grads,
    score_source_against_targets,
)
from .graph import BipartiteGraph
from .metrics import mean_std, pairwise_auc, rank_by_score
from .nn import AdamState, ParamStore, optimizer_step
from .nodedup import DEFAULT_COPIES, DEFAULT_DELTA, augment_graph

DEFAULT_HITS_KS = (5, 10, 20, 50)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    runs: int = 5
    lr: float = 1e-3
    negative_ratio: float = 1.0
    seed: int = 0
    hidden_dim: int = 64
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    use_node_dup: bool = True
    delta: int = DEFAULT_DELTA
    copies: int = DEFAULT_COPIES
    hits_ks: tuple[int, ...] = DEFAULT_HITS_KS

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")

    def hash(self) -> str:
        raw = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(raw.encode()).hexdigest()[:12]


@dataclass
class EdgeSplit:
    """Disjoint cover of the edge set plus fixed negative pools."""

    train: tuple[tuple[int, int], ...]
    valid: tuple[tuple[int, int], ...]
    test: tuple[tuple[int, int], ...]
    valid_neg: tuple[tuple[int, int], ...]
    test_neg: tuple[tuple[int, int], ...]


def _non_edge_count(graph) -> int:
    n_real = getattr(graph, "n_real_sources", graph.n_sources)
    real_edges = sum(1 for s, _ in graph.edges if s < n_real)
    return n_real * graph.n_targets - real_edges


def sample_negatives(graph, count: int, rng: np.random.Generator, exclude=()) -> list[tuple[int, int]]:
    """Uniformly sample distinct source-target non-edges.

    Duplicate source nodes from augmentation are never used as endpoints.
    ``exclude`` holds extra pairs to treat as taken (e.g. another split's
    negative pool).
    """
    exclude = set(exclude)
    available = _non_edge_count(graph) - len(exclude)
    if count > available:
        raise ExhaustedNonEdges(f"requested {count} negatives, {available} available")
    n_real = getattr(graph, "n_real_sources", graph.n_sources)
    n_tgt = graph.n_targets
    taken = set(graph.edges) | exclude
    out: list[tuple[int, int]] = []
    chosen: set[tuple[int, int]] = set()
    # Rejection sampling, falling back to enumeration when the non-edge set
    # is too dense to hit quickly.
    attempts = 0
    limit = max(1000, 20 * count)
    while len(out) < count and attempts < limit:
        s = int(rng.integers(n_real))
        t = int(rng.integers(n_tgt))
        attempts += 1
        pair = (s, t)
        if pair in taken or pair in chosen:
            continue
        chosen.add(pair)
        out.append(pair)
    if len(out) < count:
        pool = [
            (s, t)
            for s in range(n_real)
            for t in range(n_tgt)
            if (s, t) not in taken and (s, t) not in chosen
        ]
        picks = rng.choice(len(pool), size=count - len(out), replace=False)
        out.extend(pool[int(p)] for p in picks)
    return out


def split_edges(graph, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> EdgeSplit:
    """Shuffle edges into train/valid/test and sample per-split negatives.

    The negative pools for valid and test are 1:1 with their positives,
    disjoint from each other and from every positive edge.
    """
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be non-negative and sum to 1")
    edges = sorted(graph.edges)
    n = len(edges)
    if n == 0:
        raise TooFewEdges("graph has no edges")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_valid = int(n * fractions[1])
    n_test = int(n * fractions[2])
    n_train = n - n_valid - n_test
    if n_train == 0:
        raise TooFewEdges(f"{n} edges cannot fill a train split at {fractions}")
    if (fractions[1] > 0 and n_valid == 0) or (fractions[2] > 0 and n_test == 0):
        raise TooFewEdges(f"{n} edges round a requested split to zero at {fractions}")
    train = tuple(edges[i] for i in order[:n_train])
    valid = tuple(edges[i] for i in order[n_train:n_train + n_valid])
    test = tuple(edges[i] for i in order[n_train + n_valid:])
    valid_neg = tuple(sample_negatives(graph, n_valid, rng)) if n_valid else ()
    test_neg = (
        tuple(sample_negatives(graph, n_test, rng, exclude=valid_neg)) if n_test else ()
    )
    return EdgeSplit(train, valid, test, valid_neg, test_neg)


def bce_loss(preds, labels) -> float:
    """Mean binary cross-entropy on probabilities, clamped to [1e-7, 1-1e-7]."""
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.shape} != {y.shape}")
    p = np.clip(p, 1e-7, 1.0 - 1e-7)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _pairs_to_prob(model, embeddings, ga, pairs) -> np.ndarray:
    i = [s for s, _ in pairs]
    j = [ga.n_src + t for _, t in pairs]
    return decode_pairs(model, embeddings, i, j)


@dataclass
class RunResult:
    seed: int
    hits: dict[int, float]
    auc: float
    valid_auc: float
    final_train_loss: float
    initial_train_loss: float
    params: ParamStore = field(repr=False)


def _test_metrics(model, embeddings, ga, train_graph, split, ks) -> tuple[dict[int, float], float]:
    """Filtered Hits@k over test edges plus AUC against the test negative pool."""
    train_pos_by_src: dict[int, set[int]] = {}
    for s, t in train_graph.edges:
        train_pos_by_src.setdefault(s, set()).add(t)
    target_ids = list(train_graph.target_ids)
    hits = {k: 0 for k in ks}
    for s, t in split.test:
        scores = score_source_against_targets(model, embeddings, ga, s)
        known = train_pos_by_src.get(s, set()) - {t}
        keep = [j for j in range(ga.n_tgt) if j not in known]
        sub_scores = scores[keep]
        sub_ids = [target_ids[j] for j in keep]
        rank = rank_by_score(sub_scores, sub_ids, keep.index(t))
        for k in ks:
            if rank <= k:
                hits[k] += 1
    n_test = len(split.test)
    hits_pct = {k: 100.0 * hits[k] / n_test for k in ks} if n_test else {k: float("nan") for k in ks}
    pos_scores = _pairs_to_prob(model, embeddings, ga, split.test)
    neg_scores = _pairs_to_prob(model, embeddings, ga, split.test_neg)
    auc = pairwise_auc(pos_scores, neg_scores) if n_test else float("nan")
    return hits_pct, auc


def train_one_run(
    base_graph: BipartiteGraph,
    features,
    config: TrainConfig,
    run_seed: int,
) -> RunResult:
    """Split, optionally augment the train graph, and fit one model."""
    split = split_edges(base_graph, config.fractions, run_seed)
    if not split.train:
        raise EmptyTrainSplit("no train edges")
    train_graph = base_graph.with_edges(split.train)
    if config.use_node_dup:
        train_graph = augment_graph(train_graph, config.delta, config.copies)
    ga = graph_arrays(train_graph, features)
    in_dim = ga.x.shape[1]

    model = LinkPredictor.init(in_dim, config.hidden_dim, seed=run_seed)
    params = model.params.astype(np.float64)
    state = AdamState(params, lr=config.lr)
    rng = np.random.default_rng(run_seed)

    train_pos = list(split.train)
    n_neg = int(round(len(train_pos) * config.negative_ratio))
    best_valid = -np.inf
    best_params = params.copy()
    initial_loss = None
    loss = float("nan")
    for _ in range(config.epochs):
        negatives = sample_negatives(train_graph, n_neg, rng)
        loss, grads = link_loss_and_grads(params, ga, train_pos, negatives)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"training diverged (loss={loss})")
        if initial_loss is None:
            initial_loss = loss
        optimizer_step(params, grads, state)
        if split.valid:
            eval_model = LinkPredictor(params, in_dim, config.hidden_dim)
            emb, _ = _encode(params, ga)
            v_pos = _pairs_to_prob(eval_model, emb, ga, split.valid)
            v_neg = _pairs_to_prob(eval_model, emb, ga, split.valid_neg)
            v_auc = pairwise_auc(v_pos, v_neg)
            if v_auc > best_valid:
                best_valid = v_auc
                best_params = params.copy()
    if not split.valid:
        best_params = params.copy()
        best_valid = float("nan")

    best_model = LinkPredictor(best_params, in_dim, config.hidden_dim)
    emb, _ = _encode(best_params, ga)
    hits, auc = (
        _test_metrics(best_model, emb, ga, train_graph, split, config.hits_ks)
        if split.test
        else ({k: float("nan") for k in config.hits_ks}, float("nan"))
    )
    return RunResult(
        seed=run_seed,
        hits=hits,
        auc=auc,
        valid_auc=float(best_valid),
        final_train_loss=float(loss),
        initial_train_loss=float(initial_loss),
        params=best_params,
    )


def train_link_predictor(
    graph: BipartiteGraph,
    features,
    config: TrainConfig = TrainConfig(),
    jobs: int = 1,
) -> tuple[LinkPredictor, dict]:
    """Train over config.runs seeds; return the best run's model and a report.

    The report carries per-run metrics and mean +/- std aggregates in the
    same shape the reference tables use (hits as percentages, AUC in [0,1]).
    Runs are independent, so jobs > 1 executes them in a thread pool with
    output identical to the sequential order.
    """
    seeds = [config.seed + r for r in range(config.runs)]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(
                lambda s: train_one_run(graph, features, config, s), seeds
            ))
    else:
        runs = [train_one_run(graph, features, config, s) for s in seeds]
    pick = max(
        range(len(runs)),
        key=lambda r: (runs[r].valid_auc if np.isfinite(runs[r].valid_auc) else -np.inf,
                       -r),
    )
    best = runs[pick]
    in_dim = best.params["sage1.weight"].shape[1] // 2
    model = LinkPredictor(
        best.params,
        in_dim,
        config.hidden_dim,
        metadata={
            "seed": best.seed,
            "epochs": config.epochs,
            "config_hash": config.hash(),
        },
    )
    report = {
        "runs": [
            {
                "seed": r.seed,
                "hits": r.hits,
                "auc": r.auc,
                "valid_auc": r.valid_auc,
                "initial_train_loss": r.initial_train_loss,
                "final_train_loss": r.final_train_loss,
            }
            for r in runs
        ],
        "hits": {
            k: mean_std([r.hits[k] for r in runs]) for k in config.hits_ks
        },
        "auc": mean_std([r.auc for r in runs]),
        "config_hash": config.hash(),
    }
    model.metadata["metrics"] = {
        "hits": {str(k): list(v) for k, v in report["hits"].items()},
        "auc": list(report["auc"]),
    }
    return model, report
