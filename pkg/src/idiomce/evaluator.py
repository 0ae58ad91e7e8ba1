"""Link-prediction metrics and the cold-start ablation harness.

Hits@k uses filtered ranking: for a test edge (s, t), the candidate set
is every real target except s's known training positives (other than t
itself), ordered by score descending with id ascending as the tie-break.
AUC is the exact pairwise probability that a positive outranks a negative,
reported in [0, 1] internally and x100 in rendered tables.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace

from .errors import EmptyTestSet
from .gnn import LinkPredictor, encode_graph, graph_arrays, score_source_against_targets, decode_pairs
from .metrics import mean_std, pairwise_auc, rank_by_score, sign_test_one_sided
from .training import TrainConfig, train_one_run


@dataclass(frozen=True)
class MetricReport:
    """Mean +/- population-std metrics over runs."""

    hits: dict[int, tuple[float, float]]
    auc: tuple[float, float]
    runs: int
    config_hash: str = ""


def hits_at_k(
    model: LinkPredictor,
    graph,
    features,
    test_edges,
    k: int,
    known_positives=None,
) -> float:
    """Percentage of test edges whose target ranks within the top k.

    ``graph`` is the message-passing graph (training edges only in an
    evaluation pipeline); ``known_positives`` defaults to that graph's
    edge set and is removed from each source's candidate list.
    """
    test_edges = list(test_edges)
    if not test_edges:
        raise EmptyTestSet("no test edges")
    if known_positives is None:
        known_positives = set(graph.edges)
    by_src: dict[int, set[int]] = {}
    for s, t in known_positives:
        by_src.setdefault(s, set()).add(t)
    ga = graph_arrays(graph, features)
    embeddings = encode_graph(model, ga, None)
    target_ids = list(graph.target_ids)
    hit = 0
    for s, t in test_edges:
        scores = score_source_against_targets(model, embeddings, ga, s)
        known = by_src.get(s, set()) - {t}
        keep = [j for j in range(ga.n_tgt) if j not in known]
        rank = rank_by_score(scores[keep], [target_ids[j] for j in keep], keep.index(t))
        if rank <= k:
            hit += 1
    return 100.0 * hit / len(test_edges)


def auc(model: LinkPredictor, graph, features, pos_edges, neg_edges) -> float:
    """Exact pairwise AUC of positive vs negative edge scores, in [0, 1]."""
    pos_edges = list(pos_edges)
    neg_edges = list(neg_edges)
    if not pos_edges or not neg_edges:
        raise EmptyTestSet("need both positive and negative edges")
    ga = graph_arrays(graph, features)
    embeddings = encode_graph(model, ga, None)
    def probs(pairs):
        i = [s for s, _ in pairs]
        j = [ga.n_src + t for _, t in pairs]
        return decode_pairs(model, embeddings, i, j)
    return pairwise_auc(probs(pos_edges), probs(neg_edges))


def report_from_runs(run_metrics: list[dict], ks, config_hash: str = "") -> MetricReport:
    return MetricReport(
        hits={k: mean_std([m["hits"][k] for m in run_metrics]) for k in ks},
        auc=mean_std([m["auc"] for m in run_metrics]),
        runs=len(run_metrics),
        config_hash=config_hash,
    )


@dataclass(frozen=True)
class AblationResult:
    with_dup: MetricReport
    without_dup: MetricReport
    paired_delta_hits: dict[int, list[float]]
    sign_test_p: dict[int, float]


def run_ablation(graph, features, config: TrainConfig = TrainConfig()) -> AblationResult:
    """Train the duplication-on and duplication-off variants pairwise.

    Both variants see identical splits and init seeds (the split is drawn
    from the base graph before augmentation), so per-seed metric deltas
    are paired observations for the one-sided sign test.
    """
    with_cfg = replace(config, use_node_dup=True)
    without_cfg = replace(config, use_node_dup=False)
    with_runs = []
    without_runs = []
    for r in range(config.runs):
        seed = config.seed + r
        a = train_one_run(graph, features, with_cfg, seed)
        b = train_one_run(graph, features, without_cfg, seed)
        with_runs.append({"hits": a.hits, "auc": a.auc})
        without_runs.append({"hits": b.hits, "auc": b.auc})
    ks = config.hits_ks
    deltas = {
        k: [w["hits"][k] - wo["hits"][k] for w, wo in zip(with_runs, without_runs)]
        for k in ks
    }
    return AblationResult(
        with_dup=report_from_runs(with_runs, ks, with_cfg.hash()),
        without_dup=report_from_runs(without_runs, ks, without_cfg.hash()),
        paired_delta_hits=deltas,
        sign_test_p={k: sign_test_one_sided(deltas[k]) for k in ks},
    )


def evaluate_on_split(
    model: LinkPredictor,
    graph,
    features,
    fractions=(0.8, 0.1, 0.1),
    seed: int = 0,
    ks=(5, 10, 20, 50),
) -> dict:
    """Re-derive a split and score a trained model on its held-out edges.

    Message passing runs over the train edges only; using the same seed
    and fractions the model was trained with reproduces its test split.
    """
    from .training import split_edges

    split = split_edges(graph, fractions, seed)
    train_graph = graph.with_edges(split.train)
    hits = {
        k: hits_at_k(model, train_graph, features, split.test, k) for k in ks
    }
    value = auc(model, train_graph, features, split.test, split.test_neg)
    return {"hits": hits, "auc": value, "n_test": len(split.test)}


# -- table rendering ---------------------------------------------------------


def _cells(report: MetricReport, ks) -> list[str]:
    out = [f"{report.hits[k][0]:.2f} ± {report.hits[k][1]:.2f}" for k in ks]
    out.append(f"{100 * report.auc[0]:.2f} ± {100 * report.auc[1]:.2f}")
    return out


def to_markdown(rows: list[tuple[str, MetricReport]], ks=(5, 10, 20, 50)) -> str:
    header = ["Variant"] + [f"Hits@{k}" for k in ks] + ["AUC"]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    for label, report in rows:
        lines.append("| " + " | ".join([label] + _cells(report, ks)) + " |")
    return "\n".join(lines) + "\n"


def to_csv(rows: list[tuple[str, MetricReport]], ks=(5, 10, 20, 50)) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant"] + [f"hits@{k}" for k in ks] + ["auc_mean", "auc_std"])
    for label, report in rows:
        writer.writerow(
            [label]
            + [f"{report.hits[k][0]:.4f}" for k in ks]
            + [f"{100 * report.auc[0]:.4f}", f"{100 * report.auc[1]:.4f}"]
        )
    return buf.getvalue()
