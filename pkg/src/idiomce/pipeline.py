"""End-to-end retrieval and translation.

Three retrieval paths produce a ranked CandidateSet: seen-node link
prediction, unseen-node attachment followed by link prediction, and
pivot-composed retrieval across two trained language pairs. Selection and
translation go through an LlmProvider with prompt templates; an
unparseable selection reply degrades to the top-ranked candidate with a
warning rather than failing the run.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contrastive import (
    DEFAULT_ATTACH_LIMIT,
    DEFAULT_TAU,
    DEFAULT_TOP_M,
    ProjectionHead,
    attach_unseen,
)
from .embeddings import EmbeddingMatrix
from .errors import PivotVocabularyMismatch, UnknownNode
from .gnn import LinkPredictor, encode_graph, graph_arrays, score_source_against_targets
from .llm import LlmProvider, PromptTemplate, default_templates

DEFAULT_TOP_K = 5
DEFAULT_PIVOT_K = 3

PATH_SEEN = "seen"
PATH_UNSEEN = "unseen"
PATH_PIVOT = "pivot"
PATH_DIRECT = "direct"

NONE_SENTINEL = "none"


@dataclass(frozen=True)
class CandidateSet:
    """Ranked target idioms with link probabilities."""

    source_idiom_id: str
    candidates: tuple[tuple[str, float], ...]
    k: int

    def __post_init__(self):
        ids = [c[0] for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate candidate ids")
        probs = [c[1] for c in self.candidates]
        if any(b > a for a, b in zip(probs, probs[1:])):
            raise ValueError("candidate probabilities must be non-increasing")

    def ids(self) -> list[str]:
        return [c[0] for c in self.candidates]


def _rank_targets(scores: np.ndarray, target_ids, k: int) -> tuple[tuple[str, float], ...]:
    order = sorted(range(len(target_ids)), key=lambda j: (-scores[j], target_ids[j]))
    return tuple((target_ids[j], float(scores[j])) for j in order[:k])


def retrieve_topk(
    model: LinkPredictor,
    graph,
    features,
    source: str,
    k: int = DEFAULT_TOP_K,
) -> CandidateSet:
    """Top-k real targets for a seen source node, by link probability.

    Ties break on target id; duplicate source nodes from augmentation are
    not valid queries and never appear in outputs (targets are real by
    construction).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n_real = getattr(graph, "n_real_sources", graph.n_sources)
    try:
        s = list(graph.source_ids[:n_real]).index(source)
    except ValueError:
        raise UnknownNode(source) from None
    ga = graph_arrays(graph, features)
    embeddings = encode_graph(model, ga, None)
    scores = score_source_against_targets(model, embeddings, ga, s)
    return CandidateSet(source, _rank_targets(scores, list(graph.target_ids), k), k)


def retrieve_unseen(
    unseen_id: str,
    unseen_vec,
    graph,
    features: EmbeddingMatrix,
    model: LinkPredictor,
    head: ProjectionHead,
    k: int = DEFAULT_TOP_K,
    rng: np.random.Generator | None = None,
    top_m: int = DEFAULT_TOP_M,
    tau: float = DEFAULT_TAU,
    attach_limit: int = DEFAULT_ATTACH_LIMIT,
) -> CandidateSet:
    """Attach an unseen idiom, then run seen-node retrieval on the new node."""
    new_graph, new_features, _, _ = attach_unseen(
        unseen_id, unseen_vec, graph, features, head,
        top_m=top_m, tau=tau, attach_limit=attach_limit, rng=rng,
    )
    return retrieve_topk(model, new_graph, new_features, unseen_id, k)


def pivot_retrieve(
    model_ab: LinkPredictor,
    graph_ab,
    features_ab,
    model_bc: LinkPredictor,
    graph_bc,
    features_bc,
    source: str,
    k_pivot: int = DEFAULT_PIVOT_K,
    k_final: int = DEFAULT_TOP_K,
) -> CandidateSet:
    """Compose two trained pairs through a shared pivot vocabulary.

    Each composed candidate scores as the product of the two stage link
    probabilities; a target reachable through several pivots keeps its
    best product. Pivot idioms missing from the second graph are skipped,
    but a graph pair sharing no pivot ids at all is a configuration error.
    """
    bc_sources = set(graph_bc.source_ids[: getattr(graph_bc, "n_real_sources", graph_bc.n_sources)])
    if not bc_sources & set(graph_ab.target_ids):
        raise PivotVocabularyMismatch("graphs share no pivot-side ids")
    first = retrieve_topk(model_ab, graph_ab, features_ab, source, k_pivot)
    best: dict[str, float] = {}
    for pivot_id, p1 in first.candidates:
        if pivot_id not in bc_sources:
            continue
        second = retrieve_topk(model_bc, graph_bc, features_bc, pivot_id, k_final)
        for target_id, p2 in second.candidates:
            score = p1 * p2
            if score > best.get(target_id, -1.0):
                best[target_id] = score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))[:k_final]
    return CandidateSet(source, tuple(ranked), k_final)


# -- LLM-backed selection and translation ------------------------------------


@dataclass(frozen=True)
class SelectionOutcome:
    chosen_id: str | None
    fallback: bool
    reply: str


def format_candidate_list(candidates: CandidateSet, texts: dict[str, str] | None = None) -> str:
    lines = []
    for rank, (target_id, _) in enumerate(candidates.candidates, start=1):
        if texts and target_id in texts:
            lines.append(f"{rank}. {target_id}: {texts[target_id]}")
        else:
            lines.append(f"{rank}. {target_id}")
    return "\n".join(lines)


def _parse_selection(reply: str, candidates: CandidateSet) -> SelectionOutcome:
    ids = candidates.ids()
    text = reply.strip()
    if text.lower() == NONE_SENTINEL:
        return SelectionOutcome(None, False, reply)
    if text in ids:
        return SelectionOutcome(text, False, reply)
    lowered = {i.lower(): i for i in ids}
    if text.lower() in lowered:
        return SelectionOutcome(lowered[text.lower()], False, reply)
    stripped = text.rstrip(".")
    if stripped.isdigit():
        rank = int(stripped)
        if 1 <= rank <= len(ids):
            return SelectionOutcome(ids[rank - 1], False, reply)
    for candidate_id in ids:  # rank order: first mention of a known id wins
        if candidate_id in text:
            return SelectionOutcome(candidate_id, False, reply)
    return SelectionOutcome(ids[0], True, reply)


def select_target_idiom(
    provider: LlmProvider,
    sentence: str,
    source_idiom: str,
    candidates: CandidateSet,
    templates: dict[str, PromptTemplate] | None = None,
    texts: dict[str, str] | None = None,
) -> SelectionOutcome:
    """Ask the provider to pick a candidate; fall back to top-1 if unparseable."""
    if not candidates.candidates:
        raise ValueError("candidate set is empty")
    templates = templates or default_templates()
    prompt = templates["selection"].render(
        source_sentence=sentence,
        source_idiom=source_idiom,
        candidate_list=format_candidate_list(candidates, texts),
    )
    reply = provider.complete(prompt)
    return _parse_selection(reply, candidates)


@dataclass(frozen=True)
class TranslationResult:
    """One translation with full provenance of how it was produced."""

    translation: str
    sentence: str
    source_idiom: str
    chosen_target_id: str | None
    candidates: tuple[tuple[str, float], ...]
    provider_id: str
    path: str  # seen | unseen | pivot | direct
    target_lang: str
    selection_fallback: bool = False

    def to_json_obj(self) -> dict:
        return {
            "translation": self.translation,
            "sentence": self.sentence,
            "source_idiom": self.source_idiom,
            "chosen_target_id": self.chosen_target_id,
            "candidates": [[i, p] for i, p in self.candidates],
            "provider_id": self.provider_id,
            "path": self.path,
            "target_lang": self.target_lang,
            "selection_fallback": self.selection_fallback,
        }


def translate_sentence(
    provider: LlmProvider,
    sentence: str,
    source_idiom: str,
    target_idiom_text: str,
    target_lang: str,
    templates: dict[str, PromptTemplate] | None = None,
    path: str = PATH_SEEN,
    chosen_target_id: str | None = None,
    candidates: CandidateSet | None = None,
    selection_fallback: bool = False,
) -> TranslationResult:
    """Render the translation prompt and wrap the completion with provenance."""
    templates = templates or default_templates()
    prompt = templates["translation"].render(
        source_sentence=sentence,
        source_idiom=source_idiom,
        selected_target_idiom=target_idiom_text,
        target_language=target_lang,
    )
    completion = provider.complete(prompt)
    return TranslationResult(
        translation=completion,
        sentence=sentence,
        source_idiom=source_idiom,
        chosen_target_id=chosen_target_id,
        candidates=candidates.candidates if candidates else (),
        provider_id=provider.provider_id,
        path=path,
        target_lang=target_lang,
        selection_fallback=selection_fallback,
    )


def translate_direct(
    provider: LlmProvider,
    sentence: str,
    target_lang: str,
    templates: dict[str, PromptTemplate] | None = None,
) -> TranslationResult:
    """Plain prompting with no retrieval: the baseline path."""
    templates = templates or default_templates()
    prompt = templates["direct"].render(
        source_sentence=sentence, target_language=target_lang
    )
    completion = provider.complete(prompt)
    return TranslationResult(
        translation=completion,
        sentence=sentence,
        source_idiom="",
        chosen_target_id=None,
        candidates=(),
        provider_id=provider.provider_id,
        path=PATH_DIRECT,
        target_lang=target_lang,
    )


def translate_seen(
    provider: LlmProvider,
    sentence: str,
    source_id: str,
    model: LinkPredictor,
    graph,
    features,
    target_lang: str,
    k: int = DEFAULT_TOP_K,
    templates: dict[str, PromptTemplate] | None = None,
    texts: dict[str, str] | None = None,
) -> TranslationResult:
    """Full seen path: retrieve, select via LLM, translate via LLM."""
    candidates = retrieve_topk(model, graph, features, source_id, k)
    source_text = texts.get(source_id, source_id) if texts else source_id
    selection = select_target_idiom(
        provider, sentence, source_text, candidates, templates, texts
    )
    chosen = selection.chosen_id
    if chosen is None:
        # LLM rejected every candidate: fall back to direct prompting but
        # keep the candidate provenance.
        result = translate_direct(provider, sentence, target_lang, templates)
        return TranslationResult(
            translation=result.translation,
            sentence=sentence,
            source_idiom=source_text,
            chosen_target_id=None,
            candidates=candidates.candidates,
            provider_id=provider.provider_id,
            path=PATH_SEEN,
            target_lang=target_lang,
            selection_fallback=selection.fallback,
        )
    chosen_text = texts.get(chosen, chosen) if texts else chosen
    return translate_sentence(
        provider,
        sentence,
        source_text,
        chosen_text,
        target_lang,
        templates,
        path=PATH_SEEN,
        chosen_target_id=chosen,
        candidates=candidates,
        selection_fallback=selection.fallback,
    )


@dataclass(frozen=True)
class BatchItem:
    sentence: str
    target_lang: str
    idiom_id: str | None = None
    idiom_text: str | None = None


def read_batch(path: str | Path) -> list[BatchItem]:
    """Read the batch JSONL: {sentence, idiom_id or idiom_text, target_lang}."""
    items = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        items.append(
            BatchItem(
                sentence=obj["sentence"],
                target_lang=obj["target_lang"],
                idiom_id=obj.get("idiom_id"),
                idiom_text=obj.get("idiom_text"),
            )
        )
    return items


def resolve_item_source(item: BatchItem, graph, texts: dict[str, str] | None) -> str:
    """Map a batch item to a seen source id, by id or by exact text match."""
    n_real = getattr(graph, "n_real_sources", graph.n_sources)
    real_sources = list(graph.source_ids[:n_real])
    if item.idiom_id is not None:
        if item.idiom_id not in real_sources:
            raise UnknownNode(item.idiom_id)
        return item.idiom_id
    if item.idiom_text is not None and texts:
        for sid in real_sources:
            if texts.get(sid) == item.idiom_text:
                return sid
    raise UnknownNode(item.idiom_text or "<missing idiom>")


def translate_batch(
    provider: LlmProvider,
    items: list[BatchItem],
    model: LinkPredictor,
    graph,
    features,
    k: int = DEFAULT_TOP_K,
    templates: dict[str, PromptTemplate] | None = None,
    texts: dict[str, str] | None = None,
    jobs: int = 1,
) -> list[TranslationResult]:
    """Translate a batch over the seen path, results in input order.

    jobs > 1 issues provider calls concurrently (bounded); use a provider
    whose replies are a pure function of the prompt to stay deterministic.
    """
    def one(item: BatchItem) -> TranslationResult:
        source_id = resolve_item_source(item, graph, texts)
        return translate_seen(
            provider, item.sentence, source_id, model, graph, features,
            item.target_lang, k, templates, texts,
        )

    if jobs <= 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, items))


def write_batch_results(results: list[TranslationResult], path: str | Path) -> None:
    lines = [json.dumps(r.to_json_obj(), ensure_ascii=False, sort_keys=True) for r in results]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
