"""LLM-backed selection and translation over the seen path, fully offline.

The mock provider is a pure function of the prompt, so the whole run is
deterministic and needs no network. Swapping in the HTTP provider only
requires IDIOMCE_LLM_URL / IDIOMCE_LLM_MODEL / IDIOMCE_LLM_KEY.
"""

import json

import numpy as np

from idiomce import (
    MockProvider,
    TrainConfig,
    retrieve_topk,
    select_target_idiom,
    train_link_predictor,
    translate_batch,
    translate_direct,
)
from idiomce.llm import default_templates
from idiomce.pipeline import BatchItem
from idiomce.synth import planted_communities

rng = np.random.default_rng(0)
graph, feats, _ = planted_communities(rng, n_communities=4, per_side=6, dim=32,
                                      p_edge=0.85, noise=0.2, langs=("en", "hi"))
model, _ = train_link_predictor(
    graph, feats, TrainConfig(epochs=40, runs=1, seed=0, hidden_dim=16)
)
texts = {i: f"surface text of {i}" for i in graph.source_ids + graph.target_ids}


def scripted(prompt: str) -> str:
    # Selection prompts ask for a candidate id; reply with rank 1. Everything
    # else is a translation prompt; echo a tagged completion.
    if "candidate" in prompt.lower():
        return "1"
    return "translation rendered by the mock provider"


provider = MockProvider(scripted)

# Retrieval + selection, step by step for one idiom.
source = graph.source_ids[0]
candidates = retrieve_topk(model, graph, feats, source, k=5)
print(f"top-5 candidates for {source}:")
for target_id, prob in candidates.candidates:
    print(f"  {target_id}  p={prob:.3f}")
outcome = select_target_idiom(provider, "An example sentence.", texts[source],
                              candidates, texts=texts)
print(f"LLM selection: {outcome.chosen_id} (fallback={outcome.fallback})")

# The rendered prompts carry every required slot.
template = default_templates()["translation"]
print("\ntranslation prompt preview:\n---")
print(template.render(
    source_sentence="An example sentence.",
    source_idiom=texts[source],
    selected_target_idiom=texts[outcome.chosen_id],
    target_language="hi",
)[:200] + "...")
print("---")

# Batch mode mirrors the CLI `translate` subcommand.
items = [
    BatchItem(f"Sentence {i} with an idiom.", "hi",
              idiom_id=graph.source_ids[i % graph.n_sources])
    for i in range(8)
]
results = translate_batch(provider, items, model, graph, feats, k=5, texts=texts)
print(f"\nbatch of {len(results)} translations, provenance of the first:")
print(json.dumps(results[0].to_json_obj(), indent=2)[:400], "...")

# The direct path skips retrieval entirely (the comparison baseline).
direct = translate_direct(provider, "An example sentence.", "hi")
print(f"\ndirect-path result: path={direct.path!r}, candidates={direct.candidates}")
print(f"total mock calls made: {len(provider.calls)} (zero network)")
