"""Unseen-idiom attachment and pivot-composed retrieval.

Part 1 trains a projection head on graph-mined triplets, then attaches a
brand-new idiom by head-space similarity and retrieves its targets with
the already-trained link predictor (no retraining - the inductive
contract). Part 2 chains two trained language pairs through a shared
pivot vocabulary.
"""

import numpy as np

from idiomce import (
    HeadConfig,
    TrainConfig,
    mine_triplets,
    pivot_retrieve,
    retrieve_topk,
    retrieve_unseen,
    train_head,
    train_link_predictor,
)
from idiomce.synth import features_as_matrix, planted_bijection, planted_communities

# --- part 1: unseen idiom ----------------------------------------------------

rng = np.random.default_rng(0)
graph, feats, comm = planted_communities(rng, n_communities=6, per_side=8, dim=64,
                                         p_edge=0.8, noise=0.2)
fm = features_as_matrix(graph, feats)
model, _ = train_link_predictor(
    graph, feats, TrainConfig(epochs=50, runs=1, seed=0, hidden_dim=32)
)

triplets = mine_triplets(graph, per_anchor=3, rng=np.random.default_rng(1))
print(f"mined {len(triplets)} triplets "
      f"(positives share a target, negatives live in another component)")
head = train_head(triplets, fm.rows_for(graph.source_ids), HeadConfig(epochs=10, seed=0))

# The unseen idiom imitates a seen source of community 2 with extra noise.
template = graph.source_ids[2 * 8 + 1]
unseen_vec = fm.row(template) + 0.05 * rng.normal(size=64).astype(np.float32)
unseen_vec /= np.linalg.norm(unseen_vec)
candidates = retrieve_unseen(
    "en:brand_new_idiom", unseen_vec, graph, fm, model, head,
    k=5, rng=np.random.default_rng(7),
)
true_targets = {graph.target_ids[t]
                for t in graph.source_neighbors(graph.source_ids.index(template))}
print(f"unseen idiom resembling {template}:")
for target_id, prob in candidates.candidates:
    marker = " (true target of the template)" if target_id in true_targets else ""
    print(f"  {target_id}  p={prob:.3f}{marker}")

# --- part 2: pivot composition -------------------------------------------------

rng = np.random.default_rng(2)
g_ab, f_ab, latents = planted_bijection(rng, 40, langs=("hi", "en"))
g_bc, f_bc, _ = planted_bijection(rng, 40, langs=("en", "ta"), latents=latents)
cfg = TrainConfig(epochs=200, runs=1, lr=1e-2, seed=0, use_node_dup=False,
                  fractions=(1.0, 0.0, 0.0), hidden_dim=16)
m_ab, _ = train_link_predictor(g_ab, f_ab, cfg)
m_bc, _ = train_link_predictor(g_bc, f_bc, cfg)

recovered = 0
for i in range(40):
    cs = pivot_retrieve(m_ab, g_ab, f_ab, m_bc, g_bc, f_bc, f"hi:{i}",
                        k_pivot=3, k_final=5)
    if cs.candidates and cs.candidates[0][0] == f"ta:{i}":
        recovered += 1
print(f"\npivot hi->en->ta: planted mate recovered at top-1 for {recovered}/40 sources")

example = pivot_retrieve(m_ab, g_ab, f_ab, m_bc, g_bc, f_bc, "hi:0", 3, 5)
stage1 = retrieve_topk(m_ab, g_ab, f_ab, "hi:0", 3)
print(f"hi:0 -> pivots {[(i, round(p, 3)) for i, p in stage1.candidates]}")
print(f"hi:0 -> composed {[(i, round(p, 3)) for i, p in example.candidates[:3]]} "
      "(scores are stage products)")
