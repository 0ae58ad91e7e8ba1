"""Culturally grounded idiom graphs with inductive link-prediction retrieval.

The package builds a bipartite source/target idiom graph from cultural
feature similarity, trains a two-layer mean-aggregation encoder with an
MLP link decoder (all gradients hand-derived and finite-difference
checked), densifies cold targets by duplicating their neighbors, attaches
unseen idioms through a contrastively trained projection head, and serves
one-to-many retrieval (direct and pivot-composed) that feeds LLM
selection and translation prompts.
"""

from .corpus import DatasetManifest, IdiomRecord, load_manifest, parse_idiom_records, write_idiom_records
from .embeddings import EmbeddingMatrix, load_embeddings, save_embeddings
from .graph import BipartiteGraph, empty_graph, load_graph, save_graph
from .kgbuild import (
    SimilarityStats,
    ThresholdConfig,
    ThresholdRule,
    RuleKind,
    build_graph,
    build_graph_with_rules,
    calibrate_threshold,
    compute_moments,
    cosine_similarity,
)
from .nodedup import AugmentedGraph, ColdWarmPartition, augment_graph, classify_nodes
from .nn import (
    AdamState,
    ParamStore,
    finite_difference_check,
    init_params,
    load_checkpoint,
    optimizer_step,
    save_checkpoint,
)
from .gnn import (
    LinkPredictor,
    SageLayerParams,
    decode_link,
    encode_graph,
    load_model,
    mean_aggregate,
    sage_forward,
    save_model,
)
from .training import EdgeSplit, TrainConfig, bce_loss, sample_negatives, split_edges, train_link_predictor
from .contrastive import (
    HeadConfig,
    ProjectionHead,
    Triplet,
    attach_unseen,
    load_head,
    mine_triplets,
    save_head,
    train_head,
    triplet_loss,
)
from .evaluator import MetricReport, auc, hits_at_k, run_ablation, to_csv, to_markdown
from .llm import HttpProvider, LlmProvider, MockProvider, PromptTemplate, load_templates
from .pipeline import (
    BatchItem,
    CandidateSet,
    TranslationResult,
    pivot_retrieve,
    retrieve_topk,
    retrieve_unseen,
    select_target_idiom,
    translate_batch,
    translate_direct,
    translate_seen,
    translate_sentence,
)

__version__ = "0.1.0"
