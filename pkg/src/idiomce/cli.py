"""Operator command line binding every pipeline stage to the file formats.

One binary, ten subcommands; stages communicate only through the
documented files (idiom JSONL, IDCE embeddings, graph JSON, IDCM
checkpoints), so any stage can be re-run independently. Every command
logs its effective configuration and seed, and identical inputs plus the
same seed reproduce outputs byte for byte (with the mock provider for
translate).

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .contrastive import (
    DEFAULT_ATTACH_LIMIT,
    DEFAULT_MARGIN,
    DEFAULT_TAU,
    DEFAULT_TOP_M,
    HeadConfig,
    attach_unseen,
    load_head,
    mine_triplets,
    save_head,
    train_head,
)
from .corpus import load_manifest, parse_idiom_records, validate_manifest
from .embeddings import load_embeddings, save_embeddings
from .errors import IdiomCEError
from .evaluator import evaluate_on_split, run_ablation, to_csv, to_markdown, MetricReport
from .gnn import load_model, save_model
from .graph import load_graph, save_graph
from .kgbuild import ThresholdConfig, build_graph_with_rules
from .llm import HttpProvider, MockProvider, load_templates
from .nodedup import DEFAULT_COPIES, DEFAULT_DELTA, augment_graph
from .pipeline import (
    DEFAULT_PIVOT_K,
    DEFAULT_TOP_K,
    pivot_retrieve,
    read_batch,
    retrieve_topk,
    translate_batch,
    write_batch_results,
)
from .training import TrainConfig, train_link_predictor

log = logging.getLogger("idiomce")


def _fractions(text: str) -> tuple[float, float, float]:
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("fractions must be three comma-separated numbers")
    return tuple(parts)  # type: ignore[return-value]


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            try:
                import tomli as tomllib  # type: ignore[no-redef]
            except ImportError as exc:
                raise IdiomCEError(
                    "TOML config files need Python >= 3.11 (tomllib) or the "
                    "tomli package; use JSON instead"
                ) from exc
        return tomllib.loads(text)
    return json.loads(text)


def _apply_config_file(args: argparse.Namespace, argv: list[str]) -> None:
    """Fill unset options from the config file; explicit flags win.

    Keys mirror flag names (dashes or underscores). A key is applied only
    when its flag is absent from argv.
    """
    if not getattr(args, "config", None):
        return
    config = _load_config_file(args.config)
    if not isinstance(config, dict):
        raise IdiomCEError("config file must hold one object of flag values")
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=", 1)[0].replace("-", "_"))
    for key, value in config.items():
        dest = key.replace("-", "_")
        if dest in explicit or not hasattr(args, dest):
            continue
        if isinstance(value, list):
            value = tuple(value)
        setattr(args, dest, value)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _log_config(args: argparse.Namespace) -> None:
    shown = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    log.info("effective config: %s", json.dumps(shown, default=str, sort_keys=True))


def _load_features(path: str):
    return load_embeddings(path)


def _write_json(obj, path: str | None):
    text = json.dumps(obj, ensure_ascii=False, sort_keys=True, indent=1) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- subcommand implementations ------------------------------------------------


def cmd_build_graph(args) -> int:
    if args.manifest:
        manifest = load_manifest(args.manifest)
        records = validate_manifest(manifest)
        features = _load_features(manifest.cultural_embedding_file)
        source_lang, target_lang = manifest.source_lang, manifest.target_lang
    else:
        records = parse_idiom_records(args.idioms)
        features = _load_features(args.cultural_embeddings)
        source_lang, target_lang = args.source_lang, args.target_lang
    source = [r for r in records if r.lang == source_lang]
    target = [r for r in records if r.lang == target_lang]
    config = ThresholdConfig(
        scope=args.scope.replace("-", "_"),
        z=args.z,
        iqr_k=args.iqr_k,
        fixed_cutoff=args.fixed_cutoff,
    )
    graph, rules = build_graph_with_rules(source, target, features, config)
    kinds = {}
    for rule in rules:
        name = rule.kind.value if rule else "degenerate"
        kinds[name] = kinds.get(name, 0) + 1
    log.info(
        "built graph: %d sources, %d targets, %d edges (rules: %s)",
        graph.n_sources, graph.n_targets, len(graph.edges), kinds,
    )
    save_graph(graph, args.out)
    return 0


def cmd_augment(args) -> int:
    graph = load_graph(args.graph)
    aug = augment_graph(graph, args.delta, args.copies)
    log.info(
        "augmented: +%d duplicate nodes, +%d edges", len(aug.dup_ids), len(aug.added_edges)
    )
    save_graph(aug, args.out)
    return 0


def cmd_train_gnn(args) -> int:
    graph = load_graph(args.graph)
    features = _load_features(args.features)
    config = TrainConfig(
        epochs=args.epochs,
        runs=args.runs,
        lr=args.lr,
        seed=args.seed,
        hidden_dim=args.hidden,
        fractions=args.fractions,
        use_node_dup=not args.no_nodedup,
        delta=args.delta,
        copies=args.copies,
        hits_ks=args.k,
    )
    model, report = train_link_predictor(graph, features, config, jobs=args.jobs)
    save_model(model, args.out)
    if args.report:
        _write_json(report, args.report)
    rows = [(
        "nodedup" if config.use_node_dup else "base",
        MetricReport(hits=report["hits"], auc=report["auc"], runs=config.runs,
                     config_hash=report["config_hash"]),
    )]
    sys.stdout.write(to_markdown(rows, config.hits_ks))
    return 0


def cmd_train_contrastive(args) -> int:
    graph = load_graph(args.graph)
    features = _load_features(args.features)
    triplets = mine_triplets(graph, args.per_anchor, np.random.default_rng(args.seed))
    log.info("mined %d triplets", len(triplets))
    source_vecs = features.rows_for(graph.source_ids)
    config = HeadConfig(
        out_dim=args.out_dim,
        margin=args.margin,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    head = train_head(triplets, source_vecs, config)
    save_head(head, args.out)
    return 0


def cmd_attach(args) -> int:
    graph = load_graph(args.graph)
    features = _load_features(args.features)
    head = load_head(args.head)
    unseen = _load_features(args.unseen_embeddings)
    if args.unseen_id not in unseen:
        raise IdiomCEError(f"{args.unseen_embeddings} has no row for {args.unseen_id!r}")
    new_graph, new_features, index, attached = attach_unseen(
        args.unseen_id, unseen.row(args.unseen_id), graph, features, head,
        top_m=args.top_m, tau=args.tau, attach_limit=args.limit,
        rng=np.random.default_rng(args.seed),
    )
    log.info(
        "attached %s as node %d to targets %s",
        args.unseen_id, index, [new_graph.target_ids[t] for t in attached],
    )
    save_graph(new_graph, args.out)
    if args.features_out:
        save_embeddings(new_features, args.features_out)
    return 0


def _print_candidates(cs, as_json: bool):
    if as_json:
        _write_json(
            {"source": cs.source_idiom_id, "k": cs.k,
             "candidates": [[i, p] for i, p in cs.candidates]},
            None,
        )
    else:
        for target_id, prob in cs.candidates:
            sys.stdout.write(f"{target_id}\t{prob:.6f}\n")


def cmd_predict(args) -> int:
    graph = load_graph(args.graph)
    model = load_model(args.model)
    features = _load_features(args.features)
    cs = retrieve_topk(model, graph, features, args.source, args.k)
    _print_candidates(cs, args.json)
    return 0


def cmd_pivot_predict(args) -> int:
    graph_ab = load_graph(args.graph_ab)
    graph_bc = load_graph(args.graph_bc)
    cs = pivot_retrieve(
        load_model(args.model_ab), graph_ab, _load_features(args.features_ab),
        load_model(args.model_bc), graph_bc, _load_features(args.features_bc),
        args.source, args.k_pivot, args.k_final,
    )
    _print_candidates(cs, args.json)
    return 0


def _make_provider(args):
    if args.provider == "http":
        return HttpProvider()
    if args.mock_replies:
        replies = json.loads(Path(args.mock_replies).read_text(encoding="utf-8"))
        if not isinstance(replies, list):
            raise IdiomCEError("--mock-replies must contain a JSON list of strings")
        return MockProvider(replies)

    def canned(prompt: str) -> str:
        # Deterministic pure function: always pick the first candidate in a
        # selection prompt, return a tagged echo otherwise.
        return "1" if "candidate" in prompt.lower() else "[mock translation]"

    return MockProvider(canned)


def cmd_translate(args) -> int:
    graph = load_graph(args.graph)
    model = load_model(args.model)
    features = _load_features(args.features)
    texts = None
    if args.records:
        texts = {r.id: r.text for r in parse_idiom_records(args.records)}
    provider = _make_provider(args)
    templates = load_templates(args.templates)
    items = read_batch(args.batch)
    results = translate_batch(
        provider, items, model, graph, features,
        k=args.k, templates=templates, texts=texts, jobs=args.jobs,
    )
    write_batch_results(results, args.out)
    log.info("translated %d items via %s", len(results), provider.provider_id)
    return 0


def cmd_eval(args) -> int:
    graph = load_graph(args.graph)
    model = load_model(args.model)
    features = _load_features(args.features)
    result = evaluate_on_split(
        model, graph, features, args.fractions, args.split_seed, args.k
    )
    report = MetricReport(
        hits={k: (v, 0.0) for k, v in result["hits"].items()},
        auc=(result["auc"], 0.0),
        runs=1,
    )
    render = to_csv if args.format == "csv" else to_markdown
    sys.stdout.write(render([("eval", report)], args.k))
    log.info("evaluated on %d held-out edges", result["n_test"])
    return 0


def cmd_ablate(args) -> int:
    graph = load_graph(args.graph)
    features = _load_features(args.features)
    config = TrainConfig(
        epochs=args.epochs,
        runs=args.runs,
        lr=args.lr,
        seed=args.seed,
        hidden_dim=args.hidden,
        fractions=args.fractions,
        delta=args.delta,
        copies=args.copies,
        hits_ks=args.k,
    )
    result = run_ablation(graph, features, config)
    render = to_csv if args.format == "csv" else to_markdown
    sys.stdout.write(render(
        [("with-nodedup", result.with_dup), ("without-nodedup", result.without_dup)],
        args.k,
    ))
    for k in args.k:
        log.info(
            "hits@%d paired deltas %s, one-sided sign test p=%.4f",
            k, [round(d, 2) for d in result.paired_delta_hits[k]], result.sign_test_p[k],
        )
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idiomce",
        description="Idiom knowledge graphs, link-prediction retrieval, and "
                    "LLM-backed idiomatic translation.",
    )
    parser.add_argument("--version", action="version", version=f"idiomce {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--config",
                        help="JSON or TOML file of flag values (explicit flags win); "
                             "place it before the subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="build the bipartite idiom graph from cultural features")
    p.add_argument("--manifest", help="dataset manifest JSON (overrides the file flags)")
    p.add_argument("--idioms", help="idiom corpus JSONL holding both languages")
    p.add_argument("--cultural-embeddings", help="IDCE file of cultural-feature vectors")
    p.add_argument("--source-lang", help="language code of the source side")
    p.add_argument("--target-lang", help="language code of the target side")
    p.add_argument("--scope", choices=["per-source", "global"], default="per-source",
                   help="calibrate one threshold per source row or one global rule (default: per-source)")
    p.add_argument("--z", type=float, default=2.5, help="z-score multiplier (default: 2.5)")
    p.add_argument("--iqr-k", type=float, default=1.5, help="IQR fence multiplier (default: 1.5)")
    p.add_argument("--fixed-cutoff", type=float, help="skip calibration and use this similarity cutoff")
    p.add_argument("--out", required=True, help="output graph JSON")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("augment", help="cold-start duplication of under-connected targets")
    p.add_argument("--graph", required=True)
    p.add_argument("--delta", type=int, default=DEFAULT_DELTA,
                   help="cold/warm degree threshold (default: 3)")
    p.add_argument("--copies", type=int, default=DEFAULT_COPIES,
                   help="duplicates per neighbor of a cold target (default: 2)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train-gnn", help="train the link predictor")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True, help="IDCE file of node (text) embeddings")
    p.add_argument("--epochs", type=int, default=50, help="full-batch epochs (default: 50)")
    p.add_argument("--runs", type=int, default=5, help="independent seeded runs (default: 5)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default: 0.001)")
    p.add_argument("--seed", type=int, default=0, help="base seed; run r uses seed+r (default: 0)")
    p.add_argument("--hidden", type=int, default=64, help="hidden dimension (default: 64)")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1),
                   help="train,valid,test split fractions (default: 0.8,0.1,0.1)")
    p.add_argument("--no-nodedup", action="store_true",
                   help="disable cold-start duplication of the train graph")
    p.add_argument("--delta", type=int, default=DEFAULT_DELTA,
                   help="cold/warm degree threshold (default: 3)")
    p.add_argument("--copies", type=int, default=DEFAULT_COPIES,
                   help="duplicates per neighbor of a cold target (default: 2)")
    p.add_argument("--k", type=_int_list, default=(5, 10, 20, 50),
                   help="hits@k cutoffs (default: 5,10,20,50)")
    p.add_argument("--jobs", type=int, default=1, help="parallel training runs (default: 1)")
    p.add_argument("--report", help="optional JSON file for per-run metrics")
    p.add_argument("--out", required=True, help="output checkpoint (.idcm)")
    p.set_defaults(func=cmd_train_gnn)

    p = sub.add_parser("train-contrastive", help="train the unseen-idiom projection head")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--per-anchor", type=int, default=3,
                   help="triplets mined per anchor (default: 3)")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN,
                   help="triplet margin alpha (default: 1)")
    p.add_argument("--out-dim", type=int, default=256, help="head output dim (default: 256)")
    p.add_argument("--epochs", type=int, default=30, help="epochs (default: 30)")
    p.add_argument("--batch-size", type=int, default=64, help="minibatch size (default: 64)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default: 0.001)")
    p.add_argument("--seed", type=int, default=0, help="seed (default: 0)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_contrastive)

    p = sub.add_parser("attach", help="wire an unseen idiom into a trained graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--head", required=True, help="projection-head checkpoint")
    p.add_argument("--unseen-id", required=True)
    p.add_argument("--unseen-embeddings", required=True,
                   help="IDCE file holding the unseen idiom's embedding row")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU,
                   help="minimum head-space similarity to any seen source (default: 0.75)")
    p.add_argument("--top-m", type=int, default=DEFAULT_TOP_M,
                   help="similar seen sources to pool targets from (default: 5)")
    p.add_argument("--limit", type=int, default=DEFAULT_ATTACH_LIMIT,
                   help="targets attached to the new node (default: 5)")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default: 0)")
    p.add_argument("--out", required=True, help="output graph JSON including the new node")
    p.add_argument("--features-out", help="optional IDCE file extended with the unseen row")
    p.set_defaults(func=cmd_attach)

    p = sub.add_parser("predict", help="top-k target idioms for a seen source idiom")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--source", required=True, help="source idiom id")
    p.add_argument("--k", type=int, default=DEFAULT_TOP_K, help="candidates (default: 5)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of TSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("pivot-predict", help="compose two trained pairs through a pivot language")
    p.add_argument("--graph-ab", required=True)
    p.add_argument("--model-ab", required=True)
    p.add_argument("--features-ab", required=True)
    p.add_argument("--graph-bc", required=True)
    p.add_argument("--model-bc", required=True)
    p.add_argument("--features-bc", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--k-pivot", type=int, default=DEFAULT_PIVOT_K,
                   help="pivot idioms taken from the first pair (default: 3)")
    p.add_argument("--k-final", type=int, default=DEFAULT_TOP_K,
                   help="final candidates (default: 5)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pivot_predict)

    p = sub.add_parser("translate", help="batch translation through retrieval + LLM prompts")
    p.add_argument("--batch", required=True, help="input JSONL {sentence, idiom_id|idiom_text, target_lang}")
    p.add_argument("--out", required=True, help="output JSONL of translation results")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--records", help="idiom JSONL used to render surface texts in prompts")
    p.add_argument("--k", type=int, default=DEFAULT_TOP_K, help="candidates (default: 5)")
    p.add_argument("--provider", choices=["mock", "http"], default="mock",
                   help="mock is deterministic and needs no network (default: mock)")
    p.add_argument("--mock-replies", help="JSON list of scripted mock replies")
    p.add_argument("--templates", help="directory of prompt template overrides")
    p.add_argument("--jobs", type=int, default=1, help="concurrent LLM requests (default: 1)")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", help="hits@k and AUC of a trained model on a re-derived split")
    p.add_argument("--graph", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--split-seed", type=int, default=0,
                   help="seed used to re-derive the split (default: 0)")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1),
                   help="train,valid,test fractions (default: 0.8,0.1,0.1)")
    p.add_argument("--k", type=_int_list, default=(5, 10, 20, 50),
                   help="hits@k cutoffs (default: 5,10,20,50)")
    p.add_argument("--format", choices=["md", "csv"], default="md")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="paired with/without-duplication comparison")
    p.add_argument("--graph", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--epochs", type=int, default=50, help="epochs (default: 50)")
    p.add_argument("--runs", type=int, default=5, help="paired runs (default: 5)")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate (default: 0.001)")
    p.add_argument("--seed", type=int, default=0, help="base seed (default: 0)")
    p.add_argument("--hidden", type=int, default=64, help="hidden dimension (default: 64)")
    p.add_argument("--fractions", type=_fractions, default=(0.8, 0.1, 0.1),
                   help="split fractions (default: 0.8,0.1,0.1)")
    p.add_argument("--delta", type=int, default=DEFAULT_DELTA,
                   help="cold/warm threshold (default: 3)")
    p.add_argument("--copies", type=int, default=DEFAULT_COPIES,
                   help="duplicates per neighbor (default: 2)")
    p.add_argument("--k", type=_int_list, default=(5, 10, 20, 50))
    p.add_argument("--format", choices=["md", "csv"], default="md")
    p.set_defaults(func=cmd_ablate)

    return parser


def dispatch(argv: list[str]) -> int:
    """Parse and run one command; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        _apply_config_file(args, argv)
    except IdiomCEError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1
    if args.command == "build-graph" and not args.manifest and not (
        args.idioms and args.cultural_embeddings and args.source_lang and args.target_lang
    ):
        sys.stderr.write(
            "usage error: build-graph needs --manifest, or --idioms with "
            "--cultural-embeddings, --source-lang and --target-lang\n"
        )
        return 2
    _log_config(args)
    try:
        return args.func(args)
    except IdiomCEError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
