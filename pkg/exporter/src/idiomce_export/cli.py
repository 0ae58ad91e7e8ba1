"""idiomce-export command line.

Default action embeds a corpus into an IDCE file:

    idiomce-export --input idioms.jsonl --output emb.idce --mode cultural_concat --model hashed

With --generate-elements the tool instead calls the configured LLM
endpoint to fill the three cultural-element fields, writing a JSONL file.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ExporterError
from .exporter import MODES, ExportJob, embed_corpus
from .generate import generate_cultural_elements

log = logging.getLogger("idiomce-export")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="idiomce-export",
        description="Export IDCE embedding files or generate cultural-element texts.",
    )
    parser.add_argument("--input", required=True, help="idiom corpus JSONL")
    parser.add_argument("--output", required=True, help="output file (.idce, or .jsonl with --generate-elements)")
    parser.add_argument("--mode", choices=MODES, default="cultural_concat",
                        help="which record fields to embed (default: cultural_concat)")
    parser.add_argument("--model", default="hashed",
                        help="sentence-embedding model name, or 'hashed' for the "
                             "offline deterministic encoder (default: hashed)")
    parser.add_argument("--batch-size", type=int, default=32,
                        help="encoder batch size (default: 32)")
    parser.add_argument("--generate-elements", action="store_true",
                        help="call the LLM endpoint (IDIOMCE_LLM_URL/.._MODEL/.._KEY) "
                             "to fill concepts/values/context instead of embedding")
    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        if args.generate_elements:
            report = generate_cultural_elements(args.input, args.output)
            log.info("filled %d idioms, %d failures", report.filled, len(report.failures))
            for failure in report.failures:
                log.warning("skipped %s: %s", failure.idiom_id, failure.reason)
        else:
            job = ExportJob(args.input, args.output, args.mode, args.model, args.batch_size)
            summary = embed_corpus(job)
            log.info("wrote %(count)d rows of dim %(dim)d (%(mode)s, %(model)s)", summary)
        return 0
    except ExporterError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
