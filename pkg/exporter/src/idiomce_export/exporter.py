"""Embed an idiom corpus into an IDCE file.

Three modes decide what gets embedded per record:

  text            - the idiom surface form (node features)
  cultural_concat - one embedding of "Concepts: ...\\nValues: ...\\nContext: ..."
  cultural_mean   - the renormalized mean of the three per-element embeddings

Rows are emitted in input order, one 768-d L2-normalized float32 vector
per record, and a JSON sidecar (<output>.json) records the job metadata;
mean and concat outputs differ only in vector values and that sidecar,
never in file structure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends import HASHED_MODEL_NAME, OUTPUT_DIM, make_encoder
from .errors import EmptyField
from .formats import read_idiom_jsonl, write_idce

MODES = ("text", "cultural_concat", "cultural_mean")
CULTURAL_FIELDS = ("concepts", "values", "context")


@dataclass(frozen=True)
class ExportJob:
    input_path: str
    output_path: str
    mode: str = "cultural_concat"
    model: str = HASHED_MODEL_NAME
    batch_size: int = 32

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")


def cultural_concat_text(record: dict) -> str:
    return (
        f"Concepts: {record['concepts']}\n"
        f"Values: {record['values']}\n"
        f"Context: {record['context']}"
    )


def _require_cultural_fields(record: dict) -> None:
    for field in CULTURAL_FIELDS:
        if not record[field].strip():
            raise EmptyField(record["id"], field)


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    work = rows.astype(np.float64)
    norms = np.linalg.norm(work, axis=1, keepdims=True)
    return (work / np.maximum(norms, 1e-12)).astype(np.float32)


def embed_corpus(job: ExportJob) -> dict:
    """Run one export job; returns a summary dict (also written as sidecar)."""
    records = read_idiom_jsonl(job.input_path)
    encoder = make_encoder(job.model)
    ids = [rec["id"] for rec in records]

    if job.mode == "text":
        vectors = encoder.encode([rec["text"] for rec in records], job.batch_size)
    elif job.mode == "cultural_concat":
        for rec in records:
            _require_cultural_fields(rec)
        vectors = encoder.encode([cultural_concat_text(rec) for rec in records],
                                 job.batch_size)
    else:  # cultural_mean
        for rec in records:
            _require_cultural_fields(rec)
        parts = []
        for field in CULTURAL_FIELDS:
            parts.append(encoder.encode([rec[field] for rec in records], job.batch_size))
        vectors = np.mean(np.stack(parts, axis=0), axis=0)

    vectors = _normalize_rows(np.asarray(vectors))
    assert vectors.shape == (len(ids), OUTPUT_DIM)
    write_idce(ids, vectors, job.output_path)
    summary = {
        "mode": job.mode,
        "model": encoder.name,
        "count": len(ids),
        "dim": OUTPUT_DIM,
    }
    Path(str(job.output_path) + ".json").write_text(
        json.dumps(summary, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    return summary
