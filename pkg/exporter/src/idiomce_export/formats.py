"""The wire formats the exporter speaks: idiom JSONL in, IDCE binary out.

These are written against the published format contracts, not against the
consumer's code, so the exporter stays an independent package. IDCE layout
(little-endian): magic "IDCE", u32 version=1, u32 count, u32 dim, then per
row a u16 id byte-length, the UTF-8 id, and dim float32 values.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import MalformedCorpus

RECORD_KEYS = ("id", "lang", "text", "concepts", "values", "context")
IDCE_MAGIC = b"IDCE"
IDCE_VERSION = 1


def read_idiom_jsonl(path: str | Path) -> list[dict]:
    """Parse the six-key idiom corpus, preserving order."""
    records = []
    seen = set()
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedCorpus(f"line {line_no}: invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise MalformedCorpus(f"line {line_no}: not an object")
        for key in RECORD_KEYS:
            if key not in obj:
                raise MalformedCorpus(f"line {line_no}: missing key {key!r}")
        if obj["id"] in seen:
            raise MalformedCorpus(f"line {line_no}: duplicate id {obj['id']!r}")
        seen.add(obj["id"])
        records.append({key: obj[key] for key in RECORD_KEYS})
    return records


def write_idiom_jsonl(records: list[dict], path: str | Path) -> None:
    lines = [
        json.dumps({key: rec[key] for key in RECORD_KEYS}, ensure_ascii=False)
        for rec in records
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def write_idce(ids: list[str], vectors: np.ndarray, path: str | Path) -> None:
    """Write rows float32 little-endian in the IDCE container."""
    vectors = np.asarray(vectors, dtype=np.float32)
    assert vectors.ndim == 2 and vectors.shape[0] == len(ids)
    parts = [IDCE_MAGIC, struct.pack("<III", IDCE_VERSION, len(ids), vectors.shape[1])]
    for i, id_ in enumerate(ids):
        raw = id_.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(vectors[i].astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_idce(path: str | Path) -> tuple[list[str], np.ndarray]:
    """Self-check reader (the consumer has its own loader)."""
    data = Path(path).read_bytes()
    if data[:4] != IDCE_MAGIC:
        raise MalformedCorpus(f"{path}: bad magic")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != IDCE_VERSION:
        raise MalformedCorpus(f"{path}: unsupported version {version}")
    offset = 16
    ids = []
    rows = np.empty((count, dim), dtype=np.float32)
    for i in range(count):
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        ids.append(data[offset:offset + id_len].decode("utf-8"))
        offset += id_len
        rows[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += 4 * dim
    return ids, rows
