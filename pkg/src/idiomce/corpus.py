"""Idiom corpus I/O: JSONL records and dataset manifests.

The corpus format is one JSON object per line with exactly the keys
``id, lang, text, concepts, values, context``. Ids are opaque strings
(e.g. ``"en:kick_the_bucket"``); dense indices are assigned at load time
and never persisted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateId, MalformedLine, ManifestError, MissingField

RECORD_KEYS = ("id", "lang", "text", "concepts", "values", "context")


@dataclass(frozen=True)
class IdiomRecord:
    """One idiom with its language tag, surface text, and cultural-element texts.

    The three cultural fields may be empty when the record is only used for
    node features; ``id``, ``lang`` and ``text`` are always required.
    """

    id: str
    lang: str
    text: str
    concepts: str = ""
    values: str = ""
    context: str = ""

    def validate(self) -> None:
        for name in ("id", "lang", "text"):
            if not getattr(self, name):
                raise MissingField(name)


def parse_idiom_records(path: str | Path) -> list[IdiomRecord]:
    """Parse a JSONL idiom corpus, preserving file order.

    Every input line is either a record or a reported error carrying its
    line number. A trailing newline at end of file is not an extra line.
    """
    raw = Path(path).read_text(encoding="utf-8")
    records: list[IdiomRecord] = []
    seen: set[str] = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            raise MalformedLine(line_no, "blank line")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON ({exc.msg})") from exc
        if not isinstance(obj, dict):
            raise MalformedLine(line_no)
        for key in RECORD_KEYS:
            if key not in obj:
                raise MissingField(key, line_no)
        values = {}
        for key in RECORD_KEYS:
            v = obj[key]
            if not isinstance(v, str):
                raise MalformedLine(line_no, f"field {key!r} is not a string")
            values[key] = v
        rec = IdiomRecord(**values)
        if not rec.id or not rec.lang or not rec.text:
            raise MissingField(
                "id" if not rec.id else ("lang" if not rec.lang else "text"), line_no
            )
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)
        records.append(rec)
    return records


def write_idiom_records(records: list[IdiomRecord], path: str | Path) -> None:
    """Write records as JSONL with the six fixed keys, one object per line."""
    lines = []
    for rec in records:
        obj = {key: getattr(rec, key) for key in RECORD_KEYS}
        lines.append(json.dumps(obj, ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


@dataclass(frozen=True)
class DatasetManifest:
    """Pointers to the files making up one language-pair dataset."""

    source_lang: str
    target_lang: str
    idiom_file: str
    text_embedding_file: str
    cultural_embedding_file: str
    graph_file: str | None = None


def load_manifest(path: str | Path) -> DatasetManifest:
    base = Path(path).parent
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    required = ("source_lang", "target_lang", "idiom_file",
                "text_embedding_file", "cultural_embedding_file")
    for key in required:
        if key not in obj:
            raise ManifestError(f"manifest missing key {key!r}")

    def resolve(p):
        return str((base / p)) if p is not None else None

    return DatasetManifest(
        source_lang=obj["source_lang"],
        target_lang=obj["target_lang"],
        idiom_file=resolve(obj["idiom_file"]),
        text_embedding_file=resolve(obj["text_embedding_file"]),
        cultural_embedding_file=resolve(obj["cultural_embedding_file"]),
        graph_file=resolve(obj.get("graph_file")),
    )


def validate_manifest(manifest: DatasetManifest) -> list[IdiomRecord]:
    """Check that referenced files exist and agree on id sets.

    Returns the parsed records on success so callers do not re-read the file.
    """
    from .embeddings import load_embeddings  # local import: avoid cycle at module load

    for attr in ("idiom_file", "text_embedding_file", "cultural_embedding_file"):
        p = getattr(manifest, attr)
        if not Path(p).exists():
            raise ManifestError(f"{attr} does not exist: {p}")
    records = parse_idiom_records(manifest.idiom_file)
    ids = {r.id for r in records}
    for attr in ("text_embedding_file", "cultural_embedding_file"):
        emb = load_embeddings(getattr(manifest, attr))
        if set(emb.ids) != ids:
            missing = sorted(ids - set(emb.ids))[:3]
            extra = sorted(set(emb.ids) - ids)[:3]
            raise ManifestError(
                f"{attr} id set disagrees with idiom file "
                f"(missing={missing}, extra={extra})"
            )
    return records
