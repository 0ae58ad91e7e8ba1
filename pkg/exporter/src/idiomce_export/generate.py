"""Fill the three cultural-element fields of a corpus via an LLM endpoint.

Each idiom gets one prompt with {idiom} and {language} slots; the reply
must contain three labeled sections (Concepts / Values / Context). A reply
that cannot be parsed is recorded as a per-idiom failure and the record is
skipped; the batch always completes. Endpoint configuration mirrors the
consumer pipeline: IDIOMCE_LLM_URL / IDIOMCE_LLM_MODEL / IDIOMCE_LLM_KEY.
"""

from __future__ import annotations

import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable

from .errors import ProviderError, UnparseableReply
from .formats import read_idiom_jsonl, write_idiom_jsonl

ENV_URL = "IDIOMCE_LLM_URL"
ENV_MODEL = "IDIOMCE_LLM_MODEL"
ENV_KEY = "IDIOMCE_LLM_KEY"

GENERATION_TEMPLATE = (
    "For the {language} idiom \"{idiom}\", describe its cultural profile in "
    "three labeled sections.\n"
    "Concepts: <the ideas and imagery the idiom draws on>\n"
    "Values: <the values or judgments it conveys>\n"
    "Context: <the historical or situational context it comes from>"
)

_SECTION_RE = {
    "concepts": re.compile(r"^\s*concepts\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE),
    "values": re.compile(r"^\s*values\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE),
    "context": re.compile(r"^\s*context\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE),
}


def parse_sections(reply: str) -> dict[str, str]:
    """Extract the three labeled sections; raises on any missing/empty one."""
    out = {}
    for field, pattern in _SECTION_RE.items():
        match = pattern.search(reply)
        if not match or not match.group(1).strip():
            raise ValueError(f"missing section {field!r}")
        out[field] = match.group(1).strip()
    return out


def http_complete(prompt: str, timeout: float = 60.0) -> str:
    """POST {model, prompt, temperature, max_tokens}; expect {"text": ...}."""
    url = os.environ.get(ENV_URL)
    if not url:
        raise ProviderError(f"no endpoint: set {ENV_URL}")
    payload = json.dumps({
        "model": os.environ.get(ENV_MODEL, ""),
        "prompt": prompt,
        "temperature": 0.0,
        "max_tokens": 512,
    }).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(ENV_KEY)
    if key:
        headers["Authorization"] = f"Bearer {key}"
    request = urllib.request.Request(url, data=payload, headers=headers)
    try:
        with urllib.request.urlopen(request, timeout=timeout) as resp:
            body = resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        raise ProviderError(f"endpoint returned status {exc.code}") from exc
    except (urllib.error.URLError, TimeoutError, OSError) as exc:
        raise ProviderError(f"transport failure: {exc}") from exc
    try:
        text = json.loads(body).get("text")
    except json.JSONDecodeError as exc:
        raise ProviderError("endpoint reply is not JSON") from exc
    if not isinstance(text, str) or not text:
        raise ProviderError("endpoint reply has no non-empty 'text' field")
    return text


@dataclass
class GenerationReport:
    filled: int
    failures: list[UnparseableReply]


def generate_cultural_elements(
    input_path: str,
    output_path: str,
    complete: Callable[[str], str] = http_complete,
) -> GenerationReport:
    """Fill concepts/values/context for every idiom in the corpus.

    Records whose reply cannot be parsed are dropped from the output and
    listed in the report instead of failing the batch.
    """
    records = read_idiom_jsonl(input_path)
    filled = []
    failures: list[UnparseableReply] = []
    for rec in records:
        prompt = GENERATION_TEMPLATE.format(idiom=rec["text"], language=rec["lang"])
        reply = complete(prompt)
        try:
            sections = parse_sections(reply)
        except ValueError as exc:
            failures.append(UnparseableReply(rec["id"], str(exc)))
            continue
        filled.append({**rec, **sections})
    write_idiom_jsonl(filled, output_path)
    return GenerationReport(filled=len(filled), failures=failures)
