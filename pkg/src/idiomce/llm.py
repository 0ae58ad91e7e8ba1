"""LLM provider abstraction and prompt templates.

The HTTP provider posts {model, prompt, temperature, max_tokens} as JSON
and expects {"text": ...} back; endpoint and credentials come from the
IDIOMCE_LLM_URL / IDIOMCE_LLM_MODEL / IDIOMCE_LLM_KEY environment
variables. A deterministic mock provider is first-class so the test suite
and batch runs never need network access.

Templates are UTF-8 bodies with {slot} placeholders. Each template name
has a fixed required-slot set; rendering fails loudly on a missing slot.
"""

from __future__ import annotations

import json
import os
import string
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path

from .errors import ProviderError, TemplateError

ENV_URL = "IDIOMCE_LLM_URL"
ENV_MODEL = "IDIOMCE_LLM_MODEL"
ENV_KEY = "IDIOMCE_LLM_KEY"


class LlmProvider:
    """Behavioral contract: complete(prompt) -> completion text."""

    provider_id = "abstract"

    def complete(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        raise NotImplementedError


class MockProvider(LlmProvider):
    """Deterministic provider for tests and offline runs.

    ``replies`` is either a list consumed in call order or a callable of
    the prompt (safe under concurrency). All prompts are recorded.
    """

    provider_id = "mock"

    def __init__(self, replies):
        self._fn = replies if callable(replies) else None
        self._queue = None if callable(replies) else list(replies)
        self.calls: list[str] = []

    def complete(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        self.calls.append(prompt)
        if self._fn is not None:
            return self._fn(prompt)
        if not self._queue:
            raise ProviderError("mock provider ran out of scripted replies")
        return self._queue.pop(0)


class HttpProvider(LlmProvider):
    """Minimal JSON-over-HTTP client; all transport failures become typed errors."""

    def __init__(
        self,
        url: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        timeout: float = 30.0,
    ):
        self.url = url or os.environ.get(ENV_URL)
        self.model = model or os.environ.get(ENV_MODEL, "")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY)
        self.timeout = timeout
        if not self.url:
            raise ProviderError(f"no endpoint: set {ENV_URL} or pass url=")
        self.provider_id = f"http:{self.model or 'default'}"

    def complete(self, prompt: str, temperature: float = 0.0, max_tokens: int = 512) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "prompt": prompt,
                "temperature": temperature,
                "max_tokens": max_tokens,
            }
        ).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        request = urllib.request.Request(self.url, data=payload, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                if resp.status != 200:
                    raise ProviderError(f"endpoint returned status {resp.status}")
                body = resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            raise ProviderError(f"endpoint returned status {exc.code}") from exc
        except (urllib.error.URLError, TimeoutError, OSError) as exc:
            raise ProviderError(f"transport failure: {exc}") from exc
        try:
            obj = json.loads(body)
        except json.JSONDecodeError as exc:
            raise ProviderError("endpoint reply is not JSON") from exc
        text = obj.get("text")
        if not isinstance(text, str) or not text:
            raise ProviderError("endpoint reply has no non-empty 'text' field")
        return text


# -- templates ---------------------------------------------------------------

REQUIRED_SLOTS: dict[str, frozenset[str]] = {
    "direct": frozenset({"source_sentence", "target_language"}),
    "selection": frozenset({"source_sentence", "source_idiom", "candidate_list"}),
    "translation": frozenset(
        {"source_sentence", "source_idiom", "selected_target_idiom", "target_language"}
    ),
    "cultural_elements": frozenset({"idiom", "language"}),
}

DEFAULT_TEMPLATE_BODIES: dict[str, str] = {
    "direct": (
        "Translate the following sentence into {target_language}. "
        "Preserve the meaning of any idiomatic expression.\n\n"
        "Sentence: {source_sentence}\n\nTranslation:"
    ),
    "selection": (
        "The sentence below contains the idiom \"{source_idiom}\".\n"
        "Sentence: {source_sentence}\n\n"
        "Candidate target-language idioms:\n{candidate_list}\n\n"
        "Reply with the single candidate id that best fits the sentence's "
        "context, or the word none if no candidate fits.\nAnswer:"
    ),
    "translation": (
        "Translate the sentence into {target_language}. The sentence contains "
        "the idiom \"{source_idiom}\"; render it with the target-language "
        "idiom \"{selected_target_idiom}\", adapting morphology so the result "
        "reads naturally.\n\nSentence: {source_sentence}\n\nTranslation:"
    ),
    "cultural_elements": (
        "For the {language} idiom \"{idiom}\", describe its cultural profile "
        "in three labeled sections.\n"
        "Concepts: <the ideas and imagery the idiom draws on>\n"
        "Values: <the values or judgments it conveys>\n"
        "Context: <the historical or situational context it comes from>"
    ),
}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str

    def __post_init__(self):
        if self.name not in REQUIRED_SLOTS:
            raise TemplateError(f"unknown template name {self.name!r}")
        present = self.slots()
        missing = REQUIRED_SLOTS[self.name] - present
        if missing:
            raise TemplateError(
                f"template {self.name!r} body lacks slots {sorted(missing)}"
            )

    def slots(self) -> frozenset[str]:
        names = set()
        for _, field_name, _, _ in string.Formatter().parse(self.body):
            if field_name:
                names.add(field_name)
        return frozenset(names)

    def render(self, **values: str) -> str:
        missing = self.slots() - set(values)
        if missing:
            raise TemplateError(
                f"template {self.name!r}: unfilled slots {sorted(missing)}"
            )
        return self.body.format(**{k: values[k] for k in self.slots()})


def default_templates() -> dict[str, PromptTemplate]:
    return {name: PromptTemplate(name, body) for name, body in DEFAULT_TEMPLATE_BODIES.items()}


def load_templates(directory: str | Path | None) -> dict[str, PromptTemplate]:
    """Templates from <dir>/<name>.txt, falling back to the embedded defaults."""
    templates = default_templates()
    if directory is None:
        return templates
    directory = Path(directory)
    for name in REQUIRED_SLOTS:
        path = directory / f"{name}.txt"
        if path.exists():
            templates[name] = PromptTemplate(name, path.read_text(encoding="utf-8"))
    return templates
