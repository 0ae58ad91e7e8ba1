"""Embedding backends: a multilingual transformer when available, plus a
deterministic offline encoder.

The hashed encoder exists so the whole pipeline (and its tests) can run
with no model download and no network: it feature-hashes character
n-grams and words into a fixed 768-d space with signed buckets, then
L2-normalizes. It is deterministic across runs and platforms (keyed
blake2b, not Python's salted hash), and identical texts map to identical
rows, which is all the downstream similarity machinery assumes.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import ModelUnavailable

OUTPUT_DIM = 768
HASHED_MODEL_NAME = "hashed"


class HashedEncoder:
    """Signed feature hashing of character trigrams and words."""

    def __init__(self, dim: int = OUTPUT_DIM):
        self.dim = dim
        self.name = HASHED_MODEL_NAME

    def _tokens(self, text: str):
        padded = f" {text.lower().strip()} "
        for i in range(len(padded) - 2):
            yield padded[i:i + 3]
        for word in padded.split():
            yield f"w:{word}"

    def _encode_one(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in self._tokens(text):
            digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
            value = int.from_bytes(digest, "little")
            sign = 1.0 if value & 1 else -1.0
            vec[(value >> 1) % self.dim] += sign
        norm = np.linalg.norm(vec)
        if norm > 1e-12:
            vec /= norm
        return vec

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self._encode_one(text).astype(np.float32)
        return out


class SentenceTransformerEncoder:
    """Thin wrapper over a sentence-transformers model (e.g. LaBSE)."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise ModelUnavailable(
                "sentence-transformers is not installed; install the [labse] "
                "extra or use the 'hashed' model"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise ModelUnavailable(f"could not load model {model_name!r}: {exc}") from exc
        self.name = model_name
        self.dim = self._model.get_sentence_embedding_dimension()
        if self.dim != OUTPUT_DIM:
            raise ModelUnavailable(
                f"model {model_name!r} embeds to {self.dim} dims, expected {OUTPUT_DIM}"
            )

    def encode(self, texts: list[str], batch_size: int = 32) -> np.ndarray:
        vectors = self._model.encode(
            texts, batch_size=batch_size, normalize_embeddings=True,
            convert_to_numpy=True, show_progress_bar=False,
        )
        return np.asarray(vectors, dtype=np.float32)


def make_encoder(model_name: str):
    if model_name == HASHED_MODEL_NAME:
        return HashedEncoder()
    return SentenceTransformerEncoder(model_name)
