"""Embedding matrices and the IDCE binary container.

File layout (all integers little-endian):

    magic  b"IDCE"
    u32    format version (1)
    u32    row count
    u32    dimension
    then per row: u16 id byte-length, id bytes (UTF-8), dim x float32 LE

Rows are stored float32. The loader L2-normalizes any row whose norm
deviates from 1 by more than 1e-6, so files written by external tooling
with un-normalized vectors cannot silently disagree with the core; rows
already normalized round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import BadMagic, DimMismatch, DuplicateId, TruncatedFile

MAGIC = b"IDCE"
VERSION = 1

# Rows whose norm is within this of 1 are kept byte-identical on load.
_NORM_SKIP_TOL = 1e-6


def _normalize_rows(array: np.ndarray) -> np.ndarray:
    """Return float32 rows L2-normalized in float64; zero rows stay zero."""
    work = np.asarray(array, dtype=np.float64)
    if work.ndim != 2:
        raise DimMismatch(2, work.ndim)
    norms = np.linalg.norm(work, axis=1)
    out = work.copy()
    fix = np.abs(norms - 1.0) > _NORM_SKIP_TOL
    nonzero = norms > 1e-12
    rows = fix & nonzero
    out[rows] = work[rows] / norms[rows, None]
    return out.astype(np.float32)


class EmbeddingMatrix:
    """Ordered id -> float32 vector store with L2-normalized rows."""

    def __init__(self, ids: list[str] | tuple[str, ...], array: np.ndarray):
        array = np.asarray(array, dtype=np.float32)
        if array.ndim != 2:
            raise DimMismatch(2, array.ndim)
        if len(ids) != array.shape[0]:
            raise DimMismatch(len(ids), array.shape[0])
        self.ids: tuple[str, ...] = tuple(ids)
        self.array: np.ndarray = _normalize_rows(array)
        self.index: dict[str, int] = {}
        for i, id_ in enumerate(self.ids):
            if id_ in self.index:
                raise DuplicateId(id_)
            self.index[id_] = i

    @property
    def dim(self) -> int:
        return self.array.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, id_: str) -> bool:
        return id_ in self.index

    def row(self, id_: str) -> np.ndarray:
        return self.array[self.index[id_]]

    def rows_for(self, ids: list[str] | tuple[str, ...]) -> np.ndarray:
        """Gather rows for the given ids, in order."""
        from .errors import MissingEmbedding

        idx = []
        for id_ in ids:
            if id_ not in self.index:
                raise MissingEmbedding(id_)
            idx.append(self.index[id_])
        return self.array[np.asarray(idx, dtype=np.int64)]

    def extended(self, id_: str, vector: np.ndarray) -> "EmbeddingMatrix":
        """New matrix with one extra row appended; the receiver is unchanged."""
        if id_ in self.index:
            raise DuplicateId(id_)
        vec = np.asarray(vector, dtype=np.float32).reshape(1, -1)
        if vec.shape[1] != self.dim:
            raise DimMismatch(self.dim, vec.shape[1])
        return EmbeddingMatrix(self.ids + (id_,), np.vstack([self.array, vec]))


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    parts = [MAGIC, struct.pack("<III", VERSION, len(matrix), matrix.dim)]
    for i, id_ in enumerate(matrix.ids):
        raw = id_.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(matrix.array[i].astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_embeddings(path: str | Path, expected_dim: int | None = None) -> EmbeddingMatrix:
    """Load an IDCE file; rows are L2-normalized on load if stored otherwise."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise TruncatedFile(f"{path}: shorter than header")
    if data[:4] != MAGIC:
        raise BadMagic(f"{path}: magic {data[:4]!r} != {MAGIC!r}")
    version, count, dim = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if dim == 0:
        raise BadMagic(f"{path}: zero dimension")
    if expected_dim is not None and dim != expected_dim:
        raise DimMismatch(expected_dim, dim)
    offset = 16
    ids: list[str] = []
    rows = np.empty((count, dim), dtype=np.float32)
    row_bytes = 4 * dim
    for i in range(count):
        if offset + 2 > len(data):
            raise TruncatedFile(f"{path}: row {i} header past end of file")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + row_bytes > len(data):
            raise TruncatedFile(f"{path}: row {i} data past end of file")
        ids.append(data[offset:offset + id_len].decode("utf-8"))
        offset += id_len
        rows[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
        offset += row_bytes
    if offset != len(data):
        raise TruncatedFile(f"{path}: {len(data) - offset} trailing bytes")
    return EmbeddingMatrix(ids, rows)
