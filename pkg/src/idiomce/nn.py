"""Minimal dense numeric substrate for the trainable parts of the package.

Parameters live in a ParamStore (named arrays with frozen shapes), the
optimizer is Adam, and every hand-derived gradient in this repo is checked
against central finite differences. Storage is float32 (checkpoints too);
training code upcasts to float64 so reductions accumulate in double
precision and runs reproduce bit-for-bit.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    InvalidShape,
    NonFiniteLoss,
    ShapeMismatch,
    TruncatedFile,
)


class ParamStore:
    """Ordered name -> ndarray mapping with shapes frozen at construction."""

    def __init__(self, arrays: dict[str, np.ndarray]):
        self._arrays: dict[str, np.ndarray] = {}
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            if arr.ndim not in (1, 2):
                raise InvalidShape(f"{name}: only vectors and matrices supported")
            self._arrays[name] = arr

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __setitem__(self, name: str, value: np.ndarray) -> None:
        if name not in self._arrays:
            raise KeyError(name)
        value = np.asarray(value)
        if value.shape != self._arrays[name].shape:
            raise ShapeMismatch(
                f"{name}: {value.shape} != {self._arrays[name].shape}"
            )
        self._arrays[name] = value

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamStore):
            return NotImplemented
        if self.names() != other.names():
            return False
        return all(np.array_equal(self[n], other[n]) for n in self.names())

    def copy(self) -> "ParamStore":
        return ParamStore({n: a.copy() for n, a in self.items()})

    def astype(self, dtype) -> "ParamStore":
        return ParamStore({n: a.astype(dtype) for n, a in self.items()})

    def zeros_like(self, dtype=np.float64) -> "ParamStore":
        return ParamStore({n: np.zeros(a.shape, dtype=dtype) for n, a in self.items()})

    def size(self) -> int:
        return sum(a.size for a in self._arrays.values())


def init_params(shapes: list[tuple[str, tuple[int, ...]]], seed: int) -> ParamStore:
    """Deterministic init: Xavier-uniform matrices, zero vectors (biases).

    The Xavier bound for an (out, in) matrix is sqrt(6 / (out + in)).
    """
    rng = np.random.default_rng(seed)
    arrays: dict[str, np.ndarray] = {}
    for name, shape in shapes:
        if name in arrays:
            raise InvalidShape(f"duplicate parameter name {name!r}")
        if len(shape) == 1:
            if shape[0] < 1:
                raise InvalidShape(f"{name}: bad shape {shape}")
            arrays[name] = np.zeros(shape[0], dtype=np.float32)
        elif len(shape) == 2:
            rows, cols = shape
            if rows < 1 or cols < 1:
                raise InvalidShape(f"{name}: bad shape {shape}")
            bound = np.sqrt(6.0 / (rows + cols))
            arrays[name] = rng.uniform(-bound, bound, size=(rows, cols)).astype(
                np.float32
            )
        else:
            raise InvalidShape(f"{name}: bad shape {shape}")
    return ParamStore(arrays)


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(
        self,
        params: ParamStore,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = params.zeros_like(np.float64)
        self.v = params.zeros_like(np.float64)


def optimizer_step(params: ParamStore, grads: ParamStore, state: AdamState) -> None:
    """One Adam update, in place; accumulators are kept in float64."""
    if params.names() != grads.names():
        raise ShapeMismatch("parameter and gradient names differ")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: {g.shape} != {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name] = m
        state.v[name] = v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        params[name] = (p.astype(np.float64) - update).astype(p.dtype)


def finite_difference_check(loss_and_grad, params: ParamStore, eps: float = 1e-5) -> float:
    """Max relative error between analytic gradients and central differences.

    loss_and_grad(params) must return (scalar loss, ParamStore of analytic
    gradients) and be deterministic. The check runs on a float64 copy so
    the difference quotient is not dominated by storage rounding. Relative
    error uses denominator max(|analytic|, |numeric|, 1e-8) per element.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    work = params.astype(np.float64)
    loss0, grads = loss_and_grad(work)
    if not np.isfinite(loss0):
        raise NonFiniteLoss(f"loss is {loss0}")
    worst = 0.0
    for name in work.names():
        arr = work[name]
        analytic = np.asarray(grads[name], dtype=np.float64)
        flat = arr.reshape(-1)
        a_flat = analytic.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp, _ = loss_and_grad(work)
            flat[i] = orig - eps
            lm, _ = loss_and_grad(work)
            flat[i] = orig
            if not (np.isfinite(lp) and np.isfinite(lm)):
                raise NonFiniteLoss("perturbed loss is not finite")
            numeric = (lp - lm) / (2.0 * eps)
            denom = max(abs(a_flat[i]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
    return worst


# -- checkpoint container ---------------------------------------------------
#
#   magic b"IDCM", u32 version(1), u32 tensor count,
#   per tensor: u16 name length, name UTF-8, u32 rows, u32 cols, float32 LE data.
#
# Vectors are stored with cols == 1; on load any single-column tensor comes
# back as a 1-D array (this repo has no genuine column matrices).

CKPT_MAGIC = b"IDCM"
CKPT_VERSION = 1


def save_checkpoint(params: ParamStore, path: str | Path) -> None:
    parts = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(params.names()))]
    for name, arr in params.items():
        data = np.asarray(arr, dtype=np.float32)
        if data.ndim == 1:
            rows, cols = data.shape[0], 1
        else:
            rows, cols = data.shape
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<II", rows, cols))
        parts.append(data.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> ParamStore:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFile(f"{path}: shorter than header")
    if data[:4] != CKPT_MAGIC:
        raise BadMagic(f"{path}: magic {data[:4]!r} != {CKPT_MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    offset = 12
    arrays: dict[str, np.ndarray] = {}
    for i in range(count):
        if offset + 2 > len(data):
            raise TruncatedFile(f"{path}: tensor {i} header past end")
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + name_len + 8 > len(data):
            raise TruncatedFile(f"{path}: tensor {i} header past end")
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        rows, cols = struct.unpack_from("<II", data, offset)
        offset += 8
        n_bytes = 4 * rows * cols
        if offset + n_bytes > len(data):
            raise TruncatedFile(f"{path}: tensor {i} data past end")
        arr = np.frombuffer(data, dtype="<f4", count=rows * cols, offset=offset).copy()
        offset += n_bytes
        arrays[name] = arr if cols == 1 else arr.reshape(rows, cols)
    if offset != len(data):
        raise TruncatedFile(f"{path}: {len(data) - offset} trailing bytes")
    return ParamStore(arrays)
