"""Dense float32 arithmetic and seeded randomness shared by training and compression.

Matrices and vectors are plain ``numpy`` arrays of dtype ``float32`` in row-major
(C) order. The helpers here add the shape and finiteness checks the rest of the
package relies on; they do not wrap arrays in new types.
"""
from __future__ import annotations

import numpy as np

DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when operand dimensions do not line up."""


class NonFiniteError(FloatingPointError):
    """Raised when an operation would produce NaN or Inf."""


def as_matrix(a, copy: bool = False) -> np.ndarray:
    m = np.array(a, dtype=DTYPE, order="C", copy=copy) if copy else np.ascontiguousarray(a, dtype=DTYPE)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def as_vector(v, copy: bool = False) -> np.ndarray:
    x = np.array(v, dtype=DTYPE, copy=copy) if copy else np.ascontiguousarray(v, dtype=DTYPE)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def check_finite(a: np.ndarray, what: str = "result") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` in float32 with a dimension check.

    An empty inner dimension yields a zero matrix, e.g. ``(1x0) @ (0x1) == [[0]]``.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return check_finite(np.matmul(a, b), "matmul")


def relu(v) -> np.ndarray:
    x = np.asarray(v, dtype=DTYPE)
    return np.maximum(x, DTYPE(0))


def softmax(scores, axis: int = -1) -> np.ndarray:
    """Softmax along ``axis`` with max-subtraction, so large scores never overflow."""
    s = np.asarray(scores, dtype=DTYPE)
    if s.shape[axis] < 1:
        raise ShapeError("softmax needs at least one score")
    z = s - np.max(s, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def log_softmax(scores, axis: int = -1) -> np.ndarray:
    s = np.asarray(scores, dtype=DTYPE)
    z = s - np.max(s, axis=axis, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; the same integer seed gives the same stream on every platform."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def split_rng(seed, n: int) -> list[np.random.Generator]:
    """Independent child generators derived from one seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]
