"""Minimal dense multidimensional float32 array shared by all modules.

Deliberately small: row-major storage, no views, no broadcasting.  Copies
are fine at the scales this package targets and keep indexing auditable.
Reductions elsewhere in the package accumulate in float64; the stored
element type is always float32.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import IndexOutOfBounds, InvalidShape, ShapeMismatch

MAX_ELEMENTS = 2**31


class DenseArray:
    """Rank-1..4 row-major float32 array.

    ``values`` is the backing C-contiguous numpy array; ``data`` exposes the
    flat row-major buffer (last axis fastest).
    """

    __slots__ = ("values",)

    def __init__(self, values: np.ndarray) -> None:
        arr = np.ascontiguousarray(values, dtype=np.float32)
        if not 1 <= arr.ndim <= 4:
            raise InvalidShape(f"rank must be between 1 and 4, got {arr.ndim}")
        if any(n < 1 for n in arr.shape):
            raise InvalidShape(f"every extent must be >= 1, got {arr.shape}")
        if arr.size > MAX_ELEMENTS:
            raise InvalidShape(f"element count {arr.size} exceeds {MAX_ELEMENTS}")
        self.values = arr

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def rank(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the element buffer."""
        return self.values.reshape(-1)

    def copy(self) -> "DenseArray":
        return DenseArray(self.values.copy())

    def __repr__(self) -> str:
        return f"DenseArray(shape={self.shape})"


def make_array(shape: Sequence[int], fill: float = 0.0) -> DenseArray:
    """Create an array of the given shape with every element set to ``fill``."""
    extents = tuple(int(n) for n in shape)
    if not 1 <= len(extents) <= 4:
        raise InvalidShape(f"rank must be between 1 and 4, got {len(extents)}")
    if any(n < 1 for n in extents):
        raise InvalidShape(f"every extent must be >= 1, got {extents}")
    if math.prod(extents) > MAX_ELEMENTS:
        raise InvalidShape(f"element count {math.prod(extents)} exceeds {MAX_ELEMENTS}")
    return DenseArray(np.full(extents, fill, dtype=np.float32))


def _check_index(a: DenseArray, idx: Sequence[int]) -> tuple[int, ...]:
    idx = tuple(int(i) for i in idx)
    if len(idx) != a.rank:
        raise IndexOutOfBounds(f"index rank {len(idx)} != array rank {a.rank}")
    for i, n in zip(idx, a.shape):
        if not 0 <= i < n:
            raise IndexOutOfBounds(f"index {idx} outside extents {a.shape}")
    return idx


def at(a: DenseArray, idx: Sequence[int]) -> float:
    """Read the element at a full row-major index."""
    return float(a.values[_check_index(a, idx)])


def set_at(a: DenseArray, idx: Sequence[int], v: float) -> None:
    """Write the element at a full row-major index."""
    a.values[_check_index(a, idx)] = v


def map_binary(a: DenseArray, b: DenseArray, f: Callable[[float, float], float]) -> DenseArray:
    """Apply a scalar function elementwise to two same-shaped arrays."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")
    out = np.frompyfunc(f, 2, 1)(a.values, b.values)
    return DenseArray(out.astype(np.float32))
