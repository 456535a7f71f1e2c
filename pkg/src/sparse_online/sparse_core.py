"""Sparse/dense vector primitives shared by every learner.

Indices are 0-based everywhere inside the package. All arithmetic is float64.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SparseVector",
    "DenseWeights",
    "dot",
    "scaled_add",
    "soft_threshold",
    "soft_threshold_array",
    "model_sparsity",
]

_EMPTY_IDX = np.empty(0, dtype=np.int64)
_EMPTY_VAL = np.empty(0, dtype=np.float64)


class SparseVector:
    """Immutable sparse vector stored as parallel (indices, values) arrays.

    Indices are strictly increasing and explicit zeros are dropped on
    construction, so the stored support is exactly the nonzero set.
    """

    __slots__ = ("indices", "values")

    def __init__(self, indices=None, values=None):
        if indices is None:
            idx, val = _EMPTY_IDX, _EMPTY_VAL
        else:
            idx = np.asarray(indices, dtype=np.int64)
            val = np.asarray(values, dtype=np.float64)
            if idx.ndim != 1 or idx.shape != val.shape:
                raise ValueError("indices and values must be 1-d arrays of equal length")
            if idx.size:
                if idx[0] < 0:
                    raise ValueError("indices must be non-negative")
                if np.any(np.diff(idx) <= 0):
                    raise ValueError("indices must be strictly increasing")
                if not np.all(np.isfinite(val)):
                    raise ValueError("values must be finite")
                keep = val != 0.0
                if not keep.all():
                    idx, val = idx[keep], val[keep]
            idx = idx.copy()
            val = val.copy()
        idx.flags.writeable = False
        val.flags.writeable = False
        self.indices = idx
        self.values = val

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        pairs = list(pairs)
        if not pairs:
            return cls()
        idx, val = zip(*pairs)
        return cls(idx, val)

    @classmethod
    def from_dense(cls, arr: Sequence[float]) -> "SparseVector":
        arr = np.asarray(arr, dtype=np.float64)
        nz = np.flatnonzero(arr)
        return cls(nz, arr[nz])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def max_index(self) -> int:
        """Largest stored index, or -1 for the empty vector."""
        return int(self.indices[-1]) if self.indices.size else -1

    def pairs(self) -> list[tuple[int, float]]:
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices] = self.values
        return out

    def sq_norm(self) -> float:
        return float(self.values @ self.values)

    def __len__(self) -> int:
        return self.nnz

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self.indices, other.indices) and np.array_equal(
            self.values, other.values
        )

    def __hash__(self):
        return hash((self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self) -> str:
        return f"SparseVector({self.pairs()!r})"


class DenseWeights:
    """Growable float64 array; reads past the logical dimension return ``fill``.

    ``fill`` is 0 for weight-like vectors. The diagonal inverse used by the
    second-order learners reuses this class with ``fill=1.0`` so an identity
    initialisation never needs the dimension up front.
    """

    __slots__ = ("_data", "dim", "fill")

    def __init__(self, values=None, fill: float = 0.0):
        self.fill = float(fill)
        if values is None:
            self._data = np.full(8, self.fill)
            self.dim = 0
        else:
            arr = np.array(values, dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError("DenseWeights expects a 1-d array")
            if not np.all(np.isfinite(arr)):
                raise ValueError("weights must be finite")
            self.dim = int(arr.size)
            self._data = np.concatenate([arr, np.full(max(8, arr.size), self.fill)])

    @classmethod
    def zeros(cls, dim: int = 0, fill: float = 0.0) -> "DenseWeights":
        w = cls(fill=fill)
        w.ensure(dim)
        return w

    def ensure(self, dim: int) -> None:
        """Grow the logical dimension to at least ``dim``."""
        if dim <= self.dim:
            return
        if dim > self._data.size:
            cap = max(dim, 2 * self._data.size)
            grown = np.full(cap, self.fill)
            grown[: self._data.size] = self._data
            self._data = grown
        self.dim = dim

    def gather(self, indices: np.ndarray) -> np.ndarray:
        """Values at ``indices``; indices past the logical dimension read ``fill``."""
        if indices.size == 0:
            return _EMPTY_VAL
        if indices[-1] < self.dim:
            return self._data[indices]
        out = np.full(indices.size, self.fill)
        inside = indices < self.dim
        out[inside] = self._data[indices[inside]]
        return out

    def scatter_add(self, indices: np.ndarray, deltas: np.ndarray) -> None:
        if indices.size == 0:
            return
        self.ensure(int(indices[-1]) + 1)
        self._data[indices] += deltas

    def scatter_set(self, indices: np.ndarray, values: np.ndarray) -> None:
        if indices.size == 0:
            return
        self.ensure(int(indices[-1]) + 1)
        self._data[indices] = values

    def to_array(self, dim: int | None = None) -> np.ndarray:
        """Copy of the values, padded with ``fill`` (or truncated) to ``dim``."""
        n = self.dim if dim is None else dim
        if n <= self._data.size:
            out = self._data[:n].copy()
            if n > self.dim:
                out[self.dim:] = self.fill
            return out
        out = np.full(n, self.fill)
        out[: self.dim] = self._data[: self.dim]
        return out

    def copy(self) -> "DenseWeights":
        out = DenseWeights(fill=self.fill)
        out._data = self._data.copy()
        out.dim = self.dim
        return out

    def nnz(self) -> int:
        return int(np.count_nonzero(self._data[: self.dim]))

    def __getitem__(self, i: int) -> float:
        if i < 0:
            raise IndexError("negative index")
        return float(self._data[i]) if i < self.dim else self.fill

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseWeights):
            return NotImplemented
        n = max(self.dim, other.dim)
        return np.array_equal(self.to_array(n), other.to_array(n))

    def __repr__(self) -> str:
        return f"DenseWeights({self.to_array().tolist()!r})"


def dot(x: SparseVector, w: DenseWeights) -> float:
    """Inner product over x's support; coordinates past w's dimension are 0."""
    if x.indices.size == 0:
        return 0.0
    return float(x.values @ w.gather(x.indices))


def scaled_add(theta: DenseWeights, x: SparseVector, alpha: float) -> DenseWeights:
    """theta += alpha * x, in place. Returns ``theta`` for chaining."""
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    if alpha != 0.0:
        theta.scatter_add(x.indices, alpha * x.values)
    elif x.indices.size:
        theta.ensure(x.max_index + 1)
    return theta


def soft_threshold_array(u: np.ndarray, lam: float) -> np.ndarray:
    """sign(u) * max(|u| - lam, 0), elementwise.

    Computed as u - clip(u, -lam, lam), which rounds identically and needs
    fewer array passes.
    """
    return u - np.minimum(np.maximum(u, -lam), lam)


def soft_threshold(u: DenseWeights, lam: float) -> DenseWeights:
    if lam < 0:
        raise ValueError(f"threshold must be non-negative, got {lam}")
    return DenseWeights(soft_threshold_array(u.to_array(), lam))


def model_sparsity(w: DenseWeights, ambient_dim: int) -> float:
    """Fraction of the ambient dimensions whose weight is exactly zero."""
    if ambient_dim <= 0:
        raise ValueError("ambient_dim must be positive")
    if w.dim > ambient_dim and np.any(w.to_array()[ambient_dim:] != 0):
        raise ValueError("model has nonzero weights beyond ambient_dim")
    nonzero = int(np.count_nonzero(w.to_array(min(w.dim, ambient_dim))))
    return (ambient_dim - nonzero) / ambient_dim
