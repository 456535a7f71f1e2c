"""Dataset ingestion and generation.

LIBSVM text files use 1-based feature indices; they are converted to 0-based
at the parse boundary. All randomness goes through numpy's ``PCG64`` bit
generator (``numpy.random.default_rng(seed)``), so runs are reproducible
across platforms given the same seed.
"""
from __future__ import annotations

import logging
import math
import os
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .sparse_core import DenseWeights, SparseVector

__all__ = [
    "ParseError",
    "DataError",
    "SparseExample",
    "DatasetMeta",
    "SyntheticSpec",
    "parse_libsvm_line",
    "format_libsvm_line",
    "iter_libsvm",
    "load_libsvm",
    "write_libsvm",
    "scan_meta",
    "meta_of",
    "permuted_stream",
    "generate_synthetic",
    "subsample_imbalanced",
    "to_csr",
]

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 5_000_000  # examples held in memory for permutation


class DataError(ValueError):
    """Dataset content or request that cannot be satisfied."""


class ParseError(DataError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class SparseExample:
    y: int
    x: SparseVector

    def __post_init__(self):
        if self.y not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.y!r}")


@dataclass
class DatasetMeta:
    n_examples: int = 0
    ambient_dim: int = 0
    nnz: int = 0
    positives: int = 0
    negatives: int = 0

    def add(self, ex: SparseExample) -> None:
        self.n_examples += 1
        self.nnz += ex.x.nnz
        self.ambient_dim = max(self.ambient_dim, ex.x.max_index + 1)
        if ex.y == 1:
            self.positives += 1
        else:
            self.negatives += 1


@dataclass(frozen=True)
class SyntheticSpec:
    n_train: int = 100_000
    n_test: int = 10_000
    ambient_dim: int = 1000
    n_effective: int = 100
    n_noise: int = 200
    mean_range: tuple[float, float] = (-1.0, 1.0)
    var_range: tuple[float, float] = (0.5, 100.0)
    noise_var: float = 100.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mean_range", tuple(float(v) for v in self.mean_range))
        object.__setattr__(self, "var_range", tuple(float(v) for v in self.var_range))
        if self.n_train < 0 or self.n_test < 0:
            raise DataError("example counts must be non-negative")
        if self.n_effective < 1 or self.n_noise < 0:
            raise DataError("need at least one effective dimension and n_noise >= 0")
        if self.n_effective + self.n_noise > self.ambient_dim:
            raise DataError(
                f"n_effective + n_noise = {self.n_effective + self.n_noise} exceeds "
                f"ambient_dim = {self.ambient_dim}"
            )
        lo, hi = self.mean_range
        vlo, vhi = self.var_range
        if lo > hi or vlo > vhi or vlo < 0 or self.noise_var < 0:
            raise DataError("invalid mean/variance ranges")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise DataError(f"unknown synthetic spec fields: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_range"] = list(self.mean_range)
        d["var_range"] = list(self.var_range)
        return d

    @property
    def planted_sparsity(self) -> float:
        return 1.0 - self.n_effective / self.ambient_dim


# -- LIBSVM text format -----------------------------------------------------

def _parse_label(tok: str, line_no: int | None) -> int:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"non-numeric label {tok!r}", line_no) from None
    if v == 1.0:
        return 1
    if v in (-1.0, 0.0):
        return -1
    raise ParseError(f"label {tok!r} is not binary (expected -1, 0, 1 or +1)", line_no)


def parse_libsvm_line(line: str, line_no: int | None = None) -> SparseExample | None:
    """Parse one LIBSVM line. Returns ``None`` for blank/comment-only lines."""
    hash_at = line.find("#")
    if hash_at >= 0:
        line = line[:hash_at]
    toks = line.split()
    if not toks:
        return None
    y = _parse_label(toks[0], line_no)
    n = len(toks) - 1
    idx = np.empty(n, dtype=np.int64)
    val = np.empty(n, dtype=np.float64)
    prev = 0
    for k, tok in enumerate(toks[1:]):
        head, sep, tail = tok.partition(":")
        if not sep:
            raise ParseError(f"malformed feature token {tok!r}", line_no)
        try:
            j = int(head)
            v = float(tail)
        except ValueError:
            raise ParseError(f"malformed feature token {tok!r}", line_no) from None
        if j < 1:
            raise ParseError(f"feature index {j} < 1 (indices are 1-based)", line_no)
        if j <= prev:
            raise ParseError(f"feature indices not strictly increasing at {tok!r}", line_no)
        if not math.isfinite(v):
            raise ParseError(f"non-finite feature value in {tok!r}", line_no)
        prev = j
        idx[k] = j - 1
        val[k] = v
    return SparseExample(y, SparseVector(idx, val))


def format_libsvm_line(ex: SparseExample) -> str:
    """Canonical LIBSVM form: ``+1``/``-1`` label, 1-based indices, repr floats."""
    parts = ["+1" if ex.y == 1 else "-1"]
    parts.extend(f"{i + 1}:{v!r}" for i, v in zip(ex.x.indices.tolist(), ex.x.values.tolist()))
    return " ".join(parts)


def iter_libsvm(source) -> Iterator[SparseExample]:
    """Stream examples from a path or an open text handle."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from iter_libsvm(fh)
        return
    for line_no, line in enumerate(source, start=1):
        ex = parse_libsvm_line(line, line_no)
        if ex is not None:
            yield ex


def load_libsvm(source) -> list[SparseExample]:
    return list(iter_libsvm(source))


def write_libsvm(examples: Iterable[SparseExample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(format_libsvm_line(ex))
            fh.write("\n")


def meta_of(examples: Iterable[SparseExample]) -> DatasetMeta:
    meta = DatasetMeta()
    for ex in examples:
        meta.add(ex)
    return meta


def scan_meta(path) -> DatasetMeta:
    """Single streaming pass over a LIBSVM file."""
    return meta_of(iter_libsvm(path))


def to_csr(examples: Sequence[SparseExample], dim: int | None = None) -> tuple[sp.csr_matrix, np.ndarray]:
    """Stack examples into a CSR matrix and a label vector."""
    n = len(examples)
    indptr = np.zeros(n + 1, dtype=np.int64)
    for k, ex in enumerate(examples):
        indptr[k + 1] = indptr[k] + ex.x.nnz
    if n:
        indices = np.concatenate([ex.x.indices for ex in examples])
        data = np.concatenate([ex.x.values for ex in examples])
    else:
        indices = np.empty(0, dtype=np.int64)
        data = np.empty(0)
    max_idx = int(indices.max()) + 1 if indices.size else 0
    dim = max(max_idx, dim or 0)
    X = sp.csr_matrix((data, indices, indptr), shape=(n, dim))
    y = np.fromiter((ex.y for ex in examples), dtype=np.int64, count=n)
    return X, y


# -- ordering and sampling ---------------------------------------------------

def permuted_stream(
    dataset: Sequence[SparseExample],
    seed: int,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> list[SparseExample]:
    """Seeded Fisher-Yates reordering of ``dataset``.

    Datasets larger than ``memory_budget`` examples are returned in their
    original order with a warning.
    """
    n = len(dataset)
    if n > memory_budget:
        warnings.warn(
            f"dataset of {n} examples exceeds the permutation budget of {memory_budget}; "
            "streaming in file order",
            RuntimeWarning,
            stacklevel=2,
        )
        return list(dataset)
    order = np.random.default_rng(seed).permutation(n)
    return [dataset[i] for i in order]


def subsample_imbalanced(
    dataset: Sequence[SparseExample], n_pos: int, n_neg: int, seed: int
) -> list[SparseExample]:
    """Sample n_pos positives and n_neg negatives without replacement, then shuffle."""
    pos = [i for i, ex in enumerate(dataset) if ex.y == 1]
    neg = [i for i, ex in enumerate(dataset) if ex.y == -1]
    if n_pos < 0 or n_neg < 0:
        raise DataError("requested counts must be non-negative")
    if len(pos) < n_pos:
        raise DataError(f"not enough positive examples: requested {n_pos}, available {len(pos)}")
    if len(neg) < n_neg:
        raise DataError(f"not enough negative examples: requested {n_neg}, available {len(neg)}")
    rng = np.random.default_rng(seed)
    chosen = np.concatenate([
        rng.choice(np.asarray(pos, dtype=np.int64), size=n_pos, replace=False),
        rng.choice(np.asarray(neg, dtype=np.int64), size=n_neg, replace=False),
    ])
    chosen = chosen[rng.permutation(chosen.size)]
    return [dataset[i] for i in chosen]


# -- synthetic data ----------------------------------------------------------

def _draw_examples(spec: SyntheticSpec, rng: np.random.Generator, n: int,
                   mean: np.ndarray, std: np.ndarray) -> list[SparseExample]:
    ne = spec.n_effective
    eff = rng.normal(size=(n, ne)) * std + mean
    margins = eff @ mean
    labels = np.where(margins >= 0, 1, -1)
    n_pool = spec.ambient_dim - ne
    noise_std = math.sqrt(spec.noise_var)
    eff_idx = np.arange(ne, dtype=np.int64)
    out = []
    for k in range(n):
        if spec.n_noise:
            nidx = np.sort(rng.choice(n_pool, size=spec.n_noise, replace=False)) + ne
            nval = rng.normal(size=spec.n_noise) * noise_std
            idx = np.concatenate([eff_idx, nidx])
            val = np.concatenate([eff[k], nval])
        else:
            idx, val = eff_idx, eff[k]
        out.append(SparseExample(int(labels[k]), SparseVector(idx, val)))
    return out


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[SparseExample], list[SparseExample], DenseWeights]:
    """Gaussian effective block plus per-example noise dimensions.

    The first ``n_effective`` coordinates follow N(mean, diag(var)) with the
    mean and per-dimension variances drawn uniformly from their ranges. The
    separating plane is the mean vector itself and labels are sign(mean . x)
    on the effective block. Each example then gets ``n_noise`` distinct
    coordinates from the remaining dimensions filled with N(0, noise_var).
    """
    rng = np.random.default_rng(spec.seed)
    ne = spec.n_effective
    mean = rng.uniform(*spec.mean_range, size=ne)
    var = rng.uniform(*spec.var_range, size=ne)
    std = np.sqrt(var)
    train = _draw_examples(spec, rng, spec.n_train, mean, std)
    test = _draw_examples(spec, rng, spec.n_test, mean, std)
    plane = np.zeros(spec.ambient_dim)
    plane[:ne] = mean
    return train, test, DenseWeights(plane)
