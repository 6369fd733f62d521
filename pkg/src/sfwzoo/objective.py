"""Finite-sum logistic regression over sparse LibSVM data.

``f(x) = (w/n) sum_i log(1 + exp(-b_i <a_i, x>))`` with a scale ``w`` that is
1 for the global objective and rescales worker shards so that the plain
average of worker objectives equals the global one.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import expit

from . import kernels
from .core import ValidationError

POWER_ITERATIONS = 50


class Dataset:
    """Immutable CSR rows with labels in {-1, +1}."""

    def __init__(self, indptr, indices, data, labels, dim: int):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.float64)
        self.dim = int(dim)
        for arr in (self.indptr, self.indices, self.data, self.labels):
            arr.setflags(write=False)
        self._validate()

    def _validate(self):
        n = self.labels.shape[0]
        if n == 0:
            raise ValidationError("empty dataset")
        if self.indptr.shape[0] != n + 1 or self.indptr[0] != 0:
            raise ValidationError("indptr does not match the number of labels")
        if np.any(np.diff(self.indptr) < 0) or self.indptr[-1] != self.indices.shape[0]:
            raise ValidationError("malformed indptr")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.dim):
            raise ValidationError("feature index out of range")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("non-finite feature value")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValidationError("labels must be -1 or +1")

    @classmethod
    def from_dense(cls, features, labels) -> "Dataset":
        csr = sparse.csr_matrix(np.asarray(features, dtype=np.float64))
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, labels, csr.shape[1])

    @classmethod
    def from_scipy(cls, matrix, labels) -> "Dataset":
        csr = sparse.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.indptr, csr.indices, csr.data, labels, csr.shape[1])

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]

    @property
    def nnz(self) -> int:
        return self.indices.shape[0]

    @cached_property
    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.data, self.indices, self.indptr), shape=(self.n_samples, self.dim)
        )

    @cached_property
    def csc(self):
        """``(indptr, indices, data)`` of the column-major copy."""
        c = self.matrix.tocsc()
        c.sort_indices()
        return (
            np.ascontiguousarray(c.indptr, dtype=np.int64),
            np.ascontiguousarray(c.indices, dtype=np.int64),
            np.ascontiguousarray(c.data, dtype=np.float64),
        )

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        sub = self.matrix[rows]
        return Dataset(sub.indptr, sub.indices, sub.data, self.labels[rows], self.dim)

    def head(self, n: int) -> "Dataset":
        return self.subset(np.arange(min(int(n), self.n_samples)))

    def to_libsvm(self) -> str:
        out = io.StringIO()
        for i in range(self.n_samples):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            feats = " ".join(
                f"{j + 1}:{v!r}" for j, v in zip(self.indices[lo:hi].tolist(), self.data[lo:hi].tolist())
            )
            label = "+1" if self.labels[i] > 0 else "-1"
            out.write(f"{label} {feats}".rstrip() + "\n")
        return out.getvalue()

    def __repr__(self):
        return f"Dataset(n_samples={self.n_samples}, dim={self.dim}, nnz={self.nnz})"


_LABEL_MAPS = (
    ({-1.0, 1.0}, {-1.0: -1.0, 1.0: 1.0}),
    ({0.0, 1.0}, {0.0: -1.0, 1.0: 1.0}),
    ({1.0, 2.0}, {1.0: 1.0, 2.0: -1.0}),
)


def parse_libsvm(stream, n_features: int | None = None) -> Dataset:
    """Parse LibSVM text (``label idx:val ...``, 1-based indices).

    ``stream`` is a string of file contents, a file object or any iterable
    of lines. Indices within a line must be strictly increasing. Labels
    may be -1/+1, 0/1 (0 -> -1) or 1/2 (2 -> -1).
    """
    if isinstance(stream, str):
        lines: Iterable[str] = stream.splitlines()
    else:
        lines = stream
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    raw_labels: list[float] = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise ValidationError(f"line {lineno}: malformed label {tokens[0]!r}") from None
        prev = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ValidationError(f"line {lineno}: malformed token {tok!r}")
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise ValidationError(f"line {lineno}: malformed token {tok!r}") from None
            if idx < 1:
                raise ValidationError(f"line {lineno}: index {idx} < 1")
            if idx <= prev:
                raise ValidationError(f"line {lineno}: indices not strictly increasing at {tok!r}")
            if not math.isfinite(val):
                raise ValidationError(f"line {lineno}: non-finite value in {tok!r}")
            prev = idx
            indices.append(idx - 1)
            data.append(val)
        raw_labels.append(label)
        indptr.append(len(indices))
    if not raw_labels:
        raise ValidationError("empty dataset")

    seen = set(raw_labels)
    for allowed, mapping in _LABEL_MAPS:
        if seen <= allowed:
            labels = [mapping[v] for v in raw_labels]
            break
    else:
        bad = sorted(seen - {-1.0, 0.0, 1.0, 2.0})[:3] or sorted(seen)
        raise ValidationError(f"unknown label value(s) {bad}")

    dim = (max(indices) + 1) if indices else 1
    if n_features is not None:
        if n_features < dim:
            raise ValidationError(f"n_features={n_features} smaller than max index {dim}")
        dim = n_features
    return Dataset(indptr, indices, data, labels, dim)


def load_libsvm(path: str | os.PathLike, n_features: int | None = None) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_libsvm(fh, n_features=n_features)


@dataclass(frozen=True)
class ObjectiveMeta:
    L: float
    L_i: np.ndarray
    L_tilde: float

    @property
    def L_max(self) -> float:
        return float(self.L_i.max())


@dataclass(frozen=True)
class Partition:
    """Disjoint sample groups, one per worker."""

    groups: tuple

    def __post_init__(self):
        allidx = np.concatenate(self.groups) if self.groups else np.array([], dtype=np.int64)
        if len(self.groups) == 0 or any(len(g) == 0 for g in self.groups):
            raise ValidationError("every worker needs at least one sample")
        if np.unique(allidx).size != allidx.size:
            raise ValidationError("partition groups overlap")

    @property
    def n_workers(self) -> int:
        return len(self.groups)

    @classmethod
    def contiguous(cls, n_samples: int, n_workers: int) -> "Partition":
        if not (1 <= n_workers <= n_samples):
            raise ValidationError(f"n_workers={n_workers} must be in [1, {n_samples}]")
        return cls(tuple(np.array_split(np.arange(n_samples, dtype=np.int64), n_workers)))

    @classmethod
    def shuffled(cls, n_samples: int, n_workers: int, seed: int = 0) -> "Partition":
        if not (1 <= n_workers <= n_samples):
            raise ValidationError(f"n_workers={n_workers} must be in [1, {n_samples}]")
        perm = np.random.default_rng(seed).permutation(n_samples).astype(np.int64)
        return cls(tuple(np.sort(g) for g in np.array_split(perm, n_workers)))

    def covers(self, n_samples: int) -> bool:
        allidx = np.sort(np.concatenate(self.groups))
        return allidx.size == n_samples and bool(np.all(allidx == np.arange(n_samples)))


def logistic_loss(t):
    """Elementwise ``log(1 + exp(t))``, switching to ``t + log1p(exp(-t))`` above 35."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    big = t > 35.0
    out[~big] = np.log1p(np.exp(t[~big]))
    out[big] = t[big] + np.log1p(np.exp(-t[big]))
    return out


class LogisticObjective:
    """``f = (1/n) sum_i f_i`` with ``f_i(x) = scale * log(1 + exp(-b_i <a_i, x>))``."""

    def __init__(self, dataset: Dataset, scale: float = 1.0):
        self.dataset = dataset
        self.scale = float(scale)
        self.n_samples = dataset.n_samples
        self.dim = dataset.dim
        self._all_rows = np.arange(self.n_samples, dtype=np.int64)
        self._cache: list = []

    # margins m_i = b_i <a_i, x>, memoised for the two most recent points
    def _state(self, x):
        for entry in self._cache:
            if np.array_equal(entry[0], x):
                return entry
        d = self.dataset
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"x has shape {x.shape}, expected ({self.dim},)")
        m = kernels.all_margins(d.indptr, d.indices, d.data, x) * d.labels
        # d f_i / d<a_i, x> for every sample
        coef = -d.labels * expit(-m) * self.scale
        entry = (x.copy(), m, coef)
        self._cache.insert(0, entry)
        del self._cache[2:]
        return entry

    def _rows(self, S) -> np.ndarray:
        rows = np.atleast_1d(np.asarray(S, dtype=np.int64))
        if rows.size == 0:
            raise ValidationError("empty sample index set")
        if rows.min() < 0 or rows.max() >= self.n_samples:
            raise ValidationError("sample index out of range")
        return np.ascontiguousarray(rows)

    def margins(self, x) -> np.ndarray:
        return self._state(x)[1]

    def value(self, x) -> float:
        m = self._state(x)[1]
        return self.scale * kernels.logistic_loss_sum(np.ascontiguousarray(-m)) / self.n_samples

    def sample_values(self, x) -> np.ndarray:
        return self.scale * logistic_loss(-self._state(x)[1])

    def full_gradient(self, x) -> np.ndarray:
        _, _, coef = self._state(x)
        d = self.dataset
        out = np.zeros(self.dim)
        kernels.add_weighted_rows(d.indptr, d.indices, d.data, self._all_rows, coef / self.n_samples, out)
        return out

    def sample_gradient_batch(self, S, x) -> np.ndarray:
        """Mean of ``grad f_i(x)`` over ``i`` in ``S``."""
        rows = self._rows(S)
        coef = self._coef_rows(rows, x)
        d = self.dataset
        out = np.zeros(self.dim)
        kernels.add_weighted_rows(d.indptr, d.indices, d.data, rows, coef / rows.size, out)
        return out

    def sample_gradient(self, i: int, x) -> np.ndarray:
        return self.sample_gradient_batch([i], x)

    def sample_gradients(self, S, x) -> np.ndarray:
        """Dense ``(len(S), dim)`` array of per-sample gradients."""
        rows = self._rows(S)
        coef = self._coef_rows(rows, x)
        d = self.dataset
        out = np.empty((rows.size, self.dim))
        kernels.rows_to_dense(d.indptr, d.indices, d.data, rows, coef, out)
        return out

    def _coef_rows(self, rows, x) -> np.ndarray:
        for entry in self._cache:
            if np.array_equal(entry[0], x):
                return entry[2][rows]
        d = self.dataset
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"x has shape {x.shape}, expected ({self.dim},)")
        m = kernels.row_margins(d.indptr, d.indices, d.data, x, rows) * d.labels[rows]
        return -d.labels[rows] * expit(-m) * self.scale

    def partial_derivative(self, j: int, x) -> float:
        """``d f / d x_j`` via the column of ``A``; the full gradient is never formed."""
        if not (0 <= j < self.dim):
            raise ValidationError(f"coordinate {j} out of range")
        _, _, coef = self._state(x)
        cp, ci, cd = self.dataset.csc
        return kernels.weighted_column(cp, ci, cd, int(j), coef) / self.n_samples

    def forward_difference(self, j: int, x, tau: float) -> float:
        """``(f(x + tau e_j) - f(x)) / tau``.

        Only rows with a nonzero in column ``j`` change, so the difference is
        summed over those rows; the other terms cancel exactly.
        """
        if not (0 <= j < self.dim):
            raise ValidationError(f"coordinate {j} out of range")
        if not tau > 0:
            raise ValidationError("tau must be > 0")
        _, m, _ = self._state(x)
        cp, ci, cd = self.dataset.csc
        rows = ci[cp[j]:cp[j + 1]]
        shift = tau * cd[cp[j]:cp[j + 1]] * self.dataset.labels[rows]
        m_rows = m[rows]
        diff = logistic_loss(-(m_rows + shift)) - logistic_loss(-m_rows)
        return self.scale * float(diff.sum()) / self.n_samples / tau

    def smoothness_constants(self) -> ObjectiveMeta:
        """``L_i = scale ||a_i||^2 / 4``, ``L`` from power iteration on ``A^T A``."""
        d = self.dataset
        A = d.matrix
        row_sq = np.asarray(A.multiply(A).sum(axis=1)).ravel()
        L_i = self.scale * row_sq / 4.0
        v = np.random.default_rng(0).standard_normal(self.dim)
        v /= np.linalg.norm(v)
        lam = 0.0
        for _ in range(POWER_ITERATIONS):
            w = A.T @ (A @ v)
            lam = float(np.linalg.norm(w))
            if lam == 0.0:
                break
            v = w / lam
        L = self.scale * lam / (4.0 * self.n_samples)
        return ObjectiveMeta(L=L, L_i=L_i, L_tilde=float(np.sqrt(np.mean(L_i**2))))

    def worker_objectives(self, partition: Partition) -> list["LogisticObjective"]:
        """Shard objectives whose plain average equals this objective."""
        if not partition.covers(self.n_samples):
            raise ValidationError("partition does not cover the dataset")
        n = partition.n_workers
        return [
            LogisticObjective(self.dataset.subset(g), scale=self.scale * n * len(g) / self.n_samples)
            for g in partition.groups
        ]


def toy_datasets() -> Sequence[Dataset]:
    """Three small fixed datasets used throughout the tests."""
    a = Dataset.from_dense(
        [[1.0, 0.0, -2.0], [0.5, 1.5, 0.0], [0.0, -1.0, 1.0], [2.0, 0.5, 0.5]],
        [1, -1, 1, -1],
    )
    b = Dataset.from_dense(
        [
            [0.3, -1.2, 0.0, 0.8, 0.0, 1.1],
            [1.0, 0.0, 0.0, -0.4, 2.0, 0.0],
            [0.0, 0.7, -1.5, 0.0, 0.0, 0.2],
            [-0.9, 0.0, 0.6, 1.3, -0.2, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.5, -1.0],
            [1.4, -0.3, 0.0, 0.0, 0.0, 0.9],
            [0.2, 0.2, 0.2, 0.2, 0.2, 0.2],
        ],
        [1, 1, -1, -1, 1, -1, 1],
    )
    rng = np.random.default_rng(20240611)
    dense = rng.standard_normal((10, 5)) * (rng.random((10, 5)) < 0.6)
    c = Dataset.from_dense(dense, np.where(rng.random(10) < 0.5, -1, 1))
    return (a, b, c)
