"""Named datasets: LibSVM files when available, deterministic look-alikes otherwise.

``resolve("synthetic:mushrooms")`` returns the real ``mushrooms`` file when
``$SFWZOO_DATA_DIR/mushrooms`` exists and a generated stand-in with the same
shape and sparsity pattern otherwise. The stand-ins use planted logistic
models so that the optimisation problems are non-trivial but well posed.
"""
from __future__ import annotations

import os

import numpy as np

from .core import ValidationError
from .objective import Dataset, load_libsvm

DATA_DIR_ENV = "SFWZOO_DATA_DIR"

# attribute cardinalities of a 22-attribute one-hot encoding with 112 columns
_MUSHROOM_CARDS = (6, 4, 10, 2, 9, 2, 2, 2, 12, 2, 5, 4, 4, 9, 9, 1, 4, 3, 5, 9, 6, 2)


def mushrooms_like(n_rows: int = 8124, seed: int = 0) -> Dataset:
    """One-hot rows (22 ones per row out of 112 columns) with nearly separable labels."""
    cards = np.array(_MUSHROOM_CARDS)
    assert cards.sum() == 112 and cards.size == 22
    rng = np.random.default_rng([seed, 112])
    offsets = np.concatenate([[0], np.cumsum(cards)[:-1]])
    # skewed category frequencies, as in real categorical data
    cols = np.empty((n_rows, cards.size), dtype=np.int64)
    for a, (card, off) in enumerate(zip(cards, offsets)):
        probs = rng.dirichlet(np.full(card, 0.7))
        cols[:, a] = off + rng.choice(card, size=n_rows, p=probs)
    cols.sort(axis=1)
    w = rng.standard_normal(112) * 1.5
    score = w[cols].sum(axis=1)
    score -= np.median(score)
    labels = np.where(rng.random(n_rows) < 1.0 / (1.0 + np.exp(-2.0 * score)), 1.0, -1.0)
    indptr = np.arange(0, n_rows * cards.size + 1, cards.size, dtype=np.int64)
    return Dataset(indptr, cols.ravel(), np.ones(cols.size), labels, 112)


def w1a_like(n_rows: int = 2477, seed: int = 0) -> Dataset:
    """Sparse binary rows over 300 features (about 4% density), about 3% positives."""
    dim = 300
    rng = np.random.default_rng([seed, 300])
    # feature popularity follows a heavy tail
    pop = rng.pareto(1.2, dim) + 0.05
    pop = np.minimum(pop / pop.sum() * dim * 0.04, 0.6)
    mask = rng.random((n_rows, dim)) < pop
    empty = ~mask.any(axis=1)
    mask[empty, rng.integers(dim, size=int(empty.sum()))] = True
    w = rng.standard_normal(dim) * 2.0
    score = (mask * w).sum(axis=1)
    # calibrate the intercept so about 3% of labels are positive
    cut = np.quantile(score, 0.97)
    prob = 1.0 / (1.0 + np.exp(-3.0 * (score - cut)))
    labels = np.where(rng.random(n_rows) < prob, 1.0, -1.0)
    rows, cols = np.nonzero(mask)
    indptr = np.concatenate([[0], np.cumsum(mask.sum(axis=1))]).astype(np.int64)
    return Dataset(indptr, cols, np.ones(cols.size), labels, dim)


def gaussian_sparse(n_rows: int, dim: int, density: float = 0.3, seed: int = 0) -> Dataset:
    rng = np.random.default_rng([seed, dim])
    X = rng.standard_normal((n_rows, dim)) * (rng.random((n_rows, dim)) < density)
    w = rng.standard_normal(dim)
    y = np.where(rng.random(n_rows) < 1.0 / (1.0 + np.exp(-X @ w)), 1.0, -1.0)
    return Dataset.from_dense(X, y)


_GENERATORS = {"mushrooms": mushrooms_like, "w1a": w1a_like}


def resolve(name: str, rows: int | None = None, seed: int = 0) -> Dataset:
    """Load a dataset by path or by ``synthetic:<name>``.

    Synthetic names: ``mushrooms``, ``w1a`` and ``gauss-<n>x<dim>``.
    ``rows`` keeps only the first ``rows`` samples.
    """
    if name.startswith("synthetic:"):
        key = name.split(":", 1)[1]
        data_dir = os.environ.get(DATA_DIR_ENV)
        if key in _GENERATORS:
            real = os.path.join(data_dir, key) if data_dir else None
            ds = load_libsvm(real) if real and os.path.exists(real) else _GENERATORS[key](seed=seed)
        elif key.startswith("gauss-"):
            try:
                n_s, d_s = key[len("gauss-"):].split("x")
                ds = gaussian_sparse(int(n_s), int(d_s), seed=seed)
            except ValueError:
                raise ValidationError(f"bad synthetic spec {name!r}; expected gauss-<n>x<dim>") from None
        else:
            raise ValidationError(f"unknown synthetic dataset {key!r}")
    else:
        if not os.path.exists(name):
            raise ValidationError(f"dataset file not found: {name}")
        ds = load_libsvm(name)
    if rows is not None:
        if rows < 1:
            raise ValidationError("dataset.rows must be >= 1")
        ds = ds.head(rows)
    return ds
