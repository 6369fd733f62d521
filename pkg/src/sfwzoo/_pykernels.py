"""Pure-numpy fallback for the compiled sparse kernels.

Selected automatically when ``_ckernels`` is not built, or on request via
``SFWZOO_BACKEND=python``.
"""
import numpy as np


def _gather(indptr, rows):
    starts = indptr[rows]
    lens = indptr[rows + 1] - starts
    total = int(lens.sum())
    offsets = np.cumsum(lens) - lens
    pos = np.repeat(starts - offsets, lens) + np.arange(total, dtype=np.int64)
    owner = np.repeat(np.arange(rows.shape[0], dtype=np.int64), lens)
    return pos, owner


def row_margins(indptr, indices, data, x, rows):
    pos, owner = _gather(indptr, rows)
    prod = data[pos] * x[indices[pos]]
    return np.bincount(owner, weights=prod, minlength=rows.shape[0]).astype(np.float64)


def all_margins(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    owner = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    return np.bincount(owner, weights=data * x[indices], minlength=n).astype(np.float64)


def add_weighted_rows(indptr, indices, data, rows, weights, out):
    pos, owner = _gather(indptr, rows)
    out += np.bincount(indices[pos], weights=data[pos] * weights[owner], minlength=out.shape[0])


def rows_to_dense(indptr, indices, data, rows, weights, out):
    pos, owner = _gather(indptr, rows)
    out[...] = 0.0
    out[owner, indices[pos]] = data[pos] * weights[owner]


def weighted_column(cindptr, cindices, cdata, j, weights):
    lo, hi = cindptr[j], cindptr[j + 1]
    return float(np.dot(cdata[lo:hi], weights[cindices[lo:hi]]))


def logistic_loss_sum(t):
    big = t > 35.0
    out = np.empty_like(t)
    out[~big] = np.log1p(np.exp(t[~big]))
    tb = t[big]
    out[big] = tb + np.log1p(np.exp(-tb))
    return float(out.sum())
