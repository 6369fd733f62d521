import numpy as np
import pytest

from sfwzoo import kernels
from sfwzoo.datasets import w1a_like

BACKENDS = kernels.available_backends()


def test_active_backend_is_reported():
    assert kernels.BACKEND in BACKENDS


@pytest.fixture(scope="module")
def csr():
    ds = w1a_like(n_rows=300)
    return ds


@pytest.mark.skipif("cython" not in BACKENDS, reason="extension not built")
def test_backends_agree(csr):
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    rng = np.random.default_rng(0)
    x = rng.standard_normal(csr.dim)
    rows = np.sort(rng.choice(csr.n_samples, 37, replace=False)).astype(np.int64)
    w = rng.standard_normal(rows.size)
    args = (csr.indptr, csr.indices, csr.data)
    np.testing.assert_allclose(cy.row_margins(*args, x, rows), py.row_margins(*args, x, rows), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(cy.all_margins(*args, x), py.all_margins(*args, x), rtol=1e-13, atol=1e-13)
    o1, o2 = np.zeros(csr.dim), np.zeros(csr.dim)
    cy.add_weighted_rows(*args, rows, w, o1)
    py.add_weighted_rows(*args, rows, w, o2)
    np.testing.assert_allclose(o1, o2, rtol=1e-13, atol=1e-13)
    d1, d2 = np.empty((rows.size, csr.dim)), np.empty((rows.size, csr.dim))
    cy.rows_to_dense(*args, rows, w, d1)
    py.rows_to_dense(*args, rows, w, d2)
    np.testing.assert_array_equal(d1, d2)
    cp, ci, cd = csr.csc
    wt = rng.standard_normal(csr.n_samples)
    for j in (0, 5, csr.dim - 1):
        assert cy.weighted_column(cp, ci, cd, j, wt) == pytest.approx(py.weighted_column(cp, ci, cd, j, wt), rel=1e-13, abs=1e-13)
    t = np.array([-800.0, -3.0, 0.0, 34.9, 35.1, 900.0])
    assert cy.logistic_loss_sum(t) == pytest.approx(py.logistic_loss_sum(t), rel=1e-15)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_kernels_match_scipy(name, csr):
    k = BACKENDS[name]
    rng = np.random.default_rng(1)
    x = rng.standard_normal(csr.dim)
    np.testing.assert_allclose(k.all_margins(csr.indptr, csr.indices, csr.data, x), csr.matrix @ x, rtol=1e-12, atol=1e-12)
    rows = np.arange(0, csr.n_samples, 3, dtype=np.int64)
    w = rng.standard_normal(rows.size)
    out = np.zeros(csr.dim)
    k.add_weighted_rows(csr.indptr, csr.indices, csr.data, rows, w, out)
    np.testing.assert_allclose(out, csr.matrix[rows].T @ w, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_loss_sum_overflow_branch(name):
    k = BACKENDS[name]
    assert k.logistic_loss_sum(np.array([1000.0])) == 1000.0
    assert k.logistic_loss_sum(np.array([-1000.0])) == 0.0
    assert k.logistic_loss_sum(np.array([0.0])) == pytest.approx(np.log(2), rel=1e-15)
