import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from decompose_symmetric import (
    SymMatrix,
    condition_number,
    pseudo_solve,
    sym_eigenvalues,
    sym_eigh,
)
from dfm_errors import NumericInputError, ParameterError

finite = st.floats(min_value=-10, max_value=10, allow_nan=False, allow_infinity=False)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
def test_eigh_reconstructs_psd_matrix(factor):
    gram = SymMatrix.from_dense(factor @ factor.T)
    w, q = sym_eigh(gram)

    scale = max(gram.frobenius_norm(), 1.0)
    assert np.all(np.diff(w) >= 0)
    np.testing.assert_allclose(q @ np.diag(w) @ q.T, gram.dense, atol=1e-10 * scale)
    np.testing.assert_allclose(q.T @ q, np.eye(gram.order), atol=1e-10)


def test_eigenvalues_match_lapack():
    a = np.random.default_rng(3).normal(size=(7, 7))
    matrix = SymMatrix.from_dense(a + a.T)
    np.testing.assert_allclose(sym_eigenvalues(matrix), np.linalg.eigvalsh(matrix.dense),
                               atol=1e-11)


def test_symmetry_is_exact():
    a = np.array([[1.0, 2.0], [5.0, 3.0]])
    matrix = SymMatrix.from_dense(a)
    np.testing.assert_array_equal(matrix.dense, matrix.dense.T)
    assert matrix.dense[1, 0] == 2.0


def test_augmented_adds_leading_zero_class():
    matrix = SymMatrix.from_dense(np.eye(2) * 3.0).augmented()
    np.testing.assert_array_equal(matrix.dense, np.diag([0.0, 3.0, 3.0]))


def test_permuted():
    a = np.array([[1.0, 0.5, 0.0], [0.5, 2.0, 0.1], [0.0, 0.1, 3.0]])
    perm = [2, 0, 1]
    np.testing.assert_array_equal(SymMatrix.from_dense(a).permuted(perm).dense,
                                  a[np.ix_(perm, perm)])


def test_packed_size_is_checked():
    with pytest.raises(ParameterError):
        SymMatrix(order=3, packed=np.zeros(5))


def test_non_finite_entries_rejected():
    with pytest.raises(NumericInputError):
        sym_eigh(SymMatrix.from_dense([[1.0, np.inf], [np.inf, 1.0]]))


def test_pseudo_solve_on_rank_deficient_matrix():
    v = np.array([1.0, 1.0, 0.0])
    matrix = SymMatrix.from_dense(np.outer(v, v))
    x, rank = pseudo_solve(matrix, np.array([2.0, 2.0, 0.0]))
    assert rank == 1
    np.testing.assert_allclose(x, [1.0, 1.0, 0.0], atol=1e-12)


def test_condition_number():
    assert condition_number(SymMatrix.from_dense(np.diag([2.0, 8.0]))) == pytest.approx(4.0)
    assert condition_number(SymMatrix.from_dense(np.diag([0.0, 1.0]))) == np.inf
