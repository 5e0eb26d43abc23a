import numpy as np
import pytest

from codec.coding import (NORM_MARGIN, ClientResidual, SparseUpdate, choose_pattern_from_client,
                          encode, make_measurement_matrix, normalize_measurement,
                          project_onto_pattern, sparsify, spectral_norm, split, top_indices, unsplit)


def test_split_example():
    np.testing.assert_array_equal(split(np.array([1.0, 2.0, 3.0, 4.0])), [1 + 3j, 2 + 4j])
    np.testing.assert_array_equal(split(np.zeros(6)), np.zeros(3))


def test_unsplit_examples():
    np.testing.assert_array_equal(unsplit(np.array([1 + 3j, 2 + 4j])), [1, 2, 3, 4])
    np.testing.assert_array_equal(unsplit(np.array([1j, 2j])), [0, 0, 1, 2])


def test_split_unsplit_inverse(rng):
    v = rng.standard_normal(100)
    np.testing.assert_array_equal(unsplit(split(v)), v)
    x = rng.standard_normal(7) + 1j * rng.standard_normal(7)
    np.testing.assert_array_equal(split(unsplit(x)), x)


def test_odd_length_is_padded_and_stripped(rng):
    v = rng.standard_normal(9)
    x = split(v)
    assert x.size == 5
    np.testing.assert_array_equal(unsplit(x, d=9), v)
    with pytest.raises(ValueError):
        unsplit(x, d=4)


def test_top_indices_ties_keep_lower_index():
    np.testing.assert_array_equal(top_indices(np.array([1.0, 2.0, 2.0, 2.0]), 2), [1, 2])
    with pytest.raises(ValueError):
        top_indices(np.ones(3), 0)


def test_sparsify_example():
    x = np.array([3 + 4j, 1, 2j])
    sparse, residual = sparsify(x, ClientResidual.zeros(3), 1)
    np.testing.assert_array_equal(sparse.support, [0])
    np.testing.assert_array_equal(sparse.values, [3 + 4j])
    np.testing.assert_array_equal(residual.r, [0, 1, 2j])


def test_sparsify_keep_all(rng):
    x = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    r = ClientResidual(rng.standard_normal(6) + 0j)
    for S in (6, 10):
        sparse, residual = sparsify(x, r, S)
        np.testing.assert_array_equal(sparse.densify(), x + r.r)
        assert np.all(residual.r == 0)


def test_error_feedback_conservation(rng):
    residual = ClientResidual.zeros(50)
    for _ in range(20):
        x = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        old = residual
        sparse, residual = sparsify(x, old, 5)
        np.testing.assert_array_equal(sparse.densify() + residual.r, x + old.r)
        assert sparse.support.size <= 5


def test_sparsify_idempotent_on_sparse_input(rng):
    x = np.zeros(20, dtype=complex)
    x[[2, 7, 11]] = [1, -2j, 3]
    sparse, residual = sparsify(x, ClientResidual.zeros(20), 3)
    again, residual2 = sparsify(sparse.densify(), ClientResidual.zeros(20), 3)
    np.testing.assert_array_equal(again.densify(), x)
    assert np.all(residual.r == 0) and np.all(residual2.r == 0)


def test_sparsify_drops_zero_values():
    sparse, _ = sparsify(np.array([0, 2.0, 0, 0]), ClientResidual.zeros(4), 3)
    np.testing.assert_array_equal(sparse.support, [1])


def test_pattern_choice_and_projection():
    pattern = choose_pattern_from_client(np.array([5.0, 1.0, 3.0]), 2)
    np.testing.assert_array_equal(pattern, [0, 2])
    sparse, residual = project_onto_pattern(np.array([0, 9.0, 0]), ClientResidual.zeros(3), pattern)
    np.testing.assert_array_equal(sparse.support, [0, 2])
    np.testing.assert_array_equal(sparse.values, [0, 0])
    np.testing.assert_array_equal(residual.r, [0, 9, 0])


def test_sparse_update_validation():
    with pytest.raises(ValueError):
        SparseUpdate(support=[2, 1], values=[1, 1], S=2, half_d=4)
    with pytest.raises(ValueError):
        SparseUpdate(support=[0, 1, 2], values=[1, 1, 1], S=2, half_d=4)
    with pytest.raises(ValueError):
        SparseUpdate(support=[4], values=[1], S=1, half_d=4)


@pytest.mark.parametrize("T,half_d", [(20, 60), (60, 20), (5, 5)])
def test_spectral_norm_matches_svd(rng, T, half_d):
    A = rng.standard_normal((T, half_d)) + 1j * rng.standard_normal((T, half_d))
    assert spectral_norm(A) == pytest.approx(np.linalg.norm(A, 2), rel=1e-6)


@pytest.mark.parametrize("T,half_d", [(60, 300), (300, 60)])
def test_spectral_norm_lanczos_path(rng, T, half_d):
    A = rng.standard_normal((T, half_d)) + 1j * rng.standard_normal((T, half_d))
    sigma = spectral_norm(A, dense_limit=10)
    assert sigma == pytest.approx(np.linalg.norm(A, 2), rel=1e-9)
    assert spectral_norm(A, dense_limit=10) == sigma


@pytest.mark.parametrize("T,half_d", [(32, 320), (80, 640), (150, 3189), (320, 6405),
                                     pytest.param(630, 12725, marks=pytest.mark.slow)])
@pytest.mark.parametrize("seed", [0, 1])
def test_measurement_matrix_norm(T, half_d, seed):
    A = make_measurement_matrix(T, half_d, np.random.default_rng(seed))
    assert A.A.shape == (T, half_d)
    measured = np.linalg.norm(A.A, 2)
    assert measured == pytest.approx(1 / NORM_MARGIN, abs=1e-6)
    assert A.norm == pytest.approx(measured, abs=1e-9)
    assert A.norm < 1


def test_unitary_measurement_matrix(rng):
    A = make_measurement_matrix(40, 30, rng, kind="unitary")
    np.testing.assert_allclose(A.A.conj().T @ A.A, np.eye(30) / NORM_MARGIN ** 2, atol=1e-12)
    with pytest.raises(ValueError):
        make_measurement_matrix(10, 30, rng, kind="unitary")
    with pytest.raises(ValueError):
        make_measurement_matrix(10, 30, rng, kind="hadamard")


def test_scalar_normalization():
    A = normalize_measurement(np.array([[2.0]]))
    assert A.A[0, 0] == pytest.approx(1 / 1.01)
    with pytest.raises(ValueError):
        normalize_measurement(np.zeros((2, 2)))


def test_encode(rng):
    A = make_measurement_matrix(8, 16, rng)
    zero = SparseUpdate(support=[], values=[], S=2, half_d=16)
    assert np.all(encode(zero, A) == 0)
    one = SparseUpdate(support=[5], values=[1.0], S=2, half_d=16)
    np.testing.assert_allclose(encode(one, A), A.A[:, 5])
    values = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    sparse = SparseUpdate(support=[3, 9], values=values, S=2, half_d=16)
    x = encode(sparse, A)
    np.testing.assert_allclose(x, A.A @ sparse.densify())
    assert np.linalg.norm(x) < np.linalg.norm(values)
    with pytest.raises(ValueError):
        encode(SparseUpdate(support=[1], values=[1.0], S=1, half_d=4), A)
