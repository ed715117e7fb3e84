import numpy as np
import pytest

from splitvae.core import RngStream, matmul, mean_and_cov, psd_matrix_sqrt, sample_standard_normal
from splitvae.core.numerics import as_tensor
from splitvae.errors import DimensionError, InsufficientSamplesError, NotPsdError, NumericError


def test_rng_stream_is_reproducible_and_keyed():
    a = RngStream(7, 1).standard_normal((3, 2))
    b = RngStream(7, 1).standard_normal((3, 2))
    c = RngStream(7, 2).standard_normal((3, 2))
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_fork_does_not_advance_parent():
    parent = RngStream(7, 0)
    child = parent.fork(3, 4)
    first = parent.standard_normal(4)
    np.testing.assert_array_equal(first, RngStream(7, 0).standard_normal(4))
    np.testing.assert_array_equal(child.standard_normal(4), RngStream(7, 0).fork(3, 4).standard_normal(4))
    assert not np.allclose(RngStream(7, 0).fork(3, 4).standard_normal(4), RngStream(7, 0).fork(4, 3).standard_normal(4))


def test_matmul_checks_inner_dimension():
    np.testing.assert_allclose(matmul([[1, 2]], [[3], [4]]), [[11.0]])
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def _naive_matmul(a, b):
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def test_matmul_identity():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(matmul(np.eye(2), m), m)


@pytest.mark.parametrize("shape,atol", [((5, 7, 3), 1e-12), ((64, 64, 64), 1e-11)])
def test_matmul_matches_triple_loop(shape, atol):
    m, k, n = shape
    gen = np.random.default_rng(m)
    a = gen.standard_normal((m, k))
    b = gen.standard_normal((k, n))
    np.testing.assert_allclose(matmul(a, b), _naive_matmul(a, b), rtol=0, atol=atol)


def test_sample_standard_normal_moments():
    draws = sample_standard_normal(RngStream(11, 3), 100_000)
    assert abs(draws.mean()) < 0.02
    assert abs(draws.var() - 1.0) < 0.03
    np.testing.assert_array_equal(draws, sample_standard_normal(RngStream(11, 3), 100_000))


def test_matmul_rejects_non_finite():
    with pytest.raises(NumericError):
        matmul([[np.inf]], [[1.0]])


def test_psd_matrix_sqrt_squares_back():
    gen = np.random.default_rng(0)
    b = gen.standard_normal((5, 5))
    a = b @ b.T
    root = psd_matrix_sqrt(a)
    np.testing.assert_allclose(root @ root, a, atol=1e-10)
    np.testing.assert_allclose(root, root.T, atol=1e-14)


def test_psd_matrix_sqrt_of_identity_and_zero():
    np.testing.assert_allclose(psd_matrix_sqrt(np.eye(3)), np.eye(3), atol=1e-14)
    np.testing.assert_allclose(psd_matrix_sqrt(np.zeros((2, 2))), np.zeros((2, 2)))


def test_psd_matrix_sqrt_rejects_bad_input():
    with pytest.raises(NotPsdError):
        psd_matrix_sqrt([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(NotPsdError):
        psd_matrix_sqrt([[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(DimensionError):
        psd_matrix_sqrt(np.ones((2, 3)))


def test_mean_and_cov_matches_numpy():
    x = np.random.default_rng(1).standard_normal((50, 3))
    mu, cov = mean_and_cov(x)
    np.testing.assert_allclose(mu, x.mean(axis=0))
    np.testing.assert_allclose(cov, np.cov(x, rowvar=False), atol=1e-12)


def test_mean_and_cov_needs_two_rows():
    with pytest.raises(InsufficientSamplesError):
        mean_and_cov(np.ones((1, 3)))


def test_as_tensor_checks_rank():
    with pytest.raises(DimensionError):
        as_tensor([1.0, 2.0], 2)
