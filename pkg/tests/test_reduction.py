import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uq_adapt.reduction import (
    KernelDescriptor,
    backward_map,
    center_gram,
    fit_kpca,
    gram,
    kernel_eval,
    preimage_weights,
    project,
    reconstruction_error,
    retained_count,
    select_kernel,
)

LIN = KernelDescriptor("linear")
POLY = KernelDescriptor("polynomial", b=0.1, p=3)


def pca_scores(X):
    # classical PCA on the rows-as-samples matrix via SVD
    Xc = (X - X.mean(axis=1, keepdims=True)).T
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    return (U * s).T, s**2


def test_kernel_eval_examples():
    assert kernel_eval([1.0, 2.0], [1.0, 2.0], KernelDescriptor("gaussian", beta=3.0)) == 1.0
    assert kernel_eval([1.0, 0.0], [0.0, 1.0], LIN) == 0.0
    assert kernel_eval([1.0, 0.0], [1.0, 0.0], POLY) == pytest.approx(1.1 * 1.1 * 1.1, rel=1e-15)


def test_gram_matches_kernel_eval():
    rng = np.random.default_rng(0)
    A, B = rng.standard_normal((4, 5)), rng.standard_normal((4, 3))
    for kern in (LIN, POLY, KernelDescriptor("gaussian", beta=0.3)):
        G = gram(A, B, kern)
        ref = np.array([[kernel_eval(A[:, i], B[:, j], kern) for j in range(3)] for i in range(5)])
        np.testing.assert_allclose(G, ref, rtol=1e-13)


def test_descriptor_validation():
    with pytest.raises(ValueError):
        KernelDescriptor("gaussian")
    with pytest.raises(ValueError):
        KernelDescriptor("polynomial", p=0)
    with pytest.raises(ValueError):
        KernelDescriptor("rbf")


def test_linear_kernel_matches_svd_pca():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((50, 40))
    m = fit_kpca(X, LIN, retain_fraction=1.0)
    ref, sv2 = pca_scores(X)
    np.testing.assert_allclose(m.eigvals[:39], sv2[:39], rtol=1e-9)
    k = min(m.k, 39)
    for c in range(k):
        a, b = m.Z[c], ref[c]
        sign = np.sign(a @ b)
        assert np.max(np.abs(a - sign * b)) <= 1e-8 * np.max(np.abs(b))


def test_symmetric_inputs_give_opposite_scores():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((10, 30))
    m = fit_kpca(X, LIN)
    mean = X.mean(axis=1)
    delta = rng.standard_normal(10)
    np.testing.assert_allclose(project(m, mean + delta), -project(m, mean - delta), atol=1e-12)


def test_identical_columns_degenerate():
    X = np.tile(np.arange(5.0)[:, None], (1, 6))
    m = fit_kpca(X, POLY)
    assert m.k == 1
    np.testing.assert_allclose(m.eigvals, 0.0, atol=1e-9)
    np.testing.assert_array_equal(m.Z, 0.0)


def test_input_validation():
    with pytest.raises(ValueError):
        fit_kpca(np.ones((3, 1)), LIN)
    X = np.ones((3, 4))
    X[0, 0] = np.nan
    with pytest.raises(ValueError):
        fit_kpca(X, LIN)


def test_alpha_normalisation_and_retention():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((8, 25)) ** 2
    m = fit_kpca(X, POLY, retain_fraction=0.95)
    np.testing.assert_allclose(m.eigvals[:m.k] * np.sum(m.alphas**2, axis=0), 1.0, rtol=1e-10)
    assert m.retained_fraction >= 0.95 - 1e-12
    assert retained_count(m.eigvals, 0.95) == m.k
    if m.k > 1:
        pos = np.maximum(m.eigvals, 0)
        assert pos[: m.k - 1].sum() / pos.sum() < 0.95


def test_retained_count_floor():
    assert retained_count(np.zeros(4), 0.9) == 1
    assert retained_count(np.array([10.0, 0.0]), 0.9) == 1
    assert retained_count(np.array([1.0, 1.0, 1.0, 1.0]), 1.0) == 4


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 12), elements=st.floats(-3, 3)))
def test_centering_idempotent_and_trace(X):
    K = gram(X, X, POLY)
    Kc = center_gram(K)
    again = center_gram(Kc)
    # relative to the centred matrix, with a rounding floor from the raw Gram entries
    assert np.linalg.norm(again - Kc) <= 1e-12 * np.linalg.norm(Kc) + 1e-15 * np.linalg.norm(K)
    m = fit_kpca(X, POLY)
    np.testing.assert_allclose(m.eigvals.sum(), np.trace(Kc), rtol=1e-8, atol=1e-10 * np.abs(K).max())
    assert m.eigvals.min() >= -1e-10 * max(np.trace(Kc), 1e-300) - 1e-12


@pytest.mark.parametrize("kern", [LIN, POLY, KernelDescriptor("gaussian", beta=0.5)])
def test_training_points_project_and_snap_back_exactly(kern):
    rng = np.random.default_rng(4)
    X = rng.uniform(0.5, 1.5, (20, 15))
    m = fit_kpca(X, kern)
    Z = project(m, X)
    np.testing.assert_allclose(Z, m.Z, rtol=1e-8, atol=1e-8 * np.abs(m.Z).max())
    np.testing.assert_array_equal(backward_map(m, m.Z), X)
    np.testing.assert_array_equal(backward_map(m, Z), X)


def test_equidistant_preimage_averages():
    X = np.array([[1.0, 3.0], [2.0, 6.0]])
    m = fit_kpca(X, LIN)
    mid = m.Z.mean(axis=1)
    np.testing.assert_allclose(backward_map(m, mid), X.mean(axis=1), rtol=1e-15)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (9, 7), elements=st.floats(-10, 10)))
def test_preimage_weights_normalised(zq):
    rng = np.random.default_rng(5)
    m = fit_kpca(rng.standard_normal((9, 30)), LIN, retain_fraction=0.5)
    zq = zq[: m.k]
    W = preimage_weights(m, zq)
    assert np.all(W >= 0)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)


def test_select_kernel_prefers_linear_on_rank_one_data():
    rng = np.random.default_rng(6)
    X = np.outer(rng.standard_normal(30), rng.standard_normal(40))
    big_beta = KernelDescriptor("gaussian", beta=1e6)
    assert select_kernel(X, [big_beta, LIN], seed=0) == LIN
    assert select_kernel(X, [POLY]) == POLY
    assert select_kernel(X, [big_beta, LIN], seed=3) == select_kernel(X, [big_beta, LIN], seed=3)
    with pytest.raises(ValueError):
        select_kernel(X, [])


def test_reconstruction_error_zero_on_training_columns():
    rng = np.random.default_rng(7)
    X = rng.uniform(1, 2, (10, 12))
    m = fit_kpca(X, POLY)
    np.testing.assert_array_equal(reconstruction_error(m, X), 0.0)


def test_flip_negates_scores():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((5, 10))
    m = fit_kpca(X, LIN, retain_fraction=0.99)
    f = m.flip(-np.ones(m.k))
    np.testing.assert_array_equal(f.Z, -m.Z)
    np.testing.assert_allclose(project(f, X[:, 0]), -project(m, X[:, 0]))
