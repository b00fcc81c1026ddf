"""Kernel tests: eigen/SVD contracts and waterfilling."""

import numpy as np
import pytest

from netmimo import (
    ContractViolationError,
    SingularMatrixError,
    hermitian_top_eigs,
    psd_inv_sqrt,
    thin_svd,
    waterfill_budget,
    waterfill_eval,
)


def random_hermitian(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a + a.conj().T


def random_pd(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + n * np.eye(n)


def char_poly_roots_3x3(a):
    """Independent eigenvalue oracle for a 3x3 Hermitian matrix: roots of the
    characteristic polynomial with explicitly computed coefficients."""
    tr = np.trace(a)
    minors = 0.0
    for i in range(3):
        idx = [j for j in range(3) if j != i]
        sub = a[np.ix_(idx, idx)]
        minors += sub[0, 0] * sub[1, 1] - sub[0, 1] * sub[1, 0]
    det = (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )
    roots = np.roots([1.0, -tr.real, minors.real, -det.real])
    return np.sort(roots.real)[::-1]


def test_top_eigs_identity():
    spec = hermitian_top_eigs(np.eye(2), 2)
    assert np.allclose(spec.values, [1.0, 1.0])
    assert np.allclose(spec.basis.conj().T @ spec.basis, np.eye(2), atol=1e-10)


def test_top_eigs_diagonal():
    spec = hermitian_top_eigs(np.diag([4.0, 1.0]), 1)
    assert np.allclose(spec.values, [4.0])
    assert np.allclose(np.abs(spec.basis.ravel()), [1.0, 0.0], atol=1e-12)


def test_top_eigs_against_char_poly_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = random_hermitian(rng, 3)
        spec = hermitian_top_eigs(a, 3)
        expected = char_poly_roots_3x3(a)
        assert np.allclose(spec.values, expected, rtol=1e-7, atol=1e-7)
        recon = spec.basis @ np.diag(spec.values) @ spec.basis.conj().T
        assert np.linalg.norm(recon - a) <= 1e-8 * max(1.0, np.linalg.norm(a))


def test_top_eigs_sorted_and_orthonormal():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = random_hermitian(rng, 5)
        spec = hermitian_top_eigs(a, 3)
        assert np.all(np.diff(spec.values) <= 1e-12)
        gram = spec.basis.conj().T @ spec.basis
        assert np.linalg.norm(gram - np.eye(3)) <= 1e-10


def test_top_eigs_rejects_non_hermitian():
    with pytest.raises(ContractViolationError):
        hermitian_top_eigs(np.array([[0.0, 1.0], [0.0, 0.0]]), 1)


def test_top_eigs_rejects_bad_count():
    with pytest.raises(ContractViolationError):
        hermitian_top_eigs(np.eye(2), 3)


def test_psd_inv_sqrt_identity_and_diagonal():
    assert np.allclose(psd_inv_sqrt(np.eye(3)), np.eye(3))
    s = psd_inv_sqrt(np.diag([4.0, 9.0]))
    assert np.allclose(s, np.diag([0.5, 1.0 / 3.0]))


def test_psd_inv_sqrt_contract():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a = random_pd(rng, 3)
        s = psd_inv_sqrt(a)
        assert np.linalg.norm(s @ a @ s - np.eye(3)) <= 1e-8
        assert np.linalg.norm(s - s.conj().T) <= 1e-10 * np.linalg.norm(s)


def test_psd_inv_sqrt_known_spectrum():
    # reconstruction oracle: build the matrix from a known eigensystem
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    vals = np.array([0.5, 2.0, 5.0])
    a = q @ np.diag(vals) @ q.conj().T
    expected = q @ np.diag(1.0 / np.sqrt(vals)) @ q.conj().T
    assert np.allclose(psd_inv_sqrt(a), expected, atol=1e-10)


def test_psd_inv_sqrt_composition_identity():
    rng = np.random.default_rng(4)
    a = random_pd(rng, 4)
    s = psd_inv_sqrt(a)
    # s is itself PD; applying the kernel to s^-2 = a reproduces s
    again = psd_inv_sqrt(np.linalg.inv(s @ s))
    assert np.linalg.norm(again - s) <= 1e-7 * np.linalg.norm(s)


def test_psd_inv_sqrt_rejects_singular():
    with pytest.raises(SingularMatrixError):
        psd_inv_sqrt(np.diag([1.0, 0.0]))
    with pytest.raises(SingularMatrixError):
        psd_inv_sqrt(np.diag([1.0, -0.5]))


def test_thin_svd_identity():
    left, sing, right = thin_svd(np.eye(2), 2)
    assert np.allclose(sing, [1.0, 1.0])
    assert np.allclose(left @ np.diag(sing) @ right.conj().T, np.eye(2), atol=1e-12)


def test_thin_svd_rank_one():
    x = np.array([[2.0], [0.0], [0.0]])
    y = np.array([[1.0], [0.0]])
    left, sing, right = thin_svd(x @ y.conj().T, 1)
    assert np.allclose(sing, [2.0])


def test_thin_svd_against_gram_oracle():
    # oracle: singular values squared are the eigenvalues of a^H a, computed
    # from the closed-form quadratic roots of the 2x2 gram matrix
    rng = np.random.default_rng(5)
    for _ in range(20):
        a = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        g = a.conj().T @ a
        tr, det = g[0, 0].real + g[1, 1].real, (g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]).real
        disc = np.sqrt(max(tr * tr / 4 - det, 0.0))
        expected = np.sqrt(np.array([tr / 2 + disc, max(tr / 2 - disc, 0.0)]))
        left, sing, right = thin_svd(a, 2)
        assert np.allclose(sing, expected, rtol=1e-8, atol=1e-10)
        assert np.linalg.norm(left @ np.diag(sing) @ right.conj().T - a) <= 1e-8 * np.linalg.norm(a)
        assert np.linalg.norm(left.conj().T @ left - np.eye(2)) <= 1e-10
        assert np.linalg.norm(right.conj().T @ right - np.eye(2)) <= 1e-10


def test_thin_svd_rejects_bad_count():
    with pytest.raises(ContractViolationError):
        thin_svd(np.ones((3, 2)), 3)


def test_waterfill_eval_formula():
    assert np.allclose(waterfill_eval([4.0], [1.0], 1.0).levels, [1.0])
    assert np.allclose(waterfill_eval([1.0], [0.5], 4.0).levels, [0.0])  # clamped
    assert np.allclose(waterfill_eval([1.0], [4.0], 1.0).levels, [0.25])


def test_waterfill_eval_rejects_bad_gains():
    with pytest.raises(ContractViolationError):
        waterfill_eval([1.0], [0.0], 1.0)
    with pytest.raises(ContractViolationError):
        waterfill_eval([1.0], [-1.0], 1.0)


def test_waterfill_budget_symmetric():
    alloc = waterfill_budget([1.0, 1.0], [1.0, 1.0], 2.0)
    assert abs(alloc.multiplier - 0.25) <= 1e-6
    assert np.allclose(alloc.levels, [1.0, 1.0], atol=1e-9)


def test_waterfill_budget_two_stream_analytic():
    # oracle: with both streams active, sqrt(1/mu)(1/2 + 1) = P + 1/4 + 1
    # gives mu = 4/9 and p = [1/2, 1/2]; cross-checked on a fine mu grid
    w, g, budget = np.array([1.0, 1.0]), np.array([4.0, 1.0]), 1.0
    grid = np.linspace(0.05, 2.0, 200001)
    totals = np.array([np.sum(np.maximum(np.sqrt(w / (m * g)) - 1 / g, 0.0)) for m in grid])
    mu_grid = grid[np.argmin(np.abs(totals - budget))]
    assert abs(mu_grid - 4.0 / 9.0) <= 1e-4
    alloc = waterfill_budget(w, g, budget)
    assert abs(alloc.multiplier - 4.0 / 9.0) <= 1e-6
    assert np.allclose(alloc.levels, [0.5, 0.5], atol=1e-9)


def test_waterfill_budget_zero():
    alloc = waterfill_budget([1.0, 2.0], [1.0, 3.0], 0.0)
    assert np.all(alloc.levels == 0.0)
    assert np.isinf(alloc.multiplier)


def test_waterfill_budget_meets_budget_and_monotone():
    rng = np.random.default_rng(6)
    for _ in range(50):
        n = rng.integers(1, 6)
        w = rng.uniform(0.1, 4.0, n)
        g = rng.uniform(0.1, 10.0, n)
        budget = rng.uniform(0.0, 5.0)
        alloc = waterfill_budget(w, g, budget)
        assert abs(alloc.total - budget) <= 1e-9 * max(1.0, budget)
        assert np.all(alloc.levels >= 0.0)
        # total power is non-increasing in the water level
        if np.isfinite(alloc.multiplier):
            lower = waterfill_eval(w, g, alloc.multiplier * 0.5)
            higher = waterfill_eval(w, g, alloc.multiplier * 2.0)
            assert lower.total >= alloc.total >= higher.total


def test_waterfill_budget_matches_eval_at_returned_level():
    alloc = waterfill_budget([1.0, 2.0, 0.5], [3.0, 1.0, 2.0], 1.7)
    again = waterfill_eval([1.0, 2.0, 0.5], [3.0, 1.0, 2.0], alloc.multiplier)
    assert np.allclose(alloc.levels, again.levels)
