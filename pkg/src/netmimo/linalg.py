"""Dense complex-matrix primitives shared by all beamforming solvers.

Everything operates on ``complex128`` numpy arrays.  Hermitian inputs are
validated against a relative tolerance and symmetrized before factorization,
so results do not depend on round-off asymmetry of the caller's products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, NumericalFailureError, SingularMatrixError

# ||A - A^H||_F <= HERMITIAN_TOL * max(1, ||A||_F) is required of Hermitian inputs.
HERMITIAN_TOL = 1e-10
# Relative eigenvalue floor below which a matrix is treated as singular.
SINGULARITY_RTOL = 1e-12
# Budget matching tolerance of the waterfilling bisection: 1e-9 * max(1, budget).
BUDGET_RTOL = 1e-9


@dataclass(frozen=True)
class SpectrumDecomposition:
    """Leading part of an eigen spectrum: values sorted non-increasing,
    one orthonormal basis column per value."""

    values: np.ndarray
    basis: np.ndarray


@dataclass(frozen=True)
class PowerAllocation:
    """Non-negative per-stream powers and the water level that produced them.

    ``multiplier`` is ``inf`` for the degenerate zero-budget allocation.
    """

    levels: np.ndarray
    multiplier: float

    @property
    def total(self) -> float:
        return float(np.sum(self.levels))


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ContractViolationError(f"expected a 2-D matrix, got shape {a.shape}")
    return a


def require_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate that ``a`` is square and Hermitian within ``tol`` (relative),
    and return its symmetrized copy."""
    a = _as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"matrix must be square, got shape {a.shape}")
    scale = max(1.0, float(np.linalg.norm(a)))
    if np.linalg.norm(a - a.conj().T) > tol * scale:
        raise ContractViolationError(f"matrix is not Hermitian within {tol:g} (relative)")
    return 0.5 * (a + a.conj().T)


def hermitian_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Full eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    a = require_hermitian(a)
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        n = a.shape[0]
        raise NumericalFailureError(
            f"eigendecomposition of a {n}x{n} matrix did not converge"
        ) from exc


def hermitian_top_eigs(a, d: int) -> SpectrumDecomposition:
    """The ``d`` largest eigenvalues (descending) of a Hermitian matrix with
    the corresponding orthonormal eigenvectors.

    For repeated eigenvalues any orthonormal basis of the eigenspace may be
    returned; compare subspaces or derived scalars downstream, never raw
    eigenvectors.
    """
    vals, vecs = hermitian_eig(a)
    n = vals.size
    if not 1 <= d <= n:
        raise ContractViolationError(f"d={d} outside [1, {n}]")
    order = np.argsort(-vals, kind="stable")[:d]
    return SpectrumDecomposition(values=vals[order].copy(), basis=vecs[:, order].copy())


def psd_inv_sqrt(a) -> np.ndarray:
    """Inverse square root S of a Hermitian positive definite matrix:
    S Hermitian PSD with S a S = I.

    Raises :class:`SingularMatrixError` when the smallest eigenvalue is not
    above ``SINGULARITY_RTOL`` times the largest.
    """
    vals, vecs = hermitian_eig(a)
    vmax = float(vals[-1])
    vmin = float(vals[0])
    if vmax <= 0.0 or vmin <= SINGULARITY_RTOL * vmax:
        raise SingularMatrixError(
            f"matrix is singular or indefinite (min eigenvalue {vmin:.3e}, max {vmax:.3e})"
        )
    inv_sqrt = (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T
    return 0.5 * (inv_sqrt + inv_sqrt.conj().T)


def thin_svd(a, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Leading ``d`` singular triplets of ``a``: (left, singulars, right) with
    a ~= left @ diag(singulars) @ right^H plus the discarded directions.
    Singular values sorted descending, both bases orthonormal."""
    a = _as_matrix(a)
    kmax = min(a.shape)
    if not 1 <= d <= kmax:
        raise ContractViolationError(f"d={d} outside [1, {kmax}]")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(
            f"SVD of a {a.shape[0]}x{a.shape[1]} matrix did not converge"
        ) from exc
    return u[:, :d].copy(), s[:d].copy(), vh[:d].conj().T.copy()


def _check_waterfill_args(weights, gains) -> tuple[np.ndarray, np.ndarray]:
    w = np.asarray(weights, dtype=float)
    g = np.asarray(gains, dtype=float)
    if w.ndim != 1 or w.shape != g.shape:
        raise ContractViolationError("weights and gains must be equal-length 1-D arrays")
    if np.any(w < 0):
        raise ContractViolationError("weights must be non-negative")
    if np.any(g <= 0):
        raise ContractViolationError("gains must be strictly positive")
    return w, g


def waterfill_eval(weights, gains, mu: float) -> PowerAllocation:
    """Evaluate the waterfilling powers p_i = [sqrt(w_i / (mu g_i)) - 1/g_i]^+
    at a fixed water level ``mu > 0``."""
    w, g = _check_waterfill_args(weights, gains)
    if mu <= 0:
        raise ContractViolationError("water level mu must be positive")
    p = np.sqrt(w / (mu * g)) - 1.0 / g
    return PowerAllocation(levels=np.maximum(p, 0.0), multiplier=float(mu))


def waterfill_budget(weights, gains, budget: float) -> PowerAllocation:
    """Waterfilling powers meeting a total budget: sum_i p_i(mu) = budget
    within ``1e-9 * max(1, budget)``, with mu found by bisection on the
    monotone (non-increasing) map mu -> sum_i p_i(mu).

    A zero budget returns the all-zero allocation with mu = inf.
    """
    w, g = _check_waterfill_args(weights, gains)
    if budget < 0:
        raise ContractViolationError("budget must be non-negative")
    if budget == 0:
        return PowerAllocation(levels=np.zeros_like(w), multiplier=float("inf"))

    tol = BUDGET_RTOL * max(1.0, budget)

    def total(mu: float) -> float:
        return float(np.sum(np.maximum(np.sqrt(w / (mu * g)) - 1.0 / g, 0.0)))

    lo = 1e-12
    guard = 0
    while total(lo) < budget:
        lo *= 1e-2
        guard += 1
        if guard > 100:
            raise NumericalFailureError("waterfilling bisection could not bracket the budget from below")
    hi = max(2.0 * lo, 1.0)
    guard = 0
    while total(hi) > budget:
        hi *= 2.0
        guard += 1
        if guard > 200:
            raise NumericalFailureError("waterfilling bisection could not bracket the budget from above")

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        t = total(mid)
        if abs(t - budget) <= tol:
            return waterfill_eval(w, g, mid)
        if t > budget:
            lo = mid
        else:
            hi = mid
    raise NumericalFailureError("waterfilling bisection did not reach the budget tolerance")
