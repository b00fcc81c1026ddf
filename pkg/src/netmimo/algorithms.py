"""Iterative multiuser beamformer designs for the constrained interference channel.

Four families are implemented:

``dmmse``
    Per-user eigenbasis precoders that diagonalize every user's error
    covariance: each precoder whitens the interference-pricing matrix
    F_k = Upsilon_k + sum_m lam_m Phi_{k,m}, keeps the leading
    eigendirections of the whitened direct-channel quadratic form, and
    waterfills at unit level; multipliers ascend on the power residuals.
``emmseia``
    Joint linear-system precoder update from fixed MMSE equalizers,
    B_k = (sum_l H_{l,k}^H A_l W_l A_l^H H_{l,k} + sum_m mu_m Phi_{k,m})^{-1}
    H_{k,k}^H A_k W_k, with the multipliers searched each round until the
    complementary-slackness conditions hold.
``pwf``
    Transmit-covariance fixed point coupling the forward network with its
    reversed-link counterpart through pre/post-whitened channels; a single
    water level is bisected against the multiplier-weighted power budget and
    the multipliers update multiplicatively.  Sum-rate objective only.
``min_leakage``
    Alternating smallest-eigenvector updates of orthonormal transmit factors
    and receive filters minimizing the total interference power leaked into
    the intended receive subspaces, with the per-BS budget split equally
    over served streams.

The ``dmmse``/``emmseia`` solvers run either on a fixed weighted-MSE
objective or inside the rate-maximizing reweighting loop
(:func:`srm_outer_loop`, weights refreshed to E_k^{-1} each round).  After
the multiplier loop meets the feasibility tolerance, the multipliers are
frozen and the inner alternation is iterated to its fixed point, so the
returned ``dmmse``/``pwf`` solutions satisfy their structural identities
(diagonal error covariances, self-consistent covariance equations) to tight
tolerance.  All solvers are deterministic given problem, config and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolationError, NumericalFailureError, SingularMatrixError
from .linalg import hermitian_top_eigs, psd_inv_sqrt, waterfill_eval
from .model import (
    BeamformerSolution,
    InterferenceProblem,
    PartialCooperationSystem,
    build_interference_problem,
    constraint_usage,
    interference_covariance,
    mmse_equalizer,
    mse_matrix_mmse,
    sum_rate,
    wsmse_objective,
)

ALGORITHMS = ("dmmse", "emmseia", "pwf", "min_leakage")
OBJECTIVES = ("wsmmse", "srm")

LAMBDA_FLOOR = 1e-9
LAMBDA_CAP = 1e12
# Relative off-diagonal mass below which an error covariance counts as diagonal.
OFFDIAG_TOL = 1e-8
# Complementary slackness target: |mu_m (P_m - usage_m)| <= SLACKNESS_TOL * P_m.
SLACKNESS_TOL = 1e-3
# Fixed-point tolerance (max relative covariance change) of the pwf polish.
PWF_POLISH_TOL = 1e-9


@dataclass(frozen=True)
class AlgorithmConfig:
    """Solver options shared by all algorithm families.

    ``initialization`` is "scaled_identity" (first d_k identity columns,
    scaled to spend a 0.9/K budget fraction per user) or
    "random_orthonormal" (seeded by ``init_seed``).
    """

    algorithm: str = "dmmse"
    objective: str = "wsmmse"
    max_inner: int = 500
    max_outer: int = 2000
    inner_tol: float = 1e-6
    constraint_tol: float = 1e-2
    subgradient_step: float = 0.1
    lambda_init: float = 1.0
    initialization: str = "scaled_identity"
    init_seed: int = 0

    def validate(self) -> "AlgorithmConfig":
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"algorithm must be one of {ALGORITHMS}")
        if self.objective not in OBJECTIVES:
            raise ConfigurationError(f"objective must be one of {OBJECTIVES}")
        if self.algorithm == "min_leakage" and self.objective == "srm":
            raise ConfigurationError(
                "min_leakage optimizes interference leakage directly; objective 'srm' is not supported"
            )
        if self.algorithm == "pwf" and self.objective != "srm":
            raise ConfigurationError("pwf optimizes the sum-rate objective; set objective='srm'")
        if self.max_inner < 1 or self.max_outer < 1:
            raise ConfigurationError("iteration limits must be positive")
        if self.inner_tol <= 0 or self.constraint_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if self.subgradient_step < 0:
            raise ConfigurationError("subgradient_step must be non-negative")
        if self.lambda_init <= 0:
            raise ConfigurationError("lambda_init must be positive")
        if self.initialization not in ("scaled_identity", "random_orthonormal"):
            raise ConfigurationError("initialization must be scaled_identity or random_orthonormal")
        return self


@dataclass(frozen=True)
class DualNetworkState:
    """Converged pwf state: forward transmit covariances, reversed-link
    covariances, multipliers, and the shared water level."""

    covariances: tuple
    dual_covariances: tuple
    multipliers: np.ndarray
    water_level: float


@dataclass(frozen=True)
class LeakageState:
    """Converged min-leakage state: per-(user, BS) orthonormal transmit
    factors, orthonormal receive filters, and the final leakage value."""

    factors: tuple
    equalizers: tuple
    leakage: float


def offdiag_mass(mat: np.ndarray) -> float:
    """Relative Frobenius mass of the off-diagonal part of ``mat``."""
    mat = np.asarray(mat)
    off = mat - np.diag(np.diag(mat))
    return float(np.linalg.norm(off)) / max(float(np.linalg.norm(mat)), 1e-300)


def initialize_precoders(problem: InterferenceProblem, config: AlgorithmConfig) -> list:
    """Feasible starting precoders spending a 0.9/K fraction of the smallest
    budget per user (usage_m <= 0.9 min(P) under unit-partition constraints)."""
    k_users = problem.num_users
    min_budget = float(np.min(problem.budgets))
    rng = np.random.default_rng(config.init_seed)
    precoders = []
    for k in range(k_users):
        mt, d = problem.tx_dims[k], problem.streams[k]
        scale = np.sqrt(0.9 * min_budget / (k_users * d))
        if config.initialization == "scaled_identity":
            b = np.zeros((mt, d), dtype=complex)
            b[:d, :d] = np.eye(d)
        else:
            z = rng.standard_normal((mt, d)) + 1j * rng.standard_normal((mt, d))
            b, _ = np.linalg.qr(z)
        precoders.append(scale * b)
    return precoders


def _objective_stable(trace, tol: float, window: int = 5) -> bool:
    """Every per-round objective change over the last ``window`` rounds is
    within ``tol`` relative."""
    if len(trace) < window + 1:
        return False
    ref = max(1.0, abs(trace[-1]))
    tail = trace[-window - 1:]
    return all(abs(b - a) <= tol * ref for a, b in zip(tail, tail[1:]))


def _max_violation(usage: np.ndarray, budgets: np.ndarray) -> float:
    return float(np.max((usage - budgets) / np.maximum(budgets, 1e-300)))


def _active_residual(usage: np.ndarray, budgets: np.ndarray, lam: np.ndarray) -> float:
    """Dual residual over active coordinates: constraints that are violated
    or carry a meaningfully positive multiplier.  Slack constraints whose
    multiplier sits at the floor are complementary and contribute nothing."""
    active = (lam > 10 * LAMBDA_FLOOR) | (usage > budgets)
    if not np.any(active):
        return 0.0
    rel = np.abs(usage - budgets) / np.maximum(budgets, 1e-300)
    return float(np.max(rel[active]))


def _diagonal_weights(problem: InterferenceProblem) -> list:
    """Per-stream weight vectors; the diagonalizing solver requires diagonal
    weight matrices."""
    diags = []
    for k, w in enumerate(problem.mse_weights):
        if offdiag_mass(w) > 1e-10:
            raise ContractViolationError(
                f"user {k}: the diagonalizing solver requires diagonal MSE weights"
            )
        diags.append(np.maximum(np.diag(w).real, 0.0))
    return diags


# ---------------------------------------------------------------------------
# dmmse
# ---------------------------------------------------------------------------

def _dmmse_precoder_step(problem, precoders, equalizers, weight_diags, lam, omegas=None):
    """Simultaneous per-user precoder update at multipliers ``lam``."""
    k_users = problem.num_users
    awa = [(equalizers[l] * weight_diags[l]) @ equalizers[l].conj().T for l in range(k_users)]
    new = []
    for k in range(k_users):
        mt = problem.tx_dims[k]
        ups = np.zeros((mt, mt), dtype=complex)
        for l in range(k_users):
            if l == k:
                continue
            h = problem.channels[l][k]
            ups += h.conj().T @ awa[l] @ h
        priced = sum(lam[m] * problem.constraints[k][m] for m in range(problem.num_constraints))
        f = 0.5 * ((ups + priced) + (ups + priced).conj().T)
        try:
            s = psd_inv_sqrt(f)
        except SingularMatrixError:
            # one retry with the price floor lifted to the interference scale
            guard = max(LAMBDA_FLOOR, 1e-9 * max(1.0, float(np.linalg.norm(ups))))
            priced = sum(max(lam[m], guard) * problem.constraints[k][m]
                         for m in range(problem.num_constraints))
            f = 0.5 * ((ups + priced) + (ups + priced).conj().T)
            try:
                s = psd_inv_sqrt(f)
            except SingularMatrixError as exc:
                raise NumericalFailureError(
                    f"user {k}: interference-pricing matrix stayed singular after the floor retry"
                ) from exc
        omega = omegas[k] if omegas is not None else interference_covariance(problem, precoders, k)
        h_kk = problem.direct_channel(k)
        r = h_kk.conj().T @ np.linalg.solve(omega, h_kk)
        m_w = s @ (0.5 * (r + r.conj().T)) @ s
        spec = hermitian_top_eigs(0.5 * (m_w + m_w.conj().T), problem.streams[k])
        gains = spec.values
        # largest weight rides the strongest whitened direction
        order = np.argsort(-weight_diags[k], kind="stable")
        paired_w = weight_diags[k][order]
        powers = np.zeros_like(gains)
        active = gains > 1e-12 * max(1.0, float(np.max(gains, initial=0.0)))
        if np.any(active):
            powers[active] = waterfill_eval(paired_w[active], gains[active], 1.0).levels
        b = np.zeros((mt, problem.streams[k]), dtype=complex)
        b[:, order] = s @ (spec.basis * np.sqrt(powers))
        new.append(b)
    return new


# ---------------------------------------------------------------------------
# emmseia
# ---------------------------------------------------------------------------

def _emmseia_factors(problem, equalizers, weights):
    """Multiplier-independent parts of the precoder linear systems: the
    received-weight grams sum_l H_{l,k}^H A_l W_l A_l^H H_{l,k} and the
    right-hand sides H_{k,k}^H A_k W_k."""
    k_users = problem.num_users
    awa = [equalizers[l] @ weights[l] @ equalizers[l].conj().T for l in range(k_users)]
    grams = []
    rhs = []
    for k in range(k_users):
        mt = problem.tx_dims[k]
        gram = np.zeros((mt, mt), dtype=complex)
        for l in range(k_users):
            h = problem.channels[l][k]
            gram += h.conj().T @ awa[l] @ h
        grams.append(0.5 * (gram + gram.conj().T))
        rhs.append(problem.direct_channel(k).conj().T @ equalizers[k] @ weights[k])
    return grams, rhs


def _emmseia_solve_at(problem, grams, rhs, mu):
    systems = []
    for k in range(problem.num_users):
        gram = grams[k]
        for m in range(problem.num_constraints):
            if mu[m] != 0.0:
                gram = gram + mu[m] * problem.constraints[k][m]
        systems.append(gram)
    k_users = problem.num_users
    shapes = {(systems[k].shape[0], rhs[k].shape[1]) for k in range(k_users)}
    if len(shapes) == 1:
        # uniform dimensions: one batched solve
        try:
            stacked = np.linalg.solve(np.stack(systems), np.stack(rhs))
            return [stacked[k] for k in range(k_users)]
        except np.linalg.LinAlgError:
            pass
    precoders = []
    for k in range(k_users):
        try:
            precoders.append(np.linalg.solve(systems[k], rhs[k]))
        except np.linalg.LinAlgError:
            precoders.append(np.linalg.pinv(systems[k], hermitian=True) @ rhs[k])
    return precoders


def emmseia_precoder_update(problem, equalizers, weights, mu):
    """Precoders minimizing the multiplier-priced weighted MSE for fixed
    equalizers (joint, convex): solve
    (sum_l H_{l,k}^H A_l W_l A_l^H H_{l,k} + sum_m mu_m Phi_{k,m}) B_k
        = H_{k,k}^H A_k W_k."""
    grams, rhs = _emmseia_factors(problem, equalizers, weights)
    return _emmseia_solve_at(problem, grams, rhs, mu)


def _emmseia_multiplier_search(problem, equalizers, weights, mu, constraint_tol, max_iters=300):
    """Drive the multipliers to the complementary-slackness conditions:
    usage_m <= P_m (1 + tol) and |mu_m (P_m - usage_m)| <= 1e-3 P_m, with
    active constraints (mu_m meaningfully positive) pinned to the budget
    boundary within 1e-6 so the precoders vary smoothly across outer rounds.

    Projected subgradient in scaled coordinates: each step multiplies mu_m by
    a factor clip(1 + (usage_m/P_m - 1)/2, 1/2, 2), which matches the local
    usage ~ mu^-2 curvature, decays geometrically on slack constraints, and
    keeps exact zeros; zero multipliers restart from a small seed when their
    constraint becomes violated.
    """
    budgets = problem.budgets
    mu = np.asarray(mu, dtype=float).copy()
    grams, rhs = _emmseia_factors(problem, equalizers, weights)
    precoders = _emmseia_solve_at(problem, grams, rhs, mu)
    usage = constraint_usage(problem, precoders)
    for _ in range(max_iters):
        viol_ok = usage <= budgets * (1.0 + constraint_tol)
        slack_ok = np.abs(mu * (budgets - usage)) <= SLACKNESS_TOL * budgets
        if np.all(viol_ok) and np.all(slack_ok):
            break
        ratio = usage / np.maximum(budgets, 1e-300)
        factor = np.clip(1.0 + 0.5 * (ratio - 1.0), 0.5, 2.0)
        mu = mu * factor
        seed = 1e-6 * max(1.0, float(np.max(mu, initial=0.0)))
        mu[(mu == 0.0) & (ratio > 1.0)] = seed
        mu[mu < 1e-14 * max(1.0, float(np.max(mu, initial=0.0)))] = 0.0
        if np.max(mu, initial=0.0) > LAMBDA_CAP:
            raise NumericalFailureError("multiplier search diverged")
        precoders = _emmseia_solve_at(problem, grams, rhs, mu)
        usage = constraint_usage(problem, precoders)
    return mu, precoders, usage


# ---------------------------------------------------------------------------
# shared driver for dmmse / emmseia in both objectives
# ---------------------------------------------------------------------------

def _iterate_mse_family(problem, config, inner: str, objective: str, initial=None) -> BeamformerSolution:
    budgets = problem.budgets
    precoders = [np.asarray(b, dtype=complex) for b in initial] if initial is not None \
        else initialize_precoders(problem, config)
    omegas = [interference_covariance(problem, precoders, k) for k in range(problem.num_users)]
    equalizers = [mmse_equalizer(problem, precoders, k, omega=omegas[k]) for k in range(problem.num_users)]
    lam = np.full(problem.num_constraints, config.lambda_init)
    fixed_weights = _diagonal_weights(problem) if inner == "dmmse" else list(problem.mse_weights)

    trace: list = []
    usage = constraint_usage(problem, precoders)
    best_residual = np.inf
    stall = 0
    diminish_from = None
    slack_ok = True
    iterations = 0
    polish_start = None

    def current_weights():
        if objective != "srm":
            return fixed_weights
        mats = []
        for k in range(problem.num_users):
            e = mse_matrix_mmse(problem, precoders, k, omega=omegas[k])
            w = np.linalg.inv(e)
            mats.append(0.5 * (w + w.conj().T))
        if inner == "dmmse":
            return [np.maximum(np.diag(w).real, 0.0) for w in mats]
        return mats

    def one_pass(weights, lam_now, mu_now):
        nonlocal precoders, equalizers, usage, slack_ok, omegas
        if inner == "dmmse":
            precoders = _dmmse_precoder_step(problem, precoders, equalizers, weights, lam_now,
                                             omegas=omegas)
            omegas = [interference_covariance(problem, precoders, k) for k in range(problem.num_users)]
            equalizers = [mmse_equalizer(problem, precoders, k, omega=omegas[k])
                          for k in range(problem.num_users)]
            usage = constraint_usage(problem, precoders)
            return mu_now
        equalizers = [mmse_equalizer(problem, precoders, k, omega=omegas[k])
                      for k in range(problem.num_users)]
        # search to half the tolerance so the returned point clears it with margin
        mu_now, precoders_new, usage_new = _emmseia_multiplier_search(
            problem, equalizers, weights, mu_now, 0.5 * config.constraint_tol
        )
        precoders = precoders_new
        omegas = [interference_covariance(problem, precoders, k) for k in range(problem.num_users)]
        usage = usage_new
        slack_ok = bool(np.all(np.abs(mu_now * (budgets - usage)) <= SLACKNESS_TOL * budgets))
        return mu_now

    def objective_value():
        if objective == "srm":
            return sum_rate(problem, precoders, omegas=omegas)
        return wsmse_objective(problem, precoders, equalizers, omegas=omegas)

    # The inner subproblem at fixed multipliers minimizes the priced
    # objective wsmse + lam.(usage - P); its per-iteration values are the
    # provably non-increasing descent quantity, recorded for diagnostics.
    priced_trace: list = []

    def record_objective(lam_now):
        trace.append(objective_value())
        if inner == "dmmse" and objective == "wsmmse":
            priced_trace.append(trace[-1] + float(np.dot(lam_now, usage - budgets)))

    def pricing_exit_ok():
        if _max_violation(usage, budgets) > config.constraint_tol or not slack_ok:
            return False
        if inner == "dmmse" and _active_residual(usage, budgets, lam) > config.constraint_tol:
            return False
        return _objective_stable(trace, config.inner_tol)

    mu = lam.copy()  # emmseia carries its KKT multipliers across rounds
    pricing_budget = config.max_outer
    for _ in range(5):
        # pricing phase: multiplier updates interleaved with the alternation
        while pricing_budget > 0:
            pricing_budget -= 1
            weights = current_weights()
            mu = one_pass(weights, lam, mu)
            iterations += 1
            record_objective(lam)
            if pricing_exit_ok():
                break
            if inner == "dmmse" and config.subgradient_step > 0:
                residual = _active_residual(usage, budgets, lam)
                if residual < best_residual - 1e-12:
                    best_residual = residual
                    stall = 0
                else:
                    stall += 1
                    if stall >= 50 and diminish_from is None:
                        diminish_from = iterations
                step = config.subgradient_step if diminish_from is None \
                    else config.subgradient_step / np.sqrt(1 + iterations - diminish_from)
                lam = np.maximum(LAMBDA_FLOOR, lam + step * (usage - budgets))
                if np.max(lam) > LAMBDA_CAP:
                    raise NumericalFailureError(
                        f"power-price multipliers diverged (max {np.max(lam):.3e}, "
                        f"violation {_max_violation(usage, budgets):.3e})"
                    )
        if inner != "dmmse":
            break
        # Fixed-multiplier polish: run the inner alternation to its fixed
        # point so the error covariances become diagonal to tolerance.  The
        # inner fixed point can drift usage off the budgets when the
        # multipliers were not fully settled; re-enter pricing if so.
        polish_start = len(trace)
        for _ in range(config.max_inner):
            weights = current_weights()
            previous = [b.copy() for b in precoders]
            one_pass(weights, lam, mu)
            iterations += 1
            record_objective(lam)
            offdiag = max(
                offdiag_mass(mse_matrix_mmse(problem, precoders, k, omega=omegas[k]))
                for k in range(problem.num_users)
            )
            drift = max(
                float(np.linalg.norm(b - p)) / max(float(np.linalg.norm(b)), 1e-300)
                for b, p in zip(precoders, previous)
            )
            if offdiag <= OFFDIAG_TOL and drift <= 1e-9:
                break
        if _max_violation(usage, budgets) <= config.constraint_tol or pricing_budget <= 0:
            break

    violation = _max_violation(usage, budgets)
    offdiag = max(
        offdiag_mass(mse_matrix_mmse(problem, precoders, k, omega=omegas[k]))
        for k in range(problem.num_users)
    ) if inner == "dmmse" else None
    converged = violation <= config.constraint_tol and slack_ok and _objective_stable(trace, config.inner_tol)
    if inner == "dmmse":
        converged = converged and offdiag is not None and offdiag <= OFFDIAG_TOL

    diagnostics = {
        "usage": usage,
        "max_violation": max(violation, 0.0),
        "objective": objective,
    }
    if inner == "dmmse":
        diagnostics["offdiag"] = offdiag
        diagnostics["polish_start"] = polish_start
        if priced_trace:
            diagnostics["priced_trace"] = priced_trace
    multipliers = lam if inner == "dmmse" else mu
    return BeamformerSolution(
        precoders=precoders,
        equalizers=[mmse_equalizer(problem, precoders, k) for k in range(problem.num_users)],
        multipliers=np.asarray(multipliers, dtype=float),
        trace=trace,
        iterations=iterations,
        converged=bool(converged),
        diagnostics=diagnostics,
    )


def dmmse_solve(problem: InterferenceProblem, config: AlgorithmConfig | None = None,
                initial=None) -> BeamformerSolution:
    """Diagonalizing weighted-MMSE design (see module docstring).

    The weighted-MSE objective requires diagonal weights; in 'srm' mode the
    reweighting loop supplies them as diag(E_k^{-1}).
    """
    config = (config or AlgorithmConfig(algorithm="dmmse")).validate()
    if config.objective == "srm":
        return srm_outer_loop(problem, config, inner="dmmse", initial=initial)
    return _iterate_mse_family(problem, config, "dmmse", "wsmmse", initial=initial)


def emmseia_solve(problem: InterferenceProblem, config: AlgorithmConfig | None = None,
                  initial=None) -> BeamformerSolution:
    """Interference-aligning MMSE design with joint precoder updates and a
    KKT multiplier search per round (see module docstring)."""
    config = (config or AlgorithmConfig(algorithm="emmseia")).validate()
    if config.objective == "srm":
        return srm_outer_loop(problem, config, inner="emmseia", initial=initial)
    return _iterate_mse_family(problem, config, "emmseia", "wsmmse", initial=initial)


def srm_outer_loop(problem: InterferenceProblem, config: AlgorithmConfig,
                   inner: str = "dmmse", initial=None) -> BeamformerSolution:
    """Sum-rate maximization by alternating inverse-MSE weight refreshes
    with one pass of the chosen weighted-MSE solver; terminates when the
    rate is stable over five rounds and the constraints hold."""
    if inner not in ("dmmse", "emmseia"):
        raise ConfigurationError("the reweighting loop supports inner solvers 'dmmse' and 'emmseia'")
    config = config.validate()
    return _iterate_mse_family(problem, config, inner, "srm", initial=initial)


# ---------------------------------------------------------------------------
# pwf
# ---------------------------------------------------------------------------

def _cov_interference(problem, covariances, k):
    omega = np.eye(problem.rx_dims[k], dtype=complex)
    for l in range(problem.num_users):
        if l == k:
            continue
        h = problem.channels[k][l]
        omega += h @ covariances[l] @ h.conj().T
    return 0.5 * (omega + omega.conj().T)


def _cov_rate(problem, covariances) -> float:
    rate = 0.0
    for k in range(problem.num_users):
        omega = _cov_interference(problem, covariances, k)
        h = problem.direct_channel(k)
        total = omega + h @ covariances[k] @ h.conj().T
        _, ld1 = np.linalg.slogdet(total)
        _, ld0 = np.linalg.slogdet(omega)
        rate += (ld1 - ld0) / np.log(2.0)
    return float(rate)


def _dual_covariances(problem, covariances, water_level):
    """Reversed-link transmit covariances from their defining identity:
    (1/mu) (Omega_k^{-1} - (Omega_k + H_kk Sigma_k H_kk^H)^{-1})."""
    duals = []
    for k in range(problem.num_users):
        omega = _cov_interference(problem, covariances, k)
        h = problem.direct_channel(k)
        total = omega + h @ covariances[k] @ h.conj().T
        d = (np.linalg.inv(omega) - np.linalg.inv(total)) / water_level
        duals.append(0.5 * (d + d.conj().T))
    return duals


def _pwf_forward(problem, covariances, dual_covariances, lam):
    """One forward waterfilling pass: whiten each direct channel by the
    forward and reversed-link interference covariances, allocate
    p_i = [1/mu - 1/g_i]^+ on the leading singular directions, and bisect the
    shared water level so the multiplier-weighted usage meets the
    multiplier-weighted budget."""
    k_users = problem.num_users
    target = float(np.dot(lam, problem.budgets))
    per_user = []
    gains_all = []
    coefs_all = []
    for k in range(k_users):
        omega = _cov_interference(problem, covariances, k)
        omega_hat = sum(lam[m] * problem.constraints[k][m] for m in range(problem.num_constraints))
        for j in range(k_users):
            if j == k:
                continue
            h_jk = problem.channels[j][k]
            omega_hat = omega_hat + h_jk.conj().T @ dual_covariances[j] @ h_jk
        omega_hat = 0.5 * (omega_hat + omega_hat.conj().T)
        s_fwd = psd_inv_sqrt(omega)
        s_hat = psd_inv_sqrt(omega_hat)
        whitened = s_fwd @ problem.direct_channel(k) @ s_hat
        d = problem.streams[k]
        _, sing, right = np.linalg.svd(whitened, full_matrices=False)
        right = right.conj().T[:, :d]
        sing = sing[:d]
        gains = sing ** 2
        priced = sum(lam[m] * problem.constraints[k][m] for m in range(problem.num_constraints))
        cmat = right.conj().T @ s_hat @ priced @ s_hat @ right
        coefs = np.maximum(np.diag(cmat).real, 0.0)
        keep = gains > 1e-12 * max(1.0, float(np.max(gains, initial=0.0)))
        per_user.append((s_hat, right, gains, keep))
        gains_all.append(gains[keep])
        coefs_all.append(coefs[keep])
    gains_flat = np.concatenate(gains_all) if gains_all else np.array([])
    coefs_flat = np.concatenate(coefs_all) if coefs_all else np.array([])

    def weighted_usage(mu):
        if gains_flat.size == 0:
            return 0.0
        return float(np.sum(coefs_flat * np.maximum(1.0 / mu - 1.0 / gains_flat, 0.0)))

    if gains_flat.size == 0 or np.sum(coefs_flat) <= 0 or target <= 0:
        raise NumericalFailureError("waterfilling cannot meet the multiplier-weighted budget")
    lo = 1e-12
    guard = 0
    while weighted_usage(lo) < target:
        lo *= 1e-2
        guard += 1
        if guard > 100:
            raise NumericalFailureError("water-level bisection could not bracket the budget from below")
    hi = max(1.0, 2.0 * lo)
    guard = 0
    while weighted_usage(hi) > target:
        hi *= 2.0
        guard += 1
        if guard > 200:
            raise NumericalFailureError("water-level bisection could not bracket the budget from above")
    mu = 0.5 * (lo + hi)
    tol = 1e-9 * max(1.0, target)
    for _ in range(200):
        mu = 0.5 * (lo + hi)
        u = weighted_usage(mu)
        if abs(u - target) <= tol:
            break
        if u > target:
            lo = mu
        else:
            hi = mu
    else:
        raise NumericalFailureError("water-level bisection did not converge")

    new_cov = []
    for k in range(k_users):
        s_hat, right, gains, keep = per_user[k]
        powers = np.zeros_like(gains)
        powers[keep] = np.maximum(1.0 / mu - 1.0 / gains[keep], 0.0)
        factor = s_hat @ (right * np.sqrt(powers))
        sigma = factor @ factor.conj().T
        new_cov.append(0.5 * (sigma + sigma.conj().T))
    return new_cov, float(mu)


def _cov_usage(problem, covariances) -> np.ndarray:
    usage = np.zeros(problem.num_constraints)
    for k in range(problem.num_users):
        for m in range(problem.num_constraints):
            usage[m] += float(np.trace(problem.constraints[k][m] @ covariances[k]).real)
    return usage


def pwf_fixed_point_residual(problem: InterferenceProblem, state: DualNetworkState) -> float:
    """Re-evaluate the coupled covariance equations at ``state`` and return
    the worst relative deviation of the reproduced transmit covariances."""
    duals = _dual_covariances(problem, state.covariances, state.water_level)
    reproduced, _ = _pwf_forward(problem, state.covariances, duals, state.multipliers)
    scale = max(max(float(np.linalg.norm(c)) for c in state.covariances), 1e-300)
    worst = 0.0
    for old, new in zip(state.covariances, reproduced):
        denom = max(float(np.linalg.norm(old)), 1e-12 * scale)
        worst = max(worst, float(np.linalg.norm(new - old)) / denom)
    return worst


def pwf_solve(problem: InterferenceProblem, config: AlgorithmConfig | None = None,
              initial=None) -> BeamformerSolution:
    """Covariance fixed-point solver for the sum-rate objective (see module
    docstring).  The returned diagnostics carry the converged
    :class:`DualNetworkState` for structural verification."""
    config = (config or AlgorithmConfig(algorithm="pwf", objective="srm")).validate()
    precoders = [np.asarray(b, dtype=complex) for b in initial] if initial is not None \
        else initialize_precoders(problem, config)
    covariances = [b @ b.conj().T for b in precoders]
    lam = np.full(problem.num_constraints, config.lambda_init)
    mu = 1.0
    duals = _dual_covariances(problem, covariances, mu)
    budgets = problem.budgets

    trace: list = []
    iterations = 0
    best_residual = np.inf
    stall = 0
    diminish_from = None
    pricing_budget = config.max_outer
    usage = _cov_usage(problem, covariances)
    for _ in range(5):
        # pricing phase: damped multiplicative multiplier ascent.  The
        # undamped ratio update limit-cycles on strongly coupled instances;
        # the damping exponent diminishes once the active residual stalls,
        # averaging any remaining cycle out.
        priced_converged = False
        while pricing_budget > 0:
            pricing_budget -= 1
            covariances, mu = _pwf_forward(problem, covariances, duals, lam)
            duals = _dual_covariances(problem, covariances, mu)
            usage = _cov_usage(problem, covariances)
            iterations += 1
            trace.append(_cov_rate(problem, covariances))
            violation = _max_violation(usage, budgets)
            residual = _active_residual(usage, budgets, lam)
            if violation <= config.constraint_tol and residual <= config.constraint_tol \
                    and _objective_stable(trace, config.inner_tol):
                priced_converged = True
                break
            if residual < best_residual - 1e-12:
                best_residual = residual
                stall = 0
            else:
                stall += 1
                if stall >= 30 and diminish_from is None:
                    diminish_from = iterations
            eta = 0.5 if diminish_from is None \
                else 0.5 / np.sqrt(1 + (iterations - diminish_from) / 10.0)
            ratio = np.clip(usage / np.maximum(budgets, 1e-300), 0.25, 4.0)
            lam = np.clip(lam * np.maximum(ratio, LAMBDA_FLOOR) ** eta, LAMBDA_FLOOR, LAMBDA_CAP)

        if not priced_converged:
            break
        # Fixed-multiplier polish to the covariance fixed point (only from a
        # feasible pricing state; the map can diverge at far-off multipliers).
        # The fixed point can drift usage off the budgets when the
        # multipliers were not fully settled; re-enter pricing if so.
        prev_delta = np.inf
        growth = 0
        for _ in range(config.max_inner):
            new_cov, mu = _pwf_forward(problem, covariances, duals, lam)
            duals = _dual_covariances(problem, new_cov, mu)
            iterations += 1
            trace.append(_cov_rate(problem, new_cov))
            scale = max(max(float(np.linalg.norm(c)) for c in covariances), 1e-300)
            delta = max(
                float(np.linalg.norm(n - o)) / max(float(np.linalg.norm(o)), 1e-12 * scale)
                for n, o in zip(new_cov, covariances)
            )
            covariances = new_cov
            if delta <= PWF_POLISH_TOL:
                break
            growth = growth + 1 if delta > 2.0 * prev_delta else 0
            if growth >= 2:
                break
            prev_delta = delta
        usage = _cov_usage(problem, covariances)
        if _max_violation(usage, budgets) <= config.constraint_tol or pricing_budget <= 0:
            break
    usage = _cov_usage(problem, covariances)
    violation = _max_violation(usage, budgets)

    precoders = []
    for k in range(problem.num_users):
        vals, vecs = np.linalg.eigh(covariances[k])
        order = np.argsort(-vals, kind="stable")[: problem.streams[k]]
        precoders.append(vecs[:, order] * np.sqrt(np.maximum(vals[order], 0.0)))
    state = DualNetworkState(
        covariances=tuple(covariances),
        dual_covariances=tuple(duals),
        multipliers=lam.copy(),
        water_level=mu,
    )
    converged = violation <= config.constraint_tol and _objective_stable(trace, config.inner_tol)
    return BeamformerSolution(
        precoders=precoders,
        equalizers=[mmse_equalizer(problem, precoders, k) for k in range(problem.num_users)],
        multipliers=lam.copy(),
        trace=trace,
        iterations=iterations,
        converged=bool(converged),
        diagnostics={"usage": usage, "max_violation": max(violation, 0.0), "state": state,
                     "objective": "srm"},
    )


# ---------------------------------------------------------------------------
# min_leakage
# ---------------------------------------------------------------------------

def _smallest_eigvecs(mat: np.ndarray, d: int) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.conj().T))
    return vecs[:, :d]


def min_leakage_solve(system: PartialCooperationSystem, config: AlgorithmConfig | None = None,
                      initial=None) -> BeamformerSolution:
    """Interference-leakage minimization on the physical (per-BS) form.

    Precoder factors are orthonormal with the per-BS budget split equally
    over served streams, B_{k,m} = sqrt(P_m / (K_m d_k)) Bbar_{k,m}; receive
    filters are orthonormal.  Each half-step takes the eigenvectors of the
    d_k smallest eigenvalues of the leakage quadratic form (receive side:
    interference covariance at user k; transmit side: its exact conjugate
    over all victim receivers), so the leakage is non-increasing per
    half-step.  The stacked solution meets every per-BS budget exactly.
    """
    config = (config or AlgorithmConfig(algorithm="min_leakage")).validate()
    k_users = system.num_users
    nt, nr = system.nt, system.nr
    served_count = [len(system.served_users(m)) for m in range(system.num_bs)]
    coef = []
    for k in range(k_users):
        row = {}
        for m in system.serving_sets[k]:
            row[m] = float(system.bs_power[m]) / (served_count[m] * system.streams[k])
        coef.append(row)

    rng = np.random.default_rng(config.init_seed)
    if initial is not None:
        factors = [[np.asarray(b, dtype=complex) for b in user_factors] for user_factors in initial]
    else:
        factors = []
        for k in range(k_users):
            user_factors = []
            for _ in system.serving_sets[k]:
                if config.initialization == "scaled_identity":
                    b = np.zeros((nt, system.streams[k]), dtype=complex)
                    b[: system.streams[k], :] = np.eye(system.streams[k])
                else:
                    z = rng.standard_normal((nt, system.streams[k])) + 1j * rng.standard_normal(
                        (nt, system.streams[k])
                    )
                    b, _ = np.linalg.qr(z)
                user_factors.append(b)
            factors.append(user_factors)

    def interference_form(k):
        q = np.zeros((nr, nr), dtype=complex)
        for j in range(k_users):
            if j == k:
                continue
            for pos, m in enumerate(system.serving_sets[j]):
                hb = system.channels[k, m] @ factors[j][pos]
                q += coef[j][m] * (hb @ hb.conj().T)
        return 0.5 * (q + q.conj().T)

    def leakage(equalizers):
        total = 0.0
        for k in range(k_users):
            q = interference_form(k)
            total += float(np.trace(equalizers[k].conj().T @ q @ equalizers[k]).real)
        return total

    equalizers = [np.zeros((nr, system.streams[k]), dtype=complex) for k in range(k_users)]
    trace: list = []
    iterations = 0
    converged = False
    prev_round = None
    for j in range(1, config.max_outer + 1):
        iterations = j
        for k in range(k_users):
            equalizers[k] = _smallest_eigvecs(interference_form(k), system.streams[k])
        trace.append(leakage(equalizers))
        for k in range(k_users):
            for pos, m in enumerate(system.serving_sets[k]):
                qhat = np.zeros((nt, nt), dtype=complex)
                for i in range(k_users):
                    if i == k:
                        continue
                    ha = system.channels[i, m].conj().T @ equalizers[i]
                    qhat += coef[k][m] * (ha @ ha.conj().T)
                factors[k][pos] = _smallest_eigvecs(qhat, system.streams[k])
        trace.append(leakage(equalizers))
        if prev_round is not None and abs(trace[-1] - prev_round) <= config.inner_tol * max(1.0, trace[-1]):
            converged = True
            break
        if trace[-1] <= 1e-15:
            converged = True
            break
        prev_round = trace[-1]

    precoders = []
    for k in range(k_users):
        blocks = [np.sqrt(coef[k][m]) * factors[k][pos] for pos, m in enumerate(system.serving_sets[k])]
        precoders.append(np.vstack(blocks))
    state = LeakageState(
        factors=tuple(tuple(user_factors) for user_factors in factors),
        equalizers=tuple(np.asarray(a) for a in equalizers),
        leakage=trace[-1] if trace else 0.0,
    )
    return BeamformerSolution(
        precoders=precoders,
        equalizers=[a.copy() for a in equalizers],
        multipliers=np.zeros(system.num_bs),
        trace=trace,
        iterations=iterations,
        converged=bool(converged),
        diagnostics={"state": state, "objective": "leakage"},
    )


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def solve_system(system: PartialCooperationSystem, config: AlgorithmConfig,
                 mse_weights=None) -> tuple:
    """Build the stacked interference problem for ``system`` and run the
    configured algorithm; returns (problem, solution)."""
    config = config.validate()
    problem = build_interference_problem(system, mse_weights=mse_weights)
    if config.algorithm == "dmmse":
        solution = dmmse_solve(problem, config)
    elif config.algorithm == "emmseia":
        solution = emmseia_solve(problem, config)
    elif config.algorithm == "pwf":
        solution = pwf_solve(problem, config)
    else:
        solution = min_leakage_solve(system, config)
    return problem, solution
