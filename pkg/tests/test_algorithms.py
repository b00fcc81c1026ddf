"""Multiuser algorithm tests: structural identities, descent, feasibility,
and degenerate cases for all four solver families."""

import numpy as np
import pytest

from netmimo import (
    AlgorithmConfig,
    ConfigurationError,
    InterferenceProblem,
    PartialCooperationSystem,
    ScenarioConfig,
    build_interference_problem,
    constraint_usage,
    dmmse_solve,
    emmseia_solve,
    lagrangian_minimizer,
    min_leakage_solve,
    mmse_equalizer,
    mse_matrix_mmse,
    pwf_fixed_point_residual,
    pwf_solve,
    realize,
    srm_outer_loop,
    sum_rate,
    wsmse_objective,
)
from netmimo.algorithms import (
    emmseia_precoder_update,
    initialize_precoders,
    offdiag_mass,
)
from netmimo.single_user import SingleUserProblem


def cellular_problem(seed, **kwargs):
    defaults = dict(cluster_size=3, users_per_cell=1, nt=4, nr=2, streams=2,
                    cooperation_factor=2, boundary_snr_db=20.0, seed=seed)
    defaults.update(kwargs)
    system = realize(ScenarioConfig(**defaults))
    return system, build_interference_problem(system)


def single_pair_problem(h, budget=1.0):
    h = np.asarray(h, dtype=complex)
    mr, mt = h.shape
    return InterferenceProblem(
        channels=((h,),),
        constraints=((np.eye(mt, dtype=complex),),),
        budgets=[budget], streams=[min(mr, mt)],
        mse_weights=(np.eye(min(mr, mt)),),
    )


def zero_problem():
    z = np.zeros((2, 3), dtype=complex)
    eye = np.eye(3, dtype=complex)
    zero = np.zeros((3, 3), dtype=complex)
    return InterferenceProblem(
        channels=((z, z), (z, z)),
        constraints=((eye, zero), (zero, eye)),
        budgets=[1.0, 1.0], streams=[2, 2],
        mse_weights=(np.eye(2), np.eye(2)),
    )


def test_config_validation():
    with pytest.raises(ConfigurationError):
        AlgorithmConfig(algorithm="nope").validate()
    with pytest.raises(ConfigurationError):
        AlgorithmConfig(algorithm="min_leakage", objective="srm").validate()
    with pytest.raises(ConfigurationError):
        AlgorithmConfig(algorithm="pwf", objective="wsmmse").validate()
    with pytest.raises(ConfigurationError):
        AlgorithmConfig(inner_tol=0.0).validate()
    AlgorithmConfig(algorithm="pwf", objective="srm").validate()


def test_initialization_feasible_and_orthonormal():
    _, problem = cellular_problem(0)
    for policy in ("scaled_identity", "random_orthonormal"):
        cfg = AlgorithmConfig(initialization=policy, init_seed=3)
        precoders = initialize_precoders(problem, cfg)
        usage = constraint_usage(problem, precoders)
        assert np.all(usage <= problem.budgets + 1e-12)
        for b in precoders:
            gram = b.conj().T @ b
            assert np.allclose(gram, gram[0, 0] * np.eye(b.shape[1]), atol=1e-10)


# ---------------------------------------------------------------------------
# dmmse
# ---------------------------------------------------------------------------

def test_dmmse_single_user_step_matches_power_priced_minimizer():
    # K=1 with fixed multipliers degenerates to the single-user minimizer
    rng = np.random.default_rng(1)
    h = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    problem = single_pair_problem(h)
    lam = 0.7
    from netmimo.algorithms import _dmmse_precoder_step
    b0 = initialize_precoders(problem, AlgorithmConfig())
    a0 = [mmse_equalizer(problem, b0, 0)]
    stepped = _dmmse_precoder_step(problem, b0, a0, [np.ones(2)], np.array([lam]))
    su = SingleUserProblem(channel=h, noise_cov=np.eye(2),
                           constraints=(np.eye(3, dtype=complex),), budgets=[1.0],
                           weights=np.ones(2), streams=2)
    direct = lagrangian_minimizer(su, lam * np.eye(3, dtype=complex))
    assert np.linalg.norm(stepped[0] @ stepped[0].conj().T - direct @ direct.conj().T) <= 1e-8


def test_dmmse_symmetric_instance():
    rng = np.random.default_rng(2)
    h = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    g = rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))
    eye, zero = np.eye(4, dtype=complex), np.zeros((4, 4), dtype=complex)
    problem = InterferenceProblem(
        channels=((h, g), (g, h)),
        constraints=((eye, zero), (zero, eye)),
        budgets=[1.0, 1.0], streams=[2, 2], mse_weights=(np.eye(2), np.eye(2)),
    )
    sol = dmmse_solve(problem, AlgorithmConfig(algorithm="dmmse"))
    e0 = float(np.trace(mse_matrix_mmse(problem, sol.precoders, 0)).real)
    e1 = float(np.trace(mse_matrix_mmse(problem, sol.precoders, 1)).real)
    assert abs(e0 - e1) <= 1e-6


def test_dmmse_diagonalizes_and_satisfies_constraints():
    for seed in range(3):
        _, problem = cellular_problem(seed)
        sol = dmmse_solve(problem, AlgorithmConfig(algorithm="dmmse"))
        assert sol.converged
        assert sol.diagnostics["max_violation"] <= 1e-2
        for k in range(problem.num_users):
            e = mse_matrix_mmse(problem, sol.precoders, k)
            assert offdiag_mass(e) <= 1e-8


def test_dmmse_priced_descent_at_fixed_multipliers():
    # the inner alternation minimizes wsmse + lam.(usage - P); its trace is
    # non-increasing when the multipliers are frozen
    for seed in range(3):
        _, problem = cellular_problem(seed)
        cfg = AlgorithmConfig(algorithm="dmmse", subgradient_step=0.0,
                              lambda_init=0.5, max_outer=120, max_inner=40)
        sol = dmmse_solve(problem, cfg)
        priced = sol.diagnostics["priced_trace"]
        assert len(priced) > 10
        assert all(b <= a + 1e-9 for a, b in zip(priced, priced[1:]))


def test_dmmse_rejects_non_diagonal_weights():
    _, problem = cellular_problem(0)
    w = np.full((2, 2), 0.5) + np.eye(2)
    bad = InterferenceProblem(
        channels=problem.channels, constraints=problem.constraints,
        budgets=problem.budgets, streams=problem.streams,
        mse_weights=(w,) + tuple(problem.mse_weights[1:]),
    )
    from netmimo.errors import ContractViolationError
    with pytest.raises(ContractViolationError):
        dmmse_solve(bad, AlgorithmConfig(algorithm="dmmse"))


# ---------------------------------------------------------------------------
# emmseia
# ---------------------------------------------------------------------------

def test_emmseia_precoder_formula_scalar():
    # (H^H A W A^H H + mu Phi)^{-1} H^H A W = (0.25 + 0.25)^{-1} 0.5 = 1
    problem = single_pair_problem(np.array([[1.0]]))
    b = emmseia_precoder_update(problem, [np.array([[0.5 + 0j]])], [np.eye(1)], np.array([0.25]))
    assert np.allclose(b[0], [[1.0]])


def test_emmseia_zero_channels():
    problem = zero_problem()
    sol = emmseia_solve(problem, AlgorithmConfig(algorithm="emmseia", max_outer=50))
    assert all(np.linalg.norm(b) == 0.0 for b in sol.precoders)
    assert np.all(np.abs(sol.multipliers * problem.budgets) <= 1e-3)


def test_emmseia_feasibility_and_slackness():
    for seed in range(3):
        _, problem = cellular_problem(seed)
        sol = emmseia_solve(problem, AlgorithmConfig(algorithm="emmseia"))
        usage = constraint_usage(problem, sol.precoders)
        assert np.all(usage <= problem.budgets * 1.01)
        assert np.all(np.abs(sol.multipliers * (problem.budgets - usage)) <= 1e-3 * problem.budgets)


def test_emmseia_joint_descent_at_fixed_multipliers():
    # with mu frozen at zero both half-steps minimize the plain weighted MSE
    _, problem = cellular_problem(1)
    weights = list(problem.mse_weights)
    precoders = initialize_precoders(problem, AlgorithmConfig())
    mu = np.zeros(problem.num_constraints)
    values = []
    for _ in range(40):
        equalizers = [mmse_equalizer(problem, precoders, k) for k in range(problem.num_users)]
        precoders = emmseia_precoder_update(problem, equalizers, weights, mu)
        equalizers = [mmse_equalizer(problem, precoders, k) for k in range(problem.num_users)]
        values.append(wsmse_objective(problem, precoders, equalizers))
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))
    # with mu frozen at a positive value the priced objective descends
    mu = np.full(problem.num_constraints, 0.4)
    precoders = initialize_precoders(problem, AlgorithmConfig())
    priced = []
    for _ in range(40):
        equalizers = [mmse_equalizer(problem, precoders, k) for k in range(problem.num_users)]
        precoders = emmseia_precoder_update(problem, equalizers, weights, mu)
        equalizers = [mmse_equalizer(problem, precoders, k) for k in range(problem.num_users)]
        usage = constraint_usage(problem, precoders)
        priced.append(
            wsmse_objective(problem, precoders, equalizers)
            + float(np.dot(mu, usage - problem.budgets))
        )
    assert all(b <= a + 1e-9 for a, b in zip(priced, priced[1:]))


# ---------------------------------------------------------------------------
# pwf
# ---------------------------------------------------------------------------

def test_pwf_scalar_closed_form():
    # lam=1, Phi=1, H=2, Omega=1, P=1: gain 4, water level 0.8, Sigma = 1
    problem = single_pair_problem(np.array([[2.0]]))
    from netmimo.algorithms import _pwf_forward, _dual_covariances
    zero = [np.zeros((1, 1), dtype=complex)]
    cov, mu = _pwf_forward(problem, zero, zero, np.array([1.0]))
    assert mu == pytest.approx(0.8, abs=1e-6)
    assert cov[0][0, 0].real == pytest.approx(1.0, abs=1e-6)
    duals = _dual_covariances(problem, cov, mu)
    assert duals[0][0, 0].real == pytest.approx(1.0, abs=1e-6)


def test_pwf_multiplicative_update_direction():
    # twice the budget in use doubles the price before damping; the damped
    # update moves the same direction
    _, problem = cellular_problem(2)
    sol = pwf_solve(problem, AlgorithmConfig(algorithm="pwf", objective="srm"))
    assert sol.converged
    usage = constraint_usage(problem, sol.precoders)
    assert np.all(usage <= problem.budgets * 1.01)


def test_pwf_fixed_point_structure():
    for seed in range(3):
        _, problem = cellular_problem(seed)
        sol = pwf_solve(problem, AlgorithmConfig(algorithm="pwf", objective="srm"))
        assert sol.converged
        residual = pwf_fixed_point_residual(problem, sol.diagnostics["state"])
        assert residual <= 1e-6


def test_pwf_stream_truncation():
    _, problem = cellular_problem(3, streams=1)
    sol = pwf_solve(problem, AlgorithmConfig(algorithm="pwf", objective="srm"))
    for b in sol.precoders:
        assert b.shape[1] == 1
    assert sol.diagnostics["max_violation"] <= 1e-2


# ---------------------------------------------------------------------------
# min_leakage
# ---------------------------------------------------------------------------

def test_min_leakage_single_user_zero():
    rng = np.random.default_rng(4)
    chans = rng.standard_normal((1, 2, 2, 2)) + 1j * rng.standard_normal((1, 2, 2, 2))
    system = PartialCooperationSystem(nt=2, nr=2, bs_power=[1.0, 1.0], channels=chans,
                                      serving_sets=((0, 1),), streams=(1,))
    sol = min_leakage_solve(system, AlgorithmConfig(algorithm="min_leakage"))
    assert sol.trace[-1] == pytest.approx(0.0, abs=1e-15)
    a = sol.equalizers[0]
    assert np.allclose(a.conj().T @ a, np.eye(1), atol=1e-10)


def test_min_leakage_orthogonal_alignment():
    # interference confined to the first receive coordinate: the single-stream
    # receive filter is the second basis vector and leaks nothing
    rng = np.random.default_rng(5)
    chans = np.zeros((2, 2, 2, 2), dtype=complex)
    chans[:, :, 0, :] = rng.standard_normal((2, 2, 2)) + 1j * rng.standard_normal((2, 2, 2))
    system = PartialCooperationSystem(nt=2, nr=2, bs_power=[1.0, 1.0], channels=chans,
                                      serving_sets=((0,), (1,)), streams=(1, 1))
    sol = min_leakage_solve(system, AlgorithmConfig(algorithm="min_leakage"))
    assert sol.trace[-1] == pytest.approx(0.0, abs=1e-12)
    assert abs(sol.equalizers[0][1, 0]) == pytest.approx(1.0, abs=1e-10)


def test_min_leakage_monotone_and_orthonormal():
    rng = np.random.default_rng(6)
    chans = rng.standard_normal((3, 3, 2, 4)) + 1j * rng.standard_normal((3, 3, 2, 4))
    system = PartialCooperationSystem(nt=4, nr=2, bs_power=[1.0, 1.0, 1.0], channels=chans,
                                      serving_sets=((0, 1), (1, 2), (0, 2)), streams=(1, 1, 1))
    sol = min_leakage_solve(system, AlgorithmConfig(algorithm="min_leakage"))
    assert all(b <= a + 1e-12 for a, b in zip(sol.trace, sol.trace[1:]))
    state = sol.diagnostics["state"]
    for user_factors in state.factors:
        for f in user_factors:
            assert np.allclose(f.conj().T @ f, np.eye(f.shape[1]), atol=1e-10)
    for a in state.equalizers:
        assert np.allclose(a.conj().T @ a, np.eye(a.shape[1]), atol=1e-10)
    # equal power split uses each BS budget exactly
    problem = build_interference_problem(system)
    assert np.allclose(constraint_usage(problem, sol.precoders), system.bs_power, atol=1e-10)


def test_min_leakage_transmit_receive_conjugacy():
    # the receive-side and transmit-side quadratic forms express the same
    # leakage value
    rng = np.random.default_rng(7)
    chans = rng.standard_normal((3, 2, 2, 3)) + 1j * rng.standard_normal((3, 2, 2, 3))
    system = PartialCooperationSystem(nt=3, nr=2, bs_power=[2.0, 1.0], channels=chans,
                                      serving_sets=((0,), (0, 1), (1,)), streams=(1, 1, 1))
    sol = min_leakage_solve(system, AlgorithmConfig(algorithm="min_leakage", max_outer=3))
    state = sol.diagnostics["state"]
    served = [len(system.served_users(m)) for m in range(2)]
    coef = {
        (k, m): float(system.bs_power[m]) / (served[m] * system.streams[k])
        for k in range(3) for m in system.serving_sets[k]
    }
    recv = 0.0
    for k in range(3):
        q = np.zeros((2, 2), dtype=complex)
        for j in range(3):
            if j == k:
                continue
            for pos, m in enumerate(system.serving_sets[j]):
                hb = system.channels[k, m] @ state.factors[j][pos]
                q += coef[(j, m)] * hb @ hb.conj().T
        recv += float(np.trace(state.equalizers[k].conj().T @ q @ state.equalizers[k]).real)
    tran = 0.0
    for k in range(3):
        for pos, m in enumerate(system.serving_sets[k]):
            qh = np.zeros((3, 3), dtype=complex)
            for j in range(3):
                if j == k:
                    continue
                ha = system.channels[j, m].conj().T @ state.equalizers[j]
                qh += coef[(k, m)] * ha @ ha.conj().T
            f = state.factors[k][pos]
            tran += float(np.trace(f.conj().T @ qh @ f).real)
    assert recv == pytest.approx(tran, rel=1e-10)


# ---------------------------------------------------------------------------
# rate-maximizing outer loop
# ---------------------------------------------------------------------------

def test_srm_single_user_matches_grid_oracle():
    rng = np.random.default_rng(8)
    h = rng.standard_normal((2, 3)) + 1j * rng.standard_normal((2, 3))
    problem = single_pair_problem(h, budget=2.0)
    sol = srm_outer_loop(problem, AlgorithmConfig(algorithm="dmmse", objective="srm"),
                         inner="dmmse")
    rate = sum_rate(problem, sol.precoders)
    gains = np.sort(np.linalg.eigvalsh(h.conj().T @ h).real)[::-1][:2]
    best = 0.0
    for p1 in np.linspace(0.0, 2.0, 8001):
        best = max(best, np.log2(1 + p1 * gains[0]) + np.log2(1 + (2.0 - p1) * gains[1]))
    assert rate >= best * 0.99
    assert rate <= best * 1.0001


def test_srm_zero_channels():
    problem = zero_problem()
    sol = srm_outer_loop(problem, AlgorithmConfig(algorithm="dmmse", objective="srm",
                                                  max_outer=60), inner="dmmse")
    assert sum_rate(problem, sol.precoders) == pytest.approx(0.0, abs=1e-12)


def test_srm_initial_rotation_invariance():
    _, problem = cellular_problem(4)
    cfg = AlgorithmConfig(algorithm="dmmse", objective="srm",
                          initialization="random_orthonormal", init_seed=1)
    init = initialize_precoders(problem, cfg)
    rng = np.random.default_rng(9)
    rates = []
    for trial in range(4):
        q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        rotated = [b @ q for b in init]
        sol = srm_outer_loop(problem, cfg, inner="dmmse", initial=rotated)
        rates.append(sum_rate(problem, sol.precoders))
    assert max(rates) - min(rates) <= 1e-6 * max(1.0, max(rates))


def test_solver_determinism():
    _, problem = cellular_problem(5)
    cfg = AlgorithmConfig(algorithm="dmmse", objective="srm",
                          initialization="random_orthonormal", init_seed=7)
    a = srm_outer_loop(problem, cfg, inner="dmmse")
    b = srm_outer_loop(problem, cfg, inner="dmmse")
    assert a.trace == b.trace
    assert all(np.array_equal(x, y) for x, y in zip(a.precoders, b.precoders))
