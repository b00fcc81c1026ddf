"""Interference-channel data model and the shared error-covariance algebra.

A :class:`PartialCooperationSystem` describes a cellular downlink in which
each user's data streams are jointly precoded by an ordered subset of base
stations.  Stacking every user's serving channels turns the system into an
equivalent K-pair interference channel whose per-BS power budgets become
trace-weighted transmit constraints (:class:`InterferenceProblem`); the
constraint weight of BS m on user k is a block mask selecting the precoder
rows driven by BS m, and the masks of one user sum to the identity.  All
solvers operate on the stacked form.

Noise is identity by convention; colored noise must be whitened upstream
(see :mod:`netmimo.scenario`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, NumericalFailureError

LOG2 = float(np.log(2.0))


@dataclass(frozen=True)
class PartialCooperationSystem:
    """Multicell downlink with per-user serving sets.

    channels      -- (K, M, nr, nt) noise-whitened complex gains, user x BS
    serving_sets  -- per user, BS indices (ascending) that know its data
    bs_power      -- (M,) per-BS transmit power budgets
    streams       -- per-user stream counts d_k
    """

    nt: int
    nr: int
    bs_power: np.ndarray
    channels: np.ndarray
    serving_sets: tuple[tuple[int, ...], ...]
    streams: tuple[int, ...]

    def __post_init__(self):
        power = np.asarray(self.bs_power, dtype=float)
        chan = np.asarray(self.channels, dtype=complex)
        object.__setattr__(self, "bs_power", power)
        object.__setattr__(self, "channels", chan)
        object.__setattr__(self, "serving_sets", tuple(tuple(s) for s in self.serving_sets))
        object.__setattr__(self, "streams", tuple(int(d) for d in self.streams))
        m = power.size
        k = len(self.serving_sets)
        if chan.shape != (k, m, self.nr, self.nt):
            raise ContractViolationError(
                f"channel array shape {chan.shape} inconsistent with K={k}, M={m}, "
                f"nr={self.nr}, nt={self.nt}"
            )
        if len(self.streams) != k:
            raise ContractViolationError("one stream count per user is required")
        if np.any(power <= 0):
            raise ContractViolationError("per-BS powers must be positive")
        for idx, (sset, d) in enumerate(zip(self.serving_sets, self.streams)):
            if not sset or len(set(sset)) != len(sset):
                raise ContractViolationError(f"serving set of user {idx} must be non-empty without repeats")
            if min(sset) < 0 or max(sset) >= m:
                raise ContractViolationError(f"serving set of user {idx} references an unknown BS")
            if not 1 <= d <= min(len(sset) * self.nt, self.nr):
                raise ContractViolationError(
                    f"user {idx}: streams d={d} must lie in [1, min(|serving set|*nt, nr)]"
                )

    @property
    def num_bs(self) -> int:
        return int(self.bs_power.size)

    @property
    def num_users(self) -> int:
        return len(self.serving_sets)

    def served_users(self, m: int) -> tuple[int, ...]:
        """Users whose serving set contains BS ``m``."""
        return tuple(k for k, sset in enumerate(self.serving_sets) if m in sset)


@dataclass
class BeamformerSolution:
    """Result of one solver run: stacked precoders B_k, equalizers A_k,
    constraint multipliers, and the per-iteration objective trace."""

    precoders: list
    equalizers: list
    multipliers: np.ndarray
    trace: list
    iterations: int
    converged: bool
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InterferenceProblem:
    """K transmitter/receiver pairs with M shared trace constraints.

    channels    -- channels[k][l]: (rx_dims[k], tx_dims[l]), receiver k from transmitter l
    constraints -- constraints[k][m]: PSD weight of constraint m on transmitter k
    budgets     -- (M,) constraint budgets
    streams     -- per-user stream counts d_k
    mse_weights -- per-user Hermitian PSD d_k x d_k error weights (diagonal in the
                   basic problem; full matrices appear in rate-driven reweighting)
    """

    channels: tuple
    constraints: tuple
    budgets: np.ndarray
    streams: tuple
    mse_weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "budgets", np.asarray(self.budgets, dtype=float))
        object.__setattr__(self, "channels", tuple(tuple(np.asarray(h, dtype=complex) for h in row) for row in self.channels))
        object.__setattr__(self, "constraints", tuple(tuple(np.asarray(p, dtype=complex) for p in row) for row in self.constraints))
        object.__setattr__(self, "streams", tuple(int(d) for d in self.streams))
        object.__setattr__(self, "mse_weights", tuple(np.asarray(w, dtype=complex) for w in self.mse_weights))
        self._validate()

    def _validate(self):
        k = len(self.channels)
        m = int(self.budgets.size)
        if len(self.constraints) != k or len(self.streams) != k or len(self.mse_weights) != k:
            raise ContractViolationError("channels, constraints, streams and mse_weights must all have K entries")
        rx = self.rx_dims
        tx = self.tx_dims
        for i in range(k):
            if len(self.channels[i]) != k:
                raise ContractViolationError("channel table must be K x K")
            for l in range(k):
                if self.channels[i][l].shape != (rx[i], tx[l]):
                    raise ContractViolationError(
                        f"channel ({i},{l}) has shape {self.channels[i][l].shape}, expected {(rx[i], tx[l])}"
                    )
            if len(self.constraints[i]) != m:
                raise ContractViolationError("constraint table must be K x M")
            total = np.zeros((tx[i], tx[i]), dtype=complex)
            for phi in self.constraints[i]:
                if phi.shape != (tx[i], tx[i]):
                    raise ContractViolationError("constraint weights must be square with the transmit dimension")
                total += phi
            evals = np.linalg.eigvalsh(0.5 * (total + total.conj().T))
            if evals[0] <= 1e-12 * max(1.0, evals[-1]):
                raise ContractViolationError(
                    f"summed constraint weights of user {i} must be positive definite"
                )
            d = self.streams[i]
            if not 1 <= d <= min(tx[i], rx[i]):
                raise ContractViolationError(f"user {i}: streams d={d} outside [1, min(m_t, m_r)]")
            w = self.mse_weights[i]
            if w.shape != (d, d):
                raise ContractViolationError(f"user {i}: MSE weight must be {d}x{d}")
            if np.linalg.norm(w - w.conj().T) > 1e-10 * max(1.0, np.linalg.norm(w)):
                raise ContractViolationError(f"user {i}: MSE weight must be Hermitian")

    @property
    def num_users(self) -> int:
        return len(self.channels)

    @property
    def num_constraints(self) -> int:
        return int(self.budgets.size)

    @property
    def tx_dims(self) -> tuple:
        return tuple(self.channels[0][l].shape[1] for l in range(len(self.channels)))

    @property
    def rx_dims(self) -> tuple:
        return tuple(self.channels[k][0].shape[0] for k in range(len(self.channels)))

    def direct_channel(self, k: int) -> np.ndarray:
        return self.channels[k][k]


def build_interference_problem(system: PartialCooperationSystem, mse_weights=None) -> InterferenceProblem:
    """Stack the per-user serving channels of ``system`` into the equivalent
    constrained interference problem.

    User k with serving set (m_1 < ... < m_c) gets transmit dimension c*nt;
    the channel from transmitter l to receiver k horizontally stacks the
    physical channels from user l's serving BSs to user k; the constraint
    weight of BS m on user k is zero except for an identity in the diagonal
    block matching m's position in user k's serving set.  MSE weights default
    to identities.
    """
    k_users = system.num_users
    m_bs = system.num_bs
    nt, nr = system.nt, system.nr

    channels = []
    for k in range(k_users):
        row = []
        for l in range(k_users):
            row.append(np.hstack([system.channels[k, m] for m in system.serving_sets[l]]))
        channels.append(tuple(row))

    constraints = []
    for k in range(k_users):
        sset = system.serving_sets[k]
        mt = len(sset) * nt
        row = []
        for m in range(m_bs):
            phi = np.zeros((mt, mt), dtype=complex)
            if m in sset:
                pos = sset.index(m)
                sl = slice(pos * nt, (pos + 1) * nt)
                phi[sl, sl] = np.eye(nt)
            row.append(phi)
        constraints.append(tuple(row))

    if mse_weights is None:
        mse_weights = tuple(np.eye(d, dtype=complex) for d in system.streams)

    return InterferenceProblem(
        channels=tuple(channels),
        constraints=tuple(constraints),
        budgets=system.bs_power.copy(),
        streams=system.streams,
        mse_weights=tuple(mse_weights),
    )


# ---------------------------------------------------------------------------
# error-covariance algebra
# ---------------------------------------------------------------------------

def interference_covariance(problem: InterferenceProblem, precoders, k: int) -> np.ndarray:
    """Noise-plus-interference covariance at receiver k:
    Omega_k = I + sum_{l != k} H_{k,l} B_l B_l^H H_{k,l}^H."""
    omega = np.eye(problem.rx_dims[k], dtype=complex)
    for l in range(problem.num_users):
        if l == k:
            continue
        hb = problem.channels[k][l] @ precoders[l]
        omega += hb @ hb.conj().T
    return 0.5 * (omega + omega.conj().T)


def mmse_equalizer(problem: InterferenceProblem, precoders, k: int, omega=None) -> np.ndarray:
    """Linear MMSE receive filter A_k = (H B B^H H^H + Omega_k)^{-1} H B for
    the direct channel H = H_{k,k}."""
    if omega is None:
        omega = interference_covariance(problem, precoders, k)
    hb = problem.direct_channel(k) @ precoders[k]
    total = omega + hb @ hb.conj().T
    try:
        return np.linalg.solve(total, hb)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(
            f"total receive covariance of user {k} is singular"
        ) from exc


def mse_matrix(problem: InterferenceProblem, precoders, equalizers, k: int, omega=None) -> np.ndarray:
    """Error covariance of the stream estimates u_hat = A^H y for user k:
    E_k = A^H H B B^H H^H A - A^H H B - B^H H^H A + A^H Omega_k A + I."""
    a = equalizers[k]
    hb = problem.direct_channel(k) @ precoders[k]
    if omega is None:
        omega = interference_covariance(problem, precoders, k)
    ahb = a.conj().T @ hb
    e = ahb @ ahb.conj().T - ahb - ahb.conj().T + a.conj().T @ omega @ a + np.eye(problem.streams[k])
    return 0.5 * (e + e.conj().T)


def mse_matrix_mmse(problem: InterferenceProblem, precoders, k: int, omega=None) -> np.ndarray:
    """Error covariance with the MMSE receive filter substituted:
    E_k = (I + B^H H^H Omega_k^{-1} H B)^{-1}."""
    if omega is None:
        omega = interference_covariance(problem, precoders, k)
    hb = problem.direct_channel(k) @ precoders[k]
    g = hb.conj().T @ np.linalg.solve(omega, hb)
    e = np.linalg.inv(np.eye(problem.streams[k]) + 0.5 * (g + g.conj().T))
    return 0.5 * (e + e.conj().T)


def wsmse_objective(problem: InterferenceProblem, precoders, equalizers, omegas=None) -> float:
    """Weighted sum of stream error covariances sum_k tr{W_k E_k}."""
    total = 0.0
    for k in range(problem.num_users):
        omega = None if omegas is None else omegas[k]
        e = mse_matrix(problem, precoders, equalizers, k, omega=omega)
        total += float(np.trace(problem.mse_weights[k] @ e).real)
    return total


def sum_rate(problem: InterferenceProblem, precoders, omegas=None) -> float:
    """Achievable sum rate in bits per channel use with MMSE receivers,
    treating other users' signals as noise: sum_k log2 det(E_k^{-1})."""
    rate = 0.0
    for k in range(problem.num_users):
        omega = omegas[k] if omegas is not None else interference_covariance(problem, precoders, k)
        hb = problem.direct_channel(k) @ precoders[k]
        g = hb.conj().T @ np.linalg.solve(omega, hb)
        g = 0.5 * (g + g.conj().T)
        sign, logdet = np.linalg.slogdet(np.eye(problem.streams[k]) + g)
        if sign.real <= 0:
            raise NumericalFailureError(f"error covariance of user {k} is not positive definite")
        rate += logdet / LOG2
    return float(rate)


def constraint_usage(problem: InterferenceProblem, precoders) -> np.ndarray:
    """Per-constraint usage: usage_m = sum_k tr{Phi_{k,m} B_k B_k^H}."""
    usage = np.zeros(problem.num_constraints)
    for k in range(problem.num_users):
        bbh = precoders[k] @ precoders[k].conj().T
        bbh_t = bbh.T
        for m in range(problem.num_constraints):
            # tr{Phi X} as an elementwise contraction
            usage[m] += float(np.sum(problem.constraints[k][m] * bbh_t).real)
    return usage


def srm_weight_update(problem: InterferenceProblem, precoders) -> list:
    """Inverse-MSE weights W_k = E_k^{-1} used by the rate-maximizing
    reweighting loop (E_k evaluated with MMSE receivers)."""
    weights = []
    for k in range(problem.num_users):
        e = mse_matrix_mmse(problem, precoders, k)
        w = np.linalg.inv(e)
        weights.append(0.5 * (w + w.conj().T))
    return weights


# ---------------------------------------------------------------------------
# serialization (regression fixtures)
# ---------------------------------------------------------------------------
#
# JSON schema: {"budgets": [..], "streams": [..],
#               "channels": [[M_kl]..], "constraints": [[M_km]..],
#               "mse_weights": [M_k..]}
# where every complex matrix M is a nested list of rows of [re, im] pairs.


def _matrix_to_pairs(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a, dtype=complex)]


def _pairs_to_matrix(rows) -> np.ndarray:
    return np.asarray([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def problem_to_json(problem: InterferenceProblem) -> str:
    payload = {
        "budgets": [float(p) for p in problem.budgets],
        "streams": list(problem.streams),
        "channels": [[_matrix_to_pairs(h) for h in row] for row in problem.channels],
        "constraints": [[_matrix_to_pairs(p) for p in row] for row in problem.constraints],
        "mse_weights": [_matrix_to_pairs(w) for w in problem.mse_weights],
    }
    return json.dumps(payload, sort_keys=True)


def problem_from_json(text: str) -> InterferenceProblem:
    payload = json.loads(text)
    return InterferenceProblem(
        channels=tuple(tuple(_pairs_to_matrix(h) for h in row) for row in payload["channels"]),
        constraints=tuple(tuple(_pairs_to_matrix(p) for p in row) for row in payload["constraints"]),
        budgets=np.asarray(payload["budgets"], dtype=float),
        streams=tuple(payload["streams"]),
        mse_weights=tuple(_pairs_to_matrix(w) for w in payload["mse_weights"]),
    )
