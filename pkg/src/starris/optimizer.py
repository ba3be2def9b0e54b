"""Alternating sum-rate maximization via Lagrangian dual and quadratic transforms.

The problem data are kept in cascade form. For user k on subcarrier m,

    V[m, k] = (h_mk * phi_side(k), m)[:, None] * (G_m F_m)      (R*N, Nrf)

so the effective channel is ``hhat[m, k] = beta[side(k)] @ V[m, k]`` and
all received amplitudes are ``Y[m, k, j] = hhat[m, k] @ d[m, j]``. The same
tensor gives the amplitude-side quantities, since ``Y`` is linear in beta.

Objective values using natural logs (the surrogate) and rates in bits are
kept apart: :func:`ldr_objective` is in nats, :func:`sum_rate` in bits.
"""
import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvariantError, SolverError
from .scenario import SIDE_R, SIDE_T
from .solvers import (AmplitudeProblem, QcqpProblem, solve_amplitudes_admm,
                      solve_qcqp)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("iteration", "ldr_objective", "sum_rate_bits", "power_used",
                 "max_energy_violation")


@dataclass(frozen=True)
class FpProblem:
    """Everything the alternating optimizer needs.

    ``V`` is the cascade tensor the optimizer sees (possibly with CSI error),
    ``V_true`` the one used to report rates. ``gram[m] = F_m^H F_m``.
    """

    V: np.ndarray
    gram: np.ndarray
    side: np.ndarray
    sigma2: np.ndarray
    Pmax: float
    V_true: np.ndarray = None

    def __post_init__(self):
        M, K, _, Nrf = self.V.shape
        sigma2 = np.broadcast_to(np.asarray(self.sigma2, dtype=float), (M, K)).copy()
        if np.any(sigma2 <= 0):
            raise ConfigError("noise power must be positive")
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "side", np.asarray(self.side, dtype=int))
        if self.V_true is None:
            object.__setattr__(self, "V_true", self.V)
        if self.gram.shape != (M, Nrf, Nrf) or self.side.shape != (K,):
            raise InvariantError("cascade tensor, frontend Gram and side labels disagree")
        if self.V_true.shape != self.V.shape:
            raise InvariantError("true and estimated cascades differ in shape")

    @property
    def M(self):
        return self.V.shape[0]

    @property
    def K(self):
        return self.V.shape[1]

    @property
    def n_el(self):
        return self.V.shape[2]

    @property
    def Nrf(self):
        return self.V.shape[3]


@dataclass
class FpState:
    d: np.ndarray        # (M, K, Nrf)
    beta: np.ndarray     # (2, R*N)
    rho: np.ndarray      # (M, K)
    varpi: np.ndarray    # (M, K) complex
    eps: np.ndarray      # (M, K) complex
    trace: list = field(default_factory=list)
    block_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    def copy(self):
        return FpState(self.d.copy(), self.beta.copy(), self.rho.copy(),
                       self.varpi.copy(), self.eps.copy(), list(self.trace),
                       list(self.block_trace), self.iterations, self.converged)


# ---------------------------------------------------------------- building blocks

def effective_channels(V, side, beta):
    """``hhat[m, k] = beta[side(k)] @ V[m, k]``, shape ``(M, K, Nrf)``."""
    return np.einsum("kn,mkna->mka", beta[side], V)


def received(hhat, d):
    """``Y[m, k, j] = hhat[m, k] @ d[m, j]``."""
    return np.einsum("mka,mja->mkj", hhat, d)


def _signal_interference(Y):
    sig = np.abs(np.einsum("mkk->mk", Y)) ** 2
    total = (np.abs(Y) ** 2).sum(axis=2)
    return sig, total


def sinr(Y, sigma2):
    """SINR of every (m, k) from the received-amplitude tensor."""
    if np.any(np.asarray(sigma2) <= 0):
        raise ConfigError("noise power must be positive")
    sig, total = _signal_interference(Y)
    return sig / (total - sig + sigma2)


def sum_rate(Y, sigma2):
    """Sum over users and subcarriers of ``log2(1 + SINR)`` (bits/s/Hz)."""
    return float(np.log2(1.0 + sinr(Y, sigma2)).sum())


def ldr_objective(rho, Y, sigma2):
    """Lagrangian-dual surrogate (nats); the ratio includes the desired signal below."""
    sig, total = _signal_interference(Y)
    return float(np.sum(np.log1p(rho) - rho + (1.0 + rho) * sig / (total + sigma2)))


def update_rho(Y, sigma2):
    return sinr(Y, sigma2)


def update_varpi(rho, Y, sigma2):
    """Complex quadratic-transform auxiliary maximizing the transformed ratio."""
    _, total = _signal_interference(Y)
    return np.sqrt(1.0 + rho) * np.einsum("mkk->mk", Y) / (total + sigma2)


update_epsilon = update_varpi


def quadratic_transform(aux, rho, Y, sigma2):
    """``sum 2 sqrt(1+rho) Re(conj(aux) Y_kk) - |aux|^2 (sum_j |Y_kj|^2 + sigma2)``."""
    _, total = _signal_interference(Y)
    diag = np.einsum("mkk->mk", Y)
    return float(np.sum(2.0 * np.sqrt(1.0 + rho) * np.real(np.conj(aux) * diag)
                        - np.abs(aux) ** 2 * (total + sigma2)))


def assemble_qcqp(hhat, varpi, rho, gram, sigma2):
    """Block data ``(E, v, C, Y0)`` of the beamformer subproblem.

    Blocks are ordered ``(m, k)`` row-major. The transformed objective is
    ``-d^H E d + 2 Re(v^H d) - Y0``.
    """
    M, K, Nrf = hhat.shape
    w2 = np.abs(varpi) ** 2
    e_m = np.einsum("mk,mka,mkb->mab", w2, hhat.conj(), hhat)
    E = np.repeat(e_m, K, axis=0)
    v = (np.sqrt(1.0 + rho) * varpi)[..., None] * hhat.conj()
    C = np.repeat(gram, K, axis=0)
    Y0 = float(np.sum(w2 * sigma2))
    return E, v.reshape(M * K, Nrf), C, Y0


def g2_value(E, v, Y0, d):
    d = d.reshape(v.shape)
    quad = np.real(np.einsum("ba,bac,bc->", d.conj(), E, d))
    return float(-quad + 2.0 * np.real(np.sum(v.conj() * d)) - Y0)


def amplitude_vectors(V, d):
    """``w[m, k, j] = V[m, k] @ d[m, j]`` so that ``Y[m, k, j] = beta_side(k) . w``."""
    return np.einsum("mkna,mja->mkjn", V, d)


def assemble_amplitude_problem(V, d, side, eps, rho, sigma2):
    """Per-side quadratic data ``(Delta, upsilon, Omega)`` of the amplitude subproblem.

    ``Delta[i]`` and ``upsilon[i]`` are complex; for real amplitudes only
    their real parts matter. The transformed objective is
    ``sum_i -b_i^T Delta_i b_i + 2 Re(b_i^T upsilon_i) - Omega``.
    """
    w = amplitude_vectors(V, d)
    q = np.conj(eps)[:, :, None, None] * w
    n = V.shape[2]
    Delta = np.zeros((2, n, n), dtype=complex)
    ups = np.zeros((2, n), dtype=complex)
    diag = np.einsum("mkkn->mkn", q)
    for i in (SIDE_R, SIDE_T):
        users = np.flatnonzero(side == i)
        if users.size == 0:
            continue
        qi = q[:, users]
        Delta[i] = np.einsum("mkjn,mkjp->np", qi, qi.conj())
        ups[i] = np.einsum("mk,mkn->n", np.sqrt(1.0 + rho[:, users]), diag[:, users])
    Omega = float(np.sum(np.abs(eps) ** 2 * sigma2))
    return Delta, ups, Omega


def g4_value(Delta, ups, Omega, beta):
    total = -Omega
    for i in (SIDE_R, SIDE_T):
        b = beta[i]
        total += float(-np.real(b @ Delta[i] @ b) + 2.0 * np.real(b @ ups[i]))
    return total


def transmit_power(gram, d):
    return float(np.real(np.einsum("mka,mab,mkb->", d.conj(), gram, d)))


def energy_violation(beta):
    return float(max(0.0, (beta[SIDE_R] ** 2 + beta[SIDE_T] ** 2).max() - 1.0))


# ---------------------------------------------------------------- driver

def initialize(problem, beta0=None):
    """Matched-filter beamformers with the budget split equally over (m, k)."""
    M, K, Nrf = problem.M, problem.K, problem.Nrf
    beta = np.full((2, problem.n_el), 1.0 / np.sqrt(2.0)) if beta0 is None \
        else np.array(beta0, dtype=float)
    hhat = effective_channels(problem.V, problem.side, beta)
    d = hhat.conj().copy()
    share = problem.Pmax / (M * K)
    for m in range(M):
        for k in range(K):
            if not np.any(d[m, k]):
                d[m, k] = 1.0
            p = np.real(d[m, k].conj() @ problem.gram[m] @ d[m, k])
            d[m, k] *= np.sqrt(share / p)
    zeros = np.zeros((M, K))
    return FpState(d, beta, zeros, zeros.astype(complex), zeros.astype(complex))


def evaluate(problem, state, true=True):
    V = problem.V_true if true else problem.V
    hhat = effective_channels(V, problem.side, state.beta)
    return received(hhat, state.d)


def run_alternating(problem, state=None, tol=1e-4, max_iter=50, admm_rho=0.1,
                   admm_tol=1e-6, admm_max_iter=2000, qcqp_tol=1e-8,
                   monotone_tol=1e-8, optimize_amplitudes=True):
    """Alternate the five block updates until the surrogate settles.

    Stops when the relative change of the surrogate between iterations drops
    below ``tol`` or after ``max_iter`` iterations. Each block update is
    checked for monotonicity; a relative decrease beyond ``monotone_tol``
    raises :class:`InvariantError`. Rates in the trace are measured on
    ``problem.V_true``.
    """
    state = initialize(problem) if state is None else state.copy()
    sigma2 = problem.sigma2
    V, side = problem.V, problem.side
    prev = None
    for it in range(1, max_iter + 1):
        blocks = []

        def record(label, Y, rho):
            val = ldr_objective(rho, Y, sigma2)
            last = blocks[-1][1] if blocks else prev
            if last is not None and val < last - monotone_tol * max(abs(last), 1e-300):
                raise InvariantError(f"iteration {it}: surrogate fell from {last!r} "
                                     f"to {val!r} at the {label} update")
            blocks.append((label, val))

        hhat = effective_channels(V, side, state.beta)
        Y = received(hhat, state.d)
        state.rho = update_rho(Y, sigma2)
        record("rho", Y, state.rho)
        state.varpi = update_varpi(state.rho, Y, sigma2)
        record("varpi", Y, state.rho)

        E, v, C, Y0 = assemble_qcqp(hhat, state.varpi, state.rho, problem.gram, sigma2)
        try:
            res = solve_qcqp(QcqpProblem(E, v, C, problem.Pmax), tol=qcqp_tol, check=False)
        except (SolverError, np.linalg.LinAlgError) as exc:
            raise SolverError(f"beamformer subproblem failed: {exc}", it) from exc
        d_new = res.d.reshape(state.d.shape)
        if g2_value(E, v, Y0, d_new) >= g2_value(E, v, Y0, state.d):
            state.d = d_new
        Y = received(hhat, state.d)
        record("d", Y, state.rho)

        if optimize_amplitudes:
            state.eps = update_epsilon(state.rho, Y, sigma2)
            record("eps", Y, state.rho)
            Delta, ups, Omega = assemble_amplitude_problem(V, state.d, side, state.eps,
                                                           state.rho, sigma2)
            amp = AmplitudeProblem(np.real(Delta[SIDE_R]), np.real(Delta[SIDE_T]),
                                   np.real(ups[SIDE_R]), np.real(ups[SIDE_T]))
            try:
                res_a = solve_amplitudes_admm(amp, rho=admm_rho, tol=admm_tol,
                                              max_iter=admm_max_iter,
                                              warm=(state.beta[SIDE_R], state.beta[SIDE_T]),
                                              check=False)
            except (SolverError, np.linalg.LinAlgError) as exc:
                raise SolverError(f"amplitude subproblem failed: {exc}", it) from exc
            beta_new = np.stack([res_a.beta_R, res_a.beta_T])
            if g4_value(Delta, ups, Omega, beta_new) >= g4_value(Delta, ups, Omega, state.beta):
                state.beta = beta_new
            Y = received(effective_channels(V, side, state.beta), state.d)
            record("beta", Y, state.rho)

        current = blocks[-1][1]
        Y_true = evaluate(problem, state)
        state.trace.append({
            "iteration": it,
            "ldr_objective": current,
            "sum_rate_bits": sum_rate(Y_true, sigma2),
            "power_used": transmit_power(problem.gram, state.d),
            "max_energy_violation": energy_violation(state.beta),
        })
        state.block_trace.append(blocks)
        state.iterations = it
        if prev is not None and abs(current - prev) <= tol * max(abs(prev), 1e-300):
            state.converged = True
            break
        prev = current
    return state


def write_trace_csv(state, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in state.trace:
            w.writerow([row["iteration"]] + [repr(float(row[c])) for c in TRACE_COLUMNS[1:]])
