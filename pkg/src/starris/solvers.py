"""Quadratic subproblem solvers.

* :func:`solve_qcqp` minimizes ``d^H E d - 2 Re(v^H d)`` over a single
  power ball ``d^H C d <= P`` by bisection on the Lagrange multiplier.
  Block-diagonal problems can be passed as stacks of blocks sharing one
  multiplier.
* :func:`solve_amplitudes_admm` minimizes ``sum_i b_i^T D_i b_i - 2 y_i^T b_i``
  over per-element quarter disks ``b_R[n]^2 + b_T[n]^2 <= 1, b >= 0``.
* :func:`projected_gradient_oracle` is a slow, independent reference used
  by the tests.
"""
import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ProblemError, SolverError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------- QCQP

@dataclass(frozen=True)
class QcqpProblem:
    """``E``, ``C`` are ``(n, n)`` or block stacks ``(B, n, n)``; ``v`` matches."""

    E: np.ndarray
    v: np.ndarray
    C: np.ndarray
    Pmax: float

    def objective(self, d):
        return qcqp_objective(self.E, self.v, d)

    def power(self, d):
        return _quad(self.C, d)


@dataclass(frozen=True)
class QcqpResult:
    d: np.ndarray
    lam: float
    power: float
    objective: float
    iterations: int
    stationarity: float
    slackness: float


def _quad(A, x):
    return float(np.real(np.sum(x.conj() * (A @ x[..., None])[..., 0])))


def qcqp_objective(E, v, d):
    return _quad(E, d) - 2.0 * float(np.real(np.sum(v.conj() * d)))


def _check_psd(name, A, tol=1e-10):
    A = np.asarray(A)
    scale = max(np.abs(A).max(), 1e-300)
    if np.abs(A - np.swapaxes(A, -1, -2).conj()).max() > 1e-12 * scale:
        raise ProblemError(f"{name} is not Hermitian")
    w = np.linalg.eigvalsh(0.5 * (A + np.swapaxes(A, -1, -2).conj()))
    if w.min() < -tol * scale:
        raise ProblemError(f"{name} is not positive semidefinite (min eigenvalue {w.min():.3e})")


def solve_qcqp(problem, tol=1e-8, max_doublings=200, max_bisections=400, check=True):
    """Solve the single-ball QCQP; returns a :class:`QcqpResult`.

    ``d(lam) = (E + lam C + mu I)^-1 v`` with a ridge ``mu`` equal to
    ``1e-12`` times the mean diagonal of ``E + lam C``.
    The power of ``d(lam)`` falls monotonically in ``lam``, so the active
    multiplier is bracketed by doubling and refined by bisection (in log
    space once the bracket is positive) until the power is within
    ``tol * Pmax`` of the budget. The returned point is always the feasible
    end of the bracket.
    """
    E = np.asarray(problem.E, dtype=complex)
    C = np.asarray(problem.C, dtype=complex)
    v = np.asarray(problem.v, dtype=complex)
    P = float(problem.Pmax)
    if P <= 0:
        raise ProblemError(f"power budget must be positive, got {P}")
    batched = E.ndim == 3
    if not batched:
        E, C, v = E[None], C[None], v[None]
    if E.shape != C.shape or E.shape[:2] != v.shape or E.shape[1] != E.shape[2]:
        raise ProblemError(f"inconsistent shapes E{E.shape}, C{C.shape}, v{v.shape}")
    if check:
        _check_psd("E", E)
        _check_psd("C", C)
    dim = E.shape[0] * E.shape[1]
    trE = float(np.real(np.trace(E, axis1=1, axis2=2).sum()))
    trC = float(np.real(np.trace(C, axis1=1, axis2=2).sum()))
    eye = np.eye(E.shape[1])[None]

    def point(lam):
        # ridge tied to the trace of the matrix actually solved, so it stays
        # above round-off when lam * C dominates E
        base = trE + lam * trC
        mu = 1e-12 * (base if base > 0 else 1.0) / dim
        d = np.linalg.solve(E + lam * C + mu * eye, v[..., None])[..., 0]
        return d, _quad(C, d)

    iterations = 0
    d, p = point(0.0)
    lam = 0.0
    if p > P:
        lo = 0.0
        hi = max(trE / trC, 1e-300) if trC > 0 and trE > 0 else 1.0
        d_hi, p_hi = point(hi)
        doublings = 0
        while p_hi > P:
            lo = hi
            hi *= 2.0
            doublings += 1
            if doublings > max_doublings:
                raise SolverError(f"power constraint not bracketed after {max_doublings} "
                                  f"doublings (power {p_hi:.3e} > {P:.3e})")
            d_hi, p_hi = point(hi)
        while abs(p_hi - P) > tol * P and iterations < max_bisections:
            iterations += 1
            mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * hi
            if mid in (lo, hi):
                break
            d_mid, p_mid = point(mid)
            if p_mid > P:
                lo = mid
            else:
                hi, d_hi, p_hi = mid, d_mid, p_mid
        d, p, lam = d_hi, p_hi, hi
    resid = np.einsum("bij,bj->bi", E + lam * C, d) - v
    stationarity = float(np.linalg.norm(resid) / max(np.linalg.norm(v), 1e-300))
    slackness = abs(lam * (p - P))
    obj = qcqp_objective(E, v, d)
    if not batched:
        d = d[0]
    return QcqpResult(d, float(lam), p, obj, iterations, stationarity, slackness)


# ---------------------------------------------------------------- amplitudes

@dataclass(frozen=True)
class AmplitudeProblem:
    """Real quadratic data for the reflection (``R``) and transmission (``T``) amplitudes.

    Element ``n`` of ``beta_R`` pairs with element ``n`` of ``beta_T``.
    """

    D_R: np.ndarray
    D_T: np.ndarray
    y_R: np.ndarray
    y_T: np.ndarray

    def objective(self, b_R, b_T):
        return (b_R @ self.D_R @ b_R - 2 * self.y_R @ b_R
                + b_T @ self.D_T @ b_T - 2 * self.y_T @ b_T)

    def validate(self):
        n = self.y_R.size
        if self.D_R.shape != (n, n) or self.D_T.shape != (n, n) or self.y_T.shape != (n,):
            raise ProblemError("amplitude problem blocks do not pair element by element")
        for name, D in (("D_R", self.D_R), ("D_T", self.D_T)):
            if np.iscomplexobj(D) or np.iscomplexobj(getattr(self, "y" + name[1:])):
                raise ProblemError(f"{name} must be real")
            _check_psd(name, D)


@dataclass(frozen=True)
class AmplitudeResult:
    beta_R: np.ndarray
    beta_T: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool


def project_quarter_disk(x_R, x_T):
    """Clamp negatives to zero, then scale radially onto the unit disk if outside."""
    return _kernels.project_quarter_disk(np.ascontiguousarray(x_R, dtype=float),
                                         np.ascontiguousarray(x_T, dtype=float))


def solve_amplitudes_admm(problem, rho=0.1, tol=1e-6, max_iter=2000, warm=None,
                          check=True, balance=10.0):
    """ADMM with x = (beta_R, beta_T) and z its copy in the constraint set.

    The data are first divided by their largest curvature / linear term,
    which leaves the minimizer unchanged and makes ``rho`` scale free. The
    penalty then adapts by residual balancing: doubled when the primal
    residual is ``balance`` times the dual one and halved in the opposite
    case (``balance <= 1`` keeps it fixed). Rank deficient curvature, common
    here, makes a fixed penalty crawl along flat directions.

    The answer is the last projected iterate, hence always feasible.
    Residuals above ``1e-3`` at the cap are logged and flagged through
    ``converged=False``.
    """
    if check:
        problem.validate()
    D_R = np.asarray(problem.D_R, dtype=float)
    D_T = np.asarray(problem.D_T, dtype=float)
    y_R = np.asarray(problem.y_R, dtype=float)
    y_T = np.asarray(problem.y_T, dtype=float)
    n = y_R.size
    if not (np.all(np.isfinite(D_R)) and np.all(np.isfinite(D_T))):
        raise ProblemError("amplitude problem has non-finite data")
    lam_R, q_R = np.linalg.eigh(D_R)
    lam_T, q_T = np.linalg.eigh(D_T)
    scale = max(lam_R[-1], lam_T[-1], np.abs(y_R).max(initial=0.0),
                np.abs(y_T).max(initial=0.0))
    if not np.isfinite(scale):
        raise ProblemError("amplitude problem has non-finite data")
    if scale <= 0:
        zero = np.zeros(n)
        return AmplitudeResult(zero, zero.copy(), 0.0, 0, 0.0, 0.0, True)
    lam_R = np.maximum(2.0 * lam_R / scale, 0.0)
    lam_T = np.maximum(2.0 * lam_T / scale, 0.0)
    if warm is None:
        z_R, z_T = np.zeros(n), np.zeros(n)
    else:
        z_R, z_T = project_quarter_disk(*warm)
    u_R, u_T = np.zeros(n), np.zeros(n)
    z_R, z_T, u_R, u_T, it, r_norm, s_norm = _kernels.admm_loop(
        np.ascontiguousarray(q_R), lam_R, np.ascontiguousarray(q_T), lam_T,
        2.0 * y_R / scale, 2.0 * y_T / scale, rho,
        np.ascontiguousarray(z_R), np.ascontiguousarray(z_T), u_R, u_T, max_iter, tol,
        balance)
    converged = r_norm < tol and s_norm < tol
    if not converged and max(r_norm, s_norm) > 1e-3:
        logger.warning("amplitude ADMM stopped at %d iterations with residuals %.2e / %.2e",
                       it, r_norm, s_norm)
    return AmplitudeResult(z_R, z_T, float(problem.objective(z_R, z_T)), int(it),
                           float(r_norm), float(s_norm), bool(converged))


# ---------------------------------------------------------------- oracle

def _whiten(C):
    w, U = np.linalg.eigh(C)
    if w.min() <= 0:
        raise ProblemError("the oracle needs a positive definite constraint matrix")
    return (U * np.sqrt(w)) @ U.conj().T, (U / np.sqrt(w)) @ U.conj().T


def projected_gradient_oracle(problem, steps=100_000, rate=None, half_life=None):
    """Projected gradient descent with slowly diminishing steps.

    ``step_k = rate / (1 + k / half_life)``; ``rate`` defaults to the inverse
    Lipschitz constant of the gradient and ``half_life`` to ``steps``. For a
    :class:`QcqpProblem` (positive definite ``C``) the iteration runs on the
    whitened variable ``w = C^(1/2) d`` so the projection is onto a ball.

    ``problem`` may also be a list of same-sized problems, which are iterated
    together. Returns ``d`` or ``(beta_R, beta_T)`` (lists for list input).
    """
    single = not isinstance(problem, (list, tuple))
    problems = [problem] if single else list(problem)
    half_life = steps if half_life is None else half_life
    kind = type(problems[0])
    if any(type(p) is not kind for p in problems):
        raise TypeError("oracle batches must hold one problem type")
    if kind is QcqpProblem:
        out = _oracle_qcqp(problems, steps, rate, half_life)
    elif kind is AmplitudeProblem:
        out = _oracle_amplitudes(problems, steps, rate, half_life)
    else:
        raise TypeError(f"no oracle for {kind.__name__}")
    return out[0] if single else out


def _oracle_qcqp(problems, steps, rate, half_life):
    Ws, Ew, vw = [], [], []
    for p in problems:
        Ch, Cih = _whiten(np.asarray(p.C, dtype=complex))
        Ws.append(Cih)
        Ew.append(Cih @ np.asarray(p.E, dtype=complex) @ Cih)
        vw.append(Cih @ np.asarray(p.v, dtype=complex))
    Ew, vw, Ws = np.array(Ew), np.array(vw), np.array(Ws)
    radius = np.sqrt([p.Pmax for p in problems])[:, None]
    if rate is None:
        rate = 1.0 / (2.0 * np.maximum(np.linalg.eigvalsh(Ew)[:, -1], 1e-300))
    rate = np.broadcast_to(np.asarray(rate, dtype=float), (len(problems),))[:, None]
    w = np.zeros_like(vw)
    for k in range(steps):
        grad = 2.0 * ((Ew @ w[..., None])[..., 0] - vw)
        w = w - rate / (1.0 + k / half_life) * grad
        nw = np.linalg.norm(w, axis=1, keepdims=True)
        w = np.where(nw > radius, w * radius / np.maximum(nw, 1e-300), w)
    return list((Ws @ w[..., None])[..., 0])


def _oracle_amplitudes(problems, steps, rate, half_life):
    D = np.array([[p.D_R, p.D_T] for p in problems], dtype=float)
    y = np.array([[p.y_R, p.y_T] for p in problems], dtype=float)
    if rate is None:
        rate = 1.0 / (2.0 * np.maximum(np.linalg.eigvalsh(D)[..., -1].max(axis=1), 1e-300))
    rate = np.broadcast_to(np.asarray(rate, dtype=float), (len(problems),))[:, None, None]
    b = np.zeros_like(y)
    for k in range(steps):
        b = b - rate / (1.0 + k / half_life) * 2.0 * ((D @ b[..., None])[..., 0] - y)
        b = np.maximum(b, 0.0)
        radius = np.sqrt((b * b).sum(axis=1, keepdims=True))
        b = b / np.maximum(radius, 1.0)
    return [(bb[0], bb[1]) for bb in b]
