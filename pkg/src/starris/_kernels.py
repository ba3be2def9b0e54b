"""Hot inner loops, each with a numba and a pure-numpy implementation.

The active backend is picked once at import time from the ``STARRIS_BACKEND``
environment variable (``numba`` or ``numpy``). Numba is the default when it
can be imported. Both implementations stay reachable as :data:`NUMPY` and
:data:`NUMBA` (``None`` without numba) so tests and the benchmark can compare
them directly.
"""
import logging
import os
from types import SimpleNamespace

import numpy as np

logger = logging.getLogger(__name__)

ENV_VAR = "STARRIS_BACKEND"


# ---------------------------------------------------------------- numpy path

def _np_array_factor(xi, freq, idx1, idx2, a, b, phase, tau):
    arg = (np.pi * np.outer(xi, idx1 * a + idx2 * b)
           + phase[None, :] - 2.0 * np.pi * np.outer(freq, tau))
    return np.abs(np.exp(1j * arg).sum(axis=1)) / idx1.size


def _np_two_stage_factor(xi, freq, idx1, idx2, sub, n_sub, a_in, b_in,
                         a_out, b_out, phase1, phase2, tau_sub, sub_size):
    onehot = np.zeros((idx1.size, n_sub))
    onehot[np.arange(idx1.size), sub] = 1.0
    inc = np.exp(1j * (np.pi * np.outer(xi, idx1 * a_in + idx2 * b_in)
                       + phase1[None, :]))
    dep = np.exp(1j * (np.pi * np.outer(xi, idx1 * a_out + idx2 * b_out)
                       + phase2[None, :]))
    delay = np.exp(-2j * np.pi * np.outer(freq, tau_sub))
    total = ((inc @ onehot) * (dep @ onehot) * delay).sum(axis=1)
    return np.abs(total) / (idx1.size * sub_size)


def _np_project_quarter_disk(x_r, x_t):
    p_r = np.maximum(x_r, 0.0)
    p_t = np.maximum(x_t, 0.0)
    radius = np.sqrt(p_r * p_r + p_t * p_t)
    scale = np.where(radius > 1.0, 1.0 / np.maximum(radius, 1.0), 1.0)
    return p_r * scale, p_t * scale


def _np_admm_loop(q_r, lam_r, q_t, lam_t, g_r, g_t, rho, z_r, z_t, u_r, u_t,
                  max_iter, tol, balance):
    """Scaled-form ADMM; ``H_i = q_i diag(lam_i) q_i^T`` is the x-update curvature.

    With ``balance > 1`` the penalty is doubled (halved) whenever the primal
    residual exceeds (falls below) ``balance`` times the dual one.
    """
    z_r = z_r.copy()
    z_t = z_t.copy()
    u_r = u_r.copy()
    u_t = u_t.copy()
    r_norm = s_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        x_r = q_r @ ((q_r.T @ (g_r + rho * (z_r - u_r))) / (lam_r + rho))
        x_t = q_t @ ((q_t.T @ (g_t + rho * (z_t - u_t))) / (lam_t + rho))
        zo_r, zo_t = z_r, z_t
        z_r, z_t = _np_project_quarter_disk(x_r + u_r, x_t + u_t)
        u_r = u_r + x_r - z_r
        u_t = u_t + x_t - z_t
        r_norm = np.sqrt(np.sum((x_r - z_r) ** 2) + np.sum((x_t - z_t) ** 2))
        s_norm = rho * np.sqrt(np.sum((z_r - zo_r) ** 2)
                               + np.sum((z_t - zo_t) ** 2))
        if r_norm < tol and s_norm < tol:
            break
        if balance > 1.0:
            if r_norm > balance * s_norm:
                rho *= 2.0
                u_r = u_r / 2.0
                u_t = u_t / 2.0
            elif s_norm > balance * r_norm:
                rho /= 2.0
                u_r = u_r * 2.0
                u_t = u_t * 2.0
    return z_r, z_t, u_r, u_t, it, r_norm, s_norm


NUMPY = SimpleNamespace(
    name="numpy",
    array_factor=_np_array_factor,
    two_stage_factor=_np_two_stage_factor,
    project_quarter_disk=_np_project_quarter_disk,
    admm_loop=_np_admm_loop,
)


# ---------------------------------------------------------------- numba path

def _build_numba():
    import numba

    njit = numba.njit(cache=True, fastmath=False)

    @njit
    def array_factor(xi, freq, idx1, idx2, a, b, phase, tau):
        n_f = xi.size
        n_el = idx1.size
        out = np.empty(n_f)
        for m in range(n_f):
            re = 0.0
            im = 0.0
            for n in range(n_el):
                arg = (np.pi * xi[m] * (idx1[n] * a + idx2[n] * b)
                       + phase[n] - 2.0 * np.pi * freq[m] * tau[n])
                re += np.cos(arg)
                im += np.sin(arg)
            out[m] = np.sqrt(re * re + im * im) / n_el
        return out

    @njit
    def two_stage_factor(xi, freq, idx1, idx2, sub, n_sub, a_in, b_in,
                         a_out, b_out, phase1, phase2, tau_sub, sub_size):
        n_f = xi.size
        n_el = idx1.size
        out = np.empty(n_f)
        in_re = np.empty(n_sub)
        in_im = np.empty(n_sub)
        out_re = np.empty(n_sub)
        out_im = np.empty(n_sub)
        for m in range(n_f):
            in_re[:] = 0.0
            in_im[:] = 0.0
            out_re[:] = 0.0
            out_im[:] = 0.0
            for n in range(n_el):
                s = sub[n]
                arg_in = np.pi * xi[m] * (idx1[n] * a_in + idx2[n] * b_in) + phase1[n]
                arg_out = np.pi * xi[m] * (idx1[n] * a_out + idx2[n] * b_out) + phase2[n]
                in_re[s] += np.cos(arg_in)
                in_im[s] += np.sin(arg_in)
                out_re[s] += np.cos(arg_out)
                out_im[s] += np.sin(arg_out)
            re = 0.0
            im = 0.0
            for s in range(n_sub):
                arg = -2.0 * np.pi * freq[m] * tau_sub[s]
                c = np.cos(arg)
                d = np.sin(arg)
                p_re = in_re[s] * out_re[s] - in_im[s] * out_im[s]
                p_im = in_re[s] * out_im[s] + in_im[s] * out_re[s]
                re += p_re * c - p_im * d
                im += p_re * d + p_im * c
            out[m] = np.sqrt(re * re + im * im) / (n_el * sub_size)
        return out

    @njit
    def project_quarter_disk(x_r, x_t):
        p_r = np.empty_like(x_r)
        p_t = np.empty_like(x_t)
        for n in range(x_r.size):
            a = x_r[n] if x_r[n] > 0.0 else 0.0
            b = x_t[n] if x_t[n] > 0.0 else 0.0
            radius = np.sqrt(a * a + b * b)
            if radius > 1.0:
                a /= radius
                b /= radius
            p_r[n] = a
            p_t[n] = b
        return p_r, p_t

    @njit
    def admm_loop(q_r, lam_r, q_t, lam_t, g_r, g_t, rho, z_r, z_t, u_r, u_t,
                  max_iter, tol, balance):
        z_r = z_r.copy()
        z_t = z_t.copy()
        u_r = u_r.copy()
        u_t = u_t.copy()
        n = z_r.size
        r_norm = np.inf
        s_norm = np.inf
        it = 0
        for it in range(1, max_iter + 1):
            x_r = q_r @ ((q_r.T @ (g_r + rho * (z_r - u_r))) / (lam_r + rho))
            x_t = q_t @ ((q_t.T @ (g_t + rho * (z_t - u_t))) / (lam_t + rho))
            r_sq = 0.0
            s_sq = 0.0
            for i in range(n):
                a = x_r[i] + u_r[i]
                b = x_t[i] + u_t[i]
                if a < 0.0:
                    a = 0.0
                if b < 0.0:
                    b = 0.0
                radius = np.sqrt(a * a + b * b)
                if radius > 1.0:
                    a /= radius
                    b /= radius
                s_sq += (a - z_r[i]) ** 2 + (b - z_t[i]) ** 2
                z_r[i] = a
                z_t[i] = b
                u_r[i] += x_r[i] - a
                u_t[i] += x_t[i] - b
                r_sq += (x_r[i] - a) ** 2 + (x_t[i] - b) ** 2
            r_norm = np.sqrt(r_sq)
            s_norm = rho * np.sqrt(s_sq)
            if r_norm < tol and s_norm < tol:
                break
            if balance > 1.0:
                if r_norm > balance * s_norm:
                    rho *= 2.0
                    u_r /= 2.0
                    u_t /= 2.0
                elif s_norm > balance * r_norm:
                    rho /= 2.0
                    u_r *= 2.0
                    u_t *= 2.0
        return z_r, z_t, u_r, u_t, it, r_norm, s_norm

    return SimpleNamespace(
        name="numba",
        array_factor=array_factor,
        two_stage_factor=two_stage_factor,
        project_quarter_disk=project_quarter_disk,
        admm_loop=admm_loop,
    )


try:
    NUMBA = _build_numba()
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA = None


def _select():
    wanted = os.environ.get(ENV_VAR, "numba").strip().lower()
    if wanted not in ("numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numba" and NUMBA is None:
        logger.warning("numba unavailable, using the numpy kernels")
        return NUMPY
    return NUMBA if wanted == "numba" else NUMPY


active = _select()


def array_factor(xi, freq, idx1, idx2, a, b, phase, tau):
    """Normalized magnitude of a phased planar-array sum, one value per frequency."""
    return active.array_factor(xi, freq, idx1, idx2, a, b, phase, tau)


def two_stage_factor(xi, freq, idx1, idx2, sub, n_sub, a_in, b_in, a_out,
                     b_out, phase1, phase2, tau_sub, sub_size):
    """Normalized gain of the combine / delay / split sub-surface architecture."""
    return active.two_stage_factor(xi, freq, idx1, idx2, sub, n_sub, a_in,
                                   b_in, a_out, b_out, phase1, phase2,
                                   tau_sub, sub_size)


def project_quarter_disk(x_r, x_t):
    return active.project_quarter_disk(x_r, x_t)


def admm_loop(q_r, lam_r, q_t, lam_t, g_r, g_t, rho, z_r, z_t, u_r, u_t,
              max_iter, tol, balance=10.0):
    return active.admm_loop(q_r, lam_r, q_t, lam_t, g_r, g_t, float(rho), z_r, z_t,
                            u_r, u_t, int(max_iter), float(tol), float(balance))
