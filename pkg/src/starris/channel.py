"""Steering vectors, path gains and per-subcarrier LoS channels."""
import csv
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InvariantError
from .scenario import SPEED_OF_LIGHT, SubcarrierGrid


def ris_indices(N1, N2):
    """Row/column index of every RIS element in flattened order ``n = N2*n1 + n2``."""
    n1, n2 = np.divmod(np.arange(N1 * N2), N2)
    return n1, n2


def ris_steering_vector(f_m, u, v, N1, N2, fc):
    """Unit-norm UPA response ``exp(j pi xi (n1 sin u sin v + n2 cos v)) / sqrt(N)``."""
    xi = f_m / fc
    n1, n2 = ris_indices(N1, N2)
    arg = np.pi * xi * (n1 * np.sin(u) * np.sin(v) + n2 * np.cos(v))
    return np.exp(1j * arg) / np.sqrt(N1 * N2)


def bs_steering_vector(f_m, theta, Nt, fc):
    """Unit-norm ULA response ``exp(j pi xi n sin(theta)) / sqrt(Nt)``."""
    xi = f_m / fc
    return np.exp(1j * np.pi * xi * np.arange(Nt) * np.sin(theta)) / np.sqrt(Nt)


def path_gain(f_m, d, kappa_abs=0.0):
    """Free-space spreading loss times molecular absorption, ``c/(4 pi f d) exp(-kappa d/2)``."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise GeometryError(f"path length must be positive, got {d}")
    if np.any(np.asarray(f_m) <= 0):
        raise GeometryError("frequency must be positive")
    return SPEED_OF_LIGHT / (4 * np.pi * f_m * d) * np.exp(-kappa_abs * d / 2.0)


@dataclass(frozen=True)
class ChannelSet:
    """BS->RIS matrices ``G[r, m]`` (N x Nt) and RIS->user rows ``h[r, m, k]`` (N).

    ``alpha_b[r, m]`` and ``alpha_rk[r, m, k]`` are the path gains, including
    the optional aperture scaling.
    """

    G: np.ndarray
    h: np.ndarray
    alpha_b: np.ndarray
    alpha_rk: np.ndarray
    grid: SubcarrierGrid

    @property
    def R(self):
        return self.G.shape[0]

    @property
    def M(self):
        return self.G.shape[1]

    @property
    def N(self):
        return self.G.shape[2]

    @property
    def Nt(self):
        return self.G.shape[3]

    @property
    def K(self):
        return self.h.shape[2]

    def stacked_G(self, m):
        """``(R*N, Nt)`` matrix with RIS blocks in index order."""
        return self.G[:, m].reshape(self.R * self.N, self.Nt)

    def stacked_h(self, m, k):
        """``(R*N,)`` row stacking the RIS->user vectors of user k."""
        return self.h[:, m, k].reshape(self.R * self.N)

    def with_links(self, G=None, h=None):
        return ChannelSet(self.G if G is None else G, self.h if h is None else h,
                          self.alpha_b, self.alpha_rk, self.grid)


def build_channel_set(cfg, geo, grid):
    """Per-subcarrier LoS channels for every RIS and user.

    With ``cfg.aperture_gain`` the unit-norm steering vectors are rescaled
    to unit-modulus entries (G by sqrt(N Nt), h by sqrt(N)), which restores
    the array gain in the link budget.
    """
    R, K, N, Nt = cfg.R, cfg.K, cfg.N, cfg.Nt
    if geo.R != R or geo.K != K:
        raise InvariantError(f"geometry has R={geo.R}, K={geo.K}; config has R={R}, K={K}")
    freqs = grid.frequencies
    M = freqs.size
    fc = cfg.fc
    scale_g = np.sqrt(N * Nt) if cfg.aperture_gain else 1.0
    scale_h = np.sqrt(N) if cfg.aperture_gain else 1.0
    G = np.empty((R, M, N, Nt), dtype=complex)
    h = np.empty((R, M, K, N), dtype=complex)
    alpha_b = np.empty((R, M))
    alpha_rk = np.empty((R, M, K))
    for r in range(R):
        for m, f in enumerate(freqs):
            alpha_b[r, m] = path_gain(f, geo.d_b[r], cfg.kappa_abs) * scale_g
            b = ris_steering_vector(f, geo.u_b[r], geo.v_b[r], cfg.N1, cfg.N2, fc)
            a = bs_steering_vector(f, geo.theta_b[r], Nt, fc)
            coef = alpha_b[r, m] * np.exp(-2j * np.pi * geo.t_b[r] * f)
            G[r, m] = coef * np.outer(b, a.conj())
            for k in range(K):
                alpha_rk[r, m, k] = path_gain(f, geo.d_rk[r, k], cfg.kappa_abs) * scale_h
                bk = ris_steering_vector(f, geo.u_rk[r, k], geo.v_rk[r, k],
                                         cfg.N1, cfg.N2, fc)
                h[r, m, k] = alpha_rk[r, m, k] * np.exp(-2j * np.pi * geo.t_rk[r, k] * f) * bk
    return ChannelSet(G, h, alpha_b, alpha_rk, grid)


def equivalent_channel(ch, ris, m, k, side):
    """BS->user row ``sum_r h_r A_r Phi_r G_r`` through every STAR-RIS on ``side``."""
    diag = ris.beta[side] * ris.phase_entries(ch.grid.frequencies[m], side)
    if diag.shape != (ch.R, ch.N):
        raise InvariantError(f"RIS state is {diag.shape}, channel expects {(ch.R, ch.N)}")
    out = np.zeros(ch.Nt, dtype=complex)
    for r in range(ch.R):
        out += (ch.h[r, m, k] * diag[r]) @ ch.G[r, m]
    return out


def dump_channels_csv(ch, path):
    """One row per (kind, r, m, k, element) with real and imaginary parts."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link", "r", "m", "k", "row", "col", "real", "imag"])
        for r in range(ch.R):
            for m in range(ch.M):
                for (row, col), val in np.ndenumerate(ch.G[r, m]):
                    w.writerow(["G", r, m, "", row, col, repr(val.real), repr(val.imag)])
                for k in range(ch.K):
                    for n, val in enumerate(ch.h[r, m, k]):
                        w.writerow(["h", r, m, k, n, "", repr(val.real), repr(val.imag)])
