"""Hybrid BS frontend: phase-shifter beamformer, per-chain true time delays, F_m."""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


def chain_to_ris(Nrf, R):
    """RIS served by each RF chain (chains are split evenly, in order)."""
    return np.arange(Nrf) * R // Nrf


def analog_beamformer(theta, Nt, Kt, local=True):
    """Block-structured PS matrix ``F_A`` of shape ``(Nt, Kt*Nrf)``.

    Column ``l*Kt + k`` drives antenna segment ``k`` of chain ``l``. With
    ``local`` the segment phases restart at every segment,
    ``exp(j pi p sin(theta))`` for ``p = 0..P-1``, and the inter-segment
    progression is left to the time delays. Without it the segment carries
    its slice of the full steering vector (a PS-only beam).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if Kt < 1 or Nt % Kt:
        raise ConfigError(f"Nt={Nt} is not divisible by Kt={Kt}")
    P = Nt // Kt
    Nrf = theta.size
    FA = np.zeros((Nt, Kt * Nrf), dtype=complex)
    n = np.arange(Nt)
    for l, th in enumerate(theta):
        idx = n % P if local else n
        col = np.exp(1j * np.pi * idx * np.sin(th)) / np.sqrt(Nt)
        for k in range(Kt):
            FA[k * P:(k + 1) * P, l * Kt + k] = col[k * P:(k + 1) * P]
    return FA


def td_delays(theta, Kt, P, Tc):
    """Delay ladder ``[0, b Tc, ..., b Tc (Kt-1)]`` with ``b = -P sin(theta)/2``."""
    b = -P * np.sin(theta) / 2.0
    return b * Tc * np.arange(Kt)


def td_phase_matrix(z, f_m):
    """Block-diagonal ``(Kt*Nrf, Nrf)`` matrix of ``exp(-j 2 pi f z_l)`` columns."""
    z = np.atleast_2d(z)
    Nrf, Kt = z.shape
    out = np.zeros((Kt * Nrf, Nrf), dtype=complex)
    for l in range(Nrf):
        out[l * Kt:(l + 1) * Kt, l] = np.exp(-2j * np.pi * f_m * z[l])
    return out


def combined_frontend(FA, Ftd):
    return FA @ Ftd


@dataclass(frozen=True)
class BsFrontend:
    FA: np.ndarray
    z: np.ndarray
    theta: np.ndarray
    F: np.ndarray  # (M, Nt, Nrf)
    chain_ris: np.ndarray

    @property
    def Nrf(self):
        return self.F.shape[2]


def build_frontend(cfg, geo, grid, use_td=True):
    """Frontend pointing chain l at RIS ``chain_to_ris(l)``.

    ``use_td=False`` gives the PS-only baseline (full steering-vector phases,
    zero delays). ``cfg.realizable_delays`` shifts each delay ladder to be
    nonnegative, which only adds a common phase per chain.
    """
    chain_ris = chain_to_ris(cfg.Nrf, cfg.R)
    theta = geo.theta_b[chain_ris]
    P = cfg.P
    if use_td:
        FA = analog_beamformer(theta, cfg.Nt, cfg.Kt, local=True)
        z = np.array([td_delays(th, cfg.Kt, P, 1.0 / cfg.fc) for th in theta])
        if cfg.realizable_delays:
            z = z - z.min(axis=1, keepdims=True)
    else:
        FA = analog_beamformer(theta, cfg.Nt, cfg.Kt, local=False)
        z = np.zeros((cfg.Nrf, cfg.Kt))
    F = np.stack([combined_frontend(FA, td_phase_matrix(z, f)) for f in grid.frequencies])
    return BsFrontend(FA, z, theta, F, chain_ris)
