"""End-to-end assembly of one simulated deployment for a given hardware scheme.

Schemes:

``fully``         BS time delays + one true delay per RIS element
``sub``           BS time delays + double-layer phases and one delay per sub-surface
``conventional``  BS time delays + phase-only RIS
``none``          phase-only BS beam (zero delays) + phase-only RIS
"""
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, build_channel_set
from .errors import ConfigError
from .frontend import BsFrontend, build_frontend
from .optimizer import FpProblem
from .ris import RisState, build_ris_state
from .scenario import (Allocation, Geometry, SubcarrierGrid, allocate_users,
                       apply_csi_error, build_geometry, subcarrier_frequencies)

SCHEMES = ("fully", "sub", "conventional", "none")


@dataclass(frozen=True)
class System:
    cfg: object
    grid: SubcarrierGrid
    geometry: Geometry
    allocation: Allocation
    channels: ChannelSet
    frontend: BsFrontend
    ris: RisState
    scheme: str


def build_system(cfg, scheme=None, rng=None):
    """Geometry, channels, BS frontend and designed RIS state.

    ``rng`` is only consumed by the random user layout.
    """
    scheme = cfg.structure if scheme is None else scheme
    if scheme not in SCHEMES:
        raise ConfigError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    grid = subcarrier_frequencies(cfg.fc, cfg.B, cfg.M)
    geo = build_geometry(cfg, rng)
    alloc = allocate_users(geo, cfg.R, cfg.K)
    channels = build_channel_set(cfg, geo, grid)
    frontend = build_frontend(cfg, geo, grid, use_td=scheme != "none")
    ris_structure = "conventional" if scheme == "none" else scheme
    ris = build_ris_state(cfg, geo, alloc, ris_structure)
    return System(cfg, grid, geo, alloc, channels, frontend, ris, scheme)


def cascade_tensor(channels, frontend, ris, side):
    """``V[m, k] = (h_mk * phi_side(k), m)[:, None] * (G_m F_m)`` of shape ``(M, K, R*N, Nrf)``."""
    M, K, R, N = channels.M, channels.K, channels.R, channels.N
    V = np.empty((M, K, R * N, frontend.Nrf), dtype=complex)
    for m in range(M):
        f = channels.grid.frequencies[m]
        GF = channels.stacked_G(m) @ frontend.F[m]
        phase = [ris.phase_entries(f, s).reshape(R * N) for s in (0, 1)]
        for k in range(K):
            V[m, k] = (channels.stacked_h(m, k) * phase[side[k]])[:, None] * GF
    return V


def estimated_cascade(system, V, rng):
    """Cascade tensor as seen with imperfect CSI (``cfg.delta``, ``cfg.csi_model``).

    ``effective``: every entry of each effective channel ``hhat[m, k]`` gets a
    relative error ``CN(0, delta)``, applied as a per-(m, k, beam) factor on
    the cascade; RF chains pointing at the same surface share one draw.
    ``elementwise``: each entry of every ``G[r, m]`` and ``h[r, m, k]`` gets
    its own relative error.
    """
    cfg = system.cfg
    if cfg.delta == 0:
        return V
    if cfg.csi_model == "effective":
        # chains sharing an analog beam observe the same effective channel
        # entry, hence the same estimation error
        chain_ris = system.frontend.chain_ris
        factor = apply_csi_error(np.ones((V.shape[0], V.shape[1], cfg.R), dtype=complex),
                                 cfg.delta, rng)
        return V * factor[:, :, None, chain_ris]
    ch = system.channels
    noisy = ch.with_links(G=apply_csi_error(ch.G, cfg.delta, rng),
                          h=apply_csi_error(ch.h, cfg.delta, rng))
    return cascade_tensor(noisy, system.frontend, system.ris, system.geometry.user_side)


def make_problem(system, csi_rng=None):
    cfg = system.cfg
    V = cascade_tensor(system.channels, system.frontend, system.ris,
                       system.geometry.user_side)
    V_est = V
    if cfg.delta > 0:
        if csi_rng is None:
            raise ConfigError("CSI error requested without a random generator")
        V_est = estimated_cascade(system, V, csi_rng)
    F = system.frontend.F
    gram = np.einsum("mna,mnb->mab", F.conj(), F)
    return FpProblem(V_est, gram, system.geometry.user_side, cfg.noise_power,
                     cfg.Pmax, V_true=V)


def solver_knobs(cfg):
    return dict(tol=cfg.tol, max_iter=cfg.max_iter, admm_rho=cfg.admm_rho,
                admm_tol=cfg.admm_tol, admm_max_iter=cfg.admm_max_iter,
                qcqp_tol=cfg.qcqp_tol, monotone_tol=cfg.monotone_tol)
