"""Normalized array gains of the three STAR-RIS structures and the BS frontend.

Each structure has a direct-summation evaluator (built on the kernels in
:mod:`starris._kernels`) and an independent closed form based on the
Dirichlet-type kernel :func:`xi_kernel`.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import bs_steering_vector, ris_indices
from .ris import (design_conventional_phases, design_fully_connected,
                  design_sub_connected, subsurface_index)
from .scenario import subcarrier_frequencies

_SERIES_BAND = 1e-8


def xi_kernel(N, x):
    """``sin(N pi x / 2) / sin(pi x / 2)`` with its removable singularities filled in.

    ``x`` is first reduced to ``y = x - 2k`` in ``[-1, 1]`` (the kernel picks up
    ``(-1)^((N-1)k)``) so nothing is lost to cancellation near the spikes.
    Within the band around ``y = 0`` the Taylor expansion
    ``N (1 - (N^2-1)(pi y/2)^2/6)`` replaces the ratio.
    """
    x = np.asarray(x, dtype=float)
    k = np.round(x / 2.0)
    y = x - 2.0 * k
    sign = np.where(((N - 1) * k.astype(np.int64)) % 2 == 0, 1.0, -1.0)
    den = np.sin(np.pi * y / 2)
    near = np.abs(den) < _SERIES_BAND
    safe = np.where(near, 1.0, den)
    ratio = np.where(near, N * (1.0 - (N * N - 1) * (np.pi * y / 2) ** 2 / 6.0),
                     np.sin(N * np.pi * y / 2) / safe)
    out = sign * ratio
    return out if out.ndim else float(out)


def _spatial(u, v):
    return np.sin(u) * np.sin(v), np.cos(v)


def _ris_arrays(N1, N2):
    n1, n2 = ris_indices(N1, N2)
    return n1.astype(float), n2.astype(float)


# ---------------------------------------------------------------- conventional

def gain_conventional(freqs, fc, N1, N2, u1, v1, ui, vi, phases=None):
    """Direct-sum gain of a PS-only surface, one value per frequency."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if phases is None:
        phases = design_conventional_phases(u1, v1, ui, vi, N1, N2)
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    n1, n2 = _ris_arrays(N1, N2)
    return _kernels.array_factor(freqs / fc, freqs, n1, n2, vsi + vs1, eti + et1,
                                 np.asarray(phases, dtype=float), np.zeros(N1 * N2))


def gain_conventional_closed(freqs, fc, N1, N2, u1, v1, ui, vi):
    xi = np.atleast_1d(np.asarray(freqs, dtype=float)) / fc
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    return np.abs(xi_kernel(N1, (xi - 1) * (vsi + vs1))
                  * xi_kernel(N2, (xi - 1) * (eti + et1))) / (N1 * N2)


# ---------------------------------------------------------------- fully connected

def gain_fully(freqs, fc, N1, N2, u1, v1, ui, vi, phases=None, tau=None):
    """Direct-sum gain with a true delay behind every element."""
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if tau is None:
        dphase, tau = design_fully_connected(u1, v1, ui, vi, fc, N1, N2)
        phases = dphase if phases is None else phases
    if phases is None:
        phases = np.zeros(N1 * N2)
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    n1, n2 = _ris_arrays(N1, N2)
    return _kernels.array_factor(freqs / fc, freqs, n1, n2, vsi + vs1, eti + et1,
                                 np.asarray(phases, dtype=float),
                                 np.asarray(tau, dtype=float))


# ---------------------------------------------------------------- sub-connected

def gain_sub(freqs, fc, N1, N2, S1, S2, u1, v1, ui, vi, design=None):
    """Direct-sum gain of the combine / delay / split sub-surface architecture.

    Every sub-surface coherently combines its L elements through the first
    phase layer, applies one true delay and re-radiates through the second
    layer. The lossless combiner and splitter are normalized so the gain is
    1 at the centre frequency.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if design is None:
        design = design_sub_connected(u1, v1, ui, vi, fc, N1, N2, S1, S2)
    phase1, phase2, tau = design
    sub, _, _ = subsurface_index(N1, N2, S1, S2)
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    n1, n2 = _ris_arrays(N1, N2)
    L = (N1 // S1) * (N2 // S2)
    return _kernels.two_stage_factor(freqs / fc, freqs, n1, n2, sub.astype(np.int64),
                                     S1 * S2, vs1, et1, vsi, eti,
                                     np.asarray(phase1, dtype=float),
                                     np.asarray(phase2, dtype=float),
                                     np.asarray(tau, dtype=float), float(L))


def gain_sub_closed(freqs, fc, N1, N2, S1, S2, u1, v1, ui, vi):
    """Product of four kernel factors, one per side and axis, over ``L^2``."""
    xi = np.atleast_1d(np.asarray(freqs, dtype=float)) / fc
    L1, L2 = N1 // S1, N2 // S2
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    prod = (xi_kernel(L1, (xi - 1) * vs1) * xi_kernel(L2, (xi - 1) * et1)
            * xi_kernel(L1, (xi - 1) * vsi) * xi_kernel(L2, (xi - 1) * eti))
    return np.abs(prod) / (L1 * L2) ** 2


def gain_sub_diagonal(freqs, fc, N1, N2, S1, S2, u1, v1, ui, vi, design=None):
    """Direct-sum gain of the element-wise composition used in the channel model.

    Each element applies ``exp(j(phi1 + phi2 - 2 pi f tau_s))`` on its own
    path, i.e. the composed diagonal matrix of the state.
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if design is None:
        design = design_sub_connected(u1, v1, ui, vi, fc, N1, N2, S1, S2)
    phase1, phase2, tau = design
    sub, _, _ = subsurface_index(N1, N2, S1, S2)
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    n1, n2 = _ris_arrays(N1, N2)
    return _kernels.array_factor(freqs / fc, freqs, n1, n2, vsi + vs1, eti + et1,
                                 np.asarray(phase1 + phase2, dtype=float),
                                 np.asarray(tau, dtype=float)[sub])


def gain_sub_diagonal_closed(freqs, fc, N1, N2, S1, S2, u1, v1, ui, vi):
    xi = np.atleast_1d(np.asarray(freqs, dtype=float)) / fc
    L1, L2 = N1 // S1, N2 // S2
    vs1, et1 = _spatial(u1, v1)
    vsi, eti = _spatial(ui, vi)
    return np.abs(xi_kernel(L1, (xi - 1) * (vs1 + vsi))
                  * xi_kernel(L2, (xi - 1) * (et1 + eti))) / (L1 * L2)


# ---------------------------------------------------------------- BS frontend

def bs_gain(F_col, f_m, theta, fc):
    """``|a(f, theta)^H f_bar|`` for one frontend column."""
    a = bs_steering_vector(f_m, theta, F_col.size, fc)
    return float(np.abs(np.vdot(a, F_col)))


def bs_gain_closed(P, xi, theta):
    return np.abs(xi_kernel(P, (np.asarray(xi) - 1) * np.sin(theta))) / P


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class GainRow:
    structure: str
    side: str
    bandwidth_hz: float
    m: int
    f_hz: float
    gain: float


GAIN_COLUMNS = ("structure", "side", "bandwidth_hz", "m", "f_hz", "gain")


def structure_gain(structure, freqs, fc, N1, N2, S1, S2, u1, v1, ui, vi):
    if structure == "conventional":
        return gain_conventional(freqs, fc, N1, N2, u1, v1, ui, vi)
    if structure == "fully":
        return gain_fully(freqs, fc, N1, N2, u1, v1, ui, vi)
    if structure == "sub":
        return gain_sub(freqs, fc, N1, N2, S1, S2, u1, v1, ui, vi)
    raise ValueError(f"unknown structure {structure!r}")


def sweep_gain(cfg, structures, bandwidths, links):
    """Per-subcarrier gain table.

    ``links`` is a sequence of ``(side_name, (u1, v1, ui, vi))`` angle sets.
    Rows are ordered by bandwidth, structure, link, subcarrier.
    """
    rows = []
    for B in bandwidths:
        grid = subcarrier_frequencies(cfg.fc, B, cfg.M)
        for structure in structures:
            for side, (u1, v1, ui, vi) in links:
                g = structure_gain(structure, grid.frequencies, cfg.fc, cfg.N1, cfg.N2,
                                   cfg.S1, cfg.S2, u1, v1, ui, vi)
                for m, (f, val) in enumerate(zip(grid.frequencies, g)):
                    rows.append(GainRow(structure, side, float(B), m, float(f), float(val)))
    return rows


def random_angles(rng, size=None):
    """Uniform ``(u1, v1, ui, vi)`` over ``u in [-pi/2, pi/2]``, ``v in [0, pi]``."""
    u = rng.uniform(-np.pi / 2, np.pi / 2, size=(2,) if size is None else (size, 2))
    v = rng.uniform(0.0, np.pi, size=u.shape)
    if size is None:
        return u[0], v[0], u[1], v[1]
    return u[:, 0], v[:, 0], u[:, 1], v[:, 1]
