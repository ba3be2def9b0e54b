"""STAR-RIS hardware state and the closed-form phase / delay designs."""
import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ris_indices
from .errors import InvariantError
from .scenario import SIDE_NAMES, SIDE_R, SIDE_T

RIS_STRUCTURES = ("conventional", "fully", "sub")


def design_conventional_phases(u1, v1, ui, vi, N1, N2):
    """Centre-frequency phase alignment ``-pi [n1 (s_i + s_1) + n2 (e_i + e_1)]``."""
    n1, n2 = ris_indices(N1, N2)
    vs = np.sin(ui) * np.sin(vi) + np.sin(u1) * np.sin(v1)
    et = np.cos(vi) + np.cos(v1)
    return -np.pi * (n1 * vs + n2 * et)


def design_fully_connected(u1, v1, ui, vi, fc, N1, N2):
    """Per-element true delays that align the beam at every frequency.

    Returns ``(phases, tau)``; the companion phases are all zero.
    """
    n1, n2 = ris_indices(N1, N2)
    vs = np.sin(ui) * np.sin(vi) + np.sin(u1) * np.sin(v1)
    et = np.cos(vi) + np.cos(v1)
    tau = (n1 * vs + n2 * et) / (2.0 * fc)
    return np.zeros(N1 * N2), tau


def subsurface_index(N1, N2, S1, S2):
    """Sub-surface ``s = s1*S2 + s2`` and local indices of every element."""
    L1, L2 = N1 // S1, N2 // S2
    n1, n2 = ris_indices(N1, N2)
    s1, l1 = np.divmod(n1, L1)
    s2, l2 = np.divmod(n2, L2)
    return s1 * S2 + s2, l1, l2


def design_sub_connected(u1, v1, ui, vi, fc, N1, N2, S1, S2):
    """Double-layer phases and one delay per sub-surface.

    Returns ``(phase1, phase2, tau_sub)``: the incident-side layer cancels
    the intra-sub-surface progression towards the source, the outgoing layer
    that towards the user, and each sub-surface delay compensates its offset
    measured from the sub-surface centre.
    """
    L1, L2 = N1 // S1, N2 // S2
    _, l1, l2 = subsurface_index(N1, N2, S1, S2)
    vs1, et1 = np.sin(u1) * np.sin(v1), np.cos(v1)
    vsi, eti = np.sin(ui) * np.sin(vi), np.cos(vi)
    phase1 = -np.pi * (l1 * vs1 + l2 * et1)
    phase2 = -np.pi * (l1 * vsi + l2 * eti)
    s1, s2 = np.divmod(np.arange(S1 * S2), S2)
    tau = ((s1 * L1 - (L1 - 1) / 2.0) * (vs1 + vsi)
           + (s2 * L2 - (L2 - 1) / 2.0) * (et1 + eti)) / (2.0 * fc)
    return phase1, phase2, tau


@dataclass
class RisState:
    """Phases, delays and amplitudes of all R surfaces on both sides.

    Arrays are indexed ``[side, r, ...]``. ``tau`` has length N per surface
    for the fully-connected structure, S for sub-connected and is all zero
    for the conventional one. ``sub_of`` maps each element to its delay.
    """

    structure: str
    phase1: np.ndarray
    phase2: np.ndarray
    tau: np.ndarray
    beta: np.ndarray
    sub_of: np.ndarray
    fc: float
    shape: tuple = field(default=())

    def __post_init__(self):
        if self.structure not in RIS_STRUCTURES:
            raise InvariantError(f"unknown RIS structure {self.structure!r}")
        _, R, N = self.phase1.shape
        expected = {"fully": N, "sub": int(self.sub_of.max()) + 1, "conventional": N}
        if self.tau.shape != (2, R, expected[self.structure]):
            raise InvariantError(f"{self.structure} state carries delays of shape "
                                 f"{self.tau.shape}")
        if self.structure == "conventional" and np.any(self.tau):
            raise InvariantError("conventional structure cannot carry delays")

    @property
    def R(self):
        return self.phase1.shape[1]

    @property
    def N(self):
        return self.phase1.shape[2]

    def phase_entries(self, f_m, side):
        """``(R, N)`` unit-modulus diagonal of the composed phase matrix at ``f_m``."""
        return compose_phase_matrix(self, f_m, side)

    def with_beta(self, beta):
        beta = np.broadcast_to(np.asarray(beta, dtype=float), self.beta.shape).copy()
        return RisState(self.structure, self.phase1, self.phase2, self.tau, beta,
                        self.sub_of, self.fc, self.shape)

    def element_delays(self, side):
        return self.tau[side][:, self.sub_of]


def compose_phase_matrix(ris, f_m, side):
    """Diagonal of ``Phi_2 T_m Phi_1``: ``exp(j(phi2 + phi1 - 2 pi f tau))`` per element.

    Sub-surface delays are broadcast to the elements of their sub-surface.
    """
    if side not in (SIDE_R, SIDE_T):
        raise InvariantError(f"side must be 0 (R) or 1 (T), got {side!r}")
    tau = ris.element_delays(side)
    return np.exp(1j * (ris.phase2[side] + ris.phase1[side] - 2 * np.pi * f_m * tau))


def build_ris_state(cfg, geo, alloc, structure, beta0=None):
    """Design every surface for its allocated reflection / transmission users."""
    R, N = cfg.R, cfg.N
    if structure == "fully":
        sub_of = np.arange(N)
    elif structure == "sub":
        sub_of, _, _ = subsurface_index(cfg.N1, cfg.N2, cfg.S1, cfg.S2)
    elif structure == "conventional":
        sub_of = np.arange(N)
    else:
        raise InvariantError(f"unknown RIS structure {structure!r}")
    n_tau = cfg.S1 * cfg.S2 if structure == "sub" else N
    phase1 = np.zeros((2, R, N))
    phase2 = np.zeros((2, R, N))
    tau = np.zeros((2, R, n_tau))
    for r in range(R):
        u1, v1 = geo.u_b[r], geo.v_b[r]
        for side in (SIDE_R, SIDE_T):
            k = alloc.user_on(r, side)
            ui, vi = geo.u_rk[r, k], geo.v_rk[r, k]
            if structure == "conventional":
                phase2[side, r] = design_conventional_phases(u1, v1, ui, vi, cfg.N1, cfg.N2)
            elif structure == "fully":
                phase2[side, r], tau[side, r] = design_fully_connected(
                    u1, v1, ui, vi, cfg.fc, cfg.N1, cfg.N2)
            else:
                phase1[side, r], phase2[side, r], tau[side, r] = design_sub_connected(
                    u1, v1, ui, vi, cfg.fc, cfg.N1, cfg.N2, cfg.S1, cfg.S2)
    if beta0 is None:
        beta = np.full((2, R, N), 1.0 / np.sqrt(2.0))
    else:
        beta = np.broadcast_to(np.asarray(beta0, dtype=float), (2, R, N)).copy()
    return RisState(structure, phase1, phase2, tau, beta, np.asarray(sub_of), cfg.fc,
                    (cfg.N1, cfg.N2))


def validate_energy(beta, tol=1e-9):
    """List of ``(r, n)`` where ``beta_R^2 + beta_T^2 > 1 + tol`` (empty when feasible)."""
    beta = np.asarray(beta)
    total = beta[SIDE_R] ** 2 + beta[SIDE_T] ** 2
    bad = np.argwhere(total > 1.0 + tol)
    return [tuple(int(i) for i in idx) for idx in bad]


def dump_ris_csv(ris, path):
    """Per-element phases, delays and amplitudes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["structure", "side", "r", "n", "sub", "phase1", "phase2", "tau", "beta"])
        for side in (SIDE_R, SIDE_T):
            tau = ris.element_delays(side)
            for r in range(ris.R):
                for n in range(ris.N):
                    w.writerow([ris.structure, SIDE_NAMES[side], r, n, int(ris.sub_of[n]),
                                repr(float(ris.phase1[side, r, n])),
                                repr(float(ris.phase2[side, r, n])),
                                repr(float(tau[r, n])), repr(float(ris.beta[side, r, n]))])
