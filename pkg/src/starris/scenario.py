"""Scenario configuration, subcarrier grid, deployment geometry and user allocation."""
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, GeometryError

SPEED_OF_LIGHT = 2.99792458e8

#: Side labels used throughout: reflection (0) and transmission (1).
SIDE_R = 0
SIDE_T = 1
SIDE_NAMES = ("R", "T")

STRUCTURES = ("fully", "sub", "conventional", "none")
CSI_MODELS = ("effective", "elementwise")
USER_LAYOUTS = ("fixed", "random")
GEOMETRY_MODES = ("positions", "angles")


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one simulated deployment.

    Frequencies are in Hz, powers in W (``noise_dbm`` in dBm), positions in m.
    Defaults describe the baseline 100 GHz system; the BS and STAR-RIS
    placement is a documented choice.
    """

    # system
    fc: float = 100e9
    B: float = 10e9
    M: int = 8
    Nt: int = 128
    Nrf: int = 4
    Kt: int = 16
    R: int = 2
    N1: int = 8
    N2: int = 8
    S1: int = 2
    S2: int = 2
    K: int = 4
    Pmax: float = 15.0
    noise_dbm: float = -85.0
    kappa_abs: float = 0.0
    delta: float = 0.0
    seed: int = 0
    structure: str = "sub"
    aperture_gain: bool = True
    realizable_delays: bool = False
    csi_model: str = "effective"
    # geometry
    geometry_mode: str = "positions"
    bs_position: tuple = (15.0, 0.0, 6.0)
    bs_axis: tuple = (1.0, 0.0, 0.0)
    ris_positions: tuple = ()
    ris_spacing: float = 1.0
    ris_normal: tuple = (0.0, -1.0, 0.0)
    ris_row_axis: tuple = (1.0, 0.0, 0.0)
    user_center: tuple = (0.0, 10.0, 0.0)
    user_radius: float = 1.0
    user_layout: str = "fixed"
    user_positions: tuple = ()
    user_sides: tuple = ()
    theta_b: tuple = ()
    u_b: tuple = ()
    v_b: tuple = ()
    d_b: tuple = ()
    u_rk: tuple = ()
    v_rk: tuple = ()
    d_rk: tuple = ()
    # solver knobs
    tol: float = 1e-4
    max_iter: int = 50
    admm_rho: float = 0.1
    admm_tol: float = 1e-6
    admm_max_iter: int = 2000
    qcqp_tol: float = 1e-8
    monotone_tol: float = 1e-8

    def __post_init__(self):
        for name in ("fc", "B", "Pmax", "noise_dbm", "kappa_abs", "delta",
                     "ris_spacing", "user_radius", "tol", "admm_rho",
                     "admm_tol", "qcqp_tol", "monotone_tol"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("M", "Nt", "Nrf", "Kt", "R", "N1", "N2", "S1", "S2", "K",
                     "seed", "max_iter", "admm_max_iter"):
            value = getattr(self, name)
            if isinstance(value, float) and not value.is_integer():
                raise ConfigError(f"{name} must be an integer, got {value}")
            object.__setattr__(self, name, int(value))
        for name in ("bs_position", "bs_axis", "ris_normal", "ris_row_axis",
                     "user_center"):
            object.__setattr__(self, name, _vec3(name, getattr(self, name)))
        object.__setattr__(self, "ris_positions",
                           tuple(_vec3("ris_positions", p) for p in self.ris_positions))
        object.__setattr__(self, "user_positions",
                           tuple(_vec3("user_positions", p) for p in self.user_positions))
        self.validate()

    def validate(self):
        problems = []
        if self.M < 1:
            problems.append(f"M must be >= 1, got {self.M}")
        if self.B < 0:
            problems.append(f"B must be >= 0, got {self.B}")
        if self.fc <= 0:
            problems.append(f"fc must be > 0, got {self.fc}")
        elif self.B >= 2 * self.fc:
            problems.append("B must stay below 2*fc so every subcarrier is positive")
        if self.Pmax <= 0:
            problems.append(f"Pmax must be > 0, got {self.Pmax}")
        if self.delta < 0:
            problems.append(f"delta must be >= 0, got {self.delta}")
        if self.kappa_abs < 0:
            problems.append(f"kappa_abs must be >= 0, got {self.kappa_abs}")
        for name in ("Nt", "Nrf", "Kt", "R", "N1", "N2", "S1", "S2", "K"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.Kt >= 1 and self.Nt % self.Kt:
            problems.append(f"Nt={self.Nt} is not divisible by Kt={self.Kt}")
        if self.S1 >= 1 and self.N1 % self.S1:
            problems.append(f"N1={self.N1} is not divisible by S1={self.S1}")
        if self.S2 >= 1 and self.N2 % self.S2:
            problems.append(f"N2={self.N2} is not divisible by S2={self.S2}")
        if self.K != 2 * self.R:
            problems.append(f"K must equal 2R (one reflection and one transmission "
                            f"user per STAR-RIS), got K={self.K}, R={self.R}")
        if self.Nrf < self.R:
            problems.append(f"Nrf={self.Nrf} leaves a STAR-RIS without an RF chain (R={self.R})")
        if self.structure not in STRUCTURES:
            problems.append(f"structure must be one of {STRUCTURES}, got {self.structure!r}")
        if self.csi_model not in CSI_MODELS:
            problems.append(f"csi_model must be one of {CSI_MODELS}, got {self.csi_model!r}")
        if self.user_layout not in USER_LAYOUTS:
            problems.append(f"user_layout must be one of {USER_LAYOUTS}, got {self.user_layout!r}")
        if self.geometry_mode not in GEOMETRY_MODES:
            problems.append(f"geometry_mode must be one of {GEOMETRY_MODES}, got {self.geometry_mode!r}")
        if self.ris_positions and len(self.ris_positions) != self.R:
            problems.append(f"ris_positions lists {len(self.ris_positions)} surfaces, R={self.R}")
        if self.user_positions and len(self.user_positions) != self.K:
            problems.append(f"user_positions lists {len(self.user_positions)} users, K={self.K}")
        if self.user_sides:
            if len(self.user_sides) != self.K:
                problems.append(f"user_sides lists {len(self.user_sides)} users, K={self.K}")
            elif sorted(self.user_sides).count(SIDE_R) != self.R:
                problems.append("user_sides must label exactly R users as reflection (0)")
        if self.max_iter < 1 or self.admm_max_iter < 1:
            problems.append("iteration caps must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def P(self):
        """Phase shifters per time delayer at the BS."""
        return self.Nt // self.Kt

    @property
    def L1(self):
        return self.N1 // self.S1

    @property
    def L2(self):
        return self.N2 // self.S2

    @property
    def N(self):
        """Elements per STAR-RIS."""
        return self.N1 * self.N2

    @property
    def noise_power(self):
        return noise_power_watts(self.noise_dbm)

    def replace(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _vec3(name, value):
    arr = tuple(float(x) for x in value)
    if len(arr) != 3:
        raise ConfigError(f"{name} entries must be 3-D vectors, got {value!r}")
    return arr


# ------------------------------------------------------------------ grid

@dataclass(frozen=True)
class SubcarrierGrid:
    fc: float
    frequencies: np.ndarray
    relative: np.ndarray

    @property
    def M(self):
        return self.frequencies.size


def subcarrier_frequencies(fc, B, M):
    """OFDM subcarrier frequencies centred on ``fc``.

    ``f_m = fc + (B/M) (m - 1 - (M-1)/2)`` for ``m = 1..M``.
    """
    if M < 1:
        raise ConfigError(f"need at least one subcarrier, got M={M}")
    if B < 0:
        raise ConfigError(f"bandwidth must be non-negative, got B={B}")
    m = np.arange(M, dtype=float)
    freqs = fc + (B / M) * (m - (M - 1) / 2.0)
    freqs.setflags(write=False)
    rel = freqs / fc
    rel.setflags(write=False)
    return SubcarrierGrid(float(fc), freqs, rel)


def noise_power_watts(noise_dbm):
    return 10.0 ** ((noise_dbm - 30.0) / 10.0)


# ------------------------------------------------------------------ geometry

@dataclass(frozen=True)
class Geometry:
    """Angles, distances and delays of every BS->RIS and RIS->user link.

    Arrays are indexed ``[r]`` for BS->RIS quantities and ``[r, k]`` for
    RIS->user quantities. ``off_boresight[r, k]`` is the angle between the
    direction to user k and the boresight of the side that user lies on.
    """

    theta_b: np.ndarray
    u_b: np.ndarray
    v_b: np.ndarray
    d_b: np.ndarray
    t_b: np.ndarray
    u_rk: np.ndarray
    v_rk: np.ndarray
    d_rk: np.ndarray
    t_rk: np.ndarray
    user_side: np.ndarray
    off_boresight: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name))
            arr = arr.astype(int) if f.name == "user_side" else arr.astype(float)
            arr.setflags(write=False)
            object.__setattr__(self, f.name, arr)
        if np.any(self.d_b <= 0) or np.any(self.d_rk <= 0):
            raise GeometryError("link distances must be positive")
        if np.any(np.abs(self.theta_b) > np.pi / 2 + 1e-12):
            raise GeometryError("BS angles must lie in [-pi/2, pi/2]")
        for name in ("u_b", "u_rk"):
            if np.any(np.abs(getattr(self, name)) > np.pi / 2 + 1e-12):
                raise GeometryError(f"{name} must lie in [-pi/2, pi/2]")
        for name in ("v_b", "v_rk"):
            val = getattr(self, name)
            if np.any(val < -1e-12) or np.any(val > np.pi + 1e-12):
                raise GeometryError(f"{name} must lie in [0, pi]")

    @property
    def R(self):
        return self.theta_b.size

    @property
    def K(self):
        return self.user_side.size

    # spatial frequencies seen by the RIS (sin u sin v and cos v)
    @property
    def varsigma_b(self):
        return np.sin(self.u_b) * np.sin(self.v_b)

    @property
    def eta_b(self):
        return np.cos(self.v_b)

    @property
    def varsigma_rk(self):
        return np.sin(self.u_rk) * np.sin(self.v_rk)

    @property
    def eta_rk(self):
        return np.cos(self.v_rk)


def _unit(v):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise GeometryError("zero-length direction vector")
    return v / norm


def ris_frame(normal, row_axis):
    """Orthonormal RIS frame: (row axis e1, column axis e2, normal n)."""
    n = _unit(normal)
    e1 = np.asarray(row_axis, dtype=float)
    e1 = _unit(e1 - (e1 @ n) * n)
    e2 = np.cross(n, e1)
    return e1, e2, n


def direction_angles(direction, frame):
    """(u, v) of a unit direction in an RIS frame, mirrored onto the facing side."""
    e1, e2, n = frame
    k = _unit(direction)
    u = np.arctan2(k @ e1, abs(k @ n))
    v = np.arccos(np.clip(k @ e2, -1.0, 1.0))
    return u, v


def default_ris_positions(cfg):
    if cfg.ris_positions:
        return np.array(cfg.ris_positions)
    e1, _, _ = ris_frame(cfg.ris_normal, cfg.ris_row_axis)
    centre = np.array(cfg.user_center)
    offsets = (np.arange(cfg.R) - (cfg.R - 1) / 2.0) * cfg.ris_spacing
    return centre[None, :] + offsets[:, None] * e1[None, :]


def user_layout(cfg, rng=None):
    """User positions and side labels on the two half-circles around the RIS site.

    Reflection users come first (indices ``0..R-1``), then transmission users.
    Each half-circle is split into R equal sectors, one user per sector; the
    ``fixed`` layout puts reflection users at 1/3 and transmission users at
    2/3 of their sector, ``random`` draws uniformly inside each sector (10 %
    margin on both ends). The stagger matters: a transmission user that is
    the mirror image of a reflection user sees the very same cascade, and
    from the side-symmetric amplitude start the pair is never separated.
    """
    sides = np.array([SIDE_R] * cfg.R + [SIDE_T] * cfg.R)
    if cfg.user_positions:
        positions = np.array(cfg.user_positions)
        if cfg.user_sides:
            sides = np.array(cfg.user_sides, dtype=int)
        return positions, sides
    e1, _, n = ris_frame(cfg.ris_normal, cfg.ris_row_axis)
    centre = np.array(cfg.user_center)
    width = np.pi / cfg.R
    upper = np.pi - np.arange(cfg.R) * width
    if cfg.user_layout == "random":
        if rng is None:
            raise ConfigError("random user layout needs a random generator")
        frac = rng.uniform(0.1, 0.9, size=(2, cfg.R))
    else:
        frac = np.array([[1.0 / 3.0] * cfg.R, [2.0 / 3.0] * cfg.R])
    positions = []
    for side, sign in ((0, 1.0), (1, -1.0)):
        phi = upper - frac[side] * width
        for p in phi:
            positions.append(centre + cfg.user_radius * (np.cos(p) * e1 + sign * np.sin(p) * n))
    return np.array(positions), sides


def geometry_from_positions(bs, bs_axis, ris_positions, frame, users, sides):
    """Angles and distances of every link from 3-D positions."""
    bs = np.asarray(bs, dtype=float)
    axis = _unit(bs_axis)
    ris_positions = np.atleast_2d(ris_positions)
    users = np.atleast_2d(users)
    R, K = ris_positions.shape[0], users.shape[0]
    _, _, normal = frame
    theta_b = np.empty(R)
    u_b, v_b, d_b = np.empty(R), np.empty(R), np.empty(R)
    u_rk, v_rk, d_rk = np.empty((R, K)), np.empty((R, K)), np.empty((R, K))
    off = np.empty((R, K))
    for r, pos in enumerate(ris_positions):
        to_ris = pos - bs
        d_b[r] = np.linalg.norm(to_ris)
        if d_b[r] <= 0:
            raise GeometryError(f"BS and STAR-RIS {r} coincide")
        theta_b[r] = np.arcsin(np.clip(_unit(to_ris) @ axis, -1.0, 1.0))
        u_b[r], v_b[r] = direction_angles(bs - pos, frame)
        for k, upos in enumerate(users):
            vec = upos - pos
            d_rk[r, k] = np.linalg.norm(vec)
            if d_rk[r, k] <= 0:
                raise GeometryError(f"user {k} sits on STAR-RIS {r}")
            u_rk[r, k], v_rk[r, k] = direction_angles(vec, frame)
            boresight = normal if sides[k] == SIDE_R else -normal
            off[r, k] = np.arccos(np.clip(_unit(vec) @ boresight, -1.0, 1.0))
    return Geometry(theta_b, u_b, v_b, d_b, d_b / SPEED_OF_LIGHT, u_rk, v_rk,
                    d_rk, d_rk / SPEED_OF_LIGHT, np.asarray(sides), off)


def geometry_from_angles(theta_b, u_b, v_b, d_b, u_rk, v_rk, d_rk, user_side,
                         t_b=None, t_rk=None):
    """Geometry from raw angles/distances; path delays default to d/c."""
    d_b = np.asarray(d_b, dtype=float)
    d_rk = np.atleast_2d(np.asarray(d_rk, dtype=float))
    u_rk = np.atleast_2d(np.asarray(u_rk, dtype=float))
    v_rk = np.atleast_2d(np.asarray(v_rk, dtype=float))
    t_b = d_b / SPEED_OF_LIGHT if t_b is None else t_b
    t_rk = d_rk / SPEED_OF_LIGHT if t_rk is None else t_rk
    # cos(off-boresight) = cos u sin v for a direction expressed as (u, v)
    off = np.arccos(np.clip(np.cos(u_rk) * np.sin(v_rk), -1.0, 1.0))
    return Geometry(np.asarray(theta_b, dtype=float), u_b, v_b, d_b, t_b,
                    u_rk, v_rk, d_rk, t_rk, np.asarray(user_side), off)


def build_geometry(cfg, rng=None):
    if cfg.geometry_mode == "angles":
        sides = np.array(cfg.user_sides or [SIDE_R] * cfg.R + [SIDE_T] * cfg.R)
        try:
            return geometry_from_angles(cfg.theta_b, cfg.u_b, cfg.v_b, cfg.d_b,
                                        cfg.u_rk, cfg.v_rk, cfg.d_rk, sides)
        except ValueError as exc:
            raise ConfigError(f"angle geometry: {exc}") from exc
    frame = ris_frame(cfg.ris_normal, cfg.ris_row_axis)
    users, sides = user_layout(cfg, rng)
    geo = geometry_from_positions(cfg.bs_position, cfg.bs_axis,
                                  default_ris_positions(cfg), frame, users, sides)
    if geo.R != cfg.R or geo.K != cfg.K:
        raise ConfigError("geometry does not match R/K")
    return geo


# ------------------------------------------------------------------ allocation

@dataclass(frozen=True)
class Allocation:
    """``pairs[r] = (reflection user, transmission user)`` served by RIS r."""

    pairs: tuple
    user_side: tuple = field(default=())

    def ris_of(self, k):
        for r, pair in enumerate(self.pairs):
            if k in pair:
                return r
        raise KeyError(k)

    def user_on(self, r, side):
        return self.pairs[r][side]


def allocate_users(geometry, R, K):
    """Assign one reflection and one transmission user to every STAR-RIS.

    RISs pick in index order the unassigned user of each side with the
    smallest angle to that side's boresight; ties go to the lower user index.
    """
    if K != 2 * R:
        raise ConfigError(f"K must equal 2R, got K={K}, R={R}")
    sides = np.asarray(geometry.user_side)
    if sides.size != K:
        raise ConfigError(f"geometry describes {sides.size} users, K={K}")
    candidates = [list(np.flatnonzero(sides == s)) for s in (SIDE_R, SIDE_T)]
    for s, cand in enumerate(candidates):
        if len(cand) != R:
            raise ConfigError(f"{len(cand)} users on side {SIDE_NAMES[s]}, need R={R}")
    pairs = []
    for r in range(R):
        chosen = []
        for s in (SIDE_R, SIDE_T):
            cand = candidates[s]
            angles = np.array([geometry.off_boresight[r, k] for k in cand])
            best = angles.min()
            pick = min(k for k, a in zip(cand, angles) if a - best <= 1e-12)
            cand.remove(pick)
            chosen.append(int(pick))
        pairs.append(tuple(chosen))
    return Allocation(tuple(pairs), tuple(int(s) for s in sides))


# ------------------------------------------------------------------ CSI error

def apply_csi_error(h, delta, rng):
    """Add zero-mean circular Gaussian error with per-entry variance ``delta*|h_n|^2``."""
    if delta < 0:
        raise ConfigError(f"CSI error level must be non-negative, got {delta}")
    h = np.asarray(h)
    if delta == 0:
        return h.copy()
    z = (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape)) / np.sqrt(2.0)
    return h + np.sqrt(delta) * np.abs(h) * z
