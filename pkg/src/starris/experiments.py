"""Experiment definitions: gain sweeps and sum-rate studies, with CSV / manifest output."""
import csv
import hashlib
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .configfile import format_config
from .errors import ConfigError
from .gain import random_angles, sweep_gain
from .optimizer import run_alternating
from .scenario import SIDE_NAMES, build_geometry, allocate_users
from .system import SCHEMES, build_system, make_problem, solver_knobs

logger = logging.getLogger(__name__)

RATE_SCHEMES = ("fully", "sub", "conventional", "none")

DEFAULTS = {
    "gain-bandwidth": {"bandwidths": [1e9, 5e9, 10e9, 20e9],
                       "structures": ["conventional"], "links": "geometry"},
    "gain-structure": {"bandwidths": None, "structures": ["fully", "sub", "conventional"],
                       "links": "geometry"},
    "convergence": {"schemes": list(RATE_SCHEMES), "repetitions": 1},
    "td-sweep": {"subsurfaces": [1, 4, 16, 64], "schemes": ["fully", "sub"],
                 "repetitions": 5},
    "bandwidth-sweep": {"bandwidths": [1e9, 5e9, 10e9, 15e9, 20e9],
                        "schemes": list(RATE_SCHEMES), "repetitions": 5},
    "power-sweep": {"powers": [5.0, 10.0, 15.0, 20.0, 25.0],
                    "schemes": list(RATE_SCHEMES), "repetitions": 5},
    "csi-sweep": {"deltas": [0.0, 0.1, 0.2], "schemes": ["fully", "sub"], "draws": 50},
}
KINDS = tuple(DEFAULTS)

#: scenario fields copied into every rate row
ROW_PARAMS = ("fc", "B", "M", "Nt", "Nrf", "Kt", "R", "N1", "N2", "S1", "S2", "K",
              "Pmax", "noise_dbm", "kappa_abs", "delta", "aperture_gain", "csi_model",
              "user_layout")

GAIN_COLUMNS = ("structure", "side", "bandwidth_hz", "m", "f_hz", "gain", "link",
                "u1", "v1", "ui", "vi", "fc", "M", "N1", "N2", "S1", "S2")
RATE_COLUMNS = ("scheme", "rep", "seed", "sum_rate_bits", "ldr_objective", "iterations",
                "converged", "power_used") + ROW_PARAMS
TRACE_COLUMNS = ("scheme", "rep", "seed", "iteration", "ldr_objective", "sum_rate_bits",
                 "power_used", "max_energy_violation") + ROW_PARAMS


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    cfg: object
    seed: int
    out_dir: str = "."
    params: dict = field(default_factory=dict)
    jobs: int = 1

    def resolved_params(self):
        if self.kind not in DEFAULTS:
            raise ConfigError(f"unknown experiment {self.kind!r}; choose from {KINDS}")
        params = dict(DEFAULTS[self.kind])
        for key, value in self.params.items():
            if key not in params:
                raise ConfigError(f"experiment {self.kind} has no parameter {key!r}")
            params[key] = value
        return params


@dataclass
class ExperimentResult:
    columns: tuple
    rows: list
    summary: list


# ---------------------------------------------------------------- helpers

def rep_generators(seed, rep):
    """Independent (layout, CSI) generators for repetition ``rep``."""
    layout, csi = np.random.SeedSequence([int(seed), int(rep)]).spawn(2)
    return np.random.default_rng(layout), np.random.default_rng(csi)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _row_params(cfg):
    return {key: getattr(cfg, key) for key in ROW_PARAMS}


def _split_subsurfaces(S, cfg):
    s = math.isqrt(int(S))
    if s * s != S:
        raise ConfigError(f"sub-surface count {S} is not a square S1*S1")
    if cfg.N1 % s or cfg.N2 % s:
        raise ConfigError(f"S={S} does not tile a {cfg.N1}x{cfg.N2} surface")
    return s


def _check_schemes(schemes):
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; choose from {SCHEMES}")
    return list(schemes)


# ---------------------------------------------------------------- gain experiments

def _gain_links(cfg, spec_links, seed):
    if spec_links == "geometry":
        rng = np.random.default_rng(seed)
        geo = build_geometry(cfg, rng)
        alloc = allocate_users(geo, cfg.R, cfg.K)
        links = []
        for side in (0, 1):
            k = alloc.user_on(0, side)
            links.append((SIDE_NAMES[side], (geo.u_b[0], geo.v_b[0],
                                              geo.u_rk[0, k], geo.v_rk[0, k])))
        return links
    if isinstance(spec_links, int) and spec_links > 0:
        rng = np.random.default_rng(seed)
        return [(f"draw{i}", tuple(float(a) for a in random_angles(rng)))
                for i in range(spec_links)]
    raise ConfigError("links must be 'geometry' or a positive number of random draws")


def _run_gain(spec, params):
    cfg = spec.cfg
    bandwidths = params["bandwidths"] or [cfg.B]
    structures = params["structures"]
    for s in structures:
        if s not in ("fully", "sub", "conventional"):
            raise ConfigError(f"unknown structure {s!r}")
    links = _gain_links(cfg, params["links"], spec.seed)
    angle_of = dict(links)
    rows = []
    for i, (label, _) in enumerate(links):
        for g in sweep_gain(cfg, structures, bandwidths, [links[i]]):
            u1, v1, ui, vi = angle_of[label]
            side = label if label in SIDE_NAMES else "R"
            rows.append((g.structure, side, g.bandwidth_hz, g.m, g.f_hz, g.gain, label,
                         u1, v1, ui, vi, cfg.fc, cfg.M, cfg.N1, cfg.N2, cfg.S1, cfg.S2))
    rows.sort(key=lambda r: (r[2], structures.index(r[0]), r[6], r[3]))
    summary = []
    for B in bandwidths:
        for s in structures:
            vals = [r[5] for r in rows if r[2] == B and r[0] == s]
            summary.append(f"{s:>12s} B={B / 1e9:g} GHz: min gain {min(vals):.6f}, "
                           f"mean gain {np.mean(vals):.6f}")
    return ExperimentResult(GAIN_COLUMNS, rows, summary)


# ---------------------------------------------------------------- rate experiments

def rate_task(task):
    """Run the alternating optimizer for one (config, scheme, repetition); picklable for worker pools."""
    cfg, scheme, seed, rep, keep_trace = task
    layout_rng, csi_rng = rep_generators(seed, rep)
    system = build_system(cfg, scheme, layout_rng)
    state = run_alternating(make_problem(system, csi_rng), **solver_knobs(cfg))
    last = state.trace[-1]
    return {
        "sum_rate_bits": last["sum_rate_bits"],
        "ldr_objective": last["ldr_objective"],
        "iterations": state.iterations,
        "converged": state.converged,
        "power_used": last["power_used"],
        "trace": state.trace if keep_trace else None,
    }


def _map(tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(rate_task, tasks))
    return [rate_task(t) for t in tasks]


def _rate_variants(spec, params):
    """List of ``(label, cfg, scheme)`` for the requested sweep."""
    cfg = spec.cfg
    kind = spec.kind
    schemes = _check_schemes(params["schemes"])
    variants = []
    if kind == "td-sweep":
        for scheme in schemes:
            if scheme == "sub":
                for S in params["subsurfaces"]:
                    s = _split_subsurfaces(S, cfg)
                    variants.append((f"sub S={S}", cfg.replace(S1=s, S2=s, structure="sub"),
                                     "sub"))
            else:
                variants.append((scheme, cfg.replace(structure=scheme), scheme))
    elif kind == "bandwidth-sweep":
        for B in params["bandwidths"]:
            for scheme in schemes:
                variants.append((f"{scheme} B={B / 1e9:g} GHz", cfg.replace(B=B), scheme))
    elif kind == "power-sweep":
        for P in params["powers"]:
            for scheme in schemes:
                variants.append((f"{scheme} Pmax={P:g} W", cfg.replace(Pmax=P), scheme))
    elif kind == "csi-sweep":
        for delta in params["deltas"]:
            for scheme in schemes:
                variants.append((f"{scheme} delta={delta:g}", cfg.replace(delta=delta), scheme))
    elif kind == "convergence":
        for scheme in schemes:
            variants.append((scheme, cfg, scheme))
    return variants


def _run_rate(spec, params):
    reps = params.get("draws") if spec.kind == "csi-sweep" else params["repetitions"]
    if not isinstance(reps, int) or reps < 1:
        raise ConfigError(f"repetition count must be a positive integer, got {reps!r}")
    variants = _rate_variants(spec, params)
    keep_trace = spec.kind == "convergence"
    tasks = [(cfg, scheme, spec.seed, rep, keep_trace)
             for _, cfg, scheme in variants for rep in range(reps)]
    results = _map(tasks, spec.jobs)
    rows, summary = [], []
    for i, (label, cfg, scheme) in enumerate(variants):
        chunk = results[i * reps:(i + 1) * reps]
        extra = _row_params(cfg)
        for rep, res in enumerate(chunk):
            if keep_trace:
                for t in res["trace"]:
                    rows.append((scheme, rep, spec.seed, t["iteration"], t["ldr_objective"],
                                 t["sum_rate_bits"], t["power_used"],
                                 t["max_energy_violation"], *extra.values()))
            else:
                rows.append((scheme, rep, spec.seed, res["sum_rate_bits"],
                             res["ldr_objective"], res["iterations"], res["converged"],
                             res["power_used"], *extra.values()))
        rates = np.array([r["sum_rate_bits"] for r in chunk])
        iters = [r["iterations"] for r in chunk]
        summary.append(f"{label:>28s}: sum rate {rates.mean():.4f} +/- {rates.std():.4f} "
                       f"bits/s/Hz over {reps} run(s), iterations {min(iters)}-{max(iters)}")
    return ExperimentResult(TRACE_COLUMNS if keep_trace else RATE_COLUMNS, rows, summary)


def run_experiment(spec):
    params = spec.resolved_params()
    if spec.kind.startswith("gain-"):
        return _run_gain(spec, params)
    return _run_rate(spec, params)


# ---------------------------------------------------------------- output

def csv_text(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def input_hash(spec):
    text = "\n".join([f"kind={spec.kind}", f"seed={spec.seed}",
                      format_config(spec.cfg),
                      *(f"{k}={v!r}" for k, v in sorted(spec.resolved_params().items()))])
    return hashlib.sha256(text.encode()).hexdigest()


def write_outputs(spec, result):
    """Write ``<kind>.csv``, ``<kind>.manifest.txt`` and ``<kind>.summary.txt``.

    Returns the three paths. Nothing time- or host-dependent is written, so
    identical inputs give identical files.
    """
    os.makedirs(spec.out_dir, exist_ok=True)
    data = csv_text(result)
    csv_path = os.path.join(spec.out_dir, f"{spec.kind}.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write(data)
    lines = [f"kind={spec.kind}", f"seed={spec.seed}", f"version={__version__}",
             f"input_sha256={input_hash(spec)}",
             f"csv={os.path.basename(csv_path)}",
             f"csv_sha256={hashlib.sha256(data.encode()).hexdigest()}",
             f"rows={len(result.rows)}"]
    lines += [f"config.{k}={_fmt(v)}" for k, v in spec.cfg.as_dict().items()]
    lines += [f"experiment.{k}={v!r}" for k, v in sorted(spec.resolved_params().items())]
    manifest = os.path.join(spec.out_dir, f"{spec.kind}.manifest.txt")
    with open(manifest, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    summary = os.path.join(spec.out_dir, f"{spec.kind}.summary.txt")
    with open(summary, "w") as fh:
        fh.write(f"{spec.kind} (seed {spec.seed})\n")
        fh.write("\n".join(result.summary) + "\n")
    return csv_path, manifest, summary
