"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import time

import numpy as np
import pytest

from oracles import random_psd, ula, xi_cos_sum
from starris.experiments import ExperimentSpec, csv_text, rate_task, rep_generators, run_experiment
from starris.frontend import analog_beamformer, combined_frontend, td_delays, td_phase_matrix
from starris.gain import (bs_gain_closed, gain_conventional, gain_conventional_closed,
                          gain_fully, gain_sub, gain_sub_closed, gain_sub_diagonal,
                          random_angles)
from starris.optimizer import (assemble_amplitude_problem, assemble_qcqp, effective_channels,
                               g2_value, g4_value, initialize, ldr_objective,
                               quadratic_transform, received, run_alternating, update_epsilon,
                               update_rho, update_varpi)
from starris.scenario import ScenarioConfig, subcarrier_frequencies
from starris.solvers import (AmplitudeProblem, QcqpProblem, projected_gradient_oracle,
                             solve_amplitudes_admm, solve_qcqp)
from starris.system import build_system, make_problem, solver_knobs

FC = 100e9
N1 = N2 = 16
STRUCTURE_GRID = subcarrier_frequencies(FC, 10e9, 128).frequencies
SEEDS = range(5)


@pytest.fixture(scope="module")
def draws():
    rng = np.random.default_rng(2024)
    return [random_angles(rng) for _ in range(100)]


def test_fully_connected_gain_is_flat(draws, verdict):
    t0 = time.perf_counter()
    worst = max(np.abs(gain_fully(STRUCTURE_GRID, FC, N1, N2, *a) - 1).max() for a in draws)
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-9 and elapsed < 10,
            f"max |g_fully - 1| = {worst:.2e} over 100 draws x 128 subcarriers "
            f"(tol 1e-9), {elapsed:.2f} s (< 10 s)")


def test_closed_forms_match_direct_sums(draws, verdict):
    t0 = time.perf_counter()
    conv = sub = 0.0
    for a in draws:
        d = gain_conventional(STRUCTURE_GRID, FC, N1, N2, *a)
        c = gain_conventional_closed(STRUCTURE_GRID, FC, N1, N2, *a)
        conv = max(conv, np.max(np.abs(d - c) / np.maximum(np.abs(c), 1e-300)))
        d = gain_sub(STRUCTURE_GRID, FC, N1, N2, 4, 4, *a)
        c = gain_sub_closed(STRUCTURE_GRID, FC, N1, N2, 4, 4, *a)
        sub = max(sub, np.max(np.abs(d - c) / np.maximum(np.abs(c), 1e-300)))
    elapsed = time.perf_counter() - t0
    verdict(2, conv <= 1e-10 and sub <= 1e-10 and elapsed < 30,
            f"max relative gap conventional {conv:.2e}, sub-connected {sub:.2e} "
            f"(tol 1e-10), {elapsed:.2f} s (< 30 s)")


def test_unit_gain_at_centre_frequency(draws, verdict):
    worst = 0.0
    for a in draws:
        for g in (gain_conventional([FC], FC, N1, N2, *a), gain_fully([FC], FC, N1, N2, *a),
                  gain_sub([FC], FC, N1, N2, 4, 4, *a),
                  gain_sub_diagonal([FC], FC, N1, N2, 4, 4, *a)):
            worst = max(worst, abs(g[0] - 1))
    for theta in np.linspace(-np.pi / 2, np.pi / 2, 50):
        col = combined_frontend(analog_beamformer([theta], 128, 16),
                                td_phase_matrix(td_delays(theta, 16, 8, 1 / FC)[None], FC))[:, 0]
        worst = max(worst, abs(abs(np.vdot(ula(1.0, theta, 128), col)) - 1))
    verdict(3, worst <= 1e-12,
            f"max |g - 1| at f = fc over conventional, fully, sub (both compositions) "
            f"and the BS frontend = {worst:.2e} (tol 1e-12)")


def test_wider_band_loses_more_gain_at_band_edge(verdict):
    rng = np.random.default_rng(4)
    bands = (20e9, 10e9, 5e9, 1e9)
    edges = [subcarrier_frequencies(FC, B, 128).frequencies[:1] for B in bands]
    failures, margin = 0, np.inf
    for _ in range(20):
        a = random_angles(rng)
        g = [gain_conventional(f, FC, N1, N2, *a)[0] for f in edges]
        gaps = np.diff(g)
        failures += int(np.any(gaps <= 0))
        margin = min(margin, gaps.min())
    verdict(4, failures == 0,
            f"edge gain strictly ordered 20 < 10 < 5 < 1 GHz in {20 - failures}/20 draws, "
            f"smallest gap {margin:.3e}")


def test_bs_frontend_residual_gain(verdict):
    P, Kt, Nt = 8, 16, 128
    grid = subcarrier_frequencies(FC, 10e9, 128)
    worst = 0.0
    for theta in np.linspace(-np.pi / 2, np.pi / 2, 50):
        FA = analog_beamformer([theta], Nt, Kt)
        z = td_delays(theta, Kt, P, 1 / FC)[None]
        for f, xi in zip(grid.frequencies, grid.relative):
            col = combined_frontend(FA, td_phase_matrix(z, f))[:, 0]
            got = abs(np.vdot(ula(xi, theta, Nt), col))
            want = abs(xi_cos_sum(P, (xi - 1) * np.sin(theta))[0]) / P
            worst = max(worst, abs(got - want))
    corner = abs(xi_cos_sum(8, 0.05)[0]) / 8
    closed = bs_gain_closed(8, 1.05, np.pi / 2)
    ok = worst <= 1e-10 and abs(corner - 0.937) <= 1e-3 and abs(closed - corner) <= 1e-12
    verdict(5, ok, f"max |gain - |Xi_P|/P| = {worst:.2e} over 50 angles x 128 subcarriers "
                   f"(tol 1e-10); worst case P=8, xi=1.05: {closed:.5f} (0.937 +/- 1e-3)")


def test_surrogate_identities(verdict):
    cfg = ScenarioConfig(M=4, user_layout="random")
    worst = 0.0
    for trial in range(10):
        layout, _ = rep_generators(100, trial)
        problem = make_problem(build_system(cfg, "sub", layout))
        rng = np.random.default_rng(trial)
        st = initialize(problem)
        d = st.d * rng.uniform(0.3, 1.5, st.d.shape) * np.exp(2j * np.pi * rng.random(st.d.shape))
        beta = rng.uniform(0, 1 / np.sqrt(2), st.beta.shape)
        s2 = problem.sigma2
        hhat = effective_channels(problem.V, problem.side, beta)
        Y = received(hhat, d)
        sig = np.abs(np.einsum("mkk->mk", Y)) ** 2
        total = (np.abs(Y) ** 2).sum(axis=2)
        f = sig / (total + s2)
        gamma = sig / (total - sig + s2)
        rho = update_rho(Y, s2)
        rel = lambda a, b: abs(a - b) / abs(b)
        worst = max(worst, rel(ldr_objective(rho, Y, s2), np.log1p(gamma).sum()))
        varpi = update_varpi(rho, Y, s2)
        target = np.sum((1 + rho) * f)
        worst = max(worst, rel(quadratic_transform(varpi, rho, Y, s2), target))
        E, v, C, Y0 = assemble_qcqp(hhat, varpi, rho, problem.gram, s2)
        worst = max(worst, rel(g2_value(E, v, Y0, d), target))
        eps = update_epsilon(rho, Y, s2)
        Delta, ups, Omega = assemble_amplitude_problem(problem.V, d, problem.side, eps, rho, s2)
        worst = max(worst, rel(g4_value(Delta, ups, Omega, beta), target))
    verdict(6, worst <= 1e-10,
            f"max relative error of LDR = sum ln(1+gamma), g1 = g2 = g4 = sum (1+rho) f "
            f"over 10 random states = {worst:.2e} (tol 1e-10)")


@pytest.fixture(scope="module")
def table_runs():
    """Converged runs at the default scale for every scheme and seed."""
    cfg = ScenarioConfig(user_layout="random")
    variants = {"fully": (cfg, "fully"), "sub4": (cfg, "sub"),
                "sub16": (cfg.replace(S1=4, S2=4), "sub"),
                "conventional": (cfg, "conventional"), "none": (cfg, "none")}
    out = {}
    for seed in SEEDS:
        for label, (c, scheme) in variants.items():
            t0 = time.perf_counter()
            layout, csi = rep_generators(seed, 0)
            problem = make_problem(build_system(c, scheme, layout), csi)
            state = run_alternating(problem, **solver_knobs(c))
            out[seed, label] = (state, time.perf_counter() - t0)
    return out


def test_monotone_convergence(table_runs, verdict):
    lines, ok = [], True
    for seed in SEEDS:
        state, elapsed = table_runs[seed, "sub4"]
        vals = [v for blocks in state.block_trace for _, v in blocks]
        drops = [b - a for a, b in zip(vals, vals[1:]) if b < a]
        objs = [row["ldr_objective"] for row in state.trace]
        settled = next((i + 1 for i in range(1, len(objs))
                        if abs(objs[i] - objs[i - 1]) <= 1e-3 * abs(objs[i - 1])), None)
        seed_ok = not drops and settled is not None and settled <= 30 and elapsed < 300
        ok &= seed_ok
        lines.append(f"seed {seed}: settled at iteration {settled}, "
                     f"{len(drops)} block decreases, {elapsed:.1f} s")
    verdict(7, ok, "LDR nondecreasing at every block update and relative change < 1e-3 "
                   "within 30 iterations; " + "; ".join(lines))


def test_structure_ordering(table_runs, verdict):
    tol = 1e-3
    order = ("fully", "sub4", "conventional", "none")
    ok, lines = True, []
    for seed in SEEDS:
        rate = {k: table_runs[seed, k][0].trace[-1]["sum_rate_bits"]
                for k in order + ("sub16",)}
        chain = all(rate[a] >= rate[b] * (1 - tol) for a, b in zip(order, order[1:]))
        share = rate["sub16"] / rate["fully"]
        ok &= chain and share >= 0.96
        lines.append(f"seed {seed}: " + " >= ".join(f"{rate[k]:.3f}" for k in order)
                     + f", S=16 at {100 * share:.2f}% of fully")
    verdict(8, ok, "fully >= sub(S=4) >= conventional >= no-TD (rel tol 1e-3) and "
                   "sub(S=16) >= 96% of fully; " + "; ".join(lines))


def test_solvers_match_oracle(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(99)
    qps = []
    for _ in range(100):
        n = 8
        qps.append(QcqpProblem(random_psd(rng, n, int(rng.integers(1, n + 1))),
                               rng.standard_normal(n) + 1j * rng.standard_normal(n),
                               random_psd(rng, n, n) + 0.1 * np.eye(n),
                               float(rng.uniform(0.1, 10.0))))
    q_refs = projected_gradient_oracle(qps, steps=100_000)
    q_gap = kkt_stat = kkt_slack = 0.0
    feasible = True
    for p, ref in zip(qps, q_refs):
        res = solve_qcqp(p)
        q_gap = max(q_gap, res.objective - p.objective(ref))
        kkt_stat = max(kkt_stat, res.stationarity)
        if res.lam > 0:
            kkt_slack = max(kkt_slack, res.slackness / (p.Pmax * res.lam))
        feasible &= res.power <= p.Pmax * (1 + 1e-8)
    aps = []
    for _ in range(100):
        n = 16
        aps.append(AmplitudeProblem(random_psd(rng, n, int(rng.integers(1, n + 1)), False),
                                    random_psd(rng, n, int(rng.integers(1, n + 1)), False),
                                    rng.standard_normal(n), rng.standard_normal(n)))
    a_refs = projected_gradient_oracle(aps, steps=100_000)
    a_gap = 0.0
    for p, (bR, bT) in zip(aps, a_refs):
        res = solve_amplitudes_admm(p)
        a_gap = max(a_gap, res.objective - p.objective(bR, bT))
        feasible &= bool(np.all(res.beta_R >= 0) and np.all(res.beta_T >= 0)
                         and np.all(res.beta_R ** 2 + res.beta_T ** 2 <= 1 + 1e-12))
    elapsed = time.perf_counter() - t0
    ok = (q_gap <= 1e-6 and a_gap <= 1e-4 and kkt_stat <= 1e-6 and kkt_slack <= 1e-6
          and feasible and elapsed < 60)
    verdict(9, ok, f"QCQP gap {q_gap:.2e} (tol 1e-6), stationarity {kkt_stat:.2e}, "
                   f"slackness {kkt_slack:.2e}; amplitude gap {a_gap:.2e} (tol 1e-4); "
                   f"feasible {feasible}; {elapsed:.1f} s (< 60 s)")


def test_csi_error_trend(verdict):
    cfg = ScenarioConfig(user_layout="random")
    spec = ExperimentSpec("csi-sweep", cfg, 7, params={"deltas": [0.0, 0.1, 0.2],
                                                        "schemes": ["fully", "sub"],
                                                        "draws": 50}, jobs=4)
    res = run_experiment(spec)
    col = res.columns.index("sum_rate_bits")
    mean = {}
    for row in res.rows:
        mean.setdefault((row[0], row[res.columns.index("delta")]), []).append(row[col])
    mean = {k: float(np.mean(v)) for k, v in mean.items()}
    ok, parts = True, []
    for scheme in ("fully", "sub"):
        m = [mean[scheme, d] for d in (0.0, 0.1, 0.2)]
        ok &= m[0] > m[1] > m[2]
        parts.append(f"{scheme}: " + " > ".join(f"{x:.3f}" for x in m))
    loss = 1 - mean["fully", 0.1] / mean["fully", 0.0]
    ok &= 0.03 <= loss <= 0.15
    verdict(10, ok, "mean sum rate over 50 draws strictly decreasing in delta; "
                    + "; ".join(parts) + f"; fully-connected loss at 0.1: {100 * loss:.2f}% "
                    "(3-15%)")


def test_identical_inputs_give_identical_csvs(tmp_path, verdict):
    cfg = ScenarioConfig(M=4, user_layout="random", max_iter=10)
    checks = {}
    for kind, params in (("gain-bandwidth", {}), ("gain-structure", {"links": 3}),
                         ("convergence", {"schemes": ["sub", "none"]}),
                         ("csi-sweep", {"draws": 3, "deltas": [0.0, 0.2]})):
        a = csv_text(run_experiment(ExperimentSpec(kind, cfg, 5, params=params)))
        b = csv_text(run_experiment(ExperimentSpec(kind, cfg, 5, params=params, jobs=2)))
        checks[kind] = a.encode() == b.encode()
    verdict(11, all(checks.values()),
            "byte-identical CSVs on repeat runs: "
            + ", ".join(f"{k} {'yes' if v else 'NO'}" for k, v in checks.items()))
