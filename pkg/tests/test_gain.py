import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import xi_cos_sum
from starris.gain import (gain_conventional, gain_conventional_closed, gain_fully, gain_sub,
                          gain_sub_closed, gain_sub_diagonal, gain_sub_diagonal_closed,
                          random_angles, sweep_gain, xi_kernel)
from starris.scenario import ScenarioConfig, subcarrier_frequencies

FC = 100e9
u_st = st.floats(-np.pi / 2, np.pi / 2)
v_st = st.floats(0, np.pi)


def test_kernel_special_values():
    assert xi_kernel(4, 0.5) == pytest.approx(0.0, abs=1e-15)
    for N in (1, 2, 7, 16):
        assert xi_kernel(N, 0.0) == N
    # the removable singularity at x = 2 carries the sign (-1)^(N-1)
    assert xi_kernel(4, 2.0) == pytest.approx(-4.0)
    assert xi_kernel(5, 2.0) == pytest.approx(5.0)
    assert xi_kernel(4, 1e-12) == pytest.approx(4.0, rel=1e-15)


@given(N=st.integers(1, 64), x=st.floats(-6, 6))
def test_kernel_matches_cosine_sum_and_bound(N, x):
    got = xi_kernel(N, x)
    assert got == pytest.approx(xi_cos_sum(N, x)[0], abs=1e-9 * N)
    assert abs(got) <= N + 1e-9


def test_kernel_series_branch_continuous():
    x = 2.0 + np.array([-2e-8, -5e-9, 0.0, 5e-9, 2e-8]) / np.pi
    np.testing.assert_allclose(xi_kernel(9, x), xi_cos_sum(9, x), rtol=1e-12)


def test_conventional_against_closed_form_sweep():
    freqs = subcarrier_frequencies(FC, 10e9, 128).frequencies
    rng = np.random.default_rng(0)
    for _ in range(10):
        angles = random_angles(rng)
        a = gain_conventional(freqs, FC, 16, 16, *angles)
        b = gain_conventional_closed(freqs, FC, 16, 16, *angles)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_sub_against_closed_forms():
    freqs = subcarrier_frequencies(FC, 10e9, 64).frequencies
    rng = np.random.default_rng(1)
    for _ in range(10):
        angles = random_angles(rng)
        np.testing.assert_allclose(gain_sub(freqs, FC, 16, 16, 4, 4, *angles),
                                   gain_sub_closed(freqs, FC, 16, 16, 4, 4, *angles),
                                   rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(gain_sub_diagonal(freqs, FC, 16, 16, 4, 4, *angles),
                                   gain_sub_diagonal_closed(freqs, FC, 16, 16, 4, 4, *angles),
                                   rtol=1e-10, atol=1e-12)


@given(u1=u_st, v1=v_st, ui=u_st, vi=v_st, B=st.floats(1e9, 30e9))
def test_gain_bounds(u1, v1, ui, vi, B):
    freqs = subcarrier_frequencies(FC, B, 9).frequencies
    for g in (gain_conventional(freqs, FC, 8, 8, u1, v1, ui, vi),
              gain_fully(freqs, FC, 8, 8, u1, v1, ui, vi),
              gain_sub(freqs, FC, 8, 8, 2, 2, u1, v1, ui, vi),
              gain_sub_diagonal(freqs, FC, 8, 8, 2, 2, u1, v1, ui, vi)):
        assert np.all(g >= 0) and np.all(g <= 1 + 1e-9)
        assert g[4] == pytest.approx(1.0, abs=1e-12)


@given(u1=u_st, v1=v_st, ui=u_st, vi=v_st)
def test_sign_flip_symmetry(u1, v1, ui, vi):
    freqs = subcarrier_frequencies(FC, 10e9, 5).frequencies
    # u -> -u flips sin u sin v, v -> pi - v flips cos v
    flipped = (-u1, np.pi - v1, -ui, np.pi - vi)
    for fn in (gain_conventional_closed, gain_conventional):
        np.testing.assert_allclose(fn(freqs, FC, 8, 8, u1, v1, ui, vi),
                                   fn(freqs, FC, 8, 8, *flipped), atol=1e-12)
    np.testing.assert_allclose(gain_sub(freqs, FC, 8, 8, 2, 2, u1, v1, ui, vi),
                               gain_sub(freqs, FC, 8, 8, 2, 2, *flipped), atol=1e-12)


def test_unit_subsurfaces_reach_fully_connected():
    freqs = subcarrier_frequencies(FC, 20e9, 16).frequencies
    angles = (0.4, 1.0, -0.9, 2.2)
    np.testing.assert_allclose(gain_sub(freqs, FC, 8, 8, 8, 8, *angles), 1, atol=1e-12)
    np.testing.assert_allclose(gain_sub_diagonal(freqs, FC, 8, 8, 8, 8, *angles), 1, atol=1e-12)


def test_zero_delays_reduce_fully_to_conventional():
    freqs = subcarrier_frequencies(FC, 10e9, 16).frequencies
    angles = (0.4, 1.0, -0.9, 2.2)
    from starris.ris import design_conventional_phases
    ph = design_conventional_phases(*angles, 8, 8)
    np.testing.assert_allclose(gain_fully(freqs, FC, 8, 8, *angles, phases=ph,
                                          tau=np.zeros(64)),
                               gain_conventional(freqs, FC, 8, 8, *angles), atol=1e-12)
    rng = np.random.default_rng(4)
    g = gain_fully(freqs, FC, 8, 8, *angles, tau=rng.uniform(-1e-10, 1e-10, 64))
    assert np.all(g <= 1 + 1e-12)


def test_single_subsurface_is_kernel_envelope():
    freqs = subcarrier_frequencies(FC, 10e9, 8).frequencies
    u1, v1, ui, vi = 0.4, 1.0, -0.9, 2.2
    xi = freqs / FC
    want = np.abs(xi_cos_sum(8, (xi - 1) * np.sin(u1) * np.sin(v1))
                  * xi_cos_sum(8, (xi - 1) * np.cos(v1))
                  * xi_cos_sum(8, (xi - 1) * np.sin(ui) * np.sin(vi))
                  * xi_cos_sum(8, (xi - 1) * np.cos(vi))) / 64 ** 2
    np.testing.assert_allclose(gain_sub(freqs, FC, 8, 8, 1, 1, u1, v1, ui, vi), want,
                               rtol=1e-10)


def test_wider_band_loses_more_at_edge():
    angles = (0.7, 1.1, 0.9, 1.9)
    g5 = gain_conventional(subcarrier_frequencies(FC, 5e9, 128).frequencies, FC, 16, 16, *angles)
    g20 = gain_conventional(subcarrier_frequencies(FC, 20e9, 128).frequencies, FC, 16, 16,
                            *angles)
    assert g20[0] < g5[0]


def test_sweep_rows_and_zero_bandwidth():
    cfg = ScenarioConfig(M=4, N1=4, N2=4, S1=2, S2=2)
    links = [("R", (0.3, 1.0, 0.5, 2.0)), ("T", (0.3, 1.0, -0.2, 1.4))]
    rows = sweep_gain(cfg, ("conventional", "fully", "sub"), (0.0, 10e9), links)
    assert len(rows) == 2 * 3 * 2 * 4
    assert all(r.gain == pytest.approx(1.0, abs=1e-12) for r in rows if r.bandwidth_hz == 0)
    assert rows == sweep_gain(cfg, ("conventional", "fully", "sub"), (0.0, 10e9), links)
