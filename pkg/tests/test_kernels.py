import os
import subprocess
import sys

import numpy as np
import pytest

from starris import _kernels
from starris.ris import design_sub_connected, subsurface_index

needs_numba = pytest.mark.skipif(_kernels.NUMBA is None, reason="numba not installed")


def _array_inputs(rng):
    N1 = N2 = 8
    n1, n2 = np.divmod(np.arange(N1 * N2), N2)
    f = np.linspace(95e9, 105e9, 17)
    return (f / 100e9, f, n1.astype(float), n2.astype(float), 0.4, -0.3,
            rng.uniform(-np.pi, np.pi, 64), rng.uniform(0, 2e-11, 64))


@needs_numba
def test_array_factor_backends_agree(rng):
    args = _array_inputs(rng)
    np.testing.assert_allclose(_kernels.NUMBA.array_factor(*args),
                               _kernels.NUMPY.array_factor(*args), rtol=1e-12, atol=1e-14)


@needs_numba
def test_two_stage_backends_agree(rng):
    xi, f, n1, n2, *_ = _array_inputs(rng)
    p1, p2, tau = design_sub_connected(0.3, 1.1, -0.6, 2.0, 100e9, 8, 8, 2, 2)
    sub = subsurface_index(8, 8, 2, 2)[0].astype(np.int64)
    args = (xi, f, n1, n2, sub, 4, 0.2, 0.4, -0.5, -0.4, p1, p2, tau, 16.0)
    np.testing.assert_allclose(_kernels.NUMBA.two_stage_factor(*args),
                               _kernels.NUMPY.two_stage_factor(*args), rtol=1e-12, atol=1e-14)


@needs_numba
def test_projection_backends_agree(rng):
    x, y = rng.normal(0, 2, 500), rng.normal(0, 2, 500)
    for a, b in zip(_kernels.NUMBA.project_quarter_disk(x, y),
                    _kernels.NUMPY.project_quarter_disk(x, y)):
        np.testing.assert_allclose(a, b, rtol=1e-15)


@needs_numba
def test_admm_backends_agree(rng):
    n = 12
    A = rng.standard_normal((n, n))
    H = A @ A.T / n
    lam, q = np.linalg.eigh(2 * H)
    g_r, g_t = rng.standard_normal(n), rng.standard_normal(n)
    z = np.zeros(n)
    for balance in (0.0, 10.0):
        args = (q, lam, q, lam, g_r, g_t, 1.0, z, z, z, z, 300, 1e-9, balance)
        out_nb = _kernels.NUMBA.admm_loop(*args)
        out_np = _kernels.NUMPY.admm_loop(*args)
        assert out_nb[4] == out_np[4]
        for a, b in zip(out_nb[:4], out_np[:4]):
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def _backend_in_subprocess(value):
    env = dict(os.environ, STARRIS_BACKEND=value)
    code = "from starris import _kernels; print(_kernels.active.name)"
    return subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)


def test_env_flag_selects_backend():
    out = _backend_in_subprocess("numpy")
    assert out.returncode == 0 and out.stdout.strip() == "numpy"
    if _kernels.NUMBA is not None:
        assert _backend_in_subprocess("numba").stdout.strip() == "numba"
    assert _backend_in_subprocess("fortran").returncode != 0
