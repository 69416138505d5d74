import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from aniso_cns import _backend, dynamics, kernels
from aniso_cns.grid import build_grid
from aniso_cns.initial import random_smooth_state

needs_numba = pytest.mark.skipif(not _backend.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def backend():
    prev = _backend.get_backend()
    yield _backend.set_backend
    _backend.set_backend(prev)


class TestStencilRows:
    # textbook one-sided weights, written out as fractions
    @pytest.mark.parametrize("row,expected", [
        (kernels.D1_ROW0, ["-25/12", "4", "-3", "4/3", "-1/4"]),
        (kernels.D1_ROW1, ["-1/4", "-5/6", "3/2", "-1/2", "1/12"]),
        (kernels.D2_ROW0, ["15/4", "-77/6", "107/6", "-13", "61/12", "-5/6"]),
        (kernels.D2_ROW1, ["5/6", "-5/4", "-1/3", "7/6", "-1/2", "1/12"]),
    ])
    def test_weights(self, row, expected):
        exp = np.array([float(Fraction(e)) for e in expected])
        assert np.abs(row - exp).max() < 1e-12

    def test_centered_weights(self):
        assert np.allclose(kernels.fd_weights([-2, -1, 0, 1, 2], 1), [1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
        assert np.allclose(kernels.fd_weights([-2, -1, 0, 1, 2], 2), [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])

    def test_parity_codes(self):
        assert kernels.parity_code("odd") == kernels.ODD
        assert kernels.parity_code(2) == kernels.ONE_SIDED
        with pytest.raises(ValueError):
            kernels.parity_code("periodic")
        with pytest.raises(ValueError):
            kernels.parity_code(7)

    def test_too_few_rows(self):
        with pytest.raises(ValueError):
            kernels.vertical_d1(np.zeros((2, 2, 5)), 0.1, "even")


class TestBackends:
    def test_set_backend_validation(self, backend):
        with pytest.raises(ValueError):
            backend("fortran")

    @needs_numba
    @pytest.mark.parametrize("parity", ["even", "odd", "one_sided"])
    @pytest.mark.parametrize("fn", [kernels.vertical_d1, kernels.vertical_d2])
    def test_vertical_parity(self, backend, parity, fn):
        f = np.random.default_rng(0).normal(size=(5, 6, 19))
        backend("numpy")
        a = fn(f, 0.3, parity)
        backend("numba")
        b = fn(f, 0.3, parity)
        assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()

    @needs_numba
    @pytest.mark.parametrize("linearized", [False, True])
    def test_tendency_parity(self, backend, linearized):
        g = build_grid(16, 16, 24)
        s = random_smooth_state(g, seed=2, amplitude=0.05)
        params = dynamics.SolverParams(eps=0.2, linearized=linearized)
        backend("numpy")
        a = dynamics.tendency_eqr(s, params).data
        backend("numba")
        b = dynamics.tendency_eqr(s, params).data
        assert np.abs(a - b).max() <= 1e-12 * np.abs(a).max()

    @needs_numba
    def test_env_flag_selects_numpy(self):
        env = dict(os.environ, ANISO_CNS_BACKEND="numpy")
        out = subprocess.run(
            [sys.executable, "-c", "from aniso_cns._backend import get_backend; print(get_backend())"],
            env=env, capture_output=True, text=True, check=True,
        )
        assert out.stdout.strip() == "numpy"

    def test_env_flag_rejects_junk(self):
        env = dict(os.environ, ANISO_CNS_BACKEND="gpu")
        out = subprocess.run([sys.executable, "-c", "import aniso_cns"], env=env, capture_output=True, text=True)
        assert out.returncode != 0 and "ANISO_CNS_BACKEND" in out.stderr
