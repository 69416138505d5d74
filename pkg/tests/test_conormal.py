import sys
from importlib import resources

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from aniso_cns.conormal import (
    DecayParams,
    MultiIndex,
    NormRequest,
    conormal_table,
    equivalence_ratio,
    horizontal_mean_norm,
    lambda_h,
    lambda_h_neg,
    lambda_h_neg_norm2,
    linf,
    multi_indices,
    sobolev_norm,
    table_sum,
    z_alpha,
    z_apply,
)
from aniso_cns.functionals import FIELD_PARITY
from aniso_cns.grid import build_grid, dh
from aniso_cns.initial import random_smooth_state

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


def _fill(g, fn):
    X1, X2, X3 = g.mesh()
    return np.broadcast_to(fn(X1, X2, X3), g.shape).copy()


class TestTypes:
    def test_multi_index_order(self):
        assert MultiIndex(1, 2, 3).order == 6
        with pytest.raises(ValueError):
            MultiIndex(-1, 0, 0)

    def test_norm_request_validation(self):
        with pytest.raises(ValueError):
            NormRequest(m=-1)
        with pytest.raises(ValueError):
            NormRequest(m=2, kind="full")

    def test_decay_params(self):
        d = DecayParams()
        assert d.s == pytest.approx(33 / 34)
        assert d.sigma == pytest.approx(32 / 34)
        assert 16 / 17 <= d.sigma < d.s < 1
        with pytest.raises(ValueError):
            DecayParams(zeta=0.05)
        with pytest.raises(ValueError):
            DecayParams(zeta=0.0)

    def test_index_counts(self):
        # |a| <= m in three variables: C(m+3, 3); tan: C(m+2, 2)
        assert len(multi_indices(5, "co")) == 56
        assert len(multi_indices(5, "tan")) == 21
        assert len(multi_indices(5, "co", dotted=True)) == 21
        assert all(a.order == 5 for a in multi_indices(5, "tan", dotted=True))


class TestZOperators:
    def test_z3_of_x3_is_phi(self):
        g = build_grid(8, 8, 33, height=4.0)
        f = _fill(g, lambda x, y, z: z)
        out = z_apply(f, g, 3, "odd")
        assert np.abs(out[..., :-1] - g.phi[:-1]).max() < 1e-13

    def test_z1_of_sin(self):
        g = build_grid(16, 8, 9)
        f = _fill(g, lambda x, y, z: np.sin(x))
        assert np.abs(z_apply(f, g, 1) - _fill(g, lambda x, y, z: np.cos(x))).max() < 1e-13

    def test_z3_richardson(self):
        # error at nz against nz' = 2 nz - 1 must shrink by ~16
        H = 5.0

        def fn(x, y, z):
            return np.cos(x) * np.exp(-0.3 * z) * np.cos(1.3 * z)

        def err(nz):
            g = build_grid(8, 8, nz, height=H)
            gf = build_grid(8, 8, 2 * nz - 1, height=H)
            a = z_apply(_fill(g, fn), g, 3)
            b = z_apply(_fill(gf, fn), gf, 3)[..., ::2]
            return np.abs(a - b).max()
        e1, e2 = err(33), err(65)
        assert np.log2(e1 / e2) >= 3.5

    def test_identity_index(self):
        g = build_grid(8, 8, 9)
        f = np.random.default_rng(0).normal(size=g.shape)
        assert np.array_equal(z_alpha(f, g, (0, 0, 0)), f)

    def test_mixed_horizontal(self):
        g = build_grid(16, 16, 9)
        f = _fill(g, lambda x, y, z: np.sin(x) * np.sin(y))
        ex = _fill(g, lambda x, y, z: np.cos(x) * np.cos(y))
        assert np.abs(z_alpha(f, g, (1, 1, 0)) - ex).max() < 1e-12

    def test_z3_squared_of_x3_symbolic(self):
        z = sp.symbols("z", positive=True)
        phi = z / (1 + z)
        target = sp.lambdify(z, phi * sp.diff(phi * sp.diff(z, z), z))
        g = build_grid(8, 8, 129, height=4.0)
        f = _fill(g, lambda x, y, zz: zz)
        out = z_alpha(f, g, (0, 0, 2), parity="odd")[0, 0]
        ex = target(g.x3)
        # interior away from the top mirror row
        assert np.abs(out[:-3] - ex[:-3]).max() < 1e-6

    def test_bad_direction(self):
        g = build_grid(8, 8, 9)
        with pytest.raises(ValueError):
            z_apply(g.zeros(), g, 4)


class TestSobolevNorms:
    def test_constant_tan(self):
        g = build_grid(8, 8, 9, lx=2.0, ly=3.0, height=5.0)
        c = -1.7
        f = np.full(g.shape, c)
        assert sobolev_norm(f, g, NormRequest(5, "tan")) == pytest.approx(abs(c) * np.sqrt(30.0), rel=1e-12)

    def test_sin_tan_m1(self):
        g = build_grid(16, 16, 64, height=10.0)
        f = _fill(g, lambda x, y, z: np.sin(x))
        assert sobolev_norm(f, g, NormRequest(1, "tan")) == pytest.approx(2 * np.pi * np.sqrt(10.0), rel=1e-12)

    def test_dotted_top_order(self):
        g = build_grid(16, 16, 17, height=1.0)
        f = _fill(g, lambda x, y, z: np.sin(2 * x))
        # only d1^2 survives at top order 2: ||4 sin 2x||^2 = 16 * 2 pi^2
        n = sobolev_norm(f, g, NormRequest(2, "tan", dotted=True))
        assert n == pytest.approx(np.sqrt(16 * 2 * np.pi ** 2), rel=1e-12)

    def test_table_matches_direct_application(self):
        g = build_grid(16, 16, 33)
        s = random_smooth_state(g, seed=3)
        m = 3
        T = conormal_table(s.u3, g, m, "odd")
        for al in multi_indices(m):
            direct = z_alpha(s.u3, g, al, "odd")
            val = float(np.sum(direct ** 2, axis=(0, 1)) @ g.z_weights) * g.cell_volume
            assert T[al.as_tuple()] == pytest.approx(val, rel=1e-9, abs=1e-30)

    def test_shifted_sum_is_norm_of_derivative(self):
        g = build_grid(16, 16, 33)
        s = random_smooth_state(g, seed=4)
        T = conormal_table(s.rho, g, 3)
        T1 = conormal_table(dh(s.rho, g, 1), g, 2)
        assert table_sum(T, 2, shift=(1, 0)) == pytest.approx(table_sum(T1, 2), rel=1e-9)

    @given(st.integers(0, 10 ** 6), st.integers(0, 4))
    def test_monotonicity(self, seed, m):
        g = build_grid(8, 8, 17)
        f = random_smooth_state(g, seed=seed).rho
        tan = sobolev_norm(f, g, NormRequest(m, "tan"))
        co = sobolev_norm(f, g, NormRequest(m, "co"))
        co1 = sobolev_norm(f, g, NormRequest(m + 1, "co"))
        assert tan <= co * (1 + 1e-12) and co <= co1 * (1 + 1e-12)

    def test_equivalence_ratio_frozen_interval(self):
        ref = resources.files("aniso_cns").joinpath("data/regression_bounds.toml")
        C = tomllib.loads(ref.read_text())["norm_equivalence"]["C"]
        g = build_grid(16, 16, 33)
        for seed in range(10):
            s = random_smooth_state(g, seed=seed, profile="gauss" if seed % 2 else "cosine")
            r = equivalence_ratio(list(s.data), FIELD_PARITY, g, 5)
            assert 1 / C <= r <= C


class TestLambda:
    def test_unit_wavenumber(self):
        g = build_grid(16, 16, 9)
        f = _fill(g, lambda x, y, z: np.cos(x))
        assert np.abs(lambda_h_neg(f, g, 0.5) - f).max() < 1e-13

    def test_multiplier_half(self):
        g = build_grid(16, 16, 9)
        f = _fill(g, lambda x, y, z: np.cos(2 * x))
        assert np.abs(lambda_h(f, g, -1.0) - f / 2).max() < 1e-13
        with pytest.raises(ValueError):
            lambda_h_neg(f, g, 1.0)

    def test_round_trip(self):
        g = build_grid(16, 16, 9)
        f = np.random.default_rng(5).normal(size=g.shape)
        f -= f.mean(axis=(0, 1), keepdims=True)
        # the Nyquist rows are not band-limited; keep the test inside the band
        F = np.fft.rfft2(f, axes=(0, 1))
        F[8] = 0
        F[:, 8] = 0
        f = np.fft.irfft2(F, s=(16, 16), axes=(0, 1))
        back = lambda_h(lambda_h_neg(f, g, 0.4), g, 0.4)
        assert np.abs(back - f).max() < 1e-12

    def test_norm_matches_operator(self):
        g = build_grid(16, 16, 17)
        f = random_smooth_state(g, seed=6).u1
        via_op = float(np.sum(lambda_h_neg(f, g, 0.3) ** 2, axis=(0, 1)) @ g.z_weights) * g.cell_volume
        assert lambda_h_neg_norm2(f, g, 0.3) == pytest.approx(via_op, rel=1e-10)

    @given(st.integers(0, 10 ** 6), st.floats(0.05, 0.95))
    def test_linear_commutes_and_drops_means(self, seed, s):
        g = build_grid(8, 8, 9)
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=g.shape), rng.normal(size=g.shape)
        L = lambda f: lambda_h_neg(f, g, s)
        assert np.abs(L(a + 2 * b) - L(a) - 2 * L(b)).max() < 1e-12 * (1 + np.abs(L(a)).max())
        for ax in (1, 2):
            assert np.abs(dh(L(a), g, ax) - L(dh(a, g, ax))).max() < 1e-11 * (1 + np.abs(a).max())
        mean_only = np.broadcast_to(a.mean(axis=(0, 1), keepdims=True), g.shape)
        assert np.abs(L(mean_only)).max() < 1e-12

    def test_mean_norm(self):
        g = build_grid(8, 8, 9, height=1.0)
        f = np.full(g.shape, 2.0)
        assert horizontal_mean_norm(f, g) == pytest.approx(2 * np.sqrt(4 * np.pi ** 2))


class TestLinf:
    def test_zero(self):
        g = build_grid(8, 8, 9)
        assert linf(g.zeros()) == 0.0

    def test_sin(self):
        g = build_grid(8, 8, 9)
        assert linf(_fill(g, lambda x, y, z: np.sin(x))) == pytest.approx(1.0, abs=1e-2)

    def test_gaussian_peak(self):
        g = build_grid(16, 16, 65, height=10.0)
        f = _fill(g, lambda x, y, z: 0.7 * np.exp(-((x - np.pi) ** 2 + (y - np.pi) ** 2 + (z - 5) ** 2)))
        assert linf(f) == pytest.approx(0.7, abs=5e-3)
