import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from aniso_cns import harness
from aniso_cns.config import default_config
from aniso_cns.dynamics import SolverParams, tendency_eqr
from aniso_cns.errors import FitWindowError, InstabilityError
from aniso_cns.functionals import energy_report
from aniso_cns.grid import State
from aniso_cns.mms import zero_family
from aniso_cns.persist import load_series, load_summary

SMALL = dict(grid=dict(nx=8, ny=8, nz=16), decay=dict(m=3))


def small_cfg(**kw):
    sec = {k: dict(v) for k, v in SMALL.items()}
    for k, v in kw.items():
        sec.setdefault(k, {}).update(v)
    return default_config(**sec)


class TestSchedule:
    def test_integer_steps_per_sample(self):
        dt, per, n = harness.sample_schedule(0.003, 0.5, 2.0)
        assert per * dt == pytest.approx(0.5) and dt <= 0.003 and n == 4

    def test_resolution_warning(self):
        cfg = default_config()
        g = harness.make_grid(cfg)
        with pytest.warns(harness.UnderResolvedWarning):
            harness.check_resolution(g, 0.01)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert harness.check_resolution(g, 0.9)
            assert harness.check_resolution(g, 0.0)


class TestRunSimulation:
    def test_zero_amplitude(self, tmp_path):
        cfg = small_cfg(initial=dict(amplitude=0.0), solver=dict(t_end=1.0))
        res = harness.run_simulation(cfg, out_dir=str(tmp_path))
        assert len(res.series) == 3
        for row in res.series.rows():
            assert all(v == 0.0 for k, v in row.items() if k != "t")

    def test_outputs_and_rows(self, tmp_path):
        cfg = small_cfg(solver=dict(t_end=1.5))
        res = harness.run_simulation(cfg, out_dir=str(tmp_path))
        lines = (tmp_path / "series.csv").read_text().splitlines()
        assert len(lines) == len(res.series) + 1 == 5
        assert (tmp_path / "config.toml").exists()
        summ = load_summary(tmp_path / "summary.json")
        assert summ["n_samples"] == 4 and summ["aborted"] is None
        assert summ["mass_drift_per_time"] < 1e-8
        back = load_series(tmp_path / "series.csv", m=3)
        assert np.array_equal(back.column("E"), res.series.column("E"))

    def test_deterministic(self):
        cfg = small_cfg(solver=dict(t_end=1.0), initial=dict(kind="random"))
        a = harness.run_simulation(cfg, persist_output=False)
        b = harness.run_simulation(cfg, persist_output=False)
        for ra, rb in zip(a.series.rows(), b.series.rows()):
            assert ra == rb

    def test_linear_single_mode_eigen_oracle(self):
        modes = [{"field": "rho", "kx": 1, "ky": 0, "amplitude": 1.0, "phase": 0.0}]
        cfg = default_config(grid=dict(nx=8, ny=8, nz=9, height=4.0), decay=dict(m=3),
                             solver=dict(eps=0.2, linearized=True, t_end=5.0, c_cfl=0.5),
                             initial=dict(modes=modes, profile="cosine"),
                             output=dict(sample_dt=0.5, residuals=False))
        res = harness.run_simulation(cfg, persist_output=False)
        g = harness.make_grid(cfg)
        p = harness.solver_params(cfg)
        s0 = harness.initial_state(cfg, g)
        n = s0.data.size
        L = np.array([tendency_eqr(State(g, e.reshape(s0.data.shape)), p).data.ravel()
                      for e in np.eye(n)]).T
        P = expm(0.5 * L)
        q = s0.data.ravel()
        for k, t in enumerate(res.series.t):
            rep = energy_report(State(g, q.reshape(s0.data.shape).copy()), p, m=3, t=t)
            assert res.series.column("E_tan")[k] == pytest.approx(rep.E_tan, rel=1e-2)
            q = P @ q
        assert res.series.t[-1] == pytest.approx(5.0)

    def test_abort_flushes_partial_series(self, tmp_path):
        cfg = small_cfg(solver=dict(t_end=5.0, dt=0.5, linearized=True))
        with pytest.raises(InstabilityError) as info:
            harness.run_simulation(cfg, out_dir=str(tmp_path))
        part = info.value.partial
        assert part.aborted.startswith("instability")
        lines = (tmp_path / "series.csv").read_text().splitlines()
        assert len(lines) == len(part.series) + 1 >= 2
        assert load_summary(tmp_path / "summary.json")["aborted"].startswith("instability")

    def test_amplitude_quarters_energy(self):
        sup = []
        for amp in (2e-2, 1e-2):
            cfg = small_cfg(solver=dict(t_end=1.0), initial=dict(amplitude=amp),
                            output=dict(residuals=False))
            sup.append(harness.run_simulation(cfg, persist_output=False).series.column("E").max())
        assert 3.0 <= sup[0] / sup[1] <= 5.0

    def test_max_principle_traces(self):
        amp = 1e-2
        cfg = small_cfg(solver=dict(t_end=3.0), initial=dict(amplitude=amp), output=dict(residuals=False))
        s = harness.run_simulation(cfg, persist_output=False).series
        for col in ("wh_inf", "d3rho_inf"):
            v = s.column(col)
            assert v.max() <= 2 * (v[0] + amp)


class TestDecayFit:
    def test_power_law(self):
        t = np.linspace(0, 50, 101)
        fit = harness.fit_decay_arrays(t, (1 + t) ** -1.0)
        assert fit.exponent == pytest.approx(-1.0, abs=1e-6)
        assert fit.r2 == pytest.approx(1.0)

    def test_exponential_is_bounded(self):
        t = np.linspace(0, 50, 101)
        E = 5 * np.exp(-t)
        fit = harness.fit_decay_arrays(t, E, E)
        w = (1 + t[t >= 1]) ** (1 - 1 / 34) * E[t >= 1]
        assert np.all(np.diff(w) < 0) and fit.bounded

    def test_growth_not_bounded(self):
        t = np.linspace(0, 50, 101)
        assert not harness.fit_decay_arrays(t, 1 + 0 * t).bounded

    def test_window_too_short(self):
        t = np.linspace(0, 5, 11)
        with pytest.raises(FitWindowError, match="window_too_short"):
            harness.fit_decay_arrays(t, np.exp(-t), window=(1.0, 3.0))
        with pytest.raises(FitWindowError):
            harness.fit_decay_arrays(t, np.exp(-t), window=(3.0, 1.0))

    def test_tail_fractions(self):
        from tests.test_functionals import synthetic_series
        t = np.linspace(0, 50, 101)
        ser = synthetic_series(t, D=np.exp(-t), D_tan=np.exp(-t), D_bar=np.exp(-t))
        tf = harness.tail_fractions(ser, 40.0)
        assert all(v < 1e-10 for v in tf.values())


class TestSweep:
    def test_zero_eps_matches_reference(self):
        cfg = small_cfg(sweep=dict(eps_list=[0.0], t_end=0.5))
        tab = harness.epsilon_sweep(cfg)
        assert tab.rows == [(0.0, 0.0)] and tab.complete

    def test_frozen_time(self):
        cfg = small_cfg(sweep=dict(t_end=0.0))
        tab = harness.epsilon_sweep(cfg)
        assert [d for _, d in tab.rows] == [0.0] * 4

    def test_short_sweep_orders_members(self):
        cfg = small_cfg(sweep=dict(eps_list=[0.4, 0.1], t_end=0.5))
        tab = harness.epsilon_sweep(cfg)
        assert tab.rows[0][1] > tab.rows[1][1] > 0
        d = tab.to_dict()
        assert d["monotone"] and d["norm_order"] == 2

    def test_rejects_unsorted(self):
        with pytest.raises(ValueError):
            harness.epsilon_sweep(small_cfg(), eps_list=[0.1, 0.2])


class TestMMS:
    def test_zero_family(self):
        rep = harness.mms_convergence(default_config(), resolutions=[(8, 8, 9), (8, 8, 17), (8, 8, 33)],
                                      exact=zero_family())
        assert rep.errors == [0.0, 0.0, 0.0]

    def test_needs_three_grids(self):
        with pytest.raises(ValueError):
            harness.mms_convergence(default_config(), resolutions=[(8, 8, 9), (8, 8, 17)])

    def test_coarse_order(self):
        rep = harness.mms_convergence(default_config(), resolutions=[(16, 16, 17), (16, 16, 33), (16, 16, 65)])
        assert rep.monotone and rep.min_order >= 3.5

    def test_dt_halving_changes_error_little(self):
        # spatial dominance: the error at c_cfl and c_cfl / 2 agree within 5%
        base = harness.mms_convergence(default_config(), resolutions=[(16, 16, 17), (16, 16, 33), (16, 16, 65)])
        half = harness.mms_convergence(default_config(mms=dict(c_cfl=0.5)),
                                       resolutions=[(16, 16, 17), (16, 16, 33), (16, 16, 65)])
        for a, b in zip(base.errors, half.errors):
            assert abs(a - b) <= 0.05 * a


class TestLinearBalance:
    def test_small_grid(self):
        cfg = small_cfg(solver=dict(eps=0.3), grid=dict(nz=24))
        rep = harness.linear_energy_balance(cfg, t_end=1.0, sample_dt=0.5)
        # coarse dz: the continuum-form dissipation differs from the discrete one at O(dz^4)
        assert rep.rel_per_time < 1e-4
        assert rep.mass_drift_per_time < 1e-12
        assert np.all(np.diff(rep.energy) < 0)
