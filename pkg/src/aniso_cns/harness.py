"""Experiment drivers: simulations, decay fits, epsilon sweeps, MMS studies."""
import math
import os
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson

from . import conormal, dynamics, functionals, grid as gridmod, initial, mms, persist
from .config import dumps_config, to_dict
from .errors import FitWindowError, InstabilityError, LabError, VacuumError

# grid / params / data -----------------------------------------------------------


def make_grid(cfg):
    g = cfg.grid
    return gridmod.build_grid(g.nx, g.ny, g.nz, g.lx, g.ly, g.height)


def solver_params(cfg, **overrides):
    s = cfg.solver
    p = dynamics.SolverParams(eps=s.eps, gamma=s.gamma, dt=s.dt or None, t_end=s.t_end,
                              linearized=s.linearized, c_cfl=s.c_cfl)
    return replace(p, **overrides) if overrides else p


def initial_state(cfg, grid=None):
    grid = make_grid(cfg) if grid is None else grid
    ic = cfg.initial
    if ic.kind == "random":
        return initial.random_smooth_state(grid, cfg.seed, ic.amplitude, ic.kmax, ic.kzmax,
                                           ic.profile, ic.width)
    modes = [initial.Mode(**m) for m in ic.modes]
    return initial.modal_state(grid, modes, ic.amplitude, ic.profile, ic.width)


def sample_schedule(dt_max, sample_dt, t_end):
    """``(dt, steps_per_sample, n_samples)`` with an integer number of steps per sample."""
    k = max(1, math.ceil(sample_dt / dt_max - 1e-9))
    n = int(round(t_end / sample_dt))
    return sample_dt / k, k, n


class UnderResolvedWarning(RuntimeWarning):
    pass


def check_resolution(grid, eps):
    """Warn when the vertical boundary layer ``sqrt(eps)`` spans fewer than 4 cells."""
    if eps > 0 and math.sqrt(eps) < 4.0 * grid.dz:
        warnings.warn(f"vertical boundary layer under-resolved: sqrt(eps) = {math.sqrt(eps):.3g} "
                      f"< 4 dz = {4 * grid.dz:.3g}", UnderResolvedWarning, stacklevel=3)
        return False
    return True


# simulation -----------------------------------------------------------------------

def sample_row(state, params, decay, m, t, mass0=0.0, residuals=True):
    """Energy report plus the auxiliary traces recorded at one sample."""
    rep = functionals.energy_report(state, params, decay, m, t)
    g = state.grid
    aux = {"mass_drift": gridmod.integrate(state.rho, g) - mass0}
    if residuals:
        full = replace(params, linearized=False, forcing=None)
        aux["res_p3divu"] = dynamics.identity_residual_p3divu(state, full, t)
        aux["res_p3rho"] = dynamics.identity_residual_p3rho(state, full, t)
        aux["res_vort"] = dynamics.vorticity_tendency_residual(state, full, t)
    else:
        aux.update(res_p3divu=float("nan"), res_p3rho=float("nan"), res_vort=float("nan"))
    return rep, aux


@dataclass
class RunResult:
    series: functionals.TimeSeries
    dt: float
    steps: int
    wall_time: float
    aborted: str = ""
    out_dir: str = ""
    summary: dict = field(default_factory=dict)


def run_simulation(cfg, out_dir=None, progress=None, persist_output=True, limit_system=False,
                   state_hook=None, params=None, state0=None):
    """Integrate from the configured initial data to ``solver.t_end``.

    Samples every ``output.sample_dt``.  With ``persist_output`` the series
    is streamed to ``series.csv`` (one flushed line per sample) next to the
    resolved config and a summary JSON.  On instability or vacuum the
    partial series is flushed and the error is re-raised with the partial
    :class:`RunResult` attached as ``exc.partial``.
    """
    grid = make_grid(cfg)
    params = solver_params(cfg) if params is None else params
    if limit_system:
        params = replace(params, eps=0.0)
    check_resolution(grid, params.eps)
    decay = conormal.DecayParams(cfg.decay.zeta)
    m = cfg.decay.m
    state = initial_state(cfg, grid) if state0 is None else state0
    dt_max = params.dt or dynamics.stable_dt(grid, params.eps, params.c_cfl)
    dt, per, n_samples = sample_schedule(dt_max, cfg.output.sample_dt, params.t_end)
    stepper = dynamics.RK4Stepper(grid, params, dt=dt)

    out_dir = out_dir or cfg.out_dir
    writer = None
    if persist_output:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config.toml"), "w") as fh:
            fh.write(dumps_config(cfg))
        writer = persist.SeriesWriter(os.path.join(out_dir, "series.csv"))

    series = functionals.TimeSeries(zeta=decay.zeta, m=m, eps=params.eps)
    mass0 = gridmod.integrate(state.rho, grid)
    t0 = time.perf_counter()
    result = RunResult(series, dt, 0, 0.0, out_dir=out_dir if persist_output else "")

    def record(st, t):
        rep, aux = sample_row(st, params, decay, m, t, mass0, cfg.output.residuals)
        series.append(rep, **aux)
        if writer is not None:
            row = rep.as_row()
            row.update(aux)
            writer.append(row)
        if state_hook is not None:
            state_hook(t, st)
        if progress is not None:
            progress({"t": t, "E": rep.E_total, "dt": dt})

    try:
        record(state, 0.0)
        for k in range(1, n_samples + 1):
            t_start = (k - 1) * cfg.output.sample_dt
            for j in range(per):
                state = stepper.step(state, t_start + j * dt)
                if not params.linearized:
                    state.check_vacuum(dynamics.VACUUM_FLOOR)
                result.steps += 1
            record(state, k * cfg.output.sample_dt)
    except (InstabilityError, VacuumError) as exc:
        result.aborted = str(exc)
        result.wall_time = time.perf_counter() - t0
        if writer is not None:
            writer.close()
            result.summary = run_summary(cfg, result)
            persist.write_summary(result.summary, os.path.join(out_dir, "summary.json"))
        exc.partial = result
        raise
    finally:
        if writer is not None:
            writer.close()
    result.wall_time = time.perf_counter() - t0
    result.summary = run_summary(cfg, result)
    if persist_output:
        persist.write_summary(result.summary, os.path.join(out_dir, "summary.json"))
    return result


def run_summary(cfg, result):
    s = result.series
    out = {"config": to_dict(cfg), "n_samples": len(s), "dt": result.dt, "steps": result.steps,
           "wall_time": result.wall_time, "aborted": result.aborted or None}
    if len(s):
        out["t_last"] = float(s.t[-1])
        out["measured_C"] = functionals.measured_constant(s)
        out["bootstrap"] = functionals.bootstrap_monitor(s).to_dict()
        out["weighted_integrals"] = functionals.weighted_integrals(s)
        md = np.abs(s.column("mass_drift"))
        out["mass_drift_max"] = float(md.max())
        t = s.t
        out["mass_drift_per_time"] = float(np.max(md[1:] / t[1:])) if len(t) > 1 else 0.0
        try:
            out["decay_fit"] = fit_decay(s, cfg.fit.window).to_dict()
        except FitWindowError as exc:
            out["decay_fit"] = {"error": str(exc)}
    return out


# decay fits ---------------------------------------------------------------------

@dataclass
class DecayFit:
    exponent: float
    intercept: float
    r2: float
    window: tuple
    n: int
    max_weighted_tan: float
    max_weighted_bar: float
    ref_weighted_tan: float
    ref_weighted_bar: float
    bounded: bool

    def to_dict(self):
        d = dict(self.__dict__)
        d["window"] = list(self.window)
        return d


def fit_decay_arrays(t, E_tan, E_bar=None, window=(1.0, 50.0), zeta=1.0 / 34.0, factor=3.0):
    """Least squares of ``log E_tan`` against ``log(1+t)`` on ``window``.

    ``bounded`` holds when the weighted energies ``(1+t)^(1-zeta) E_tan``
    and ``(1+t)^(2-2 zeta) E_bar`` stay within ``factor`` times their value
    at the first sample of the window.
    """
    t = np.asarray(t, float)
    E_tan = np.asarray(E_tan, float)
    E_bar = E_tan if E_bar is None else np.asarray(E_bar, float)
    t1, t2 = window
    if not t1 < t2:
        raise FitWindowError("window must satisfy t1 < t2")
    sel = (t >= t1 - 1e-12) & (t <= t2 + 1e-12)
    if sel.sum() < 8:
        raise FitWindowError(f"window_too_short: {int(sel.sum())} samples in [{t1}, {t2}], need 8")
    tt, y = t[sel], E_tan[sel]
    if np.any(y <= 0):
        raise FitWindowError("E_tan must be positive on the fit window")
    X = np.log1p(tt)
    Y = np.log(y)
    A = np.vstack([X, np.ones_like(X)]).T
    (p, c), *_ = np.linalg.lstsq(A, Y, rcond=None)
    ss_res = float(np.sum((Y - (p * X + c)) ** 2))
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    wt = (1.0 + tt) ** (1.0 - zeta) * y
    wb = (1.0 + tt) ** (2.0 - 2.0 * zeta) * E_bar[sel]
    bounded = bool(wt.max() <= factor * wt[0] and wb.max() <= factor * wb[0])
    return DecayFit(float(p), float(c), float(r2), (float(t1), float(t2)), int(sel.sum()),
                    float(wt.max()), float(wb.max()), float(wt[0]), float(wb[0]), bounded)


def fit_decay(series, window=(1.0, 50.0), zeta=None, factor=3.0):
    zeta = series.zeta if zeta is None else zeta
    return fit_decay_arrays(series.t, series.column("E_tan"), series.column("E_bar_tan"),
                            tuple(window), zeta, factor)


def tail_fractions(series, t_tail=40.0, decay=None):
    """Share of each weighted dissipation integral accumulated after ``t_tail``."""
    cum = functionals.weighted_integrals(series, decay, cumulative=True)
    t = series.t
    i = int(np.searchsorted(t, t_tail - 1e-12))
    out = {}
    for k, v in cum.items():
        total = float(v[-1])
        out[k] = (total - float(v[i])) / total if total > 0 else 0.0
    return out


# epsilon sweep ----------------------------------------------------------------------

FIELD_PARITY = ("one_sided",) + gridmod.VELOCITY_PARITY


def conormal_distance(a, b, m):
    """``||a - b||`` in ``H^m_co`` summed over the four fields."""
    g = a.grid
    tot = 0.0
    for fa, fb, par in zip(a.fields, b.fields, FIELD_PARITY):
        T = conormal.conormal_table(fa - fb, g, m, par)
        tot += conormal.table_sum(T, m)
    return math.sqrt(tot)


@dataclass
class ConvergenceTable:
    rows: list
    monotone: bool
    halved: bool
    complete: bool = True
    t_end: float = 0.0
    norm_order: int = 4
    errors: dict = field(default_factory=dict)

    def to_dict(self):
        return {"rows": [{"eps": e, "distance": d} for e, d in self.rows], "monotone": self.monotone,
                "last_le_half_first": self.halved, "complete": self.complete, "t_end": self.t_end,
                "norm_order": self.norm_order, "errors": self.errors}


def epsilon_sweep(cfg, eps_list=None, t_end=None, progress=None):
    """Sup-in-time ``H^(m-1)_co`` distance of each eps run to the eps = 0 run.

    All members share grid, initial data and time step (the one allowed by
    the largest eps).
    """
    eps_list = list(cfg.sweep.eps_list if eps_list is None else eps_list)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    t_end = cfg.sweep.t_end if t_end is None else t_end
    grid = make_grid(cfg)
    base = solver_params(cfg, t_end=t_end)
    dt = base.dt or dynamics.stable_dt(grid, max(eps_list + [0.0]), base.c_cfl)
    m = cfg.decay.m - 1
    run_cfg = replace(cfg, output=replace(cfg.output, residuals=False))

    ref = []
    run_simulation(run_cfg, persist_output=False, params=replace(base, eps=0.0, dt=dt),
                   state_hook=lambda t, s: ref.append(s.copy()))
    rows, errors = [], {}
    for eps in eps_list:
        dist = [0.0]
        idx = [0]

        def hook(t, s):
            dist[0] = max(dist[0], conormal_distance(s, ref[idx[0]], m))
            idx[0] += 1
        try:
            run_simulation(run_cfg, persist_output=False, params=replace(base, eps=eps, dt=dt),
                           state_hook=hook)
        except LabError as exc:
            errors[str(eps)] = str(exc)
            continue
        rows.append((float(eps), dist[0]))
        if progress is not None:
            progress({"eps": eps, "distance": dist[0]})
    d = [r[1] for r in rows]
    complete = not errors
    monotone = complete and all(b < a for a, b in zip(d, d[1:]))
    halved = complete and len(d) > 1 and d[-1] <= 0.5 * d[0]
    return ConvergenceTable(rows, monotone, halved, complete, t_end, m, errors)


# manufactured solutions ---------------------------------------------------------------

@dataclass
class MMSReport:
    resolutions: list
    dz: list
    errors: list
    orders: list
    monotone: bool
    steps: list = field(default_factory=list)

    @property
    def min_order(self):
        return min(self.orders) if self.orders else float("nan")

    def to_dict(self):
        return {"resolutions": self.resolutions, "dz": self.dz, "errors": self.errors,
                "orders": self.orders, "monotone": self.monotone, "min_order": self.min_order,
                "steps": self.steps}


def state_error(a, b):
    g = a.grid
    return math.sqrt(sum(gridmod.l2_norm(x - y, g) ** 2 for x, y in zip(a.fields, b.fields)))


def mms_solve(exact, grid, params, t_end, dt):
    """Forced RK4 run from ``exact(0)``; returns ``(final state, steps)``."""
    n = max(1, int(math.ceil(t_end / dt - 1e-9)))
    stepper = dynamics.RK4Stepper(grid, params, dt=t_end / n)
    st = exact.state(grid, 0.0)
    for k in range(n):
        st = stepper.step(st, k * stepper.dt)
    return st, n


def mms_convergence(cfg, resolutions=None, exact=None, progress=None):
    """Spatial order from the final-time error on a sequence of grids.

    The step is ``c_cfl`` times the stability bound of each grid, so
    ``dt`` scales like ``dz^2`` once the vertical spacing limits it and the
    temporal error stays far below the spatial one.
    """
    mc = cfg.mms
    resolutions = [tuple(r) for r in (mc.resolutions if resolutions is None else resolutions)]
    if len(resolutions) < 3:
        raise ValueError("need at least 3 resolutions")
    if exact is None:
        exact = mms.default_family(mc.amplitude, cfg.grid.lx, cfg.grid.ly, mc.height)
    params = dynamics.SolverParams(eps=mc.eps, gamma=cfg.solver.gamma)
    forcing = mms.mms_forcing(exact, params, height=mc.height)
    params = replace(params, forcing=forcing)
    errs, dzs, steps = [], [], []
    for nx, ny, nz in resolutions:
        g = gridmod.build_grid(nx, ny, nz, cfg.grid.lx, cfg.grid.ly, mc.height)
        dt = dynamics.stable_dt(g, mc.eps, mc.c_cfl)
        st, n = mms_solve(exact, g, params, mc.t_end, dt)
        e = state_error(st, exact.state(g, mc.t_end))
        errs.append(e)
        dzs.append(g.dz)
        steps.append(n)
        if progress is not None:
            progress({"grid": [nx, ny, nz], "error": e, "steps": n})
    orders = []
    for i in range(len(errs) - 1):
        if errs[i] > 0 and errs[i + 1] > 0:
            orders.append(math.log(errs[i] / errs[i + 1]) / math.log(dzs[i] / dzs[i + 1]))
        else:
            orders.append(float("nan"))
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    return MMSReport([list(r) for r in resolutions], dzs, errs, orders, monotone, steps)


def mms_temporal_order(cfg, resolution=(16, 16, 33), n_steps=16, refine=16, exact=None):
    """Global RK4 error at fixed time under step halving.

    The reference is the same forced discrete system integrated with a
    ``refine`` times smaller step, so spatial error cancels.  Returns
    ``(errors for dt, dt/2, dt/4, ratios)``.
    """
    mc = cfg.mms
    if exact is None:
        exact = mms.default_family(mc.amplitude, cfg.grid.lx, cfg.grid.ly, mc.height)
    params = dynamics.SolverParams(eps=mc.eps, gamma=cfg.solver.gamma)
    params = replace(params, forcing=mms.mms_forcing(exact, params, height=mc.height))
    g = gridmod.build_grid(*resolution, cfg.grid.lx, cfg.grid.ly, mc.height)
    dt0 = dynamics.stable_dt(g, mc.eps, mc.c_cfl)
    T = n_steps * dt0
    ref, _ = mms_solve(exact, g, params, T, dt0 / (4 * refine))
    errs = [state_error(mms_solve(exact, g, params, T, dt0 / 2 ** k)[0], ref) for k in range(3)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    return errs, ratios


# linear energy balance ---------------------------------------------------------------

@dataclass
class BalanceReport:
    t: np.ndarray
    energy: np.ndarray
    dissipated: np.ndarray
    residual: np.ndarray
    rel_per_time: float
    mass_drift_per_time: float

    def to_dict(self):
        return {"rel_residual_per_time": self.rel_per_time,
                "mass_drift_per_time": self.mass_drift_per_time,
                "t_end": float(self.t[-1]) if len(self.t) else 0.0}


def _basic_energy(state):
    g = state.grid
    return 0.5 * sum(gridmod.l2_norm(f, g) ** 2 for f in state.fields)


def linear_dissipation(state, eps):
    """``||grad_h u||^2 + ||div u||^2 + eps ||d3 u||^2``."""
    g = state.grid
    u = state.u
    out = 0.0
    for c, par in zip(u, gridmod.VELOCITY_PARITY):
        out += gridmod.l2_norm(gridmod.dh(c, g, 1), g) ** 2 + gridmod.l2_norm(gridmod.dh(c, g, 2), g) ** 2
        if eps:
            out += eps * gridmod.l2_norm(gridmod.dz(c, g, par), g) ** 2
    out += gridmod.l2_norm(gridmod.divergence(u, g), g) ** 2
    return out


def linear_energy_balance(cfg, t_end=2.0, sample_dt=0.5):
    """Residual of the linear energy identity along a linearized run.

    ``R(t) = E(t) - E(0) + int_0^t D`` with ``D`` evaluated after every step
    and integrated by Simpson's rule; reported relative to ``E(0)`` per unit
    time.  The mass drift of ``int rho`` is reported relative to
    ``||rho_0||`` per unit time.
    """
    grid = make_grid(cfg)
    params = solver_params(cfg, linearized=True)
    state = initial_state(cfg, grid)
    dt_max = params.dt or dynamics.stable_dt(grid, params.eps, params.c_cfl)
    dt, per, n = sample_schedule(dt_max, sample_dt, t_end)
    if per % 2:
        per *= 2
        dt *= 0.5
    stepper = dynamics.RK4Stepper(grid, params, dt=dt)
    E0 = _basic_energy(state)
    mass0 = gridmod.integrate(state.rho, grid)
    rho0 = gridmod.l2_norm(state.rho, grid)
    Dvals = [linear_dissipation(state, params.eps)]
    ts, Es, Is, Ms = [0.0], [E0], [0.0], [0.0]
    for k in range(1, n + 1):
        for j in range(per):
            state = stepper.step(state, ((k - 1) * per + j) * dt)
            Dvals.append(linear_dissipation(state, params.eps))
        ts.append(k * sample_dt)
        Es.append(_basic_energy(state))
        Is.append(float(simpson(np.asarray(Dvals), dx=dt)))
        Ms.append(gridmod.integrate(state.rho, grid) - mass0)
    t = np.array(ts)
    E = np.array(Es)
    I = np.array(Is)
    R = E - E0 + I
    rel = float(np.max(np.abs(R[1:]) / (E0 * t[1:]))) if n and E0 > 0 else 0.0
    mass = float(np.max(np.abs(Ms[1:]) / (rho0 * t[1:]))) if n and rho0 > 0 else 0.0
    return BalanceReport(t, E, I, R, rel, mass)
