"""Energy and dissipation functionals, time series and decay utilities.

Every functional is assembled from the Parseval tables of
:mod:`aniso_cns.conormal`.  Time derivatives are never differenced in time;
they come from evaluating the tendency of the system at the sampled state.
"""
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .conormal import (
    DecayParams,
    conormal_table,
    horizontal_mean_norm,
    lambda_h_neg_norm2,
    linf,
    table_sum,
    tangential_table,
)
from .dynamics import tendency_eqr
from .grid import VELOCITY_PARITY, d2z, dh, dz

FIELD_PARITY = ("one_sided",) + VELOCITY_PARITY

E_ITEMS = (
    "E_co", "E_d3", "E_wh_inf3", "E_d3rho_inf3", "E_neg", "E_neg_d3",
    "E_dt_tan", "E_dt_z3", "E_eps_d33rho",
)
D_ITEMS = (
    "D_grad_h_u", "D_div", "D_eps_d3u", "D_d3_grad_h_u", "D_d3_div", "D_eps_d33u",
    "D_dt_tan", "D_dt_z3", "D_eps_dt", "D_grad_rho", "D_eps_d33rho",
)


@dataclass
class EnergyReport:
    t: float
    m: int
    zeta: float
    eps: float
    E_items: dict
    D_items: dict
    E_tan: float
    D_tan: float
    E_bar_tan: float
    D_bar_tan: float
    # squared L2 size of the horizontal means dropped by the negative norms
    neg_mean_dropped: float = 0.0
    wh_inf: float = 0.0
    d3rho_inf: float = 0.0

    @property
    def E_total(self):
        return float(sum(self.E_items.values()))

    @property
    def D_total(self):
        return float(sum(self.D_items.values()))

    @property
    def below_theory_order(self):
        return self.m < 5

    def as_row(self):
        row = {
            "t": self.t, "E": self.E_total, "D": self.D_total, "E_tan": self.E_tan,
            "D_tan": self.D_tan, "E_bar_tan": self.E_bar_tan, "D_bar_tan": self.D_bar_tan,
            "wh_inf": self.wh_inf, "d3rho_inf": self.d3rho_inf,
            "neg_mean_dropped": self.neg_mean_dropped,
        }
        row.update(self.E_items)
        row.update(self.D_items)
        return row


def grad_h_sum(T, m, kind="co", k=1):
    """``||grad_h^k f||^2`` in the (m, kind) norm from a table of ``f``.

    ``grad_h^k`` collects all ordered k-fold horizontal derivatives, hence
    the binomial multiplicities.
    """
    return sum(comb(k, a) * table_sum(T, m, kind, shift=(a, k - a)) for a in range(k + 1))


def _curl_h_of(K, grid):
    """Horizontal curl of a velocity-shaped triple ``(K1, K2, K3)``."""
    return (dh(K[2], grid, 2) - dz(K[1], grid, "even"),
            dz(K[0], grid, "even") - dh(K[2], grid, 1))


def energy_report(state, params, decay=None, m=5, t=0.0):
    """Itemised energy/dissipation functionals of ``state`` at time ``t``."""
    if m < 3:
        raise ValueError("m must be >= 3")
    decay = decay or DecayParams()
    g = state.grid
    eps = float(params.eps)
    fields = state.fields
    rho, u1, u2, u3 = fields
    u = (u1, u2, u3)

    # conormal tables of (rho, u) up to m+1, of d3(rho, u) up to m
    T = [conormal_table(f, g, m + 1, p) for f, p in zip(fields, FIELD_PARITY)]
    T3 = [conormal_table(f, g, m, p, with_d3=True) for f, p in zip(fields, FIELD_PARITY)]
    div = dh(u1, g, 1) + dh(u2, g, 2) + dz(u3, g, "odd")
    Tdiv = conormal_table(div, g, m, "even")
    Tdiv3 = conormal_table(div, g, m - 1, "even", with_d3=True)
    d33u = [d2z(c, g, p) for c, p in zip(u, VELOCITY_PARITY)]
    T33 = [conormal_table(f, g, m - 1, p) for f, p in zip(d33u, VELOCITY_PARITY)]
    d33rho = d2z(rho, g, "one_sided")
    T33rho = conormal_table(d33rho, g, 2, "one_sided")
    Tu, T3u = T[1:], T3[1:]

    E = {}
    E["E_co"] = sum(table_sum(Ti, m) for Ti in T)
    E["E_d3"] = sum(table_sum(Ti, m - 1) for Ti in T3)
    w1, w2 = _curl_h_of(u, g)
    wh_inf = linf(np.sqrt(w1 * w1 + w2 * w2))
    r3 = dz(rho, g, "one_sided")
    d3rho_inf = linf(r3)
    E["E_wh_inf3"] = wh_inf ** 3
    E["E_d3rho_inf3"] = d3rho_inf ** 3
    s_neg = decay.s
    d3f = [dz(f, g, p) for f, p in zip(fields, FIELD_PARITY)]
    E["E_neg"] = sum(lambda_h_neg_norm2(f, g, s_neg) for f in fields)
    E["E_neg_d3"] = sum(lambda_h_neg_norm2(f, g, s_neg) for f in d3f)
    mean_dropped = sum(horizontal_mean_norm(f, g) ** 2 for f in fields + tuple(d3f))

    # time-derivative blocks
    K = tendency_eqr(state, params, t)
    Ku = K.d_u
    Kw = _curl_h_of(Ku, g)
    K33 = dz(Ku[2], g, "odd")                  # d_t d3 u3, even
    Ku_tab = [tangential_table(f, g, 3) for f in Ku]
    Kw_tab = [tangential_table(f, g, 3) for f in Kw]
    K33_tab = tangential_table(K33, g, 3)
    E["E_dt_tan"] = (sum(table_sum(x, 2, "tan") for x in Ku_tab)
                     + sum(table_sum(x, 2, "tan") for x in Kw_tab)
                     + table_sum(K33_tab, 2, "tan"))
    Z3Kw = [g.phi * dz(f, g, "odd") for f in Kw]
    Z3K33 = g.phi * dz(K33, g, "even")
    Z3Kw_tab = [tangential_table(f, g, 1) for f in Z3Kw]
    Z3K33_tab = tangential_table(Z3K33, g, 1)
    E["E_dt_z3"] = sum(x[0, 0] for x in Z3Kw_tab) + Z3K33_tab[0, 0]
    E["E_eps_d33rho"] = eps * table_sum(T33rho, 2)

    D = {}
    D["D_grad_h_u"] = sum(grad_h_sum(Ti, m) for Ti in Tu)
    D["D_div"] = table_sum(Tdiv, m)
    D["D_eps_d3u"] = eps * sum(table_sum(Ti, m) for Ti in T3u)
    D["D_d3_grad_h_u"] = sum(grad_h_sum(Ti, m - 1) for Ti in T3u)
    D["D_d3_div"] = table_sum(Tdiv3, m - 1)
    D["D_eps_d33u"] = eps * sum(table_sum(Ti, m - 1) for Ti in T33)

    Kdiv = dh(Ku[0], g, 1) + dh(Ku[1], g, 2) + dz(Ku[2], g, "odd")
    K333 = d2z(Ku[2], g, "odd")                # d_t d3^2 u3, odd
    dt_tan = (sum(grad_h_sum(x, 2, "tan") for x in Ku_tab)
              + table_sum(tangential_table(Kdiv, g, 2), 2, "tan")
              + sum(grad_h_sum(x, 2, "tan") for x in Kw_tab)
              + grad_h_sum(K33_tab, 2, "tan")
              + table_sum(tangential_table(K333, g, 2), 2, "tan"))
    D["D_dt_tan"] = dt_tan
    Z3K333 = g.phi * dz(K333, g, "odd")
    D["D_dt_z3"] = (sum(grad_h_sum(x, 0, "tan") for x in Z3Kw_tab)
                    + grad_h_sum(Z3K33_tab, 0, "tan")
                    + float(np.sum(tangential_table(Z3K333, g, 0)[0, 0])))
    if eps:
        d3Ku = [dz(f, g, p) for f, p in zip(Ku, VELOCITY_PARITY)]
        d3Kw = [dz(f, g, "odd") for f in Kw]
        d3Z3Kw = [dz(f, g, "one_sided") for f in Z3Kw]
        D["D_eps_dt"] = eps * (sum(table_sum(tangential_table(f, g, 2), 2, "tan") for f in d3Ku)
                               + sum(table_sum(tangential_table(f, g, 2), 2, "tan") for f in d3Kw)
                               + sum(tangential_table(f, g, 0)[0, 0] for f in d3Z3Kw))
    else:
        D["D_eps_dt"] = 0.0
    D["D_grad_rho"] = grad_h_sum(T[0], m - 1) + table_sum(T3[0], m - 1)
    D["D_eps_d33rho"] = E["E_eps_d33rho"]

    # tangential functionals
    E_tan = (sum(table_sum(Ti, m, "tan") for Ti in T)
             + sum(table_sum(Ti, m - 1, "tan") for Ti in T3))
    E_bar = (sum(grad_h_sum(Ti, m - 2, "tan") for Ti in T)
             + sum(grad_h_sum(Ti, m - 3, "tan") for Ti in T3))
    D_tan = (sum(grad_h_sum(Ti, m, "tan") for Ti in Tu) + table_sum(Tdiv, m, "tan")
             + eps * sum(table_sum(Ti, m, "tan") for Ti in T3u)
             + sum(grad_h_sum(Ti, m - 1, "tan") for Ti in T3u) + table_sum(Tdiv3, m - 1, "tan")
             + eps * sum(table_sum(Ti, m - 1, "tan") for Ti in T33)
             + grad_h_sum(T[0], m - 1, "tan") + table_sum(T3[0], m - 1, "tan"))
    D_bar = (sum(grad_h_sum(Ti, m - 2, "tan", k=2) for Ti in Tu) + grad_h_sum(Tdiv, m - 2, "tan")
             + eps * sum(grad_h_sum(Ti, m - 2, "tan") for Ti in T3u)
             + sum(grad_h_sum(Ti, m - 3, "tan", k=2) for Ti in T3u)
             + grad_h_sum(Tdiv3, m - 3, "tan")
             + eps * sum(grad_h_sum(Ti, m - 3, "tan") for Ti in T33)
             + grad_h_sum(T[0], m - 3, "tan", k=2) + grad_h_sum(T3[0], m - 3, "tan"))

    return EnergyReport(
        t=float(t), m=int(m), zeta=decay.zeta, eps=eps,
        E_items={k: float(E[k]) for k in E_ITEMS},
        D_items={k: float(D[k]) for k in D_ITEMS},
        E_tan=float(E_tan), D_tan=float(D_tan), E_bar_tan=float(E_bar), D_bar_tan=float(D_bar),
        neg_mean_dropped=float(mean_dropped), wh_inf=wh_inf, d3rho_inf=d3rho_inf,
    )


# time series -------------------------------------------------------------------

@dataclass
class TimeSeries:
    """Sampled reports plus auxiliary scalar traces."""
    reports: list = field(default_factory=list)
    aux: dict = field(default_factory=dict)
    zeta: float = 1.0 / 34.0
    m: int = 5
    eps: float = 0.0

    def append(self, report, **aux):
        if self.reports and not report.t > self.reports[-1].t:
            raise ValueError("sample times must be strictly increasing")
        self.reports.append(report)
        for k, v in aux.items():
            self.aux.setdefault(k, []).append(float(v))

    def __len__(self):
        return len(self.reports)

    @property
    def t(self):
        return np.array([r.t for r in self.reports])

    def column(self, name):
        if name in self.aux:
            return np.asarray(self.aux[name])
        return np.array([r.as_row()[name] for r in self.reports])

    def rows(self):
        out = []
        for n, r in enumerate(self.reports):
            row = r.as_row()
            for k, v in self.aux.items():
                row[k] = v[n] if n < len(v) else float("nan")
            out.append(row)
        return out


def _cumtrapz(y, t):
    out = np.zeros_like(y, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def weighted_integrals(series, decay=None, cumulative=False):
    """Trapezoid integrals of ``D``, ``(1+t)^sigma D_tan``, ``(1+t)^(1+sigma) Dbar_tan``."""
    decay = decay or DecayParams(series.zeta)
    t = series.t
    sig = decay.sigma
    w = 1.0 + t
    I_D = _cumtrapz(series.column("D"), t)
    I_tan = _cumtrapz(w ** sig * series.column("D_tan"), t)
    I_bar = _cumtrapz(w ** (1.0 + sig) * series.column("D_bar_tan"), t)
    if cumulative:
        return {"I_D": I_D, "I_Dtan_sigma": I_tan, "I_Dbar_1sigma": I_bar}
    last = (lambda a: float(a[-1]) if len(a) else 0.0)
    return {"I_D": last(I_D), "I_Dtan_sigma": last(I_tan), "I_Dbar_1sigma": last(I_bar)}


def weighted_integrals_arrays(t, D, D_tan, D_bar, sigma):
    """Same as :func:`weighted_integrals` on bare arrays (cumulative)."""
    t = np.asarray(t, float)
    w = 1.0 + t
    return (_cumtrapz(np.asarray(D, float), t),
            _cumtrapz(w ** sigma * np.asarray(D_tan, float), t),
            _cumtrapz(w ** (1.0 + sigma) * np.asarray(D_bar, float), t))


@dataclass
class BootstrapReport:
    delta: float
    t: np.ndarray
    lhs: np.ndarray
    closed: bool
    # the sharper conclusion lhs <= delta / 2
    closed_half: bool
    measured_C: float = float("nan")
    admissible: bool = False

    def to_dict(self):
        return {
            "delta": self.delta, "closed": self.closed, "closed_half": self.closed_half,
            "measured_C": self.measured_C, "admissible": self.admissible,
            "max_lhs": float(np.max(self.lhs)) if len(self.lhs) else 0.0,
            "max_lhs_over_delta": float(np.max(self.lhs) / self.delta) if len(self.lhs) and self.delta > 0 else 0.0,
        }


def bootstrap_lhs(series, decay=None):
    """Running six-term quantity of the bootstrap assumption at each sample."""
    decay = decay or DecayParams(series.zeta)
    t = series.t
    w = 1.0 + t
    E = series.column("E")
    sup_E = np.maximum.accumulate(E) if len(E) else E
    sup_tan = np.maximum.accumulate(w ** decay.s * series.column("E_tan")) if len(E) else E
    sup_bar = np.maximum.accumulate(w ** (1.0 + decay.sigma) * series.column("E_bar_tan")) if len(E) else E
    I = weighted_integrals(series, decay, cumulative=True)
    return sup_E + sup_tan + sup_bar + I["I_D"] + I["I_Dtan_sigma"] + I["I_Dbar_1sigma"]


def measured_constant(series):
    """``sup_t [E(t) + int_0^t D] / E(0)``."""
    E = series.column("E")
    if not len(E) or E[0] <= 0:
        return float("nan")
    I_D = weighted_integrals(series, cumulative=True)["I_D"]
    return float(np.max(E + I_D) / E[0])


def bootstrap_monitor(series, delta=None, decay=None):
    """Check the bootstrap assumption against ``delta``.

    Without ``delta`` the budget ``12 C E(0)`` is used with ``C`` from
    :func:`measured_constant`.
    """
    decay = decay or DecayParams(series.zeta)
    lhs = bootstrap_lhs(series, decay)
    C = measured_constant(series)
    if delta is None:
        E0 = float(series.column("E")[0]) if len(series) else 0.0
        delta = 12.0 * C * E0 if np.isfinite(C) else 0.0
    delta = float(delta)
    closed = bool(np.all(lhs <= delta)) if len(lhs) else True
    closed_half = bool(np.all(lhs <= 0.5 * delta)) if len(lhs) else True
    admissible = bool(np.isfinite(C) and delta <= min(1.0, (12.0 * C) ** -3))
    return BootstrapReport(delta, series.t, lhs, closed, closed_half, C, admissible)


# ODE comparison ------------------------------------------------------------------

def ode_decay_solution(y0, kappa, C0, s, t):
    """Solution of ``y' = -kappa C0^(-1/s) y^(1+1/s)``, ``y(0) = y0``."""
    for name, v in (("y0", y0), ("kappa", kappa), ("C0", C0)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if not (0.0 < s <= 1.0):
        raise ValueError(f"s must lie in (0, 1], got {s}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    y = (y0 ** (-1.0 / s) + (kappa / s) * C0 ** (-1.0 / s) * t) ** (-s)
    return float(y) if y.ndim == 0 else y


def ode_decay_rhs(y, kappa, C0, s):
    return -kappa * C0 ** (-1.0 / s) * y ** (1.0 + 1.0 / s)
