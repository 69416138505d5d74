"""Right-hand sides, RK4 stepping and residuals of derived identities.

The perturbation system for (rho, u) with total density 1 + rho reads::

    d_t rho = -div u - div(rho u)
    d_t u   = V - grad rho - u.grad u - rho/(1+rho) V - ((1+rho)^(gamma-2) - 1) grad rho
    V       = lap_h u + eps d_3^2 u + grad div u

which is the momentum balance divided by the density for the pressure law
P = rho_total^gamma / gamma.  Setting ``eps = 0`` gives the horizontally
dissipative limit system.
"""
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import InstabilityError, VacuumError
from .grid import VELOCITY_PARITY, State, d2z, dh, dhh, dz, l2_norm

VACUUM_FLOOR = 0.1


@dataclass(frozen=True)
class SolverParams:
    eps: float = 0.1
    gamma: float = 3.0
    dt: Optional[float] = None
    t_end: float = 1.0
    linearized: bool = False
    # forcing(t, grid) -> 4-tuple of arrays (rho, u1, u2, u3) or None
    forcing: Optional[Callable] = None
    c_cfl: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.eps < 1.0):
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.c_cfl > 0:
            raise ValueError("c_cfl must be positive")


class StateTendency:
    """Time derivatives ``(d_rho, d_u1, d_u2, d_u3)`` stored in one array."""
    __slots__ = ("data",)

    def __init__(self, data):
        self.data = data

    d_rho = property(lambda self: self.data[0])
    d_u1 = property(lambda self: self.data[1])
    d_u2 = property(lambda self: self.data[2])
    d_u3 = property(lambda self: self.data[3])

    @property
    def d_u(self):
        return (self.data[1], self.data[2], self.data[3])

    def __iter__(self):
        return iter((self.data[0], self.data[1], self.data[2], self.data[3]))

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)


def stable_dt(grid, eps, c_cfl=0.5):
    """Explicit step bound ``c_cfl * min(h_x^2, h_y^2, dz^2) / (2 + eps)``.

    ``h_x = lx / (pi nx)`` is the inverse of the largest resolved wavenumber.
    """
    hx = grid.lx / (np.pi * grid.nx)
    hy = grid.ly / (np.pi * grid.ny)
    return c_cfl * min(hx * hx, hy * hy, grid.dz ** 2) / (2.0 + eps)


class Workspace:
    """Scratch buffers for repeated tendency evaluations on one grid."""

    def __init__(self, grid):
        self.grid = grid
        sh = grid.shape
        self.BX = np.empty((4,) + sh)
        self.BY = np.empty((4,) + sh)
        self.LX = np.empty((3,) + sh)
        self.LY = np.empty((3,) + sh)
        self.W = np.empty((3,) + sh)
        self.WX = np.empty((2,) + sh)
        self.WY = np.empty((2,) + sh)


def _along_x(D, A, out):
    n, nx = A.shape[0], A.shape[1]
    np.matmul(D, A.reshape(n, nx, -1), out=out.reshape(n, nx, -1))


def _along_y(D, A, out):
    n, nx, ny, nz = A.shape
    np.matmul(D, A.reshape(n * nx, ny, nz), out=out.reshape(n * nx, ny, nz))


def _tendency_into(state, params, t, work, out, forcing=True):
    g = state.grid
    Q = state.data
    # NaN compares false here on purpose: non-finite states are left to the
    # instability guard so they are reported as such
    if not params.linearized and 1.0 + Q[0].min() <= 0.0:
        raise VacuumError("vacuum reached: 1 + rho <= 0")
    M = g._mats
    _along_x(M[(1, 1)], Q, work.BX)
    _along_y(M[(2, 1)], Q, work.BY)
    _along_x(M[(1, 2)], Q[1:], work.LX)
    _along_y(M[(2, 2)], Q[1:], work.LY)
    kernels.rhs_stage_a(Q, work.BX, work.BY, work.W, g.dz)
    _along_x(M[(1, 1)], work.W[0:2], work.WX)
    _along_y(M[(2, 1)], work.W[1:3], work.WY)
    kernels.rhs_stage_b(Q, work.BX, work.BY, work.LX, work.LY, work.W, work.WX, work.WY,
                        out, g.dz, params.eps, params.gamma, params.linearized)
    if forcing and params.forcing is not None:
        f = params.forcing(t, g)
        if f is not None:
            for i in range(4):
                out[i] += f[i]
    return out


def tendency_eqr(state, params, t=0.0, forcing=True, work=None):
    """Time derivative of ``state`` under the full system.

    ``forcing=False`` ignores ``params.forcing`` (the identity residuals are
    statements about the unforced equations).  Passing a :class:`Workspace`
    avoids reallocating scratch buffers.
    """
    if work is None:
        work = Workspace(state.grid)
    out = np.empty_like(state.data)
    return StateTendency(_tendency_into(state, params, t, work, out, forcing))


def tendency_eqr0(state, params, t=0.0, forcing=True, work=None):
    """Tendency of the limit system (no vertical viscosity)."""
    return tendency_eqr(state, replace(params, eps=0.0), t, forcing, work)


def _pin_walls(data):
    data[3, :, :, 0] = 0.0
    data[3, :, :, -1] = 0.0


class RK4Stepper:
    """Classical RK4 with preallocated stage buffers.

    The slip condition is enforced after every stage and on the result;
    non-finite values or a tenfold one-step norm jump raise
    :class:`InstabilityError`.
    """

    def __init__(self, grid, params, dt=None, limit_system=False):
        self.grid = grid
        self.params = replace(params, eps=0.0) if limit_system else params
        self.dt = float(dt if dt is not None else (params.dt or stable_dt(grid, self.params.eps, params.c_cfl)))
        self.work = Workspace(grid)
        sh = (4,) + grid.shape
        self._k = [np.empty(sh) for _ in range(4)]
        self._stage = np.empty(sh)

    def _rhs(self, data, t, k):
        return _tendency_into(State(self.grid, data), self.params, t, self.work, k)

    def step(self, state, t=0.0):
        dt = self.dt
        q = state.data
        k1, k2, k3, k4 = self._k
        st = self._stage
        self._rhs(q, t, k1)
        np.multiply(k1, 0.5 * dt, out=st)
        st += q
        _pin_walls(st)
        self._rhs(st, t + 0.5 * dt, k2)
        np.multiply(k2, 0.5 * dt, out=st)
        st += q
        _pin_walls(st)
        self._rhs(st, t + 0.5 * dt, k3)
        np.multiply(k3, dt, out=st)
        st += q
        _pin_walls(st)
        self._rhs(st, t + dt, k4)
        k2 += k3
        k2 *= 2.0
        k2 += k1
        k2 += k4
        new = q + (dt / 6.0) * k2
        _pin_walls(new)
        new_state = State(self.grid, new)
        _guard(state, new_state, t + dt)
        return new_state

    def advance(self, state, t0, n_steps, vacuum_floor=VACUUM_FLOOR):
        t = t0
        for n in range(n_steps):
            state = self.step(state, t)
            t = t0 + (n + 1) * self.dt
            if not self.params.linearized:
                state.check_vacuum(vacuum_floor)
        return state


def rk4_step(state, params, t=0.0, dt=None):
    """One RK4 step of the full system (convenience wrapper)."""
    return RK4Stepper(state.grid, params, dt).step(state, t)


def _field_norms(state):
    g = state.grid
    sq = np.einsum("fijk,fijk,k->f", state.data, state.data, g.z_weights) * g.cell_volume
    return np.sqrt(np.maximum(sq, 0.0))


def _guard(old, new, t):
    n_new = _field_norms(new)
    if not np.isfinite(n_new).all():
        raise InstabilityError(f"instability: non-finite values at t={t:.6g}", t=t)
    n_old = _field_norms(old)
    total = float(np.sqrt(sum(x * x for x in n_old)))
    # a component starting near zero may legitimately jump relative to itself
    # (e.g. u fed by a pure density mode); measure it against the whole state
    floor = max(0.1 * total, 1e-300)
    for name, a, b in zip(("rho", "u1", "u2", "u3"), n_old, n_new):
        if b > 10.0 * max(a, floor):
            raise InstabilityError(
                f"instability: |{name}| grew {b / max(a, floor):.3g}x in one step at t={t:.6g}", t=t)


# identity residuals -----------------------------------------------------------

def _velocity_gradients(u, grid):
    nx, ny, nz = grid.shape
    G = np.empty((3, 3, nx, ny, nz))
    for i in range(3):
        G[i, 0] = dh(u[i], grid, 1)
        G[i, 1] = dh(u[i], grid, 2)
        G[i, 2] = dz(u[i], grid, VELOCITY_PARITY[i])
    return G


def _pressure_factor(rho, gamma, power):
    return (1.0 + rho) ** (gamma - power)


def p3divu_terms(state, params, t=0.0):
    """Both sides of the vertical momentum identity for ``d3 div u``.

    ``lhs = (1+eps) d3 div u`` and ``rhs = B + (1+rho)^(gamma-1) d3 rho``
    where ``B`` is :func:`_vertical_bracket`; ``d_t u3`` comes from the
    unforced tendency.
    """
    g = state.grid
    rho, u1, u2, u3 = state.fields
    tend = tendency_eqr(state, params, t, forcing=False)
    div = dh(u1, g, 1) + dh(u2, g, 2) + dz(u3, g, "odd")
    lhs = (1.0 + params.eps) * dz(div, g, "even")
    r3 = dz(rho, g, "one_sided")
    B = _vertical_bracket(state, params, tend)
    if params.linearized:
        return lhs, B + r3
    return lhs, B + _pressure_factor(rho, params.gamma, 1.0) * r3


def identity_residual_p3divu(state, params, t=0.0):
    lhs, rhs = p3divu_terms(state, params, t)
    return l2_norm(lhs - rhs, state.grid)


def _vertical_bracket(state, params, tend):
    """``(1+rho)(d_t u3 + u.grad u3) - lap_h u3 + eps d3 div_h u_h``."""
    g = state.grid
    rho, u1, u2, u3 = state.fields
    lap_u3 = dhh(u3, g, 1) + dhh(u3, g, 2)
    divh3 = dz(dh(u1, g, 1) + dh(u2, g, 2), g, "even")
    if params.linearized:
        return tend.d_u3 - lap_u3 + params.eps * divh3
    adv = u1 * dh(u3, g, 1) + u2 * dh(u3, g, 2) + u3 * dz(u3, g, "odd")
    return (1.0 + rho) * (tend.d_u3 + adv) - lap_u3 + params.eps * divh3


def p3rho_terms(state, params, t=0.0):
    """Both sides of the damped transport equation for ``d3 rho``.

    Differentiating the density equation in x3 and eliminating ``d3 div u``
    with the vertical momentum balance gives::

        d_t d3rho + u.grad d3rho + (1+rho)^gamma d3rho / (1+eps)
            = -d3u.grad rho - d3rho div u - (1+rho) B / (1+eps)

    with ``B`` from :func:`_vertical_bracket`.  ``d_t d3rho`` is the vertical
    derivative of the density tendency.
    """
    g = state.grid
    rho, u1, u2, u3 = state.fields
    eps = float(params.eps)
    tend = tendency_eqr(state, params, t, forcing=False)
    r3 = dz(rho, g, "one_sided")
    B = _vertical_bracket(state, params, tend)
    dt_r3 = dz(tend.d_rho, g, "one_sided")
    if params.linearized:
        return dt_r3 + r3 / (1.0 + eps), -B / (1.0 + eps)
    s = 1.0 + rho
    transport = u1 * dh(r3, g, 1) + u2 * dh(r3, g, 2) + u3 * dz(r3, g, "one_sided")
    lhs = dt_r3 + transport + s ** params.gamma * r3 / (1.0 + eps)
    u3_3 = dz(u3, g, "odd")
    div = dh(u1, g, 1) + dh(u2, g, 2) + u3_3
    stretch = dz(u1, g, "even") * dh(rho, g, 1) + dz(u2, g, "even") * dh(rho, g, 2) + u3_3 * r3
    rhs = -stretch - r3 * div - s * B / (1.0 + eps)
    return lhs, rhs


def identity_residual_p3rho(state, params, t=0.0):
    """L2 residual of the damped transport equation for ``d3 rho``."""
    lhs, rhs = p3rho_terms(state, params, t)
    return l2_norm(lhs - rhs, state.grid)


def vorticity_terms(state, params, t=0.0):
    """Both sides of the horizontal vorticity equation.

    ``lhs`` is the horizontal curl of the momentum tendency; ``rhs`` is::

        -u.grad w_h - w_h div u + (omega.grad u)_h
        + (lap_h w_h + eps d3^2 w_h) / (1+rho) - [grad(rho/(1+rho)) x V]_h

    with ``omega`` the full vorticity.  The pressure gradient is a gradient
    of a function of rho and drops out.
    """
    g = state.grid
    rho, u1, u2, u3 = state.fields
    u = (u1, u2, u3)
    eps = float(params.eps)
    tend = tendency_eqr(state, params, t, forcing=False)
    lhs = (dh(tend.d_u3, g, 2) - dz(tend.d_u2, g, "even"),
           dz(tend.d_u1, g, "even") - dh(tend.d_u3, g, 1))

    w1 = dh(u3, g, 2) - dz(u2, g, "even")
    w2 = dz(u1, g, "even") - dh(u3, g, 1)
    w = (w1, w2)
    visc = tuple(dhh(c, g, 1) + dhh(c, g, 2) + (eps * d2z(c, g, "odd") if eps else 0.0) for c in w)
    if params.linearized:
        return lhs, visc

    G = _velocity_gradients(u, g)
    div = G[0, 0] + G[1, 1] + G[2, 2]
    w3 = G[1, 0] - G[0, 1]
    omega = (w1, w2, w3)
    s = 1.0 + rho
    rhs = []
    for i, wi in enumerate(w):
        adv = u1 * dh(wi, g, 1) + u2 * dh(wi, g, 2) + u3 * dz(wi, g, "odd")
        stretch = omega[0] * G[i, 0] + omega[1] * G[i, 1] + omega[2] * G[i, 2]
        rhs.append(-adv - wi * div + stretch + visc[i] / s)

    # V and the gradient of rho/(1+rho)
    V = []
    gd = (dh(div, g, 1), dh(div, g, 2), dz(div, g, "even"))
    for i in range(3):
        v = dhh(u[i], g, 1) + dhh(u[i], g, 2) + gd[i]
        if eps:
            v = v + eps * d2z(u[i], g, VELOCITY_PARITY[i])
        V.append(v)
    q = rho / s
    gq = (dh(q, g, 1), dh(q, g, 2), dz(q, g, "one_sided"))
    cross1 = gq[1] * V[2] - gq[2] * V[1]
    cross2 = gq[2] * V[0] - gq[0] * V[2]
    rhs[0] = rhs[0] - cross1
    rhs[1] = rhs[1] - cross2
    return lhs, tuple(rhs)


def vorticity_tendency_residual(state, params, t=0.0):
    lhs, rhs = vorticity_terms(state, params, t)
    g = state.grid
    return float(np.sqrt(sum(l2_norm(a - b, g) ** 2 for a, b in zip(lhs, rhs))))
