"""Manufactured solutions: symbolic right-hand side and forcing.

The continuous right-hand side is built with sympy from the same equations
the discrete solver implements, but without touching any discrete operator,
so it doubles as an independent oracle for the tendency.
"""
from functools import cached_property

import numpy as np
import sympy as sp

from .grid import State

x1, x2, x3, t = sp.symbols("x1 x2 x3 t", real=True)
COORDS = (x1, x2, x3)


def symbolic_tendency(rho, u, eps, gamma=3, linearized=False):
    """Continuous right-hand side ``(d_t rho, d_t u1, d_t u2, d_t u3)``."""
    eps = sp.nsimplify(eps)
    gamma = sp.nsimplify(gamma)
    div = sum(sp.diff(u[i], COORDS[i]) for i in range(3))
    grad = lambda f: [sp.diff(f, c) for c in COORDS]  # noqa: E731
    gd = grad(div)
    grho = grad(rho)
    V = [sp.diff(u[i], x1, 2) + sp.diff(u[i], x2, 2) + eps * sp.diff(u[i], x3, 2) + gd[i]
         for i in range(3)]
    if linearized:
        d_rho = -div
        d_u = [V[i] - grho[i] for i in range(3)]
    else:
        d_rho = -div - sum(sp.diff(rho * u[i], COORDS[i]) for i in range(3))
        press = (1 + rho) ** (gamma - 2)
        d_u = []
        for i in range(3):
            adv = sum(u[j] * sp.diff(u[i], COORDS[j]) for j in range(3))
            d_u.append(V[i] - press * grho[i] - adv - rho / (1 + rho) * V[i])
    return [d_rho] + d_u


def _lambdify(exprs):
    f = sp.lambdify((x1, x2, x3, t), exprs, modules="numpy", cse=True)

    def evaluate(grid, tt):
        X1, X2, X3 = grid.mesh()
        vals = f(X1, X2, X3, float(tt))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), grid.shape) for v in vals])
    return evaluate


class ExactFamily:
    """Analytic state family ``(rho, u1, u2, u3)(x, t)`` given as sympy expressions."""

    def __init__(self, rho, u1, u2, u3, name="custom"):
        self.exprs = [sp.sympify(e) for e in (rho, u1, u2, u3)]
        self.name = name

    @cached_property
    def _state_fn(self):
        return _lambdify(self.exprs)

    @cached_property
    def _dt_fn(self):
        return _lambdify([sp.diff(e, t) for e in self.exprs])

    def state(self, grid, tt=0.0):
        return State(grid, self._state_fn(grid, tt))

    def time_derivative(self, grid, tt=0.0):
        return self._dt_fn(grid, tt)

    def check_bc(self, height, n_probe=7, tol=1e-12):
        """Raise if ``u3`` or ``d3 u_h`` fails to vanish on either wall."""
        rng = np.random.default_rng(0)
        probes = rng.uniform(0, 2 * np.pi, size=(n_probe, 3))
        _, u1, u2, u3 = self.exprs
        checks = {"u3": u3, "d3 u1": sp.diff(u1, x3), "d3 u2": sp.diff(u2, x3)}
        for wall in (0.0, float(height)):
            for name, e in checks.items():
                f = sp.lambdify((x1, x2, x3, t), e, modules="numpy")
                for a, b, tt in probes:
                    v = float(f(a, b, wall, tt))
                    if abs(v) > tol:
                        raise ValueError(f"exact family violates the slip condition: {name} = {v:.3g} at x3 = {wall}")


def default_family(amplitude=0.1, lx=2 * np.pi, ly=2 * np.pi, height=2 * np.pi):
    """Decaying mirror-compatible family used for solver verification."""
    A = sp.nsimplify(amplitude)
    k1 = 2 * sp.pi / sp.nsimplify(lx)
    k2 = 2 * sp.pi / sp.nsimplify(ly)
    kz = 2 * sp.pi / sp.nsimplify(height)
    rho = A * sp.exp(-t / 2) * (sp.cos(k1 * x1) + sp.Rational(1, 2) * sp.sin(k2 * x2)) * sp.cos(kz * x3)
    u1 = A * sp.exp(-t) * sp.sin(k2 * x2) * sp.cos(kz * x3)
    u2 = A * sp.cos(k1 * x1 + t) * sp.cos(kz * x3)
    u3 = A * sp.exp(-t) * sp.sin(k1 * x1) * sp.cos(k2 * x2) * sp.sin(kz * x3)
    return ExactFamily(rho, u1, u2, u3, name="decaying-trig")


def zero_family():
    return ExactFamily(0, 0, 0, 0, name="zero")


class MMSForcing:
    """Callable ``forcing(t, grid)``: exact time derivative minus the continuous right-hand side."""

    def __init__(self, exact, eps, gamma=3.0, linearized=False, height=None):
        if height is not None:
            exact.check_bc(height)
        rhs = symbolic_tendency(exact.exprs[0], exact.exprs[1:], eps, gamma, linearized)
        self.exprs = [sp.diff(e, t) - r for e, r in zip(exact.exprs, rhs)]
        self._fn = _lambdify(self.exprs)

    def __call__(self, tt, grid):
        return self._fn(grid, tt)


def mms_forcing(exact, params, height=None):
    """Forcing that turns ``exact`` into a solution of the forced system."""
    return MMSForcing(exact, params.eps, params.gamma, params.linearized, height)


def symbolic_tendency_on_grid(exact, grid, params, tt=0.0):
    """Evaluate the continuous right-hand side of ``exact`` on the grid nodes."""
    rhs = symbolic_tendency(exact.exprs[0], exact.exprs[1:], params.eps, params.gamma, params.linearized)
    return _lambdify(rhs)(grid, tt)
