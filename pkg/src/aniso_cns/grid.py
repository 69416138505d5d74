"""Slab grid, state container and the discrete differential operators.

The domain is a periodic box in (x1, x2) times the interval [0, H] in x3,
closed by slip walls.  Fields are plain float64 arrays of shape
``(nx, ny, nz)`` with x3 as the contiguous axis; horizontal derivatives are
spectral, vertical ones fourth-order finite differences (see ``kernels``).

Vertical parity conventions used throughout:

* horizontal velocity, divergence, ``d3 u3``: ``"even"``
* vertical velocity, horizontal vorticity, ``d3 u_h``: ``"odd"``
* density and anything without a known wall symmetry: ``"one_sided"``
"""
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import VacuumError

PARITIES = ("even", "odd", "one_sided")
VELOCITY_PARITY = ("even", "even", "odd")


def flip_parity(parity):
    """Parity of the vertical derivative of a field with the given parity."""
    return {"even": "odd", "odd": "even", "one_sided": "one_sided"}[parity]


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


def _spectral_matrices(n, length):
    """Dense first/second derivative matrices for an n-periodic grid.

    The first-derivative matrix zeroes the Nyquist mode and is therefore
    exactly skew-symmetric; the second derivative keeps it.
    """
    k = 2.0 * np.pi / length * np.fft.fftfreq(n, d=1.0 / n)
    k1 = k.copy()
    k1[n // 2] = 0.0
    eye = np.eye(n)
    F = np.fft.fft(eye, axis=0)
    D1 = np.real(np.fft.ifft(1j * k1[:, None] * F, axis=0))
    D2 = np.real(np.fft.ifft(-(k ** 2)[:, None] * F, axis=0))
    # clean round-off so that D1 is skew and D2 symmetric to machine precision
    D1 = 0.5 * (D1 - D1.T)
    D2 = 0.5 * (D2 + D2.T)
    return np.ascontiguousarray(D1), np.ascontiguousarray(D2)


@dataclass(frozen=True, eq=False)
class Grid:
    nx: int
    ny: int
    nz: int
    lx: float
    ly: float
    height: float

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if not _is_pow2(int(n)) or n < 8:
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")
        if self.nz < 8:
            raise ValueError(f"nz must be >= 8, got {self.nz}")
        for name in ("lx", "ly", "height"):
            if not (np.isfinite(getattr(self, name)) and getattr(self, name) > 0):
                raise ValueError(f"{name} must be positive and finite")

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    @property
    def dz(self):
        return self.height / (self.nz - 1)

    @cached_property
    def x1(self):
        return np.arange(self.nx) * self.dx

    @cached_property
    def x2(self):
        return np.arange(self.ny) * self.dy

    @cached_property
    def x3(self):
        return np.linspace(0.0, self.height, self.nz)

    @cached_property
    def phi(self):
        """Conormal weight x3 / (1 + x3) on the vertical nodes."""
        return self.x3 / (1.0 + self.x3)

    def mesh(self):
        """Broadcastable coordinate arrays ``(X1, X2, X3)``."""
        return (self.x1[:, None, None], self.x2[None, :, None], self.x3[None, None, :])

    @cached_property
    def kx(self):
        return 2.0 * np.pi / self.lx * np.fft.fftfreq(self.nx, d=1.0 / self.nx)

    @cached_property
    def ky_half(self):
        return 2.0 * np.pi / self.ly * np.arange(self.ny // 2 + 1)

    @cached_property
    def _mats(self):
        d1x, d2x = _spectral_matrices(self.nx, self.lx)
        d1y, d2y = _spectral_matrices(self.ny, self.ly)
        return {(1, 1): d1x, (1, 2): d2x, (2, 1): d1y, (2, 2): d2y}

    @cached_property
    def z_weights(self):
        """Trapezoid quadrature weights in x3 (sum equals the height)."""
        w = np.full(self.nz, self.dz)
        w[0] = w[-1] = 0.5 * self.dz
        return w

    @cached_property
    def cell_volume(self):
        return self.dx * self.dy

    def zeros(self):
        return np.zeros(self.shape)


def build_grid(nx=32, ny=32, nz=64, lx=2 * np.pi, ly=2 * np.pi, height=10.0):
    return Grid(int(nx), int(ny), int(nz), float(lx), float(ly), float(height))


# horizontal derivatives ------------------------------------------------------

def _hmat(f, grid, axis, order):
    if axis not in (1, 2):
        raise ValueError(f"horizontal axis must be 1 or 2, got {axis}")
    D = grid._mats[(axis, order)]
    if axis == 1:
        n = grid.nx
        return (D @ f.reshape(n, -1)).reshape(f.shape)
    return np.matmul(D, f)


def dh(f, grid, axis):
    """Spectral first derivative along x1 (``axis=1``) or x2 (``axis=2``)."""
    return _hmat(f, grid, axis, 1)


def dhh(f, grid, axis):
    """Spectral second derivative along x1 or x2."""
    return _hmat(f, grid, axis, 2)


def laplacian_h(f, grid):
    return dhh(f, grid, 1) + dhh(f, grid, 2)


def dz(f, grid, parity):
    """Fourth-order vertical derivative with the wall treatment ``parity``."""
    return kernels.vertical_d1(f, grid.dz, parity)


def d2z(f, grid, parity):
    """Fourth-order second vertical derivative."""
    return kernels.vertical_d2(f, grid.dz, parity)


# quadrature -----------------------------------------------------------------

def integrate(f, grid):
    """Trapezoid-in-x3, rectangle-in-(x1, x2) integral over the slab."""
    return float(np.einsum("ijk,k->", f, grid.z_weights) * grid.cell_volume)


def inner(f, g, grid):
    return float(np.einsum("ijk,ijk,k->", f, g, grid.z_weights) * grid.cell_volume)


def l2_norm(f, grid):
    return np.sqrt(max(inner(f, f, grid), 0.0))


def horizontal_mean(f):
    """x3-profile of the horizontal average."""
    return f.mean(axis=(0, 1))


# state ----------------------------------------------------------------------

class State:
    """Density perturbation and velocity on a grid.

    The four fields live in one contiguous array ``data`` of shape
    ``(4, nx, ny, nz)`` ordered ``(rho, u1, u2, u3)``; the named attributes
    are views into it.  States are treated as immutable values.
    """
    __slots__ = ("grid", "data")

    def __init__(self, grid, rho, u1=None, u2=None, u3=None):
        if u1 is None:
            data = np.asarray(rho, dtype=np.float64)
            if data.shape != (4,) + grid.shape:
                raise ValueError(f"state data has shape {data.shape}, expected {(4,) + grid.shape}")
        else:
            data = np.empty((4,) + grid.shape)
            for i, (name, f) in enumerate(zip(("rho", "u1", "u2", "u3"), (rho, u1, u2, u3))):
                f = np.asarray(f)
                if f.shape != grid.shape:
                    raise ValueError(f"{name} has shape {f.shape}, grid is {grid.shape}")
                data[i] = f
        self.grid = grid
        self.data = data

    @classmethod
    def from_data(cls, grid, data):
        return cls(grid, data)

    rho = property(lambda self: self.data[0])
    u1 = property(lambda self: self.data[1])
    u2 = property(lambda self: self.data[2])
    u3 = property(lambda self: self.data[3])

    @property
    def u(self):
        return (self.data[1], self.data[2], self.data[3])

    @property
    def fields(self):
        return (self.data[0], self.data[1], self.data[2], self.data[3])

    def axpy(self, a, other):
        """Return ``self + a * other``; ``other`` is a state-shaped array or tendency."""
        return State(self.grid, self.data + a * np.asarray(other))

    def scaled(self, lam):
        return State(self.grid, lam * self.data)

    def copy(self):
        return State(self.grid, self.data.copy())

    def is_finite(self):
        return bool(np.isfinite(self.data).all())

    def check_vacuum(self, floor=0.1):
        m = float(self.data[0].min())
        if not 1.0 + m > floor:
            raise VacuumError(f"vacuum reached: 1 + rho fell to {1.0 + m:.3g} (floor {floor})")

    def norms(self):
        return tuple(l2_norm(f, self.grid) for f in self.fields)

    def __repr__(self):
        return f"State(grid={self.grid.shape}, max|q|={np.abs(self.data).max():.3g})"


def zero_state(grid):
    return State(grid, np.zeros((4,) + grid.shape))


def apply_slip_bc(state):
    """Enforce the discrete slip condition.

    Only ``u3`` is touched: it is set to zero on both walls.  The Neumann
    condition on the horizontal velocity is carried by the even-parity
    ghost values of the vertical stencils.
    """
    data = state.data.copy()
    data[3, :, :, 0] = 0.0
    data[3, :, :, -1] = 0.0
    return State(state.grid, data)


# vector calculus --------------------------------------------------------------

class VectorCalculus(NamedTuple):
    div: np.ndarray
    grad_div: tuple
    laplacian_h: tuple
    curl_h: tuple


def divergence(u, grid):
    return dh(u[0], grid, 1) + dh(u[1], grid, 2) + dz(u[2], grid, "odd")


def gradient(f, grid, parity):
    return (dh(f, grid, 1), dh(f, grid, 2), dz(f, grid, parity))


def curl_h(u, grid):
    """Horizontal vorticity ``(d2 u3 - d3 u2, d3 u1 - d1 u3)``."""
    return (dh(u[2], grid, 2) - dz(u[1], grid, "even"),
            dz(u[0], grid, "even") - dh(u[2], grid, 1))


def vector_calculus(u, grid):
    div = divergence(u, grid)
    return VectorCalculus(
        div=div,
        grad_div=gradient(div, grid, "even"),
        laplacian_h=tuple(laplacian_h(c, grid) for c in u),
        curl_h=curl_h(u, grid),
    )
