"""Conormal derivatives Z^a, conormal/tangential Sobolev norms, Lambda_h^s.

``Z1 = d1``, ``Z2 = d2`` (spectral) and ``Z3 = phi(x3) d3`` with
``phi = x3/(1+x3)``.  Inside ``Z^a`` the horizontal factors act first, then
the ``a3`` applications of ``Z3``.  The first vertical derivative uses the
wall parity of the field; later ones use one-sided stencils because
``phi`` has no wall symmetry.

Norms are discrete L2 norms: Parseval in (x1, x2), trapezoid in x3.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import dh, dz, flip_parity


@dataclass(frozen=True)
class MultiIndex:
    a1: int
    a2: int
    a3: int

    def __post_init__(self):
        if min(self.a1, self.a2, self.a3) < 0:
            raise ValueError("multi-index entries must be nonnegative")

    @property
    def order(self):
        return self.a1 + self.a2 + self.a3

    def as_tuple(self):
        return (self.a1, self.a2, self.a3)


@dataclass(frozen=True)
class NormRequest:
    m: int
    kind: str = "co"
    dotted: bool = False
    with_d3: bool = False

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("norm order must be >= 0")
        if self.kind not in ("co", "tan"):
            raise ValueError(f"kind must be 'co' or 'tan', got {self.kind!r}")


@dataclass(frozen=True)
class DecayParams:
    zeta: float = 1.0 / 34.0

    def __post_init__(self):
        if not (0.0 < self.zeta <= 1.0 / 34.0 + 1e-15):
            raise ValueError(f"zeta must lie in (0, 1/34], got {self.zeta}")

    @property
    def s(self):
        return 1.0 - self.zeta

    @property
    def sigma(self):
        return 1.0 - 2.0 * self.zeta


def multi_indices(m, kind="co", dotted=False):
    """All multi-indices of the requested set, in lexicographic order."""
    out = []
    for a3 in range(m + 1 if kind == "co" else 1):
        for a1 in range(m + 1 - a3):
            for a2 in range(m + 1 - a3 - a1):
                if dotted and a1 + a2 + a3 != m:
                    continue
                out.append(MultiIndex(a1, a2, a3))
    return out


def z_apply(f, grid, k, parity="one_sided"):
    """Apply one conormal field ``Z_k``; ``parity`` matters only for ``k=3``."""
    if k in (1, 2):
        return dh(f, grid, k)
    if k == 3:
        return grid.phi * dz(f, grid, parity)
    raise ValueError(f"k must be 1, 2 or 3, got {k}")


def z_alpha(f, grid, alpha, parity="one_sided"):
    """``Z^alpha f`` with horizontal factors first."""
    if not isinstance(alpha, MultiIndex):
        alpha = MultiIndex(*alpha)
    g = f
    for _ in range(alpha.a1):
        g = dh(g, grid, 1)
    for _ in range(alpha.a2):
        g = dh(g, grid, 2)
    par = parity
    for _ in range(alpha.a3):
        g = grid.phi * dz(g, grid, par)
        par = "one_sided"
    return g


# Parseval tables ---------------------------------------------------------------

def _rfft_weights(grid):
    """Multiplicity of each half-spectrum bin in the full spectrum."""
    ny = grid.ny
    w = np.full(ny // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


@lru_cache(maxsize=32)
def _wavenumber_powers(nx, ny, lx, ly, m):
    """``kx^(2a)`` and ``ky^(2b)`` for a, b <= m with the Nyquist mode dropped for a >= 1."""
    kx = 2.0 * np.pi / lx * np.fft.fftfreq(nx, d=1.0 / nx)
    ky = 2.0 * np.pi / ly * np.arange(ny // 2 + 1)
    kx[nx // 2] = 0.0
    ky[ny // 2] = 0.0
    px = np.stack([kx ** (2 * a) for a in range(m + 1)])
    py = np.stack([ky ** (2 * b) for b in range(m + 1)])
    px[0] = 1.0
    py[0] = 1.0
    return px, py


def horizontal_spectrum(f, grid):
    """``S(kx, ky) = int |f_hat(kx, ky, x3)|^2 dx3`` scaled so that
    ``sum(S * weights) = ||f||^2``."""
    F = np.fft.rfft2(f, axes=(0, 1))
    P = F.real ** 2 + F.imag ** 2
    S = P @ grid.z_weights
    return S * (_rfft_weights(grid)[None, :] * grid.cell_volume / (grid.nx * grid.ny))


def _table_from_spectra(spectra, grid, m):
    px, py = _wavenumber_powers(grid.nx, grid.ny, grid.lx, grid.ly, m)
    T = np.full((m + 1, m + 1, m + 1), np.nan)
    for a3, S in enumerate(spectra):
        top = m - a3
        # A[a1, ky] = sum_kx px[a1] * S
        A = px[:top + 1] @ S
        B = A @ py[:top + 1].T
        for a1 in range(top + 1):
            for a2 in range(top + 1 - a1):
                T[a1, a2, a3] = max(B[a1, a2], 0.0)
    return T


def conormal_table(f, grid, m, parity="one_sided", with_d3=False):
    """Array ``T[a1, a2, a3] = ||Z^a f||^2`` for ``|a| <= m`` (NaN elsewhere).

    With ``with_d3`` the field is ``d3 f`` (computed with ``parity``).
    """
    if with_d3:
        f = dz(f, grid, parity)
        parity = flip_parity(parity)
    spectra = []
    g = f
    par = parity
    for a3 in range(m + 1):
        spectra.append(horizontal_spectrum(g, grid))
        if a3 < m:
            g = grid.phi * dz(g, grid, par)
            par = "one_sided"
    return _table_from_spectra(spectra, grid, m)


def tangential_table(f, grid, m):
    """Array ``T[a1, a2] = ||d1^a1 d2^a2 f||^2`` for ``a1 + a2 <= m``."""
    return _table_from_spectra([horizontal_spectrum(f, grid)], grid, m)[:, :, 0]


def table_sum(T, m, kind="co", dotted=False, shift=(0, 0)):
    """Sum a conormal table over an index set.

    ``shift=(1, 0)`` sums ``||Z^a d1 f||^2``, i.e. entries with ``a1`` raised
    by one, which is how norms of horizontal derivatives are read off.
    """
    if T.ndim == 2:
        T = T[:, :, None]
    total = 0.0
    s1, s2 = shift
    for al in multi_indices(m, kind, dotted):
        total += T[al.a1 + s1, al.a2 + s2, al.a3]
    return float(total)


def sobolev_norm(f, grid, req, parity="one_sided"):
    """Conormal (``co``) or tangential (``tan``) norm; see :class:`NormRequest`."""
    if req.kind == "tan":
        g = dz(f, grid, parity) if req.with_d3 else f
        T = tangential_table(g, grid, req.m)
        return float(np.sqrt(table_sum(T, req.m, "tan", req.dotted)))
    T = conormal_table(f, grid, req.m, parity, req.with_d3)
    return float(np.sqrt(table_sum(T, req.m, "co", req.dotted)))


# negative-order horizontal operator -----------------------------------------

def _abs_k(grid):
    kx = grid.kx[:, None]
    ky = grid.ky_half[None, :]
    return np.sqrt(kx * kx + ky * ky)


def lambda_h(f, grid, s):
    """Fourier multiplier ``|k_h|^s`` in (x1, x2); the zero mode maps to 0."""
    K = _abs_k(grid)
    mult = np.zeros_like(K)
    nz = K > 0
    mult[nz] = K[nz] ** s
    F = np.fft.rfft2(f, axes=(0, 1))
    return np.fft.irfft2(F * mult[:, :, None], s=(grid.nx, grid.ny), axes=(0, 1))


def lambda_h_neg(f, grid, s):
    """``Lambda_h^{-s}`` for ``s`` in (0, 1); horizontal means are annihilated."""
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")
    return lambda_h(f, grid, -s)


def lambda_h_neg_norm2(f, grid, s):
    """``||Lambda_h^{-s} f||^2`` computed directly in spectral space."""
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")
    S = horizontal_spectrum(f, grid)
    K = _abs_k(grid)
    mult = np.zeros_like(K)
    nz = K > 0
    mult[nz] = K[nz] ** (-2.0 * s)
    return float((S * mult).sum())


def horizontal_mean_norm(f, grid):
    """L2 norm of the horizontal-mean part (what the negative norm drops)."""
    prof = f.mean(axis=(0, 1))
    return float(np.sqrt(grid.lx * grid.ly * np.dot(prof * prof, grid.z_weights)))


def linf(f):
    return float(np.abs(f).max()) if f.size else 0.0


def equivalence_ratio(fields, parities, grid, m):
    """Ratio of the full conormal energy to the tangential-plus-L2 form.

    Numerator ``||F||^2_{H^m_co} + ||d3 F||^2_{H^{m-1}_co}``, denominator
    ``||F||^2 + ||F||^2_{dot H^m_tan} + ||d3 F||^2_{H^{m-1}_co}``, both summed
    over the components of ``fields``.
    """
    num = den = 0.0
    for f, p in zip(fields, parities):
        T = conormal_table(f, grid, m, p)
        T3 = conormal_table(f, grid, m - 1, p, with_d3=True)
        d3 = table_sum(T3, m - 1, "co")
        num += table_sum(T, m, "co") + d3
        den += T[0, 0, 0] + table_sum(T[:, :, 0], m, "tan", dotted=True) + d3
    if den == 0.0:
        return 1.0
    return num / den
