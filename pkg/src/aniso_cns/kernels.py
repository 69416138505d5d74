"""Hot loops: fourth-order vertical stencils and the fused tendency assembly.

Every kernel exists twice, once compiled with numba and once in plain numpy.
The public wrappers dispatch on :func:`aniso_cns._backend.use_numba`.

Vertical boundary handling is selected by an integer parity code:

* ``EVEN``: mirror ghosts ``f[-k] = f[k]`` (and likewise at the top wall);
* ``ODD``: point-symmetric ghosts ``f[-k] = 2 f[0] - f[k]``;
* ``ONE_SIDED``: no ghosts, biased fourth-order stencils on the two rows
  nearest each wall.
"""
import numpy as np

from ._backend import njit, use_numba

EVEN = 0
ODD = 1
ONE_SIDED = 2

PARITY_CODES = {"even": EVEN, "odd": ODD, "one_sided": ONE_SIDED}


def parity_code(parity):
    if isinstance(parity, (int, np.integer)):
        if int(parity) not in (EVEN, ODD, ONE_SIDED):
            raise ValueError(f"unknown parity code {parity}")
        return int(parity)
    try:
        return PARITY_CODES[parity]
    except KeyError:
        raise ValueError(f"parity must be one of {sorted(PARITY_CODES)}, got {parity!r}") from None


def fd_weights(offsets, deriv):
    """Finite-difference weights on integer ``offsets`` (unit spacing).

    Solves the Vandermonde system so that the stencil is exact on
    polynomials of degree ``len(offsets) - 1``.
    """
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[deriv] = float(np.prod(np.arange(1, deriv + 1)))
    return np.linalg.solve(A, rhs)


# biased stencils for the two rows closest to the bottom wall; the top wall
# uses the mirrored stencils (sign flip for odd derivative order)
D1_ROW0 = fd_weights([0, 1, 2, 3, 4], 1)
D1_ROW1 = fd_weights([-1, 0, 1, 2, 3], 1)
D2_ROW0 = fd_weights([0, 1, 2, 3, 4, 5], 2)
D2_ROW1 = fd_weights([-1, 0, 1, 2, 3, 4], 2)


# numpy path -----------------------------------------------------------------

def _pad_np(f, code):
    nz = f.shape[-1]
    N = nz - 1
    g = np.empty(f.shape[:-1] + (nz + 4,), dtype=f.dtype)
    g[..., 2:nz + 2] = f
    if code == EVEN:
        g[..., 1] = f[..., 1]
        g[..., 0] = f[..., 2]
        g[..., nz + 2] = f[..., N - 1]
        g[..., nz + 3] = f[..., N - 2]
    elif code == ODD:
        g[..., 1] = 2.0 * f[..., 0] - f[..., 1]
        g[..., 0] = 2.0 * f[..., 0] - f[..., 2]
        g[..., nz + 2] = 2.0 * f[..., N] - f[..., N - 1]
        g[..., nz + 3] = 2.0 * f[..., N] - f[..., N - 2]
    else:
        g[..., :2] = 0.0
        g[..., nz + 2:] = 0.0
    return g


def _dz_np(f, dz, code):
    nz = f.shape[-1]
    g = _pad_np(f, code)
    out = (g[..., 0:nz] - 8.0 * g[..., 1:nz + 1] + 8.0 * g[..., 3:nz + 3] - g[..., 4:nz + 4]) / (12.0 * dz)
    if code == ONE_SIDED:
        N = nz - 1
        out[..., 0] = f[..., 0:5] @ D1_ROW0 / dz
        out[..., 1] = f[..., 0:5] @ D1_ROW1 / dz
        out[..., N] = -(f[..., N - np.arange(5)] @ D1_ROW0) / dz
        out[..., N - 1] = -(f[..., N - np.arange(5)] @ D1_ROW1) / dz
    return out


def _d2z_np(f, dz, code):
    nz = f.shape[-1]
    g = _pad_np(f, code)
    out = (-g[..., 0:nz] + 16.0 * g[..., 1:nz + 1] - 30.0 * g[..., 2:nz + 2]
           + 16.0 * g[..., 3:nz + 3] - g[..., 4:nz + 4]) / (12.0 * dz * dz)
    if code == ONE_SIDED:
        N = nz - 1
        h2 = dz * dz
        out[..., 0] = f[..., 0:6] @ D2_ROW0 / h2
        out[..., 1] = f[..., 0:6] @ D2_ROW1 / h2
        out[..., N] = f[..., N - np.arange(6)] @ D2_ROW0 / h2
        out[..., N - 1] = f[..., N - np.arange(6)] @ D2_ROW1 / h2
    return out


def _stage_a_np(Q, BX, BY, W, dz):
    """Divergence and the horizontal mass fluxes ``(rho u1, div, rho u2)``."""
    W[1] = BX[1] + BY[2] + _dz_np(Q[3], dz, ODD)
    W[0] = Q[0] * Q[1]
    W[2] = Q[0] * Q[2]


def _stage_b_np(Q, BX, BY, LX, LY, W, WX, WY, K, dz, eps, gamma, linear):
    rho = Q[0]
    div = W[1]
    r3 = _dz_np(rho, dz, ONE_SIDED)
    gd = (WX[1], WY[0], _dz_np(div, dz, EVEN))
    grad_rho = (BX[0], BY[0], r3)
    codes = (EVEN, EVEN, ODD)
    d3u = [_dz_np(Q[i + 1], dz, codes[i]) for i in range(3)]
    if not linear:
        s = 1.0 + rho
        frac = rho / s
        press = s if gamma == 3.0 else s ** (gamma - 2.0)
    for i in range(3):
        V = LX[i] + LY[i] + gd[i]
        if eps != 0.0:
            V = V + eps * _d2z_np(Q[i + 1], dz, codes[i])
        if linear:
            K[i + 1] = V - grad_rho[i]
        else:
            adv = Q[1] * BX[i + 1] + Q[2] * BY[i + 1] + Q[3] * d3u[i]
            K[i + 1] = V - press * grad_rho[i] - adv - frac * V
    if linear:
        K[0] = -div
    else:
        K[0] = -div - (WX[0] + WY[1] + _dz_np(rho * Q[3], dz, ODD))
    K[3, :, :, 0] = 0.0
    K[3, :, :, -1] = 0.0


# numba path -----------------------------------------------------------------

@njit
def _pad_line_nb(line, g, code):
    nz = line.shape[0]
    N = nz - 1
    for k in range(nz):
        g[k + 2] = line[k]
    if code == 0:
        g[1] = line[1]
        g[0] = line[2]
        g[nz + 2] = line[N - 1]
        g[nz + 3] = line[N - 2]
    elif code == 1:
        g[1] = 2.0 * line[0] - line[1]
        g[0] = 2.0 * line[0] - line[2]
        g[nz + 2] = 2.0 * line[N] - line[N - 1]
        g[nz + 3] = 2.0 * line[N] - line[N - 2]
    else:
        g[0] = 0.0
        g[1] = 0.0
        g[nz + 2] = 0.0
        g[nz + 3] = 0.0


@njit
def _line_d1(line, out, dz, code, g, w0, w1):
    nz = line.shape[0]
    N = nz - 1
    _pad_line_nb(line, g, code)
    c = 1.0 / (12.0 * dz)
    for k in range(nz):
        out[k] = (g[k] - 8.0 * g[k + 1] + 8.0 * g[k + 3] - g[k + 4]) * c
    if code == 2:
        a0 = 0.0
        a1 = 0.0
        b0 = 0.0
        b1 = 0.0
        for q in range(5):
            a0 += w0[q] * line[q]
            a1 += w1[q] * line[q]
            b0 += w0[q] * line[N - q]
            b1 += w1[q] * line[N - q]
        out[0] = a0 / dz
        out[1] = a1 / dz
        out[N] = -b0 / dz
        out[N - 1] = -b1 / dz


@njit
def _line_d2(line, out, dz, code, g, w0, w1):
    nz = line.shape[0]
    N = nz - 1
    _pad_line_nb(line, g, code)
    h2 = dz * dz
    c = 1.0 / (12.0 * h2)
    for k in range(nz):
        out[k] = (-g[k] + 16.0 * g[k + 1] - 30.0 * g[k + 2] + 16.0 * g[k + 3] - g[k + 4]) * c
    if code == 2:
        a0 = 0.0
        a1 = 0.0
        b0 = 0.0
        b1 = 0.0
        for q in range(6):
            a0 += w0[q] * line[q]
            a1 += w1[q] * line[q]
            b0 += w0[q] * line[N - q]
            b1 += w1[q] * line[N - q]
        out[0] = a0 / h2
        out[1] = a1 / h2
        out[N] = b0 / h2
        out[N - 1] = b1 / h2


@njit
def _dz_nb(f, dz, code, w0, w1):
    nx, ny, nz = f.shape
    out = np.empty_like(f)
    g = np.empty(nz + 4)
    for i in range(nx):
        for j in range(ny):
            _line_d1(f[i, j], out[i, j], dz, code, g, w0, w1)
    return out


@njit
def _d2z_nb(f, dz, code, w0, w1):
    nx, ny, nz = f.shape
    out = np.empty_like(f)
    g = np.empty(nz + 4)
    for i in range(nx):
        for j in range(ny):
            _line_d2(f[i, j], out[i, j], dz, code, g, w0, w1)
    return out


@njit
def _stage_a_nb(Q, BX, BY, W, dz, w0, w1):
    _, nx, ny, nz = Q.shape
    g = np.empty(nz + 4)
    d3 = np.empty(nz)
    for i in range(nx):
        for j in range(ny):
            _line_d1(Q[3, i, j], d3, dz, 1, g, w0, w1)
            for k in range(nz):
                r = Q[0, i, j, k]
                W[1, i, j, k] = BX[1, i, j, k] + BY[2, i, j, k] + d3[k]
                W[0, i, j, k] = r * Q[1, i, j, k]
                W[2, i, j, k] = r * Q[2, i, j, k]


@njit
def _stage_b_nb(Q, BX, BY, LX, LY, W, WX, WY, K, dz, eps, gamma, linear, w0, w1, v0, v1):
    _, nx, ny, nz = Q.shape
    g = np.empty(nz + 4)
    r3 = np.empty(nz)
    div3 = np.empty(nz)
    flux3 = np.empty(nz)
    tmp = np.empty(nz)
    d3u = np.empty((3, nz))
    d2u = np.zeros((3, nz))
    use_eps = eps != 0.0
    gm2 = gamma - 2.0
    for i in range(nx):
        for j in range(ny):
            _line_d1(Q[0, i, j], r3, dz, 2, g, w0, w1)
            _line_d1(W[1, i, j], div3, dz, 0, g, w0, w1)
            _line_d1(Q[1, i, j], d3u[0], dz, 0, g, w0, w1)
            _line_d1(Q[2, i, j], d3u[1], dz, 0, g, w0, w1)
            _line_d1(Q[3, i, j], d3u[2], dz, 1, g, w0, w1)
            if use_eps:
                _line_d2(Q[1, i, j], d2u[0], dz, 0, g, v0, v1)
                _line_d2(Q[2, i, j], d2u[1], dz, 0, g, v0, v1)
                _line_d2(Q[3, i, j], d2u[2], dz, 1, g, v0, v1)
            if not linear:
                for k in range(nz):
                    tmp[k] = Q[0, i, j, k] * Q[3, i, j, k]
                _line_d1(tmp, flux3, dz, 1, g, w0, w1)
            for k in range(nz):
                div = W[1, i, j, k]
                gd0 = WX[1, i, j, k]
                gd1 = WY[0, i, j, k]
                V1 = LX[0, i, j, k] + LY[0, i, j, k] + gd0
                V2 = LX[1, i, j, k] + LY[1, i, j, k] + gd1
                V3 = LX[2, i, j, k] + LY[2, i, j, k] + div3[k]
                if use_eps:
                    V1 = V1 + eps * d2u[0, k]
                    V2 = V2 + eps * d2u[1, k]
                    V3 = V3 + eps * d2u[2, k]
                ra = BX[0, i, j, k]
                rb = BY[0, i, j, k]
                rc = r3[k]
                if linear:
                    K[0, i, j, k] = -div
                    K[1, i, j, k] = V1 - ra
                    K[2, i, j, k] = V2 - rb
                    K[3, i, j, k] = V3 - rc
                    continue
                r = Q[0, i, j, k]
                s = 1.0 + r
                frac = r / s
                if gm2 == 1.0:
                    press = s
                else:
                    press = s ** gm2
                w1_ = Q[1, i, j, k]
                w2_ = Q[2, i, j, k]
                w3_ = Q[3, i, j, k]
                adv1 = w1_ * BX[1, i, j, k] + w2_ * BY[1, i, j, k] + w3_ * d3u[0, k]
                adv2 = w1_ * BX[2, i, j, k] + w2_ * BY[2, i, j, k] + w3_ * d3u[1, k]
                adv3 = w1_ * BX[3, i, j, k] + w2_ * BY[3, i, j, k] + w3_ * d3u[2, k]
                K[1, i, j, k] = V1 - press * ra - adv1 - frac * V1
                K[2, i, j, k] = V2 - press * rb - adv2 - frac * V2
                K[3, i, j, k] = V3 - press * rc - adv3 - frac * V3
                K[0, i, j, k] = -div - (WX[0, i, j, k] + WY[1, i, j, k] + flux3[k])
            K[3, i, j, 0] = 0.0
            K[3, i, j, nz - 1] = 0.0


# dispatchers ----------------------------------------------------------------

def _as3d(f):
    f = np.ascontiguousarray(f, dtype=np.float64)
    if f.ndim == 3:
        return f, None
    shape = f.shape
    return f.reshape((-1, 1, shape[-1])), shape


def vertical_d1(f, dz, parity):
    """Fourth-order first derivative along the last axis."""
    code = parity_code(parity)
    if f.shape[-1] < 6:
        raise ValueError("need at least 6 vertical nodes")
    if use_numba():
        g, shape = _as3d(f)
        out = _dz_nb(g, float(dz), code, D1_ROW0, D1_ROW1)
        return out if shape is None else out.reshape(shape)
    return _dz_np(np.asarray(f, dtype=np.float64), float(dz), code)


def vertical_d2(f, dz, parity):
    """Fourth-order second derivative along the last axis."""
    code = parity_code(parity)
    if f.shape[-1] < 6:
        raise ValueError("need at least 6 vertical nodes")
    if use_numba():
        g, shape = _as3d(f)
        out = _d2z_nb(g, float(dz), code, D2_ROW0, D2_ROW1)
        return out if shape is None else out.reshape(shape)
    return _d2z_np(np.asarray(f, dtype=np.float64), float(dz), code)


def rhs_stage_a(Q, BX, BY, W, dz):
    if use_numba():
        _stage_a_nb(Q, BX, BY, W, float(dz), D1_ROW0, D1_ROW1)
    else:
        _stage_a_np(Q, BX, BY, W, float(dz))


def rhs_stage_b(Q, BX, BY, LX, LY, W, WX, WY, K, dz, eps, gamma, linear):
    """Vertical stencils plus the pointwise assembly of the full tendency.

    ``Q`` is the state ``(rho, u1, u2, u3)``; ``BX``/``BY`` its x1/x2
    derivatives; ``LX``/``LY`` the second x1/x2 derivatives of the
    velocity; ``W = (rho u1, div u, rho u2)`` with ``WX = d1 (rho u1, div u)``
    and ``WY = d2 (div u, rho u2)``.  The result is written into ``K``.
    """
    if use_numba():
        _stage_b_nb(Q, BX, BY, LX, LY, W, WX, WY, K, float(dz), float(eps), float(gamma),
                    bool(linear), D1_ROW0, D1_ROW1, D2_ROW0, D2_ROW1)
    else:
        _stage_b_np(Q, BX, BY, LX, LY, W, WX, WY, K, float(dz), float(eps), float(gamma), bool(linear))
