"""Ratio bench for anisotropic Sobolev, interpolation and HLS inequalities.

Test fields are separable, ``f(x) = Hf(x1, x2) * P(x3)``, with ``Hf`` a finite
zero-mean Fourier sum on the horizontal torus and ``P`` a smooth profile
compactly supported in ``[0, H)``.  Every L2 norm then factors into a
horizontal part (exact, by Parseval) and a vertical part (Gauss-Legendre
quadrature of symbolic derivatives), so dilations act exactly.

Inequality ids
--------------
``sob1``  ``||f||_inf <= prod over the 8 mixed derivatives d^{e}, e in {0,1}^3, of ||d^e f||^(1/8)``
``sob2``  ``int|fgh| <= ||f|| ||g||^.5 ||d_i g||^.5 ||h||^.25 ||d_j h||^.25 ||d_k h||^.25 ||d_jk h||^.25``
``sob3``  ``int|fgh| <= (||f|| ||d1 f|| ||g|| ||d2 g|| ||h|| ||d3 h||)^.5``
``sob4``  ``||Z3 f|| <= ||f||^(2/3) ||(f, Z3^3 f)||^(1/3)``
``sob5``  ``||Z3 f|| <= ||f||^(3/4) ||(f, Z3^4 f)||^(1/4)``
``sob6``  ``|| sup_x3 |f| ||_{L^(2/s)(x_h)} <= (||f|| ||d2 f|| + ||d1 f|| ||d12 f||)^((1-s)/2) ||f||^((2s-1)/2) ||d3 f||^(1/2)``
``a10``   ``||Z3 f|| <= ||f|| + ||f||^.5 ||Z3^2 f||^.5``
``a16``   ``||Lambda_h^-alpha f||_{L2} <= || ||f||_{L^p(x_h)} ||_{L2(x3)}``, ``p = 2/(1+alpha)``
"""
import csv
import math
import os
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources

import numpy as np
import sympy as sp
from scipy.optimize import minimize, minimize_scalar

from .errors import ConfigError, DegenerateRatioError

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

INEQUALITY_IDS = ("sob1", "sob2", "sob3", "sob4", "sob5", "sob6", "a10", "a16")
FAMILIES = ("fourier_bump", "gaussian_bump")
BALANCED_IDS = ("sob1",)
DEGENERATE_TOL = 1e-14
DEFAULT_S = 33.0 / 34.0
DEFAULT_ALPHA = 0.5

_N_GAUSS = 800
_N_TORUS = 256


# vertical profiles ------------------------------------------------------------

_z, _lam, _c, _w, _cut = sp.symbols("z lam c w cut", positive=True)


def _bump(s):
    return sp.exp(1 - 1 / (1 - s ** 2))


def _profile_expr(kind):
    y = _lam * _z
    if kind == "fourier_bump":
        return _bump((y - _c) / _w)
    if kind == "gaussian_bump":
        return sp.exp(-((y - _c) / _w) ** 2) * _bump(y / _cut)
    raise ValueError(f"unknown family {kind!r}")


@lru_cache(maxsize=None)
def _vertical_funcs(kind):
    """Lambdified ``d3^k P`` (k <= 1) and ``Z3^k P`` (k <= 4)."""
    P = _profile_expr(kind)
    phi = _z / (1 + _z)
    args = (_z, _lam, _c, _w, _cut)
    d = [P, sp.diff(P, _z)]
    zk = [P]
    for _ in range(4):
        zk.append(sp.simplify(phi * sp.diff(zk[-1], _z)) if len(zk) < 2 else phi * sp.diff(zk[-1], _z))
    lam = lambda e: sp.lambdify(args, e, modules="numpy", cse=True)  # noqa: E731
    return [lam(e) for e in d], [lam(e) for e in zk]


@lru_cache(maxsize=4)
def _gauss_rule(n):
    return np.polynomial.legendre.leggauss(n)


# test fields -----------------------------------------------------------------

@dataclass(frozen=True)
class TestField:
    """Separable analytic field on the box ``[0, lx) x [0, ly) x [0, height]``.

    ``modes`` holds ``(n1, n2, a, b)``: the term
    ``a cos(k1 x1 + k2 x2) + b sin(k1 x1 + k2 x2)`` with
    ``k = (2 pi n1 / lx, 2 pi n2 / ly)`` in the unscaled box.  ``scale``
    dilates the field, ``f_lam(x) = f(lam1 x1, lam2 x2, lam3 x3)``, on the
    correspondingly shrunk box.
    """
    __test__ = False

    seed: int
    family: str
    modes: tuple
    center: float
    width: float
    lx: float = 2 * np.pi
    ly: float = 2 * np.pi
    height: float = 10.0
    scale: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not self.modes:
            raise ValueError("test field needs at least one mode")
        seen = set()
        for n1, n2, a, b in self.modes:
            if (n1, n2) == (0, 0):
                raise ValueError("modes must have zero horizontal mean")
            if n2 < 0 or (n2 == 0 and n1 < 0):
                raise ValueError("wavevectors must lie in the upper half plane")
            if (n1, n2) in seen:
                raise ValueError(f"duplicate wavevector {(n1, n2)}")
            seen.add((n1, n2))
        if min(self.scale) <= 0:
            raise ValueError("scale factors must be positive")
        if self.family == "fourier_bump" and self.center + self.width > 0.9 * self.height:
            raise ValueError("profile support must stay away from the top wall")

    @property
    def label(self):
        if self.scale != (1.0, 1.0, 1.0):
            return f"scaled({self.family}, {self.scale[0]:.3g}, {self.scale[1]:.3g}, {self.scale[2]:.3g})"
        return self.family

    def scaled(self, l1, l2, l3):
        s = self.scale
        return replace(self, scale=(s[0] * l1, s[1] * l2, s[2] * l3))

    # geometry of the (scaled) box
    @property
    def box(self):
        l1, l2, l3 = self.scale
        return self.lx / l1, self.ly / l2, self.height / l3

    @property
    def area(self):
        bx, by, _ = self.box
        return bx * by

    def _arrays(self):
        m = np.asarray(self.modes, dtype=float)
        bx, by, _ = self.box
        k1 = 2 * np.pi * m[:, 0] / bx
        k2 = 2 * np.pi * m[:, 1] / by
        return k1, k2, m[:, 2], m[:, 3]

    # horizontal factor
    def horizontal_norm2(self, a1=0, a2=0, neg=0.0):
        """``||d1^a1 d2^a2 Lambda_h^-neg Hf||^2`` on the torus (Parseval)."""
        k1, k2, a, b = self._arrays()
        w = k1 ** (2 * a1) * k2 ** (2 * a2) * (a * a + b * b)
        if neg:
            w = w * (k1 * k1 + k2 * k2) ** (-neg)
        return 0.5 * self.area * float(w.sum())

    def horizontal_samples(self, n=_N_TORUS):
        """``Hf`` on an ``n x n`` periodic grid; the sample set is scale invariant."""
        th = 2 * np.pi * np.arange(n) / n
        m = np.asarray(self.modes, dtype=float)
        out = np.zeros((n, n))
        for n1, n2, a, b in m:
            arg = n1 * th[:, None] + n2 * th[None, :]
            out += a * np.cos(arg) + b * np.sin(arg)
        return out

    def horizontal_sup(self):
        m = np.asarray(self.modes, dtype=float)
        H = self.horizontal_samples(128)
        i, j = np.unravel_index(np.abs(H).argmax(), H.shape)
        x0 = 2 * np.pi * np.array([i, j]) / 128

        def neg_sq(th):
            arg = m[:, 0] * th[0] + m[:, 1] * th[1]
            v = np.dot(m[:, 2], np.cos(arg)) + np.dot(m[:, 3], np.sin(arg))
            return -v * v
        res = minimize(neg_sq, x0, method="BFGS", options={"gtol": 1e-13})
        return float(np.sqrt(max(-res.fun, -neg_sq(x0))))

    def horizontal_lp(self, p, n=_N_TORUS):
        H = self.horizontal_samples(n)
        return float((self.area / H.size * (np.abs(H) ** p).sum()) ** (1.0 / p))

    # vertical factor
    @property
    def _vparams(self):
        return (self.scale[2], self.center, self.width, 0.9 * self.height)

    def support(self):
        """Interval in (scaled) x3 outside which the profile vanishes."""
        l3 = self.scale[2]
        if self.family == "fourier_bump":
            lo, hi = self.center - self.width, self.center + self.width
        else:
            lo, hi = -0.9 * self.height, 0.9 * self.height
        return max(lo, 0.0) / l3, hi / l3

    def vertical_nodes(self, n=_N_GAUSS):
        x, w = _gauss_rule(n)
        lo, hi = self.support()
        return 0.5 * (hi - lo) * (x + 1) + lo, 0.5 * (hi - lo) * w

    def vertical_values(self, kind, k, z):
        d, zk = _vertical_funcs(self.family)
        fn = (d if kind == "d" else zk)[k]
        return np.broadcast_to(fn(z, *self._vparams), np.shape(z))

    def vertical_norm2(self, kind="d", k=0):
        z, w = self.vertical_nodes()
        v = self.vertical_values(kind, k, z)
        return float(np.dot(w, v * v))

    def vertical_sup(self):
        lo, hi = self.support()
        z = np.linspace(lo, hi, 2001)[1:-1]
        v = np.abs(self.vertical_values("d", 0, z))
        i = int(v.argmax())
        a, b = z[max(i - 1, 0)], z[min(i + 1, len(z) - 1)]
        f = lambda s: -abs(float(self.vertical_values("d", 0, np.array([s]))[0]))  # noqa: E731
        res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        return max(-res.fun, float(v[i]))

    # full-field norms
    def norm(self, a1=0, a2=0, a3=0):
        """``||d1^a1 d2^a2 d3^a3 f||_{L2}``, ``a3 <= 1``."""
        return math.sqrt(self.horizontal_norm2(a1, a2) * self.vertical_norm2("d", a3))

    def z3_norm(self, k):
        """``||Z3^k f||_{L2}``, ``k <= 4``."""
        return math.sqrt(self.horizontal_norm2() * self.vertical_norm2("z", k))

    def sample(self, grid):
        """Nodal values on a :class:`~aniso_cns.grid.Grid` covering the scaled box."""
        X1, X2, _ = grid.mesh()
        k1, k2, a, b = self._arrays()
        H = np.zeros((grid.nx, grid.ny))
        for j in range(len(a)):
            arg = k1[j] * X1[:, :, 0] + k2[j] * X2[:, :, 0]
            H += a[j] * np.cos(arg) + b[j] * np.sin(arg)
        z = grid.x3
        lo, hi = self.support()
        inside = (z >= lo) & (z < hi)
        P = np.zeros_like(z)
        with np.errstate(all="ignore"):
            P[inside] = np.nan_to_num(self.vertical_values("d", 0, z[inside]))
        return H[:, :, None] * P[None, None, :]


def _triple_integral(f, g, h):
    if (f.box != g.box) or (f.box != h.box):
        raise ValueError("triple products need fields on a common box")
    Hs = np.abs(f.horizontal_samples() * g.horizontal_samples() * h.horizontal_samples())
    horiz = f.area / Hs.size * Hs.sum()
    lo = max(f.support()[0], g.support()[0], h.support()[0])
    hi = min(f.support()[1], g.support()[1], h.support()[1])
    if hi <= lo:
        return 0.0
    x, w = _gauss_rule(_N_GAUSS)
    z = 0.5 * (hi - lo) * (x + 1) + lo
    w = 0.5 * (hi - lo) * w
    v = np.abs(f.vertical_values("d", 0, z) * g.vertical_values("d", 0, z) * h.vertical_values("d", 0, z))
    return float(horiz * np.dot(w, v))


# ratios -------------------------------------------------------------------------

@dataclass
class RatioReport:
    inequality_id: str
    lhs: float
    rhs: float
    ratio: float
    seed: int
    params: dict = field(default_factory=dict)

    def as_row(self):
        return {"inequality_id": self.inequality_id, "seed": self.seed, "lhs": self.lhs,
                "rhs": self.rhs, "ratio": self.ratio}


def _check_factors(iid, factors):
    for name, v in factors.items():
        if not np.isfinite(v) or v < DEGENERATE_TOL:
            raise DegenerateRatioError(f"degenerate_rhs: factor {name} = {v:.3g} in {iid}")


def _product(factors, powers):
    return math.prod(factors[k] ** p for k, p in powers.items())


def _axis_index(i):
    if i not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {i}")
    return i


def _mixed(f, axes):
    a = [0, 0, 0]
    for i in axes:
        a[_axis_index(i) - 1] += 1
    return f.norm(*a)


def check_hls_exponents(alpha, q=2.0):
    """Return ``p`` for the HLS pair, rejecting inadmissible exponents."""
    if not (0.0 < alpha < 1.0):
        raise ConfigError(f"alpha must lie in (0, 1), got {alpha}")
    p = 1.0 / (1.0 / q + alpha / 2.0)
    if not (1.0 < p < 2.0):
        raise ConfigError(f"p = {p} must lie in (1, 2)")
    return p


def ratio(f, inequality_id, g=None, h=None, *, s=DEFAULT_S, alpha=DEFAULT_ALPHA, axes=(1, 2, 3)):
    """Evaluate both sides of one inequality on analytic fields."""
    iid = inequality_id
    if iid not in INEQUALITY_IDS:
        raise ValueError(f"unknown inequality id {iid!r}; expected one of {INEQUALITY_IDS}")
    params = {}
    if iid == "sob1":
        subsets = [(), (1,), (2,), (1, 2), (3,), (1, 3), (2, 3), (1, 2, 3)]
        fac = {"d" + "".join(map(str, e)) if e else "f": _mixed(f, e) for e in subsets}
        _check_factors(iid, fac)
        lhs = f.horizontal_sup() * f.vertical_sup()
        rhs = _product(fac, {k: 0.125 for k in fac})
    elif iid in ("sob2", "sob3"):
        if g is None or h is None:
            raise ValueError(f"{iid} needs three fields")
        lhs = _triple_integral(f, g, h)
        if iid == "sob2":
            i, j, k = (_axis_index(a) for a in axes)
            if len({i, j, k}) != 3:
                raise ValueError("axes must be distinct")
            fac = {"f": f.norm(), "g": g.norm(), "dg": _mixed(g, (i,)), "h": h.norm(),
                   "dj_h": _mixed(h, (j,)), "dk_h": _mixed(h, (k,)), "djk_h": _mixed(h, (j, k))}
            powers = {"f": 1.0, "g": 0.5, "dg": 0.5, "h": 0.25, "dj_h": 0.25, "dk_h": 0.25, "djk_h": 0.25}
            params["axes"] = (i, j, k)
        else:
            fac = {"f": f.norm(), "d1f": f.norm(1, 0, 0), "g": g.norm(), "d2g": g.norm(0, 1, 0),
                   "h": h.norm(), "d3h": h.norm(0, 0, 1)}
            powers = {k: 0.5 for k in fac}
        _check_factors(iid, fac)
        rhs = _product(fac, powers)
    elif iid in ("sob4", "sob5"):
        top = 3 if iid == "sob4" else 4
        fac = {"f": f.norm(), f"z3^{top}f": f.z3_norm(top)}
        _check_factors(iid, fac)
        lhs = f.z3_norm(1)
        pair = math.hypot(fac["f"], fac[f"z3^{top}f"])
        rhs = fac["f"] ** (1 - 1 / top) * pair ** (1 / top)
    elif iid == "sob6":
        if not (0.5 <= s <= 1.0):
            raise ConfigError(f"s must lie in [1/2, 1], got {s}")
        fac = {"f": f.norm(), "d1f": f.norm(1, 0, 0), "d2f": f.norm(0, 1, 0),
               "d12f": f.norm(1, 1, 0), "d3f": f.norm(0, 0, 1)}
        _check_factors(iid, fac)
        lhs = f.vertical_sup() * f.horizontal_lp(2.0 / s)
        mix = fac["f"] * fac["d2f"] + fac["d1f"] * fac["d12f"]
        rhs = mix ** ((1 - s) / 2) * fac["f"] ** ((2 * s - 1) / 2) * fac["d3f"] ** 0.5
        params["s"] = s
    elif iid == "a10":
        fac = {"f": f.norm(), "z3^2f": f.z3_norm(2)}
        _check_factors(iid, fac)
        lhs = f.z3_norm(1)
        rhs = fac["f"] + math.sqrt(fac["f"] * fac["z3^2f"])
    else:  # a16
        p = check_hls_exponents(alpha)
        vert = math.sqrt(f.vertical_norm2())
        fac = {"f_lp": f.horizontal_lp(p) * vert}
        _check_factors(iid, fac)
        lhs = math.sqrt(f.horizontal_norm2(neg=alpha)) * vert
        rhs = fac["f_lp"]
        params.update(alpha=alpha, p=p)
    return RatioReport(iid, float(lhs), float(rhs), float(lhs / rhs), f.seed, params)


def scaling_invariance(f, inequality_id="sob1", lam=(1.0, 1.0, 1.0)):
    """``|ratio(f_lam) - ratio(f)|`` for a dilation balanced inequality."""
    if inequality_id not in BALANCED_IDS:
        raise ValueError(f"{inequality_id!r} is not dilation balanced; use one of {BALANCED_IDS}")
    r0 = ratio(f, inequality_id).ratio
    r1 = ratio(f.scaled(*lam), inequality_id).ratio
    return abs(r1 - r0)


# corpus -------------------------------------------------------------------------

def _random_modes(rng, nmax=3):
    pool = [(n1, n2) for n1 in range(-nmax, nmax + 1) for n2 in range(0, nmax + 1)
            if n2 > 0 or n1 > 0]
    mixed = [p for p in pool if p[0] != 0 and p[1] != 0]
    picks = {mixed[rng.integers(len(mixed))]}
    for _ in range(rng.integers(1, 4)):
        picks.add(pool[rng.integers(len(pool))])
    return tuple((n1, n2, float(rng.normal()), float(rng.normal())) for n1, n2 in sorted(picks))


def make_field(seed, family=None, scale=None, height=10.0, rng=None):
    """Random member of a test-field family, reproducible from ``seed``."""
    rng = np.random.default_rng(seed) if rng is None else rng
    if family is None:
        family = FAMILIES[rng.integers(len(FAMILIES))]
    if family == "fourier_bump":
        center = float(rng.uniform(0.0, 0.3 * height))
        width = float(rng.uniform(0.2, 0.5) * height)
    else:
        center = float(rng.uniform(0.0, 0.2 * height))
        width = float(rng.uniform(0.08, 0.2) * height)
    f = TestField(int(seed), family, _random_modes(rng), center, width, height=height)
    if scale is not None:
        f = f.scaled(*scale)
    return f


def corpus(n=100, seed=0, height=10.0):
    """``n`` field triples ``(f, g, h)`` on common boxes.

    About a third of the members are dilated with per-axis factors in
    ``[1/2, 2]``.  Members with a degenerate right-hand side are skipped.
    """
    out = []
    i = 0
    while len(out) < n:
        rng = np.random.default_rng([seed, i])
        scale = None
        if rng.uniform() < 1.0 / 3.0:
            scale = tuple(float(x) for x in 2.0 ** rng.uniform(-1, 1, size=3))
        trip = tuple(make_field(seed * 100_003 + i, scale=scale, height=height, rng=rng) for _ in range(3))
        i += 1
        try:
            for iid in INEQUALITY_IDS:
                ratio(*trip[:1], iid, *trip[1:]) if iid in ("sob2", "sob3") else ratio(trip[0], iid)
        except DegenerateRatioError:
            continue
        out.append(trip)
    return out


def run_bench(n=100, seed=0, s=DEFAULT_S, alpha=DEFAULT_ALPHA):
    """All ratios over a corpus, as ``{inequality_id: [RatioReport, ...]}``."""
    res = {iid: [] for iid in INEQUALITY_IDS}
    for f, g, h in corpus(n, seed):
        for iid in INEQUALITY_IDS:
            if iid in ("sob2", "sob3"):
                res[iid].append(ratio(f, iid, g, h))
            else:
                res[iid].append(ratio(f, iid, s=s, alpha=alpha))
    return res


def bench_summary(results):
    return {iid: {"n": len(rs), "max": max(r.ratio for r in rs), "min": min(r.ratio for r in rs)}
            for iid, rs in results.items()}


def write_ratio_tables(results, outdir):
    """One CSV per inequality id; returns the written paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for iid, rs in results.items():
        path = os.path.join(outdir, f"ratios_{iid}.csv")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "seed", "lhs", "rhs", "ratio"])
            for k, r in enumerate(rs):
                w.writerow([k, r.seed, f"{r.lhs:.17g}", f"{r.rhs:.17g}", f"{r.ratio:.17g}"])
        paths.append(path)
    return paths


def regression_bounds():
    """Frozen corpus maxima (100 members, seed 0)."""
    with resources.files("aniso_cns").joinpath("data/regression_bounds.toml").open("rb") as fh:
        data = tomllib.load(fh)
    return {k: float(v) for k, v in data["max_ratio"].items()}


def check_regression(results, factor=1.5, bounds=None):
    """``{id: (observed max, allowed, ok)}`` against the frozen bounds."""
    bounds = regression_bounds() if bounds is None else bounds
    out = {}
    for iid, rs in results.items():
        mx = max(r.ratio for r in rs)
        allowed = factor * bounds[iid]
        out[iid] = (mx, allowed, bool(np.isfinite(mx) and mx <= allowed))
    return out
