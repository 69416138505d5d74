"""Initial data: horizontal Fourier modes times wall-compatible vertical profiles.

All fields produced here are compatible with the slip walls in the strong
(mirror) sense: rho and u_h are even about x3 = 0, u3 is odd and vanishes on
the wall.  Every mode has nonzero horizontal wavenumber, so horizontal means
are zero.
"""
from dataclasses import dataclass

import numpy as np

from .grid import State, apply_slip_bc

FIELDS = ("rho", "u1", "u2", "u3")
PROFILES = ("gauss", "cosine")


@dataclass(frozen=True)
class Mode:
    field: str
    kx: int
    ky: int
    amplitude: float = 1.0
    phase: float = 0.0
    # vertical harmonic for the cosine profile
    kz: int = 1

    def __post_init__(self):
        if self.field not in FIELDS:
            raise ValueError(f"mode field must be one of {FIELDS}, got {self.field!r}")
        if self.kx == 0 and self.ky == 0:
            raise ValueError("modes must have nonzero horizontal wavenumber (zero horizontal mean)")


DEFAULT_MODES = (
    Mode("rho", 1, 0, 1.0),
    Mode("u1", 0, 1, 1.0),
    Mode("u2", 1, 1, 0.5, 0.3),
    Mode("u3", 1, 0, 0.5, 0.7),
    Mode("u3", 0, 2, 0.25, 1.1),
)


def vertical_profile(grid, kind, parity, width=None, kz=1):
    """Vertical shape on the nodes.

    ``gauss``: even window ``exp(-(x3/w)^2)``; odd version ``(x3/w)`` times the
    window.  ``cosine``: ``cos(kz pi x3 / H)`` (even) or ``sin`` (odd), exact
    mirror images at both walls.
    """
    z = grid.x3
    H = grid.height
    if kind == "gauss":
        w = H / 4.0 if width is None else float(width)
        win = np.exp(-(z / w) ** 2)
        return win if parity == "even" else (z / w) * win
    if kind == "cosine":
        arg = kz * np.pi * z / H
        return np.cos(arg) if parity == "even" else np.sin(arg)
    raise ValueError(f"profile must be one of {PROFILES}, got {kind!r}")


def modal_state(grid, modes=DEFAULT_MODES, amplitude=1e-2, profile="gauss", width=None):
    X1, X2, _ = grid.mesh()
    kx0 = 2.0 * np.pi / grid.lx
    ky0 = 2.0 * np.pi / grid.ly
    out = {f: grid.zeros() for f in FIELDS}
    for m in modes:
        par = "odd" if m.field == "u3" else "even"
        prof = vertical_profile(grid, profile, par, width, m.kz)
        horiz = np.cos(m.kx * kx0 * X1 + m.ky * ky0 * X2 + m.phase)
        out[m.field] += amplitude * m.amplitude * horiz * prof[None, None, :]
    return apply_slip_bc(State(grid, out["rho"], out["u1"], out["u2"], out["u3"]))


def random_smooth_state(grid, seed=0, amplitude=1e-2, kmax=2, kzmax=3, profile="cosine", width=None):
    """Random band-limited, wall-compatible state (zero horizontal means).

    Horizontal wavenumbers up to ``kmax``, vertical harmonics up to ``kzmax``
    (cosine profile) with random amplitudes and phases from ``seed``.
    """
    rng = np.random.default_rng(seed)
    modes = []
    for f in FIELDS:
        for kx in range(-kmax, kmax + 1):
            for ky in range(0, kmax + 1):
                if kx == 0 and ky == 0:
                    continue
                kzs = range(1, kzmax + 1) if profile == "cosine" else [1]
                for kz in kzs:
                    a = rng.normal() / (1 + kx * kx + ky * ky + kz * kz)
                    modes.append(Mode(f, kx, ky, a, rng.uniform(0, 2 * np.pi), kz))
    return modal_state(grid, modes, amplitude, profile, width)
