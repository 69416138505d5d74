"""Numerical lab for the anisotropic compressible Navier-Stokes system on a slip-wall slab."""
from ._backend import get_backend, set_backend
from .conormal import DecayParams, MultiIndex, NormRequest, lambda_h_neg, linf, sobolev_norm, z_alpha, z_apply
from .config import RunConfig, default_config, load_config, save_config
from .dynamics import (
    SolverParams,
    identity_residual_p3divu,
    identity_residual_p3rho,
    rk4_step,
    stable_dt,
    tendency_eqr,
    tendency_eqr0,
    vorticity_tendency_residual,
)
from .errors import ConfigError, DegenerateRatioError, FitWindowError, InstabilityError, LabError, VacuumError
from .functionals import (
    EnergyReport,
    TimeSeries,
    bootstrap_monitor,
    energy_report,
    ode_decay_solution,
    weighted_integrals,
)
from .grid import Grid, State, apply_slip_bc, build_grid, dh, dz, vector_calculus
from .mms import ExactFamily, mms_forcing

__version__ = "0.1.0"
