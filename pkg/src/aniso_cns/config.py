"""Run configuration: nested TOML, schema versioned, strictly validated."""
import copy
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import tomli_w

from .errors import ConfigError
from .initial import FIELDS, PROFILES

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

SCHEMA_VERSION = 1
EXPERIMENTS = ("simulate", "sweep-epsilon", "decay-fit", "mms", "ineq-bench", "report")


def _default_modes():
    return [
        {"field": "rho", "kx": 1, "ky": 0, "amplitude": 1.0, "phase": 0.0},
        {"field": "u1", "kx": 0, "ky": 1, "amplitude": 1.0, "phase": 0.0},
        {"field": "u2", "kx": 1, "ky": 1, "amplitude": 0.5, "phase": 0.3},
        {"field": "u3", "kx": 1, "ky": 0, "amplitude": 0.5, "phase": 0.7},
        {"field": "u3", "kx": 0, "ky": 2, "amplitude": 0.25, "phase": 1.1},
    ]


@dataclass
class GridConfig:
    nx: int = 32
    ny: int = 32
    nz: int = 64
    lx: float = 2 * math.pi
    ly: float = 2 * math.pi
    height: float = 10.0


@dataclass
class SolverConfig:
    eps: float = 0.1
    gamma: float = 3.0
    # 0 or absent: derived from the stability bound
    dt: Optional[float] = None
    c_cfl: float = 0.5
    t_end: float = 50.0
    linearized: bool = False


@dataclass
class DecayConfig:
    zeta: float = 1.0 / 34.0
    m: int = 5


@dataclass
class InitialConfig:
    kind: str = "modes"
    amplitude: float = 1e-2
    profile: str = "gauss"
    width: Optional[float] = None
    modes: list = field(default_factory=_default_modes)
    # random data only
    kmax: int = 2
    kzmax: int = 3


@dataclass
class OutputConfig:
    sample_dt: float = 0.5
    residuals: bool = True
    plots: bool = False


@dataclass
class SweepConfig:
    eps_list: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    t_end: float = 2.0


@dataclass
class MMSConfig:
    resolutions: list = field(default_factory=lambda: [[16, 16, 17], [16, 16, 33], [16, 16, 65]])
    t_end: float = 0.5
    amplitude: float = 0.1
    eps: float = 0.5
    height: float = 2 * math.pi
    c_cfl: float = 1.0


@dataclass
class FitConfig:
    window: list = field(default_factory=lambda: [1.0, 50.0])


@dataclass
class BenchConfig:
    corpus: int = 100
    seed: int = 0


_SECTIONS = {
    "grid": GridConfig, "solver": SolverConfig, "decay": DecayConfig, "initial": InitialConfig,
    "output": OutputConfig, "sweep": SweepConfig, "mms": MMSConfig, "fit": FitConfig,
    "bench": BenchConfig,
}
_TOP = ("schema_version", "experiment", "seed", "out_dir")


@dataclass
class RunConfig:
    experiment: str = "simulate"
    seed: int = 0
    out_dir: str = "runs/default"
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    decay: DecayConfig = field(default_factory=DecayConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    mms: MMSConfig = field(default_factory=MMSConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)

    def validate(self):
        validate(self)
        return self

    def to_dict(self):
        return to_dict(self)

    def with_overrides(self, overrides):
        return apply_overrides(self, overrides)

    def section(self, name):
        return getattr(self, name)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg):
    """Raise :class:`ConfigError` on the first invalid entry."""
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    g = cfg.grid
    for name in ("nx", "ny"):
        n = getattr(g, name)
        if not isinstance(n, int) or n < 8 or n & (n - 1):
            raise ConfigError(f"grid.{name} must be a power of two >= 8, got {n!r}")
    if not isinstance(g.nz, int) or g.nz < 8:
        raise ConfigError(f"grid.nz must be an integer >= 8, got {g.nz!r}")
    for name in ("lx", "ly", "height"):
        if not (_is_num(getattr(g, name)) and getattr(g, name) > 0):
            raise ConfigError(f"grid.{name} must be positive")
    s = cfg.solver
    if not (_is_num(s.eps) and 0.0 <= s.eps < 1.0):
        raise ConfigError(f"eps out of range [0,1): {s.eps!r}")
    if not (_is_num(s.gamma) and s.gamma > 1.0):
        raise ConfigError(f"gamma must exceed 1, got {s.gamma!r}")
    if s.dt is not None and not (_is_num(s.dt) and s.dt >= 0):
        raise ConfigError(f"dt must be nonnegative (0 = automatic), got {s.dt!r}")
    if not (_is_num(s.c_cfl) and s.c_cfl > 0):
        raise ConfigError("c_cfl must be positive")
    if not (_is_num(s.t_end) and s.t_end >= 0):
        raise ConfigError("t_end must be nonnegative")
    d = cfg.decay
    if not (_is_num(d.zeta) and 0.0 < d.zeta <= 1.0 / 34.0 + 1e-15):
        raise ConfigError(f"zeta must lie in (0, 1/34], got {d.zeta!r}")
    if not (isinstance(d.m, int) and d.m >= 3):
        raise ConfigError(f"m must be an integer >= 3, got {d.m!r}")
    i = cfg.initial
    if i.kind not in ("modes", "random"):
        raise ConfigError(f"initial.kind must be 'modes' or 'random', got {i.kind!r}")
    if not (_is_num(i.amplitude) and i.amplitude >= 0):
        raise ConfigError(f"initial.amplitude must be nonnegative, got {i.amplitude!r}")
    if i.profile not in PROFILES:
        raise ConfigError(f"initial.profile must be one of {PROFILES}, got {i.profile!r}")
    if i.width is not None and not (_is_num(i.width) and i.width > 0):
        raise ConfigError("initial.width must be positive")
    for mode in i.modes:
        if not isinstance(mode, dict) or mode.get("field") not in FIELDS:
            raise ConfigError(f"bad initial mode {mode!r}")
        if mode.get("kx", 0) == 0 and mode.get("ky", 0) == 0:
            raise ConfigError("initial modes must have nonzero horizontal wavenumber (zero mean)")
    o = cfg.output
    if not (_is_num(o.sample_dt) and o.sample_dt > 0):
        raise ConfigError("output.sample_dt must be positive")
    sw = cfg.sweep.eps_list
    if not sw or any(not _is_num(e) for e in sw):
        raise ConfigError("sweep.eps_list must be a nonempty list of numbers")
    if any(b >= a for a, b in zip(sw, sw[1:])):
        raise ConfigError("sweep.eps_list must be strictly decreasing")
    if max(sw) > 0.5 or min(sw) < 0:
        raise ConfigError("sweep.eps_list entries must lie in [0, 0.5]")
    mm = cfg.mms
    if len(mm.resolutions) < 3:
        raise ConfigError("mms.resolutions needs at least 3 grids")
    if not (0.0 <= mm.eps < 1.0):
        raise ConfigError(f"eps out of range [0,1): mms.eps = {mm.eps!r}")
    w = cfg.fit.window
    if len(w) != 2 or not w[0] < w[1]:
        raise ConfigError("fit.window must be [t1, t2] with t1 < t2")
    if not (isinstance(cfg.bench.corpus, int) and cfg.bench.corpus >= 1):
        raise ConfigError("bench.corpus must be a positive integer")
    return cfg


def to_dict(cfg):
    d = {"schema_version": SCHEMA_VERSION, "experiment": cfg.experiment, "seed": cfg.seed,
         "out_dir": cfg.out_dir}
    for name in _SECTIONS:
        sec = asdict(getattr(cfg, name))
        d[name] = {k: v for k, v in sec.items() if v is not None}
    return d


def from_dict(data):
    data = copy.deepcopy(data)
    ver = data.pop("schema_version", None)
    if ver != SCHEMA_VERSION:
        raise ConfigError(f"schema_version mismatch: expected {SCHEMA_VERSION}, got {ver!r}")
    kw = {}
    for k in list(data):
        if k in _TOP:
            kw[k] = data.pop(k)
    for name, cls in _SECTIONS.items():
        sec = data.pop(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        known = {f.name for f in fields(cls)}
        bad = set(sec) - known
        if bad:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(sorted(bad))}")
        kw[name] = cls(**sec)
    if data:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(data))}")
    cfg = RunConfig(**kw)
    if cfg.solver.dt == 0:
        cfg.solver.dt = None
    return validate(cfg)


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(data)


def dumps_config(cfg):
    return tomli_w.dumps(to_dict(cfg))


def save_config(cfg, path):
    with open(path, "w") as fh:
        fh.write(dumps_config(cfg))
    return path


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_overrides(cfg, overrides):
    """Apply ``section.key=value`` strings (TOML literals) and re-validate."""
    data = to_dict(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        target = data
        for p in parts[:-1]:
            if p not in data or not isinstance(target.get(p), dict):
                raise ConfigError(f"unknown config section in override {key!r}")
            target = target[p]
        leaf = parts[-1]
        if len(parts) == 1 and leaf not in _TOP:
            raise ConfigError(f"unknown config key {key!r}")
        if len(parts) == 2:
            known = {f.name for f in fields(_SECTIONS[parts[0]])}
            if leaf not in known:
                raise ConfigError(f"unknown config key {key!r}")
        value = _parse_value(text.strip())
        if isinstance(value, int) and not isinstance(value, bool) and isinstance(target.get(leaf), float):
            value = float(value)
        target[leaf] = value
    return from_dict(data)


def default_config(**sections):
    """Default configuration with optional per-section replacements."""
    cfg = RunConfig()
    for name, kw in sections.items():
        setattr(cfg, name, replace(getattr(cfg, name), **kw))
    return validate(cfg)
