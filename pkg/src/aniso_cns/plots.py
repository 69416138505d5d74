"""Optional SVG figures (needs matplotlib)."""
import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - optional extra
        raise RuntimeError("plots need matplotlib (pip install aniso-cns[plots])") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def energy_traces(series, path, zeta=None):
    """Log-log traces of E, E_tan and E_bar_tan against 1 + t."""
    plt = _pyplot()
    t = series.t
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in ("E", "E_tan", "E_bar_tan"):
        y = series.column(name)
        ok = y > 0
        ax.loglog(1 + t[ok], y[ok], label=name)
    ax.set_xlabel("1 + t")
    ax.set_ylabel("energy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def sweep_curve(table, path):
    """Distance to the eps = 0 run against eps."""
    plt = _pyplot()
    eps = np.array([r[0] for r in table.rows])
    d = np.array([r[1] for r in table.rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ok = (eps > 0) & (d > 0)
    ax.loglog(eps[ok], d[ok], "o-")
    ax.set_xlabel("eps")
    ax.set_ylabel("sup_t distance")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path
