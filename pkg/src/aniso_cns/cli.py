"""Command line front end.

Exit status: 0 success, 1 invalid input (bad verb, config or override),
2 runtime abort (instability or vacuum).
"""
import argparse
import json
import os
import sys
import warnings

from . import harness, inequalities, persist
from .config import EXPERIMENTS, default_config, load_config, save_config
from .errors import ConfigError, FitWindowError, InstabilityError, VacuumError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser():
    p = _Parser(prog="aniso-cns", description="Anisotropic compressible Navier-Stokes lab")
    sub = p.add_subparsers(dest="verb", metavar="verb")
    helps = {
        "simulate": "integrate one run and write series.csv + summary.json",
        "sweep-epsilon": "distances of eps runs to the eps = 0 run",
        "decay-fit": "fit the tangential decay of an existing series",
        "mms": "manufactured-solution convergence study",
        "ineq-bench": "inequality ratios over a random field corpus",
        "report": "collect the JSON results of an output directory",
    }
    for verb in EXPERIMENTS:
        sp = sub.add_parser(verb, help=helps[verb])
        sp.add_argument("--config", help="TOML run configuration (defaults if omitted)")
        sp.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. solver.eps=0.05 (repeatable)")
        sp.add_argument("--out", help="output directory (overrides out_dir)")
        sp.add_argument("--plots", action="store_true", help="also write SVG figures")
        sp.add_argument("--quiet", action="store_true", help="no progress records on stderr")
        if verb == "ineq-bench":
            sp.add_argument("--corpus", type=int, help="corpus size")
            sp.add_argument("--seed", type=int, help="corpus seed")
        if verb == "decay-fit":
            sp.add_argument("--series", help="series CSV (default: OUT/series.csv)")
    return p


def _progress(quiet):
    if quiet:
        return None

    def emit(rec):
        parts = []
        for k, v in rec.items():
            parts.append(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}")
        print("progress " + " ".join(parts), file=sys.stderr, flush=True)
    return emit


def _resolve(args):
    cfg = load_config(args.config) if args.config else default_config()
    extra = [f"experiment=\"{args.verb}\""]
    if args.out:
        extra.append(f"out_dir={json.dumps(args.out)}")
    if getattr(args, "corpus", None) is not None:
        extra.append(f"bench.corpus={args.corpus}")
    if getattr(args, "seed", None) is not None:
        extra.append(f"bench.seed={args.seed}")
    if args.plots:
        extra.append("output.plots=true")
    return cfg.with_overrides(list(args.overrides) + extra)


def _write_json(obj, out, name):
    return persist.write_summary(obj, os.path.join(out, name))


def cmd_simulate(cfg, out, progress):
    res = harness.run_simulation(cfg, out_dir=out, progress=progress)
    if cfg.output.plots:
        from . import plots
        plots.energy_traces(res.series, os.path.join(out, "energy.svg"))
    return res.summary


def cmd_sweep(cfg, out, progress):
    tab = harness.epsilon_sweep(cfg, progress=progress)
    _write_json(tab.to_dict(), out, "sweep.json")
    if cfg.output.plots:
        from . import plots
        plots.sweep_curve(tab, os.path.join(out, "sweep.svg"))
    return tab.to_dict()


def cmd_decay_fit(cfg, out, progress, series_path=None):
    path = series_path or os.path.join(out, "series.csv")
    if not os.path.exists(path):
        raise ConfigError(f"series file not found: {path} (run simulate first or pass --series)")
    series = persist.load_series(path, zeta=cfg.decay.zeta, m=cfg.decay.m, eps=cfg.solver.eps)
    fit = harness.fit_decay(series, cfg.fit.window)
    tails = harness.tail_fractions(series, t_tail=cfg.fit.window[1] * 0.8)
    out_d = {"decay_fit": fit.to_dict(), "tail_fractions": tails}
    _write_json(out_d, out, "decay_fit.json")
    return out_d


def cmd_mms(cfg, out, progress):
    rep = harness.mms_convergence(cfg, progress=progress)
    errs, ratios = harness.mms_temporal_order(cfg)
    d = {"spatial": rep.to_dict(), "temporal": {"errors": errs, "ratios": ratios}}
    _write_json(d, out, "mms.json")
    return d


def cmd_bench(cfg, out, progress):
    res = inequalities.run_bench(cfg.bench.corpus, cfg.bench.seed)
    inequalities.write_ratio_tables(res, out)
    summ = inequalities.bench_summary(res)
    reg = inequalities.check_regression(res)
    d = {"corpus": cfg.bench.corpus, "seed": cfg.bench.seed, "summary": summ,
         "regression": {k: {"max": v[0], "allowed": v[1], "ok": v[2]} for k, v in reg.items()}}
    _write_json(d, out, "bench.json")
    return d


def cmd_report(cfg, out, progress):
    rep = {}
    for name, key in (("summary.json", "run"), ("sweep.json", "convergence_table"),
                      ("decay_fit.json", "decay"), ("mms.json", "mms"), ("bench.json", "inequalities")):
        path = os.path.join(out, name)
        if os.path.exists(path):
            rep[key] = persist.load_summary(path)
    if "run" in rep:
        rep["bootstrap"] = rep["run"].get("bootstrap")
        rep.setdefault("decay", {"decay_fit": rep["run"].get("decay_fit")})
    rep["frozen_inequality_bounds"] = inequalities.regression_bounds()
    _write_json(rep, out, "report.json")
    return rep


def dispatch(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verb is None:
            raise UsageError(parser.format_usage() + "aniso-cns: error: a verb is required")
        cfg = _resolve(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    save_config(cfg, os.path.join(out, "config.toml"))
    progress = _progress(args.quiet)
    try:
        with warnings.catch_warnings():
            if args.quiet:
                warnings.simplefilter("ignore")
            if args.verb == "simulate":
                cmd_simulate(cfg, out, progress)
            elif args.verb == "sweep-epsilon":
                cmd_sweep(cfg, out, progress)
            elif args.verb == "decay-fit":
                cmd_decay_fit(cfg, out, progress, args.series)
            elif args.verb == "mms":
                cmd_mms(cfg, out, progress)
            elif args.verb == "ineq-bench":
                cmd_bench(cfg, out, progress)
            else:
                cmd_report(cfg, out, progress)
    except (ConfigError, FitWindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InstabilityError, VacuumError) as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    sys.exit(dispatch(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
