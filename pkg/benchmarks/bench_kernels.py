"""Compare the numba kernels with their numpy twins.

    python benchmarks/bench_kernels.py [--n 32 32 64] [--repeat 20]

Prints the median time per call for the vertical stencils, the full
tendency and one RK4 step under each backend, and the largest difference
between the two tendencies.
"""
import argparse
import statistics
import time

import numpy as np

from aniso_cns import dynamics, initial, kernels
from aniso_cns._backend import HAVE_NUMBA, set_backend
from aniso_cns.grid import build_grid


def timeit(fn, repeat):
    fn()  # warm up (JIT compilation)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts)


def run(shape, repeat):
    g = build_grid(*shape)
    st = initial.random_smooth_state(g, seed=1, amplitude=1e-2)
    params = dynamics.SolverParams(eps=0.1)
    work = dynamics.Workspace(g)
    stepper = dynamics.RK4Stepper(g, params)
    cases = {
        "vertical_d1": lambda: kernels.vertical_d1(st.rho, g.dz, "one_sided"),
        "vertical_d2": lambda: kernels.vertical_d2(st.u1, g.dz, "even"),
        "tendency": lambda: dynamics.tendency_eqr(st, params, work=work),
        "rk4_step": lambda: stepper.step(st),
    }
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    table = {}
    tend = {}
    for b in backends:
        prev = set_backend(b)
        try:
            table[b] = {name: timeit(fn, repeat) for name, fn in cases.items()}
            tend[b] = dynamics.tendency_eqr(st, params).data.copy()
        finally:
            set_backend(prev)
    print(f"grid {shape}, median of {repeat}")
    print(f"{'kernel':<14}" + "".join(f"{b:>12}" for b in backends) + ("   speedup" if len(backends) > 1 else ""))
    for name in cases:
        row = f"{name:<14}" + "".join(f"{table[b][name] * 1e3:>10.3f}ms" for b in backends)
        if len(backends) > 1:
            row += f"   {table['numpy'][name] / table['numba'][name]:6.2f}x"
        print(row)
    if len(backends) > 1:
        print(f"max |numba - numpy| tendency: {np.abs(tend['numba'] - tend['numpy']).max():.3e}")
    return table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", nargs=3, type=int, default=[32, 32, 64], metavar=("NX", "NY", "NZ"))
    ap.add_argument("--repeat", type=int, default=20)
    a = ap.parse_args(argv)
    run(tuple(a.n), a.repeat)


if __name__ == "__main__":
    main()
