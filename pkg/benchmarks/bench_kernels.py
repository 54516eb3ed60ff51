"""Time the compiled and numpy kernel backends side by side.

Usage: python3 benchmarks/bench_kernels.py [--cells 4096] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from radlimit import _pykernels, kernels
from radlimit.core import Params, make_grid, well_prepared_init
from radlimit.kinetic import KineticSolverConfig, advance, stable_dt
from radlimit.quadrature import build_quadrature

try:
    from radlimit import _ckernels
except ImportError:
    _ckernels = None


def bench(fn, repeat):
    fn()  # warm up
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(n, nq, rng):
    psi = rng.uniform(0.5, 2.0, (1, n, nq))
    vel = rng.uniform(-1, 1, nq)
    glo, ghi = psi[:, -1, :].copy(), psi[:, 0, :].copy()
    T = rng.uniform(0.5, 2.0, n)
    S = rng.uniform(0.0, 50.0, n)

    def upwind(mod):
        out = np.zeros_like(psi)
        return lambda: mod.upwind_accumulate(psi, vel, glo, ghi, 0.1, out)

    def relax(mod):
        return lambda: mod.relax_temperature(T, S, 100.0, 4 * np.pi, 1e-13, 50)

    return {"upwind_accumulate": upwind, "relax_temperature": relax}


def full_run(mod, n, steps):
    g = make_grid(1, [n], [1.0], [True])
    q = build_quadrature(8, 8)
    p = Params(0.1)
    cfg = KineticSolverConfig()
    dt = stable_dt(g, q, p, cfg)
    s0 = well_prepared_init(1 + 0.3 * np.sin(2 * np.pi * g.centers(0)), g, q.size)

    def go():
        saved = kernels.upwind_accumulate, kernels.relax_temperature
        kernels.upwind_accumulate, kernels.relax_temperature = mod.upwind_accumulate, mod.relax_temperature
        try:
            advance(s0, steps * dt, p, KineticSolverConfig(dt_override=dt), q)
        finally:
            kernels.upwind_accumulate, kernels.relax_temperature = saved
    return go


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = {"python": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled extension not built; timing the numpy backend only")

    cases = kernel_cases(args.cells, 64, np.random.default_rng(0))
    rows = []
    for name, make in cases.items():
        rows.append((name, {b: bench(make(m), args.repeat) for b, m in backends.items()}))
    rows.append((f"advance {args.steps} steps",
                 {b: bench(full_run(m, args.cells, args.steps), max(1, args.repeat // 2))
                  for b, m in backends.items()}))

    print(f"{'case':<24}" + "".join(f"{b:>12}" for b in backends) + "   speedup")
    for name, t in rows:
        line = f"{name:<24}" + "".join(f"{t[b] * 1e3:10.2f}ms" for b in backends)
        if "cython" in t:
            line += f"   {t['python'] / t['cython']:.1f}x"
        print(line)


if __name__ == "__main__":
    main()
