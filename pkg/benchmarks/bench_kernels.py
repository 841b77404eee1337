"""Time the compiled and NumPy kernel backends on builtin scenarios.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--scenarios fig3a fig5d fig7d]

Each backend integrates the same scenario; the script also checks that both
produce bit-identical trajectories.
"""
import argparse
import time

import numpy as np

from symcycle.kernels import backends
from symcycle.scenarios import get_scenario


def kernel_args(sc):
    spec, cfg = sc.spec, sc.config
    idx, start, stop, amp = sc.schedule._arrays()
    return (np.ascontiguousarray(spec.k1), np.ascontiguousarray(spec.k2),
            np.ascontiguousarray(spec.k3), spec.gen_index.astype(np.int64),
            spec.sup_index.astype(np.int64), np.array(sc.initial), cfg.dt, cfg.last_dt,
            cfg.n_steps, cfg.record_stride, idx, start, stop, amp, 1e12)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scenarios", nargs="+", default=["fig3a", "fig5d", "fig7d"])
    args = ap.parse_args(argv)

    found = backends()
    if "cython" not in found:
        print("compiled backend not built; run `python3 setup.py build_ext --inplace`")
    print(f"{'scenario':<10} {'steps':>8} " + " ".join(f"{b:>12}" for b in found) + "  speedup  identical")
    for name in args.scenarios:
        sc = get_scenario(name)
        a = kernel_args(sc)
        timings, outputs = {}, {}
        for bname, mod in found.items():
            timings[bname], outputs[bname] = best_of(lambda: mod.integrate(*a), args.repeat)
        cells = " ".join(f"{timings[b] * 1e3:10.1f}ms" for b in found)
        if "cython" in found:
            speed = f"{timings['python'] / timings['cython']:7.0f}x"
            same = np.array_equal(np.asarray(outputs["python"][0]), np.asarray(outputs["cython"][0]))
        else:
            speed, same = "      -", "-"
        print(f"{name:<10} {sc.config.n_steps:>8} {cells}  {speed}  {same}")


if __name__ == "__main__":
    main()
