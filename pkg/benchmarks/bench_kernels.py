"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Kernel timings run in-process against both modules.  The end-to-end map
timing runs in a subprocess per backend so that ``ARRAYG2_PURE_PYTHON``
controls the selection exactly as it does for users.
"""

from __future__ import annotations

import argparse
import math
import os
import subprocess
import sys
import timeit

import numpy as np

from arrayg2 import _backend, chiral_chain, square_array

MAP_SNIPPET = """
import math, time, numpy as np
from arrayg2 import BACKEND, map_g2_zero, square_array
sc = square_array(a=0.1, theta=0.25 * math.pi, detuning=3.9)
dets = np.round(np.arange(-8, 8 + 1e-9, 0.05), 10)
ths = np.arange(128) * math.pi / 128
t0 = time.perf_counter()
map_g2_zero(sc, ("detuning", dets), ("theta", ths))
print(BACKEND, time.perf_counter() - t0)
"""


def _inputs(sc):
    s = sc.spectrum
    return s.eigenvalues, s.residues, sc.g_in, np.conj(sc.g_out)


def bench_kernels(repeat: int):
    names = _backend.available()
    cases = {"square": square_array(), "chain": chiral_chain()}
    omegas = np.linspace(-8, 8, 321)
    taus = np.arange(0, 60.0 + 1e-9, 0.02)
    rows = []
    for label, sc in cases.items():
        E, res, gin, ebar = _inputs(sc)
        out = {}
        for name in names:
            k = _backend.load(name)
            c, _ = k.c_constants_batch(E, res, gin, ebar, omegas)
            jobs = {
                "sigma_from_residues": lambda: k.sigma_from_residues(E, res, 0.6),
                "c_constants_batch": lambda: k.c_constants_batch(E, res, gin, ebar, omegas),
                "g2_from_constants": lambda: k.g2_from_constants(c[100], E, omegas[100], taus),
            }
            for job, fn in jobs.items():
                t = min(timeit.repeat(fn, number=20, repeat=repeat)) / 20
                out.setdefault(job, {})[name] = t
        for job, t in out.items():
            rows.append((label, job, t))
    return names, rows


def bench_map():
    times = {}
    for name in _backend.available():
        env = dict(os.environ)
        env.pop("ARRAYG2_PURE_PYTHON", None)
        if name == "python":
            env["ARRAYG2_PURE_PYTHON"] = "1"
        res = subprocess.run([sys.executable, "-c", MAP_SNIPPET], env=env, capture_output=True, text=True, check=True)
        backend, sec = res.stdout.split()
        times[backend] = float(sec)
    return times


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-map", action="store_true")
    args = ap.parse_args(argv)

    names, rows = bench_kernels(args.repeat)
    head = f"{'case':8s} {'kernel':22s}" + "".join(f"{n + ' [us]':>14s}" for n in names)
    if len(names) == 2:
        head += f"{'speedup':>10s}"
    print(head)
    for label, job, t in rows:
        line = f"{label:8s} {job:22s}" + "".join(f"{t[n] * 1e6:14.1f}" for n in names)
        if len(names) == 2:
            line += f"{t['python'] / t['cython']:10.2f}"
        print(line)

    if not args.skip_map:
        times = bench_map()
        print()
        print("321 x 128 detuning/theta map of g2(0):")
        for n, sec in times.items():
            print(f"  {n:8s} {sec:7.2f} s")
        if len(times) == 2 and math.isfinite(times["cython"]) and times["cython"] > 0:
            print(f"  speedup  {times['python'] / times['cython']:7.2f}x")


if __name__ == "__main__":
    main()
