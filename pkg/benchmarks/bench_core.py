"""Compare the compiled and pure-numpy kernels.

    python3 benchmarks/bench_core.py [--repeat 5] [--size 400]

Times the three hot kernels directly on both backends, then one operator
application end to end in a subprocess per backend (the backend is fixed at
import, so the pure run sets HALFLINE_BVP_PURE=1).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from halfline_bvp import _pycore, backend

K, FREQ = 0.86, float(np.sqrt(4 * 0.35 - 0.86 ** 2))
XIS = np.array([0.0, 0.11])
ALPHAS = np.array([0.11, 0.89])
DENOM = 0.743896

END_TO_END = """
import time
from halfline_bvp import backend
from halfline_bvp.fixpoint import apply_T, zero_function
from halfline_bvp.kernel import GreenKernel, make_shift
from halfline_bvp.model import MultipointProblem
p = MultipointProblem([0.11, 0.89], [0.0, 0.11],
    "(2 + sin(t))/1000 * exp(-abs(x)) * abs(1 - x)/(x^2 + 1) * (y - 1)")
gk = GreenKernel(p, make_shift(0.86, 0.35, "{mode}"))
u = zero_function(p, 0.86, {size})
t0 = time.perf_counter()
u = apply_T(gk, p, u)
cold = time.perf_counter() - t0
t0 = time.perf_counter()
for _ in range({repeat}):
    u = apply_T(gk, p, u)
print(backend.NAME, cold, (time.perf_counter() - t0) / {repeat})
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(size, rng):
    t = np.sort(rng.uniform(0, 30, size))
    s = np.sort(rng.uniform(0, 30, size))
    nodes = np.concatenate([[0.0], np.cumsum(rng.uniform(0.01, 0.1, size - 1))])
    u, du = rng.normal(size=size), rng.normal(size=size)
    x = rng.uniform(0, nodes[-1] * 1.2, 20 * size)
    return {
        "kernel_matrix value": lambda m: m.kernel_matrix(_pycore.AS_PRINTED, _pycore.VALUE, t, s, K,
                                                         FREQ, XIS, ALPHAS, DENOM),
        "kernel_matrix d/dt": lambda m: m.kernel_matrix(_pycore.DERIVED, _pycore.DT_ANALYTIC, t, s,
                                                        K, FREQ, XIS, ALPHAS, DENOM),
        "interior_coef": lambda m: m.interior_coef(_pycore.DERIVED, np.repeat(s, 20), K, FREQ,
                                                   XIS, ALPHAS, DENOM),
        "hermite_eval": lambda m: m.hermite_eval(nodes, u, du, x, K / 2),
    }


def end_to_end(size, repeat, mode, pure):
    env = dict(os.environ)
    if pure:
        env["HALFLINE_BVP_PURE"] = "1"
    else:
        env.pop("HALFLINE_BVP_PURE", None)
    code = END_TO_END.format(size=size, repeat=repeat, mode=mode)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    name, cold, warm = out.stdout.split()
    return name, float(cold), float(warm)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=400, help="grid size / matrix side")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    compiled = backend.compiled
    if compiled is None:
        print("compiled extension not available; timing the numpy backend only")
    print(f"{'case':<24} {'numpy [ms]':>11} {'cython [ms]':>12} {'speedup':>8}")
    for name, fn in kernel_cases(args.size, rng).items():
        tp = best(lambda: fn(_pycore), args.repeat) * 1e3
        if compiled is None:
            print(f"{name:<24} {tp:>11.3f} {'-':>12} {'-':>8}")
            continue
        tc = best(lambda: fn(compiled), args.repeat) * 1e3
        print(f"{name:<24} {tp:>11.3f} {tc:>12.3f} {tp / tc:>7.2f}x")

    print()
    # the first application fills the kernel-block cache; later ones reuse it
    print(f"apply_T on {args.size} nodes: first call (cold cache), then mean of {args.repeat}")
    for mode in ("as_printed", "derived"):
        _, pc, pw = end_to_end(args.size, args.repeat, mode, pure=True)
        if compiled is None:
            print(f"  {mode:<11} numpy cold {pc * 1e3:8.1f} ms  warm {pw * 1e3:8.1f} ms")
            continue
        _, cc, cw = end_to_end(args.size, args.repeat, mode, pure=False)
        print(f"  {mode:<11} cold: numpy {pc * 1e3:8.1f} ms  cython {cc * 1e3:8.1f} ms  "
              f"({pc / cc:.2f}x)   warm: numpy {pw * 1e3:7.1f} ms  cython {cw * 1e3:7.1f} ms")


if __name__ == "__main__":
    main()
