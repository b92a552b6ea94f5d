"""Compare the compiled and numpy radial-marginal kernels.

Usage::

    python benchmarks/bench_kernels.py [--n 20000] [--p 3] [--repeat 3]

Reports microseconds per radius for log m alone and with derivatives, and
the largest disagreement between the two backends.
"""

import argparse
import time

import numpy as np

from predkl import kernels

PRIORS = {
    "harmonic": lambda p: (kernels.POWER, float(p - 2), 0.0, float("inf")),
    "gaussian": lambda p: (kernels.GAUSSIAN, 0.0, 1.0, float("inf")),
    "blyth-uniform-n8": lambda p: (kernels.UNIFORM, 0.0, 0.0, 8.0),
}


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20000)
    parser.add_argument("--p", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    radii = np.linalg.norm(rng.standard_normal((args.n, args.p)) + np.eye(args.p)[0] * 2.0, axis=1)
    backends = kernels.backends()
    print(f"active backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    print(f"{'prior':<18}{'backend':<9}{'derivs':<8}{'us/radius':>10}{'speedup':>9}{'max |dlogm|':>13}")
    for name, make in PRIORS.items():
        code = make(args.p)
        for derivs in (False, True):
            timings, outputs = {}, {}
            for label, mod in backends.items():
                secs, out = best_time(
                    lambda: mod.radial_moments_coded(radii, 1.0, args.p, code, want_derivs=derivs),
                    args.repeat)
                timings[label] = secs / args.n * 1e6
                outputs[label] = out[0]
            for label in backends:
                speed = timings["python"] / timings[label]
                diff = np.max(np.abs(outputs[label] - outputs["python"]))
                print(f"{name:<18}{label:<9}{str(derivs):<8}{timings[label]:>10.2f}{speed:>9.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
