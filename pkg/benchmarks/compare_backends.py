"""Time the compiled kernels against the NumPy fallback.

Runs the same solves (same instance, same start) through each importable
backend's ``run`` loop and reports the median wall time per solve and per
iteration, plus the speedup of the compiled backend.

    python3 benchmarks/compare_backends.py --sizes 16,64,256 --repeats 5
"""

import argparse
import statistics

import numpy as np

from msprox import Method, StepRule
from msprox._backend import available
from msprox._rng import derive_seed
from msprox.bench import sample_instance
from msprox.canonical import warm_start


def time_solves(kernels, inst, method, step, repeats, max_iter):
    x0 = np.ascontiguousarray(warm_start(inst))
    times, iters = [], None
    for _ in range(repeats):
        out = kernels.run(inst.sigma, inst.u, inst.b, x0, method.value, step.value, 1e-6, max_iter, False, 0.0)
        times.append(out[-1])
        iters = out[3]
    return statistics.median(times), iters


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="16,64,256,1024")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--max-iter", type=int, default=2000, help="iteration cap, keeps gradient descent short")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = available()
    if "cython" not in backends:
        print("compiled backend not built; only the fallback is available")
    sizes = [int(s) for s in args.sizes.split(",")]
    cases = [(Method.NEWTON_SM, StepRule.UNIT), (Method.NEWTON_DENSE, StepRule.UNIT),
             (Method.GRADIENT_DESCENT, StepRule.OPTIMAL)]

    header = f"{'n':>6} {'method':<17} {'backend':<8} {'iters':>6} {'solve [ms]':>11} {'per iter [us]':>14} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n in sizes:
        inst = sample_instance(n, 100.0, derive_seed(args.seed, n))
        for method, step in cases:
            if method is Method.NEWTON_DENSE and n > 1024:
                continue
            results = {name: time_solves(k, inst, method, step, args.repeats, args.max_iter)
                       for name, k in sorted(backends.items())}
            base = results["python"][0]
            for name, (t, k) in results.items():
                per = t / k * 1e6 if k else float("nan")
                print(f"{n:>6} {method.name:<17} {name:<8} {k:>6} {t * 1e3:>11.3f} {per:>14.2f} {base / t:>7.1f}x")


if __name__ == "__main__":
    main()
