"""Time the compiled chain kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Reports microseconds per call for value+gradient and the B matvec at a few
dimensions, plus GD queries per second on the CI instance for each backend.
"""

import argparse
import timeit

import numpy as np

from plhl import instance as I
from plhl import kernels
from plhl.optimizers import CountingOracle, OptimizerConfig, run_gd


def per_call(fn, repeat):
    number = max(1, repeat)
    return min(timeit.repeat(fn, number=number, repeat=5)) / number * 1e6


def gd_rate(backend, queries=20_000):
    shape = I.chain_shape(2, 20)
    inst = I.make_instance(shape)
    y, a = inst.y, I.coupling(shape)

    def oracle(x):
        value, grad = kernels.chain_value_grad(y - inst.s * x, y, a, backend=backend)
        return inst.c * value, -inst.c * inst.s * grad

    cfg = OptimizerConfig("gd", inst.L, inst.mu_claimed, queries, 1e-300)
    t = timeit.default_timer()
    run_gd(CountingOracle(oracle, inst.dim), cfg, np.zeros(inst.dim))
    return queries / (timeit.default_timer() - t)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=2000)
    args = parser.parse_args()
    backends = ["python"] + (["compiled"] if kernels._ckernels is not None else [])
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'dim':>8} {'kernel':>16} " + " ".join(f"{b + ' us':>14}" for b in backends) + f" {'speedup':>8}")
    rng = np.random.default_rng(0)
    # deeper chains drive y into subnormals, which no backend handles fast
    for T, t in [(2, 20), (2, 350), (10, 694), (100, 694)]:
        shape = I.chain_shape(T, t)
        y, a = I.reference_vector(shape), I.coupling(shape)
        u = y * rng.uniform(0.9, 1.1, shape.dim)
        reps = max(10, args.repeat * 40 // shape.dim)
        for name, call in (("value_grad", kernels.chain_value_grad), ("b_matvec", None)):
            times = []
            for b in backends:
                if call is None:
                    times.append(per_call(lambda: kernels.b_matvec(u, a, backend=b), reps))
                else:
                    times.append(per_call(lambda: call(u, y, a, backend=b), reps))
            speed = f"{times[0] / times[-1]:8.1f}" if len(times) > 1 else f"{'n/a':>8}"
            print(f"{shape.dim:>8} {name:>16} " + " ".join(f"{x:14.2f}" for x in times) + f" {speed}")
    for b in backends:
        print(f"GD on T=2 t=20: {gd_rate(b):,.0f} queries/s ({b})")


if __name__ == "__main__":
    main()
