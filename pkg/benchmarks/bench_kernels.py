"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""

import argparse
import timeit

import numpy as np

from deepabc import _fallback
from deepabc.models.ising import acceptance_table

try:
    from deepabc import _kernels as compiled
except ImportError:
    compiled = None


def ising_case(chains, m, sweeps, seed=0):
    gen = np.random.default_rng(seed)
    spins = (2 * gen.integers(0, 2, size=(chains, m, m)) - 1).astype(np.int8)
    visits = sweeps * m * m
    sites = gen.integers(0, m * m, size=(chains, visits), dtype=np.int32)
    uniforms = gen.random((chains, visits))
    accept = acceptance_table(gen.exponential(1 / 0.4406, chains))
    return spins, sites, uniforms, accept


def ma2_case(n, p, seed=0):
    gen = np.random.default_rng(seed)
    x = gen.standard_normal(p)
    theta = np.column_stack([gen.uniform(-0.9, 0.9, n), gen.uniform(-0.4, 0.4, n)])
    return x, theta


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; only the fallback is available")

    cases = []
    for chains, m, sweeps in [(1, 10, 50), (64, 10, 20), (512, 3, 200)]:
        spins, sites, uniforms, accept = ising_case(chains, m, sweeps)
        name = f"ising_sweeps  chains={chains:<4d} m={m:<3d} sweeps={sweeps}"
        cases.append((name, lambda impl, s=spins, a=sites, u=uniforms, t=accept:
                      impl.ising_sweeps(s.copy(), a, u, t)))
    for n, p in [(1000, 100), (40_000, 100)]:
        x, theta = ma2_case(n, p)
        cases.append((f"ma2_loglik    thetas={n:<6d} p={p}",
                      lambda impl, x=x, t=theta: impl.ma2_loglik_batch(x, t)))

    print(f"{'kernel':<44s} {'cython (s)':>11s} {'numpy (s)':>11s} {'speedup':>8s}")
    for name, fn in cases:
        t_py = best_of(lambda: fn(_fallback), args.repeat)
        if compiled is None:
            print(f"{name:<44s} {'-':>11s} {t_py:11.4f} {'-':>8s}")
            continue
        t_c = best_of(lambda: fn(compiled), args.repeat)
        print(f"{name:<44s} {t_c:11.4f} {t_py:11.4f} {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
