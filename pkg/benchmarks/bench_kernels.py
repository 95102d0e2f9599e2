"""Time visibility and kernel assembly on the compiled and numpy backends.

    python benchmarks/bench_kernels.py --sizes 50 100 200 400 --repeats 3
"""

import argparse
import time

import numpy as np

from radcone.kernels import available_backends, get_backend
from radcone.scenes import random_scene


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[50, 100, 200, 400])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    names = available_backends()
    if "cython" not in names:
        print("compiled extension not built; timing the numpy backend only")
    print(f"{'patches':>8} " + " ".join(f"{n + ' vis [s]':>16} {n + ' K [s]':>14}" for n in names)
          + ("   speedup" if len(names) > 1 else ""))
    for n in args.sizes:
        s = random_scene(np.random.default_rng([args.seed, n]), n, rowsum_limit=1.0)
        row, totals, ref = [], {}, None
        for name in names:
            b = get_backend(name)
            tv, vis = best_of(lambda: b.visibility_matrix(s.centers, s.edges_u, s.edges_v, 1e-9), args.repeats)
            tk, k = best_of(lambda: b.kernel_matrix(s.centers, s.normals, s.areas, vis), args.repeats)
            if ref is None:
                ref = (vis, k)
            else:
                assert np.array_equal(vis, ref[0]), "backends disagree on visibility"
                np.testing.assert_allclose(k, ref[1], rtol=1e-12, atol=1e-300)
            totals[name] = tv + tk
            row.append(f"{tv:16.4f} {tk:14.4f}")
        line = f"{n:8d} " + " ".join(row)
        if len(names) > 1:
            line += f"   {totals['python'] / totals['cython']:7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
