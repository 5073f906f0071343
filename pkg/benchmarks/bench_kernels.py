"""Time the numba kernels against the numpy reference backend.

Usage: python benchmarks/bench_kernels.py [--n 4096] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from loewner_lab.driving import make_family
from loewner_lab.flow import DiscretizedFlow
from loewner_lab.kernels import HAVE_NUMBA, get_backend
from loewner_lab.slit import RK4_SUBSTEPS


def cases(n):
    lam = make_family("midpoint-random", {"sigma": 0.5, "seed": 1})
    flow = DiscretizedFlow.from_driving(lam, n, "uniform")
    c, d = flow.driving_values, flow.increments
    table = np.ascontiguousarray(flow.driving_table(lam, RK4_SUBSTEPS))
    z = (np.linspace(-1, 1, 256) + 2.5j).astype(np.complex128)
    return {
        "compose_tips": lambda k: k.compose_tips(c, d),
        "reverse_ode_tips": lambda k: k.reverse_ode_tips(table, d, RK4_SUBSTEPS),
        "inverse_points": lambda k: k.inverse_points(z, c, d),
        "forward_points": lambda k: k.forward_points(z, c, d, 1e-12),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {"numpy": get_backend("numpy")}
    if HAVE_NUMBA:
        backends["numba"] = get_backend("numba")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.n).items():
        best = {}
        for b, k in backends.items():
            fn(k)  # warm-up (JIT compile)
            best[b] = min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
        row = f"{name:<18}" + "".join(f"{best[b] * 1e3:>10.2f}ms" for b in backends)
        if "numba" in best:
            row += f"{best['numpy'] / best['numba']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
