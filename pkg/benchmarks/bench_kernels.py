"""Time the pure-numpy kernels against their numba twins.

    python3 benchmarks/bench_kernels.py            # default sizes
    python3 benchmarks/bench_kernels.py --quick    # small sizes, a few seconds

Each line reports the best of ``--repeat`` runs after one warm-up call (which
also triggers JIT compilation), and checks that both backends agree.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from fragility import _kernels as K


def cases(quick: bool, rng: np.random.Generator):
    dims = [8, 12] if quick else [8, 12, 16, 20]
    for n in dims:
        v = rng.random(n)
        yield "subset_sums", n, (v,)
        yield "subset_maxes", n, (v,)
        yield "subset_zeta", n, (rng.normal(size=1 << n),)
        yield "iid_uniform_subset_max", n, (v * (rng.random(n) > 0.2),)
    rows = [1_000, 20_000] if quick else [1_000, 20_000, 200_000]
    for n_rows in rows:
        for n in (6, 10):
            z = rng.random((n_rows, n))
            yield "weighted_subset_max", f"{n_rows}x{n}", (z, np.full(n_rows, 1.0 / n_rows), rng.random(n))
    for n_rows in ([100_000] if quick else [100_000, 1_000_000]):
        exceed = rng.random((n_rows, 8)) < 0.7
        yield "run_lengths", f"{n_rows}x8", (exceed, 1)


def best(fn, args, repeat: int) -> float:
    fn(*args)
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<24}{'size':>14}{'numpy [ms]':>14}{'numba [ms]':>14}{'speedup':>10}")
    for name, size, call_args in cases(args.quick, rng):
        f_np, f_nb = getattr(K, name + "_np"), getattr(K, name + "_nb")
        a, b = f_np(*call_args), f_nb(*call_args)
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name} at size {size}: backends disagree")
        t_np = best(f_np, call_args, args.repeat)
        t_nb = best(f_nb, call_args, args.repeat)
        print(f"{name:<24}{size!s:>14}{t_np * 1e3:>14.4f}{t_nb * 1e3:>14.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
