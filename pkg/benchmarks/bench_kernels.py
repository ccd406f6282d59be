"""Compare the compiled row-projection kernels against the pure fallback.

Times the batch simplex projection over all rows of random graphs and a
full policy solve, for both backends, and prints a small table.

Run:  python3 benchmarks/bench_kernels.py [--sizes 200,500,1000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sparsepaths import loads_edge_list, reference_probabilities
from sparsepaths import rsp_tsallis
from sparsepaths._kernels import _core, _pure


def random_graph_text(n: int, extra: int, rng) -> str:
    """Strongly connected: a directed cycle plus random extra arcs."""
    lines = []
    seen = set()
    for i in range(n):
        j = (i + 1) % n
        seen.add((i, j))
        lines.append(f"v{i}\tv{j}\t1.0\t{rng.uniform(1.0, 10.0):.6f}")
    while len(seen) < n + extra:
        i, j = rng.integers(n, size=2)
        if i == j or (i, j) in seen:
            continue
        seen.add((int(i), int(j)))
        lines.append(f"v{i}\tv{j}\t1.0\t{rng.uniform(1.0, 10.0):.6f}")
    return "\n".join(lines)


def time_rows(backend, g, ref, r, T, repeat) -> float:
    lam = np.zeros(g.n)
    aug = g.cost + lam[g.indices]
    out = np.empty_like(g.cost)
    backend.policy_rows(aug, ref.data, g.indptr, r, T, g.n - 1, out)  # warm
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        backend.policy_rows(aug, ref.data, g.indptr, r, T, g.n - 1, out)
        best = min(best, time.perf_counter() - t0)
    return best


def time_policy(backend, g, ref, r, T, repeat) -> float:
    saved = rsp_tsallis._kernels.policy_rows
    rsp_tsallis._kernels.policy_rows = backend.policy_rows
    try:
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            rsp_tsallis.tsallis_policy_iterate(g, ref, g.n - 1, r=r, T=T)
            best = min(best, time.perf_counter() - t0)
        return best
    finally:
        rsp_tsallis._kernels.policy_rows = saved


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="200,500,1000",
                        help="comma-separated node counts")
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--r", type=float, default=2.0)
    parser.add_argument("--T", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    if _core is None:
        parser.error("compiled kernels are not built; reinstall the package")
    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)

    print(f"{'n':>6} {'arcs':>8} {'task':<12} "
          f"{'pure (ms)':>11} {'compiled (ms)':>14} {'speedup':>8}")
    for n in sizes:
        g = loads_edge_list(random_graph_text(n, 4 * n, rng))
        ref = reference_probabilities(g, "uniform")
        for task, fn in (("row batch", time_rows), ("policy", time_policy)):
            tp = fn(_pure, g, ref, args.r, args.T, args.repeat)
            tc = fn(_core, g, ref, args.r, args.T, args.repeat)
            print(f"{n:>6} {g.num_edges:>8} {task:<12} "
                  f"{tp * 1e3:>11.3f} {tc * 1e3:>14.3f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
