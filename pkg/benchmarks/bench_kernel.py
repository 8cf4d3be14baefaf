"""Benchmark the compiled sampling kernel against the pure-Python fallback.

Builds the 10,000-authorship / 50-terminal-field synthetic corpus used by
the performance acceptance test, runs one chain per kernel flavor over a
range of iteration counts, and prints wall times plus the speedup.  Also
verifies that both kernels produce bit-identical traces.

Usage: python benchmarks/bench_kernel.py [--iterations N] [--quick]
"""

import argparse
import time

import numpy as np

from homophily import ChainPlan, SynthSpec, build_swap_matrix, generate_corpus
from homophily._kernels import HAVE_COMPILED
from homophily.sampler import run_chain


def benchmark_corpus(papers_per_field=70):
    hier, flows = [], []
    for g in range(10):
        top = f"T{g}"
        hier.append((top, None))
        group = []
        for k in range(5):
            fid = f"F{g}{k}"
            hier.append((fid, top))
            group.append(fid)
        for i, fid in enumerate(group):
            flows.append((fid, fid, 0.8))
            flows.append((fid, group[(i + 1) % 5], 0.2))
    spec = SynthSpec(
        hierarchy=tuple(hier),
        papers_per_field=papers_per_field,
        paper_sizes=(2, 3, 4, 2, 3, 4, 2, 3),
        female_share=0.4,
        homophily=0.0,
        seed=77,
        flows=tuple(flows),
    )
    return generate_corpus(spec)


def time_chain(corpus, swap, iterations, kernel, seed=101):
    plan = ChainPlan(iterations=iterations, burn_in=iterations // 3, seed=seed)
    t0 = time.perf_counter()
    run = run_chain(corpus, swap, plan, kernel=kernel)
    return time.perf_counter() - t0, run


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--iterations", type=int, default=45_000)
    parser.add_argument("--quick", action="store_true", help="smaller corpus and chains")
    args = parser.parse_args()

    corpus = benchmark_corpus(papers_per_field=20 if args.quick else 70)
    swap = build_swap_matrix(corpus)
    print(
        f"corpus: {corpus.n_authorships} authorships, {corpus.n_papers} papers, "
        f"{len(corpus.hierarchy.leaves)} terminal fields"
    )
    if not HAVE_COMPILED:
        print("compiled kernel unavailable; benchmarking pure kernel only")

    steps = [args.iterations // 9, args.iterations // 3, args.iterations]
    print(f"{'iterations':>12} {'compiled (s)':>14} {'pure (s)':>12} {'speedup':>9}")
    for n in steps:
        t_pure, run_pure = time_chain(corpus, swap, n, "pure")
        if HAVE_COMPILED:
            t_comp, run_comp = time_chain(corpus, swap, n, "compiled")
            identical = np.array_equal(run_comp.trace, run_pure.trace, equal_nan=True)
            print(
                f"{n:>12} {t_comp:>14.3f} {t_pure:>12.3f} {t_pure / t_comp:>8.1f}x"
                + ("" if identical else "  TRACES DIFFER!")
            )
        else:
            print(f"{n:>12} {'-':>14} {t_pure:>12.3f} {'-':>9}")
    if HAVE_COMPILED:
        rate = run_comp.acceptance["rate"]
        print(f"acceptance rate {rate:.3f}, stay fraction {run_comp.stay_fraction:.3f}")


if __name__ == "__main__":
    main()
