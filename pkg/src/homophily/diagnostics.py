"""Chain convergence checks via two-sample Kolmogorov-Smirnov tests.

Sampled assortativity traces are discrete, so the asymptotic KS
distribution is unreliable; p-values are bootstrapped instead by
resampling the pooled sample.  The default scheme draws without
replacement into groups of the original sizes (a permutation test);
with-replacement resampling is available by flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_REPS = 1000


def ks_statistic(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """D = sup |ECDF_a - ECDF_b| over the pooled support."""
    a = np.sort(np.asarray(sample_a, dtype=float))
    b = np.sort(np.asarray(sample_b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_two_sample(
    sample_a: np.ndarray,
    sample_b: np.ndarray,
    bootstrap_reps: int = DEFAULT_REPS,
    seed: int | np.random.Generator = 0,
    replace: bool = False,
) -> tuple[float, float]:
    """(D, bootstrap p-value): fraction of pooled-resample D* >= D."""
    if bootstrap_reps < 1:
        raise ValueError("bootstrap_reps must be >= 1")
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    d_obs = ks_statistic(a, b)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(
        np.random.PCG64(seed)
    )
    pooled = np.concatenate([a, b])
    n_a = a.size
    hits = 0
    for _ in range(bootstrap_reps):
        if replace:
            res_a = pooled[rng.integers(0, pooled.size, n_a)]
            res_b = pooled[rng.integers(0, pooled.size, b.size)]
        else:
            perm = rng.permutation(pooled.size)
            res_a = pooled[perm[:n_a]]
            res_b = pooled[perm[n_a:]]
        if ks_statistic(res_a, res_b) >= d_obs - 1e-12:
            hits += 1
    return d_obs, hits / bootstrap_reps


def ks_uniform_pvalue(pvalues: Sequence[float]) -> float:
    """One-sample KS against U(0,1), asymptotic (Stephens approximation)."""
    x = np.sort(np.asarray(pvalues, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("no p-values supplied")
    upper = np.arange(1, n + 1) / n - x
    lower = x - np.arange(0, n) / n
    d = float(max(upper.max(), lower.max()))
    en = math.sqrt(n)
    t = (en + 0.12 + 0.11 / en) * d
    total = 0.0
    for k in range(1, 101):
        term = 2.0 * (-1) ** (k - 1) * math.exp(-2.0 * k * k * t * t)
        total += term
        if abs(term) < 1e-12:
            break
    return min(1.0, max(0.0, total))


@dataclass
class KSReport:
    rows: list[dict]
    uniformity_p: float
    approximately_uniform: bool
    reps: int
    uniformity_threshold: float = 0.01

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("field_id\tchain_a\tchain_b\tD\tp_boot\treps\n")
            for row in self.rows:
                fh.write(
                    f"{row['field_id']}\t{row['chain_a']}\t{row['chain_b']}"
                    f"\t{row['D']!r}\t{row['p_boot']!r}\t{self.reps}\n"
                )

    def scatter_data(self) -> dict:
        return {
            "pvalues": [row["p_boot"] for row in self.rows],
            "uniformity_p": self.uniformity_p,
            "approximately_uniform": self.approximately_uniform,
        }


def compare_chains(
    runs: Sequence,
    fields: Sequence[str] | None = None,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    uniformity_threshold: float = 0.01,
    thin: int = 1,
) -> KSReport:
    """KS-compare every chain pair on every requested field.

    The summary flag checks whether the collected bootstrap p-values look
    approximately uniform, as expected when the chains have converged to
    a common distribution.  The permutation bootstrap assumes exchangeable
    draws; ``thin`` subsamples each trace first so that autocorrelated
    chains do not trip the test spuriously.
    """
    if len(runs) < 2:
        raise ValueError("need at least two chains to compare")
    if thin < 1:
        raise ValueError("thin must be >= 1")
    base = runs[0].plan
    for r in runs[1:]:
        if not base.equivalent(r.plan):
            raise ValueError("chains were run with different plans")
    node_ids = runs[0].node_ids
    if fields is None:
        fields = node_ids
    rng = np.random.Generator(np.random.PCG64(seed))
    rows = []
    for fid in fields:
        traces = [r.trace_for(fid)[::thin] for r in runs]
        mapped = [np.where(np.isnan(t), 1.0, t) for t in traces]
        for i in range(len(runs)):
            for j in range(i + 1, len(runs)):
                d, p = ks_two_sample(mapped[i], mapped[j], reps, rng)
                rows.append(
                    {"field_id": fid, "chain_a": i, "chain_b": j, "D": d, "p_boot": p}
                )
    pvals = [row["p_boot"] for row in rows]
    up = ks_uniform_pvalue(pvals) if len(pvals) > 1 else 1.0
    return KSReport(
        rows=rows,
        uniformity_p=up,
        approximately_uniform=up > uniformity_threshold,
        reps=reps,
        uniformity_threshold=uniformity_threshold,
    )
