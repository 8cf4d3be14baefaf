"""Hypothesis testing over sampled null traces.

Empirical p-values count the proportion of null draws at least as large
as the observed assortativity; samples where a field lost one gender
entirely are treated as the maximal value 1, which can only make tests
more conservative.  Multiplicity is controlled over a single joint
family across all hierarchy levels with Benjamini-Hochberg or
Benjamini-Yekutieli step-up adjustment.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import metrics
from .corpus import Corpus, Paper, build_corpus, is_cleaned, ROOT_FIELD_ID
from .flow import SwapMatrix, build_swap_matrix_from_flows
from .sampler import ChainPlan, ChainRun, run_chains

PROCEDURES = ("BH", "BY")


def _mapped(trace: np.ndarray) -> np.ndarray:
    """Undefined samples (NaN) enter the test as alpha = 1."""
    arr = np.asarray(trace, dtype=float)
    if arr.size == 0:
        raise ValueError("empty trace")
    return np.where(np.isnan(arr), 1.0, arr)


def empirical_pvalue(
    observed_alpha: float | None, trace: np.ndarray, plus_one: bool = False
) -> float:
    """Proportion of null draws >= the observed value.

    ``observed_alpha`` may be None (undefined observed field), which is
    compared as 1.  ``plus_one`` adds the observed configuration to both
    numerator and denominator; the default is the plain proportion.
    """
    mapped = _mapped(trace)
    obs = 1.0 if observed_alpha is None else observed_alpha
    count = int(np.sum(mapped >= obs))
    if plus_one:
        return (count + 1) / (mapped.size + 1)
    return count / mapped.size


def expected_alpha(trace: np.ndarray) -> float:
    """Mean of the null trace, undefined entries mapped to 1."""
    return float(np.mean(_mapped(trace)))


def fdr_adjust(
    pvalues: Sequence[float], procedure: str = "BY", rate: float = 0.05
) -> tuple[np.ndarray, np.ndarray]:
    """Step-up adjusted p-values and rejections at the target rate.

    BH: adjusted p_(k) = cummin over k..m of p_(k) m / k, capped at 1.
    BY: the same after inflating by c(m) = sum_{i<=m} 1/i, valid under
    arbitrary dependence.  Reject where adjusted <= rate.
    """
    if procedure not in PROCEDURES:
        raise ValueError(f"procedure must be one of {PROCEDURES}")
    if not (0.0 < rate < 1.0):
        raise ValueError(f"rate must be in (0, 1), got {rate}")
    p = np.asarray(pvalues, dtype=float)
    if p.size == 0:
        return np.zeros(0), np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    c_m = sum(1.0 / i for i in range(1, m + 1)) if procedure == "BY" else 1.0
    order = np.argsort(p, kind="stable")
    scaled = p[order] * c_m * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted_sorted = np.minimum(adjusted_sorted, 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adjusted_sorted
    return adjusted, adjusted <= rate


@dataclass
class FieldResult:
    field_id: str
    level: str
    observed_alpha: float | None
    expected_alpha: float
    raw_p: float
    adjusted_p: float
    significant: bool
    fm_observed: float | None = None
    fm_expected: float | None = None
    n_female: int = 0
    n_male: int = 0

    def as_dict(self) -> dict:
        return {
            "field_id": self.field_id,
            "level": self.level,
            "observed_alpha": self.observed_alpha,
            "expected_alpha": self.expected_alpha,
            "raw_p": self.raw_p,
            "adjusted_p": self.adjusted_p,
            "significant": self.significant,
            "fm_observed": self.fm_observed,
            "fm_expected": self.fm_expected,
            "n_female": self.n_female,
            "n_male": self.n_male,
        }


@dataclass
class TestSuiteResult:
    __test__ = False  # not a pytest class despite the name

    results: list[FieldResult]
    procedure: str
    rate: float
    n_samples: int
    counts_by_level: dict[str, tuple[int, int]] = dc_field(default_factory=dict)

    def result_for(self, field_id: str) -> FieldResult:
        for r in self.results:
            if r.field_id == field_id:
                return r
        raise KeyError(f"no result for field {field_id!r}")

    def significant_fields(self) -> list[str]:
        return [r.field_id for r in self.results if r.significant]

    def fraction_significant(self, level: str) -> float:
        sig, total = self.counts_by_level.get(level, (0, 0))
        return sig / total if total else 0.0

    def as_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "rate": self.rate,
            "n_samples": self.n_samples,
            "counts_by_level": {
                k: list(v) for k, v in self.counts_by_level.items()
            },
            "results": [r.as_dict() for r in self.results],
        }

    def save_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.as_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load_json(cls, path: str | Path) -> "TestSuiteResult":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        results = [FieldResult(**r) for r in data["results"]]
        return cls(
            results=results,
            procedure=data["procedure"],
            rate=data["rate"],
            n_samples=data["n_samples"],
            counts_by_level={k: tuple(v) for k, v in data["counts_by_level"].items()},
        )


def pooled_traces(runs: Sequence[ChainRun]) -> tuple[tuple[str, ...], np.ndarray]:
    """Concatenate post-burn-in traces across chains (samples x nodes)."""
    if not runs:
        raise ValueError("no chain runs supplied")
    node_ids = runs[0].node_ids
    for r in runs[1:]:
        if r.node_ids != node_ids:
            raise ValueError("chains track different field sets")
    return node_ids, np.concatenate([r.trace for r in runs], axis=0)


def run_full_test(
    corpus: Corpus,
    swap: SwapMatrix,
    plans: Sequence[ChainPlan] | None = None,
    runs: Sequence[ChainRun] | None = None,
    procedure: str = "BY",
    rate: float = 0.05,
    family: str = "joint",
    include_root: bool = True,
    plus_one: bool = False,
    workers: int = 1,
    kernel: str | None = None,
) -> TestSuiteResult:
    """Full multilevel test: sample (or reuse) chains, pool post-burn-in
    traces, compute per-field p-values, adjust jointly, attach FM columns.
    """
    if not is_cleaned(corpus):
        raise ValueError("corpus must be cleaned before testing")
    if runs is None:
        if not plans:
            raise ValueError("either plans or precomputed runs are required")
        runs = run_chains(corpus, swap, list(plans), workers=workers, kernel=kernel)
    node_ids, trace = pooled_traces(runs)
    hierarchy = corpus.hierarchy

    tested: list[str] = []
    for nid in node_ids:
        if nid == ROOT_FIELD_ID and not include_root:
            continue
        tested.append(nid)

    observed: dict[str, metrics.AlphaResult] = {}
    for nid in tested:
        observed[nid] = metrics.compute_alpha(corpus, field_id=nid)

    raw_p: dict[str, float] = {}
    exp_a: dict[str, float] = {}
    for nid in tested:
        col = trace[:, node_ids.index(nid)]
        res = observed[nid]
        raw_p[nid] = empirical_pvalue(
            res.alpha if res.defined else None, col, plus_one=plus_one
        )
        exp_a[nid] = expected_alpha(col)

    levels = {nid: hierarchy.level_tag(nid) for nid in tested}
    if family == "joint":
        groups = {"all": tested}
    elif family == "per_level":
        groups = {}
        for nid in tested:
            groups.setdefault(levels[nid], []).append(nid)
    else:
        raise ValueError("family must be 'joint' or 'per_level'")

    adjusted: dict[str, float] = {}
    significant: dict[str, bool] = {}
    for members in groups.values():
        adj, rej = fdr_adjust([raw_p[nid] for nid in members], procedure, rate)
        for nid, a, r in zip(members, adj, rej):
            adjusted[nid] = float(a)
            significant[nid] = bool(r)

    def fm_or_none(alpha: float | None, pi: float) -> float | None:
        if alpha is None:
            return None
        try:
            return metrics.fm_decomposition(min(alpha, 1.0), pi).fm
        except ValueError:
            # alpha below the all-two-author floor for this pi
            return None

    results = []
    for nid in tested:
        res = observed[nid]
        fm_obs = fm_exp = None
        total = res.n_female + res.n_male
        if total and 0 < res.n_female < total:
            pi = res.n_female / total
            if res.defined:
                fm_obs = fm_or_none(float(res.alpha), pi)
            fm_exp = fm_or_none(exp_a[nid], pi)
        results.append(
            FieldResult(
                field_id=nid,
                level=levels[nid],
                observed_alpha=float(res.alpha) if res.defined else None,
                expected_alpha=exp_a[nid],
                raw_p=raw_p[nid],
                adjusted_p=adjusted[nid],
                significant=significant[nid],
                fm_observed=fm_obs,
                fm_expected=fm_exp,
                n_female=res.n_female,
                n_male=res.n_male,
            )
        )

    counts: dict[str, list[int]] = {}
    for r in results:
        bucket = counts.setdefault(r.level, [0, 0])
        bucket[0] += int(r.significant)
        bucket[1] += 1
    return TestSuiteResult(
        results=results,
        procedure=procedure,
        rate=rate,
        n_samples=trace.shape[0],
        counts_by_level={k: (v[0], v[1]) for k, v in counts.items()},
    )


def build_naive_null(
    corpus: Corpus, level: int, threshold: float = 0.05
) -> tuple[Corpus, SwapMatrix]:
    """Collapse every depth-``level`` subtree into one exchangeable pool.

    Fields shallower than ``level`` keep their structure; each node at
    that depth becomes a pseudo-terminal absorbing its subtree's papers,
    and citation flows are aggregated (weighted by source-field
    authorship counts) before the swap matrix is rebuilt.  Running the
    standard pipeline on the result tests structural homophily only.
    """
    hierarchy = corpus.hierarchy
    max_depth = hierarchy.max_depth()
    if not (1 <= level <= max_depth):
        raise ValueError(f"level must be in [1, {max_depth}], got {level}")

    # map each terminal field to its representative at the target depth
    rep: dict[str, str] = {}
    for leaf in hierarchy.leaves:
        chain = [leaf] + list(hierarchy.ancestors(leaf))
        node_level = hierarchy.node(leaf).level
        target = leaf
        if node_level > level:
            for nid in chain:
                if hierarchy.node(nid).level == level:
                    target = nid
                    break
        rep[leaf] = target

    kept_rows: list[tuple[str, str | None, int]] = []
    for fid in hierarchy.sorted_ids():
        node = hierarchy.node(fid)
        if fid == ROOT_FIELD_ID or node.level > level:
            continue
        parent = node.parent_id if node.parent_id != ROOT_FIELD_ID else None
        kept_rows.append((fid, parent, node.level))

    papers = [
        Paper(p.id, rep[p.terminal_field_id], p.year, ())
        for p in corpus.papers.values()
    ]
    authorships = list(corpus.authorships.values())

    weights: dict[str, int] = {leaf: 0 for leaf in hierarchy.leaves}
    for p in corpus.papers.values():
        weights[p.terminal_field_id] += len(p.authorship_ids)

    agg_num: dict[tuple[str, str], float] = {}
    for src, dst, prop in corpus.flows:
        w = float(weights.get(src, 0))
        if w <= 0:
            continue
        key = (rep[src], rep[dst])
        agg_num[key] = agg_num.get(key, 0.0) + w * prop
    # weight totals per representative source
    rep_weight: dict[str, float] = {}
    for leaf, r in rep.items():
        rep_weight[r] = rep_weight.get(r, 0.0) + float(weights.get(leaf, 0))
    flows = tuple(
        (src, dst, num / rep_weight[src])
        for (src, dst), num in sorted(agg_num.items())
        if rep_weight.get(src, 0.0) > 0
    )

    collapsed = build_corpus(
        papers, authorships, kept_rows, flows,
        provenance={**corpus.provenance, "naive_level": level},
    )
    swap = build_swap_matrix_from_flows(
        flows, collapsed.hierarchy.leaves, threshold=threshold
    )
    return collapsed, swap


def results_to_csv(suite: TestSuiteResult, corpus: Corpus, path: str | Path) -> None:
    """Result table, one row per field: observed/expected alpha and FM,
    raw and adjusted p, and significant/total descendant tallies."""
    hierarchy = corpus.hierarchy
    by_id = {r.field_id: r for r in suite.results}

    def tally(field_id: str, level: str) -> str:
        sig = total = 0
        for d in hierarchy.descendants(field_id):
            r = by_id.get(d)
            if r is not None and r.level == level:
                total += 1
                sig += int(r.significant)
        return f"{sig}/{total}" if total else ""

    def fmt(x, digits=6):
        return "" if x is None else f"{x:.{digits}g}"

    def display_p(raw: float) -> str:
        # a zero empirical p only bounds the true value by the sample count
        if raw == 0.0:
            return f"<{1.0 / suite.n_samples:.3g}"
        return fmt(raw)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "field\tlevel\tobs_alpha\texp_alpha\tfm_obs\tfm_exp\tp\tp_display"
            "\tadjusted_p\tsignificant\tsignif_terminal\tsignif_composite\n"
        )
        for r in suite.results:
            term = tally(r.field_id, "terminal") if r.level in ("root", "top") else ""
            comp = tally(r.field_id, "composite") if r.level in ("root", "top") else ""
            fh.write(
                "\t".join(
                    [
                        r.field_id,
                        r.level,
                        fmt(r.observed_alpha),
                        fmt(r.expected_alpha),
                        fmt(r.fm_observed, 4),
                        fmt(r.fm_expected, 4),
                        fmt(r.raw_p),
                        display_p(r.raw_p),
                        fmt(r.adjusted_p),
                        "1" if r.significant else "0",
                        term,
                        comp,
                    ]
                )
                + "\n"
            )


def histogram_json(
    suite: TestSuiteResult,
    runs: Sequence[ChainRun],
    field_id: str,
    bins: int = 40,
) -> dict:
    """Binned null trace plus the observed marker for one field."""
    node_ids, trace = pooled_traces(runs)
    col = _mapped(trace[:, node_ids.index(field_id)])
    hist, edges = np.histogram(col, bins=bins)
    r = suite.result_for(field_id)
    return {
        "field_id": field_id,
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in hist],
        "observed_alpha": r.observed_alpha,
        "expected_alpha": r.expected_alpha,
        "raw_p": r.raw_p,
    }


def tree_json(suite: TestSuiteResult, corpus: Corpus) -> dict:
    """Hierarchy tree with p-value shading and subtree sizes."""
    hierarchy = corpus.hierarchy
    by_id = {r.field_id: r for r in suite.results}
    sizes: dict[str, int] = {nid: 0 for nid in hierarchy.nodes}
    for p in corpus.papers.values():
        for nid in hierarchy.ancestors(p.terminal_field_id, include_self=True):
            sizes[nid] += len(p.authorship_ids)

    def node_json(nid: str) -> dict:
        r = by_id.get(nid)
        return {
            "field_id": nid,
            "level": hierarchy.level_tag(nid),
            "n_authorships": sizes[nid],
            "adjusted_p": r.adjusted_p if r else None,
            "significant": r.significant if r else None,
            "children": [node_json(c) for c in hierarchy.node(nid).children],
        }

    return node_json(ROOT_FIELD_ID)


def normal_sf(z: float) -> float:
    """Upper-tail standard normal probability."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))
