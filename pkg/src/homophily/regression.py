"""Secondary analysis: which terminal-field traits track detected homophily.

Logistic regression fitted by iteratively reweighted least squares (with
a diagonal working covariance the point estimates are exactly the
ordinary logistic maximum likelihood), with cluster-robust sandwich
standard errors where clusters are top-level fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import Corpus, FEMALE, MALE
from .inference import TestSuiteResult, normal_sf

MAX_ITER = 50
TOL = 1e-8
SEPARATION_ETA = 30.0

COEF_NAMES = (
    "intercept",
    "solo_vs_multi_female_ratio",
    "log_authorships",
    "female_proportion",
    "majority_female",
    "female_proportion_x_majority",
)


@dataclass(frozen=True)
class TerminalCovariates:
    field_id: str
    top_field_id: str
    significant: int           # H: outcome indicator
    solo_multi_ratio: float    # R: % female among solo / % female among multi
    log_authorships: float     # S: log of the field's gendered authorships
    female_proportion: float   # F: female share over solo + multi authorships
    majority_female: int       # M: 1 when F > .5
    interaction: float         # F * M

    def row(self) -> list[float]:
        return [
            1.0,
            self.solo_multi_ratio,
            self.log_authorships,
            self.female_proportion,
            float(self.majority_female),
            self.interaction,
        ]


def build_covariates(
    corpus: Corpus, suite: TestSuiteResult
) -> tuple[list[TerminalCovariates], list[str]]:
    """One covariate row per terminal field, from the pre-exclusion corpus.

    ``corpus`` must be the post-imputation, pre-cleaning snapshot: solo
    papers and unassigned authorships are still present.  Solo/multi
    status uses the paper's full authorship count; percentages count
    gendered authorships only.  Fields whose solo-vs-multi ratio is
    undefined (no gendered solo authorships, or no gendered multi-author
    female share) are dropped and reported.
    """
    hierarchy = corpus.hierarchy
    per_field: dict[str, dict[str, int]] = {}
    for paper in corpus.papers.values():
        fid = paper.terminal_field_id
        d = per_field.setdefault(
            fid, {"solo_f": 0, "solo_m": 0, "multi_f": 0, "multi_m": 0}
        )
        solo = len(paper.authorship_ids) == 1
        for aid in paper.authorship_ids:
            g = corpus.authorships[aid].gender
            if g == FEMALE:
                d["solo_f" if solo else "multi_f"] += 1
            elif g == MALE:
                d["solo_m" if solo else "multi_m"] += 1

    tested = {r.field_id: r for r in suite.results if r.level == "terminal"}
    rows: list[TerminalCovariates] = []
    dropped: list[str] = []
    for fid in sorted(tested):
        d = per_field.get(fid)
        if d is None:
            dropped.append(fid)
            continue
        solo_n = d["solo_f"] + d["solo_m"]
        multi_n = d["multi_f"] + d["multi_m"]
        total = solo_n + multi_n
        if solo_n == 0 or multi_n == 0 or d["multi_f"] == 0 or total == 0:
            dropped.append(fid)
            continue
        solo_share = d["solo_f"] / solo_n
        multi_share = d["multi_f"] / multi_n
        f_prop = (d["solo_f"] + d["multi_f"]) / total
        majority = 1 if f_prop > 0.5 else 0
        chain = list(hierarchy.ancestors(fid, include_self=True))
        top = chain[-2] if len(chain) >= 2 else fid
        rows.append(
            TerminalCovariates(
                field_id=fid,
                top_field_id=top,
                significant=int(tested[fid].significant),
                solo_multi_ratio=solo_share / multi_share,
                log_authorships=math.log(total),
                female_proportion=f_prop,
                majority_female=majority,
                interaction=f_prop * majority,
            )
        )
    return rows, dropped


@dataclass
class GEEFit:
    params: np.ndarray
    robust_se: np.ndarray
    z: np.ndarray
    pvalues: np.ndarray
    converged: bool
    n_iter: int
    separation: bool
    names: tuple[str, ...] = COEF_NAMES
    cov: np.ndarray | None = None

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("term\testimate\trobust_se\trobust_z\tp_value\n")
            for i, name in enumerate(self.names):
                fh.write(
                    f"{name}\t{self.params[i]:.6g}\t{self.robust_se[i]:.6g}"
                    f"\t{self.z[i]:.6g}\t{self.pvalues[i]:.6g}\n"
                )


def fit_gee_logistic(
    X: np.ndarray,
    y: np.ndarray,
    clusters: Sequence,
    max_iter: int = MAX_ITER,
    tol: float = TOL,
    names: tuple[str, ...] | None = None,
    small_sample_correction: bool = False,
) -> GEEFit:
    """Logistic fit with independence working covariance and cluster-robust SEs.

    Point estimates come from IRLS on the ordinary logistic likelihood.
    The sandwich uses bread = inverse information and meat = sum over
    clusters of score outer products; with one observation per cluster it
    reduces to the heteroskedasticity-robust estimator.  The optional
    finite-sample multiplier is G/(G-1) over the G clusters (off by
    default).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    clusters = list(clusters)
    if len(clusters) != n:
        raise ValueError("clusters must align with rows")
    if len(set(clusters)) < 2:
        raise ValueError("need at least 2 clusters")
    if np.linalg.matrix_rank(X) < k:
        label = lambda j: names[j] if names and j < len(names) else f"column {j}"
        degenerate = [label(j) for j in range(1, k) if np.ptp(X[:, j]) == 0]
        hint = (
            f" (constant columns: {', '.join(degenerate)})" if degenerate else ""
        )
        raise ValueError("design matrix is rank deficient" + hint)

    beta = np.zeros(k)
    converged = False
    separation = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = 1.0 / (1.0 + np.exp(-eta))
        w = mu * (1.0 - mu)
        if np.max(np.abs(eta)) > SEPARATION_ETA:
            separation = True
            break
        XtWX = X.T @ (X * w[:, None])
        score = X.T @ (y - mu)
        try:
            step = np.linalg.solve(XtWX, score)
        except np.linalg.LinAlgError:
            separation = True
            break
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break

    eta = X @ beta
    mu = 1.0 / (1.0 + np.exp(-eta))
    w = mu * (1.0 - mu)
    XtWX = X.T @ (X * w[:, None])
    bread = np.linalg.pinv(XtWX)
    resid = y - mu
    meat = np.zeros((k, k))
    for c in sorted(set(clusters), key=str):
        mask = np.asarray([ci == c for ci in clusters])
        s_c = X[mask].T @ resid[mask]
        meat += np.outer(s_c, s_c)
    if small_sample_correction:
        g = len(set(clusters))
        meat *= g / (g - 1)
    cov = bread @ meat @ bread
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.nan)
    pvals = np.asarray([2.0 * normal_sf(abs(v)) if np.isfinite(v) else np.nan for v in z])
    if names is None:
        names = COEF_NAMES[:k] if k <= len(COEF_NAMES) else tuple(f"x{i}" for i in range(k))
    return GEEFit(
        params=beta,
        robust_se=se,
        z=z,
        pvalues=pvals,
        converged=converged,
        n_iter=it,
        separation=separation,
        names=names,
        cov=cov,
    )


def fit_terminal_regression(
    rows: Sequence[TerminalCovariates], **kwargs
) -> GEEFit:
    """Fit the six-term model on built covariate rows, clustered by top field."""
    if len(rows) < 2:
        raise ValueError("need at least two terminal fields")
    X = np.asarray([r.row() for r in rows])
    y = np.asarray([r.significant for r in rows], dtype=float)
    clusters = [r.top_field_id for r in rows]
    return fit_gee_logistic(X, y, clusters, names=COEF_NAMES, **kwargs)
