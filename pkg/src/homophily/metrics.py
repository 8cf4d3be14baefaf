"""Assortativity measure and closed-form decompositions.

The assortativity of a set of multi-author papers is ``alpha = p - q``
where ``p`` is the probability that a randomly selected co-authorship of
a randomly selected male authorship is male, and ``q`` is the same
probability for a randomly selected female authorship.  For a paper
with ``k`` authorships of which ``m`` are male, each male authorship
contributes ``(m - 1) / (k - 1)`` to the numerator of ``p`` and each
female authorship contributes ``m / (k - 1)`` to the numerator of ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

Number = float | Fraction


@dataclass(frozen=True)
class AlphaResult:
    p: Number | None
    q: Number | None
    alpha: Number | None
    n_female: int
    n_male: int
    defined: bool

    def as_dict(self) -> dict:
        conv = lambda v: float(v) if v is not None else None
        return {
            "p": conv(self.p),
            "q": conv(self.q),
            "alpha": conv(self.alpha),
            "n_female": self.n_female,
            "n_male": self.n_male,
            "defined": self.defined,
        }


def alpha_from_counts(
    counts: Iterable[tuple[int, int]], exact: bool = False
) -> AlphaResult:
    """Assortativity from per-paper (male, female) authorship counts.

    ``defined`` is False when either gender has no authorships; in that
    case ``alpha`` is absent.  With ``exact=True`` all arithmetic is done
    in rationals.
    """
    one = Fraction(1) if exact else 1.0
    p_num = q_num = one * 0
    n_male = n_female = 0
    for m, f in counts:
        k = m + f
        if k < 2:
            raise ValueError(
                f"paper with fewer than 2 authorships (m={m}, f={f}); corpus not cleaned"
            )
        co = k - 1
        p_num += one * m * (m - 1) / co
        q_num += one * f * m / co
        n_male += m
        n_female += f
    if n_male == 0 or n_female == 0:
        return AlphaResult(None, None, None, n_female, n_male, defined=False)
    p = p_num / n_male
    q = q_num / n_female
    return AlphaResult(p, q, p - q, n_female, n_male, defined=True)


def compute_alpha(
    corpus,
    field_id: str | None = None,
    paper_ids: Sequence[str] | None = None,
    assignment=None,
    exact: bool = False,
) -> AlphaResult:
    """Assortativity for a set of papers under an assignment.

    ``field_id`` selects all papers in that hierarchy node's subtree
    (default: the whole corpus); ``paper_ids`` selects papers explicitly.
    ``assignment`` is any object exposing ``gender_counts(paper_id)``;
    when omitted the observed corpus assignment is used.
    """
    if paper_ids is None:
        if field_id is None:
            paper_ids = sorted(corpus.papers)
        else:
            paper_ids = corpus.papers_in_field(field_id)
    if assignment is None:
        pairs = (corpus.paper_gender_counts(pid) for pid in paper_ids)
    else:
        pairs = (assignment.gender_counts(pid) for pid in paper_ids)
    return alpha_from_counts(pairs, exact=exact)


@dataclass(frozen=True)
class FMDecomposition:
    """Paper counts per 100 two-author papers implied by (alpha, pi).

    ``fm``/``mm``/``ff`` are the female-male, male-male and female-female
    paper counts (possibly fractional); they always total 100.
    """

    pi: Number
    alpha: Number
    fm: Number
    mm: Number
    ff: Number

    def total(self) -> Number:
        return self.fm + self.mm + self.ff


def fm_decomposition(alpha: Number, pi: Number, exact: bool = False) -> FMDecomposition:
    """Decompose (alpha, pi) into FM/MM/FF counts per 100 two-author papers.

    fm = 200 (1 - alpha) pi (1 - pi)
    mm = 100 (1 - pi) [1 - (1 - alpha) pi]
    ff = 100 pi [1 - (1 - alpha) (1 - pi)]

    ``ff`` is computed as the complement 100 - fm - mm so the three counts
    total 100 identically; the closed form above agrees algebraically.
    """
    if exact:
        alpha = Fraction(alpha)
        pi = Fraction(pi)
    if not (0 < pi < 1):
        raise ValueError(f"pi must be in (0, 1), got {pi}")
    if alpha > 1:
        raise ValueError(f"alpha must be <= 1, got {alpha}")
    fm = 200 * (1 - alpha) * pi * (1 - pi)
    mm = 100 * (1 - pi) * (1 - (1 - alpha) * pi)
    ff = 100 - fm - mm
    eps = 0 if exact else 1e-9
    if fm < -eps or mm < -eps or ff < -eps or fm > 100 + eps:
        raise ValueError(f"infeasible (alpha, pi) pair: alpha={alpha}, pi={pi}")
    return FMDecomposition(pi=pi, alpha=alpha, fm=fm, mm=mm, ff=ff)


def alpha_bounds(pi: Number) -> tuple[Number, Number]:
    """(min, max) attainable alpha when all papers have two authors.

    ``pi`` is the proportion of the less frequent gender, in (0, 0.5].
    The maximum is 1 (no mixed papers); the minimum, reached when mixed
    papers are as frequent as possible, is -1 / (2 - 2 pi).
    """
    if not (0 < pi <= Fraction(1, 2)):
        raise ValueError(f"pi must be in (0, 0.5], got {pi}")
    return (-1 / (2 - 2 * pi), 1)
