import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from homophily import metrics

from conftest import make_corpus


class TestAlpha:
    def test_field_a_exact(self, reversal_corpus):
        res = metrics.compute_alpha(reversal_corpus, field_id="A", exact=True)
        assert res.p == Fraction(9, 11)
        assert res.q == Fraction(1)
        assert res.alpha == Fraction(-2, 11)
        assert (res.n_male, res.n_female) == (11, 2)

    def test_field_b_exact(self, reversal_corpus):
        res = metrics.compute_alpha(reversal_corpus, field_id="B", exact=True)
        assert res.p == Fraction(0)
        assert res.q == Fraction(1, 8)
        assert res.alpha == Fraction(-1, 8)

    def test_pooled_exact(self, reversal_corpus):
        res = metrics.compute_alpha(reversal_corpus, exact=True)
        assert res.p == Fraction(3, 4)
        assert res.q == Fraction(3, 10)
        assert res.alpha == Fraction(9, 20)

    def test_float_mode(self, reversal_corpus):
        for fid, expect in (("A", -2 / 11), ("B", -1 / 8)):
            res = metrics.compute_alpha(reversal_corpus, field_id=fid)
            assert res.alpha == pytest.approx(expect, abs=1e-12)

    def test_all_male_field_undefined(self):
        res = metrics.alpha_from_counts([(2, 0), (3, 0)])
        assert not res.defined
        assert res.alpha is None
        assert res.n_female == 0

    def test_single_author_paper_errors(self):
        with pytest.raises(ValueError, match="fewer than 2"):
            metrics.alpha_from_counts([(1, 0), (2, 1)])

    def test_range(self):
        res = metrics.alpha_from_counts([(2, 0), (0, 2)])
        assert res.alpha == 1.0
        res = metrics.alpha_from_counts([(1, 1), (1, 1)])
        assert res.alpha == -1.0


two_author_corpora = st.tuples(
    st.integers(0, 8), st.integers(0, 8), st.integers(0, 8)
).filter(lambda t: (2 * t[1] + t[0] > 0) and (2 * t[2] + t[0] > 0))


@settings(max_examples=200, deadline=None)
@given(two_author_corpora)
def test_wright_equivalence_on_two_author_corpora(counts):
    """alpha equals Wright's inbreeding coefficient 1 - H_obs/H_exp when
    every paper has exactly two authors (brute-force genotype formula)."""
    fm, mm, ff = counts
    pairs = [(1, 1)] * fm + [(2, 0)] * mm + [(0, 2)] * ff
    res = metrics.alpha_from_counts(pairs, exact=True)
    n = fm + mm + ff
    pi = Fraction(2 * ff + fm, 2 * n)
    h_exp = 2 * pi * (1 - pi)
    if h_exp == 0:
        assert not res.defined
        return
    wright = 1 - Fraction(fm, n) / h_exp
    assert res.alpha == wright


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)).filter(lambda t: sum(t) >= 2),
             min_size=1, max_size=8),
    st.randoms(),
)
def test_alpha_invariant_under_paper_permutation(pairs, rnd):
    base = metrics.alpha_from_counts(pairs, exact=True)
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    perm = metrics.alpha_from_counts(shuffled, exact=True)
    assert base == perm


def test_alpha_invariant_under_relabeling(reversal_corpus):
    relabeled = make_corpus(
        [("X9", "A", "MMF"), ("Q2", "A", "MM"), ("Z1", "A", "MMMM"), ("W4", "A", "MMMF")],
        [("A", None, 1)],
        (("A", "A", 1.0),),
    )
    a1 = metrics.compute_alpha(reversal_corpus, field_id="A", exact=True)
    a2 = metrics.compute_alpha(relabeled, field_id="A", exact=True)
    assert a1.alpha == a2.alpha


def test_aggregation_non_additivity(reversal_corpus):
    """Per-field negative, pooled positive (the compositional effect)."""
    a = metrics.compute_alpha(reversal_corpus, field_id="A").alpha
    b = metrics.compute_alpha(reversal_corpus, field_id="B").alpha
    pooled = metrics.compute_alpha(reversal_corpus).alpha
    assert a < 0 and b < 0 and pooled > 0


class TestFMDecomposition:
    def test_random_mixing(self):
        d = metrics.fm_decomposition(0.0, 0.5)
        assert (d.fm, d.mm, d.ff) == (50.0, 25.0, 25.0)

    def test_perfect_homophily(self):
        d = metrics.fm_decomposition(1.0, 0.3)
        assert d.fm == 0.0
        assert d.mm == pytest.approx(70.0, abs=1e-12)
        assert d.ff == pytest.approx(30.0, abs=1e-12)

    def test_identity_exact_rational(self):
        d = metrics.fm_decomposition(Fraction(1, 7), Fraction(2, 5), exact=True)
        assert d.fm + d.mm + d.ff == 100
        # complement agrees with the closed form
        ff_direct = 100 * Fraction(2, 5) * (1 - (1 - Fraction(1, 7)) * Fraction(3, 5))
        assert d.ff == ff_direct

    def test_infeasible_pair_errors(self):
        with pytest.raises(ValueError, match="infeasible"):
            metrics.fm_decomposition(-1.0, 0.2)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            metrics.fm_decomposition(0.0, 0.0)
        with pytest.raises(ValueError):
            metrics.fm_decomposition(1.5, 0.5)

    def test_published_row_backsolve(self):
        """Back-solve pi from the expected (alpha, FM) pair of a published
        result row, then the observed alpha must reproduce the observed FM
        within rounding."""
        pi = _pi_from_fm(0.05, 41.1)
        assert 0 < pi < 0.5
        d = metrics.fm_decomposition(0.11, pi)
        assert d.fm == pytest.approx(38.6, abs=0.2)


def _pi_from_fm(alpha, fm):
    """Oracle: invert fm = 200 (1-alpha) pi (1-pi) for the minority root."""
    prod = fm / (200.0 * (1.0 - alpha))
    disc = 1.0 - 4.0 * prod
    return (1.0 - math.sqrt(disc)) / 2.0


@settings(max_examples=300, deadline=None)
@given(
    st.fractions(min_value=-3, max_value=1),
    st.fractions(min_value=0, max_value=1).filter(lambda f: 0 < f < 1),
)
def test_fm_identity_and_feasibility(alpha, pi):
    try:
        d = metrics.fm_decomposition(alpha, pi, exact=True)
    except ValueError:
        return
    assert d.fm + d.mm + d.ff == 100
    assert d.fm >= 0 and d.mm >= 0 and d.ff >= 0


class TestAlphaBounds:
    def test_balanced(self):
        lo, hi = metrics.alpha_bounds(0.5)
        assert hi == 1
        assert lo == -1.0

    def test_quarter(self):
        lo, _ = metrics.alpha_bounds(0.25)
        assert lo == pytest.approx(-2 / 3, abs=1e-15)

    def test_limit_toward_zero(self):
        lo, _ = metrics.alpha_bounds(1e-9)
        assert lo == pytest.approx(-0.5, abs=1e-6)

    def test_out_of_range(self):
        for bad in (0.0, 0.6, 1.0, -0.1):
            with pytest.raises(ValueError):
                metrics.alpha_bounds(bad)
