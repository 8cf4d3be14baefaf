import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from homophily import ChainPlan, build_swap_matrix, compare_chains, ks_two_sample
from homophily.diagnostics import ks_statistic, ks_uniform_pvalue
from homophily.sampler import run_chain


def exhaustive_permutation_pvalue(a, b):
    """Oracle: exact p over all splits of the pooled sample into the
    original group sizes."""
    pooled = list(a) + list(b)
    n_a = len(a)
    d_obs = ks_statistic(np.asarray(a, float), np.asarray(b, float))
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), n_a):
        mask = set(idx)
        res_a = [pooled[i] for i in range(len(pooled)) if i in mask]
        res_b = [pooled[i] for i in range(len(pooled)) if i not in mask]
        d = ks_statistic(np.asarray(res_a, float), np.asarray(res_b, float))
        total += 1
        if d >= d_obs - 1e-12:
            hits += 1
    return hits / total


class TestKSTwoSample:
    def test_identical_samples(self):
        a = np.array([0.1, 0.4, 0.7])
        d, p = ks_two_sample(a, a.copy(), bootstrap_reps=200, seed=1)
        assert d == 0.0
        assert p == 1.0

    def test_disjoint_supports(self):
        d, _ = ks_two_sample(np.array([1.0, 2.0]), np.array([5.0, 6.0]), 50, seed=1)
        assert d == 1.0

    def test_small_example_statistic_and_bootstrap(self):
        a, b = [1.0, 2.0, 3.0], [1.0, 2.0, 4.0]
        d, p = ks_two_sample(np.array(a), np.array(b), bootstrap_reps=4000, seed=3)
        assert d == pytest.approx(1 / 3)
        oracle = exhaustive_permutation_pvalue(a, b)
        assert p == pytest.approx(oracle, abs=0.05)

    def test_empty_sample_errors(self):
        with pytest.raises(ValueError):
            ks_two_sample(np.array([]), np.array([1.0]), 10)

    def test_zero_reps_errors(self):
        with pytest.raises(ValueError):
            ks_two_sample(np.array([1.0]), np.array([1.0]), 0)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(-5, 5).map(lambda x: round(x, 3)), min_size=1, max_size=8),
        st.lists(st.floats(-5, 5).map(lambda x: round(x, 3)), min_size=1, max_size=8),
    )
    def test_statistic_symmetric_and_monotone_invariant(self, a, b):
        xa, xb = np.asarray(a), np.asarray(b)
        d1 = ks_statistic(xa, xb)
        assert d1 == ks_statistic(xb, xa)
        assert 0.0 <= d1 <= 1.0
        f = lambda x: np.exp(x / 3.0) + 2 * x  # strictly increasing
        assert ks_statistic(f(xa), f(xb)) == pytest.approx(d1, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(
        st.lists(st.integers(0, 3), min_size=2, max_size=4),
        st.lists(st.integers(0, 3), min_size=1, max_size=2),
    )
    def test_bootstrap_converges_to_exhaustive(self, a, b):
        """Permutation bootstrap approaches the exhaustive oracle (pooled
        n <= 6, where all splits can be enumerated)."""
        oracle = exhaustive_permutation_pvalue(a, b)
        _, p = ks_two_sample(
            np.asarray(a, float), np.asarray(b, float), bootstrap_reps=3000, seed=7
        )
        assert p == pytest.approx(oracle, abs=0.05)

    def test_with_replacement_mode_runs(self):
        d, p = ks_two_sample(
            np.array([1.0, 2.0]), np.array([2.0, 3.0]), 500, seed=2, replace=True
        )
        assert 0 <= p <= 1


class TestUniformity:
    def test_uniform_sample_passes(self):
        rng = np.random.Generator(np.random.PCG64(5))
        p = ks_uniform_pvalue(rng.random(500))
        assert p > 0.01

    def test_clumped_sample_fails(self):
        p = ks_uniform_pvalue([0.01] * 100)
        assert p < 1e-6


@pytest.fixture(scope="module")
def chain_runs():
    from homophily import SynthSpec, generate_corpus

    corpus = generate_corpus(
        SynthSpec(
            hierarchy=(("T", None), ("A", "T"), ("B", "T"), ("C", "T")),
            papers_per_field=12,
            paper_sizes=(2, 3, 4),
            female_share={"A": 0.35, "B": 0.5, "C": 0.65},
            homophily=0.0,
            seed=1,
            flows=(
                ("A", "A", 0.8), ("A", "B", 0.2), ("B", "B", 0.6), ("B", "A", 0.2),
                ("B", "C", 0.2), ("C", "C", 0.8), ("C", "B", 0.2),
            ),
        )
    )
    swap = build_swap_matrix(corpus)
    plans = [ChainPlan(iterations=10_000, burn_in=2000, seed=s) for s in (1, 2, 3)]
    return [run_chain(corpus, swap, p) for p in plans]


class TestCompareChains:
    def test_identical_seed_chains_all_zero(self, linked_corpus):
        swap = build_swap_matrix(linked_corpus)
        plan = ChainPlan(iterations=800, burn_in=200, seed=5)
        runs = [run_chain(linked_corpus, swap, plan) for _ in range(2)]
        report = compare_chains(runs, reps=100, seed=1)
        assert all(row["D"] == 0.0 for row in report.rows)
        assert all(row["p_boot"] == 1.0 for row in report.rows)

    def test_converged_chains_pass_uniformity(self, chain_runs):
        # thinning restores exchangeability for the permutation bootstrap
        report = compare_chains(chain_runs, reps=400, seed=2, thin=25)
        assert len(report.rows) == 3 * len(chain_runs[0].node_ids)
        assert report.approximately_uniform

    def test_mismatched_plans_error(self, linked_corpus):
        swap = build_swap_matrix(linked_corpus)
        r1 = run_chain(linked_corpus, swap, ChainPlan(600, 100, 1))
        r2 = run_chain(linked_corpus, swap, ChainPlan(700, 100, 2))
        with pytest.raises(ValueError, match="different plans"):
            compare_chains([r1, r2])

    def test_single_chain_errors(self, chain_runs):
        with pytest.raises(ValueError, match="at least two"):
            compare_chains(chain_runs[:1])

    def test_nonconverged_chains_flagged(self, chain_runs):
        """A doctored run whose trace sits in a different location drives
        the pairwise p-values down and trips the flag."""
        import copy

        bad = copy.copy(chain_runs[0])
        bad.trace = chain_runs[0].trace + 0.35
        report = compare_chains(
            [chain_runs[1], chain_runs[2], bad], reps=300, seed=3, thin=25
        )
        bad_rows = [r for r in report.rows if 2 in (r["chain_a"], r["chain_b"])]
        assert np.mean([r["p_boot"] for r in bad_rows]) < 0.05
        assert not report.approximately_uniform

    def test_report_csv(self, chain_runs, tmp_path):
        report = compare_chains(chain_runs, fields=["A"], reps=50, seed=4)
        report.save_csv(tmp_path / "ks.csv")
        lines = (tmp_path / "ks.csv").read_text().splitlines()
        assert lines[0].startswith("field_id\t")
        assert len(lines) == 1 + 3
