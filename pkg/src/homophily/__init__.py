"""Gender assortativity in hierarchically clustered co-authorship corpora,
tested against a gender-blind permutation null."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    Authorship,
    Corpus,
    FEMALE,
    MALE,
    NameFrequencyTable,
    Paper,
    ROOT_FIELD_ID,
    UNASSIGNED,
    clean_corpus,
    impute_gender,
    ingest_corpus,
    load_corpus,
    save_corpus,
)
from .flow import SwapMatrix, build_swap_matrix, candidate_set, components  # noqa: F401
from .metrics import (  # noqa: F401
    AlphaResult,
    FMDecomposition,
    alpha_bounds,
    alpha_from_counts,
    compute_alpha,
    fm_decomposition,
)
from .sampler import (  # noqa: F401
    ChainPlan,
    ChainRun,
    Configuration,
    acceptance_ratio,
    build_configuration,
    cycle_proposal_probability,
    kernel_flavor,
    propose_cycle,
    resume_chain,
    run_chain,
    run_chains,
)
from .inference import (  # noqa: F401
    TestSuiteResult,
    build_naive_null,
    empirical_pvalue,
    expected_alpha,
    fdr_adjust,
    run_full_test,
)
from .diagnostics import compare_chains, ks_two_sample  # noqa: F401
from .sensitivity import ImputationScenario, impute_missing, run_sensitivity  # noqa: F401
from .regression import build_covariates, fit_gee_logistic, fit_terminal_regression  # noqa: F401
from .validation import SynthSpec, enumerate_null_exact, generate_corpus  # noqa: F401
