"""Command-line pipeline orchestration.

Subcommands compose through on-disk artifacts: corpus snapshot
directories, trace files (.npz), and result JSON/CSV.  Every command
writes a manifest (config and input hashes, seeds, versions) sufficient
to reproduce its outputs bit for bit.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, corpus as corpus_mod, diagnostics, inference, metrics
from . import regression, sensitivity as sens_mod, validation
from ._kernels import kernel_flavor
from .flow import build_swap_matrix
from .sampler import ChainPlan, ChainRun, resume_chain, run_chain, run_chains

DEFAULT_CHAINS = 3
DEFAULT_ITERATIONS = 45_000
DEFAULT_BURN_IN = 20_000
SENSITIVITY_ITERATIONS = 13_000
SENSITIVITY_BURN_IN = 4_000
NAIVE_ITERATIONS = 5_000
NAIVE_BURN_IN = 1_000


@dataclass(frozen=True)
class PipelineConfig:
    """Validated run configuration; fully serializable for reproducibility."""

    year_min: int = corpus_mod.DEFAULT_YEAR_WINDOW[0]
    year_max: int = corpus_mod.DEFAULT_YEAR_WINDOW[1]
    imputation_threshold: float = 0.95
    flow_threshold: float = 0.05
    chains: int = DEFAULT_CHAINS
    iterations: int = DEFAULT_ITERATIONS
    burn_in: int = DEFAULT_BURN_IN
    continue_prob: float = 0.5
    seed: int = 0
    procedure: str = "BY"
    rate: float = 0.05
    workers: int = 1
    kernel: str | None = None

    def validate(self) -> None:
        if self.year_min > self.year_max:
            raise ValueError("year_min exceeds year_max")
        if not (0.5 < self.imputation_threshold <= 1.0):
            raise ValueError("imputation threshold outside (0.5, 1]")
        if not (0.0 <= self.flow_threshold < 1.0):
            raise ValueError("flow threshold outside [0, 1)")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        ChainPlan(self.iterations, self.burn_in, self.seed, self.continue_prob).validate()
        if self.procedure not in inference.PROCEDURES:
            raise ValueError(f"procedure must be one of {inference.PROCEDURES}")
        if not (0.0 < self.rate < 1.0):
            raise ValueError("rate outside (0, 1)")


def _hash_path(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for sub in sorted(path.rglob("*")):
            if sub.is_file():
                h.update(sub.name.encode())
                h.update(sub.read_bytes())
    elif path.is_file():
        h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out: Path, command: str, params: dict, inputs: list[Path]) -> None:
    clean_params = {}
    for k, v in params.items():
        if k in ("func", "config"):
            continue
        if isinstance(v, (str, int, float, bool, type(None), list, dict)):
            clean_params[k] = v
        else:
            clean_params[k] = str(v)
    manifest = {
        "command": command,
        "version": __version__,
        "kernel": kernel_flavor(params.get("kernel")),
        "params": clean_params,
        "inputs": {str(p): _hash_path(Path(p)) for p in inputs},
    }
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def _chain_plans(cfg: PipelineConfig, tracked=None) -> list[ChainPlan]:
    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.chains)
    return [
        ChainPlan(
            iterations=cfg.iterations,
            burn_in=cfg.burn_in,
            seed=int(s),
            continue_prob=cfg.continue_prob,
            tracked_fields=tracked,
        )
        for s in seeds
    ]


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _merge_config(args, keys) -> PipelineConfig:
    file_cfg = _load_config_file(getattr(args, "config", None))
    merged = {}
    for key in keys:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            merged[key] = cli_val
        elif key in file_cfg:
            merged[key] = file_cfg[key]
    env_workers = os.environ.get("HOMOPHILY_WORKERS")
    if "workers" not in merged and env_workers:
        merged["workers"] = int(env_workers)
    env_kernel = os.environ.get("HOMOPHILY_KERNEL")
    if "kernel" not in merged and env_kernel:
        merged["kernel"] = env_kernel
    cfg = PipelineConfig(**merged)
    cfg.validate()
    return cfg


_CFG_KEYS = (
    "year_min", "year_max", "imputation_threshold", "flow_threshold",
    "chains", "iterations", "burn_in", "continue_prob", "seed",
    "procedure", "rate", "workers", "kernel",
)


def _add_sampling_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)
    p.add_argument("--continue-prob", dest="continue_prob", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--flow-threshold", dest="flow_threshold", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--kernel", choices=["compiled", "pure"], default=None)


def _add_test_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--procedure", choices=list(inference.PROCEDURES), default=None)
    p.add_argument("--rate", type=float, default=None)


def cmd_ingest(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.ingest_corpus(
        args.papers, args.authorships, args.hierarchy, args.flows,
        year_window=(cfg.year_min, cfg.year_max),
    )
    out = Path(args.out)
    corpus_mod.save_corpus(corpus, out)
    with open(out / "ingest_report.json", "w", encoding="utf-8") as fh:
        json.dump(corpus.provenance["ingestion"], fh, indent=2, sort_keys=True)
    _write_manifest(out, "ingest", vars(args) | {"seed": cfg.seed},
                    [Path(args.papers), Path(args.authorships), Path(args.hierarchy), Path(args.flows)])
    print(f"ingested {corpus.n_papers} papers / {corpus.n_authorships} authorships -> {out}")
    return 0


def cmd_impute(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.load_corpus(args.corpus)
    tables = [corpus_mod.NameFrequencyTable.from_tsv(t) for t in args.table]
    corpus = corpus_mod.impute_gender(corpus, tables, threshold=cfg.imputation_threshold)
    out = Path(args.out)
    corpus_mod.save_corpus(corpus, out)
    with open(out / "imputation_report.json", "w", encoding="utf-8") as fh:
        json.dump(corpus.provenance["imputation"], fh, indent=2, sort_keys=True)
    _write_manifest(out, "impute", vars(args), [Path(args.corpus), *map(Path, args.table)])
    print(f"imputed genders -> {out}")
    return 0


def cmd_clean(args) -> int:
    corpus = corpus_mod.load_corpus(args.corpus)
    cleaned = corpus_mod.clean_corpus(corpus)
    out = Path(args.out)
    corpus_mod.save_corpus(cleaned, out)
    with open(out / "cleaning_stats.json", "w", encoding="utf-8") as fh:
        json.dump(cleaned.provenance["cleaning"], fh, indent=2, sort_keys=True)
    _write_manifest(out, "clean", vars(args), [Path(args.corpus)])
    print(
        f"cleaned: {cleaned.n_papers} papers / {cleaned.n_authorships} authorships -> {out}"
    )
    return 0


def cmd_alpha(args) -> int:
    corpus = corpus_mod.load_corpus(args.corpus)
    fields = args.field or list(corpus.hierarchy.sorted_ids())
    rows = {}
    for fid in fields:
        res = metrics.compute_alpha(corpus, field_id=fid)
        rows[fid] = res.as_dict()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "alpha.json", "w", encoding="utf-8") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
    _write_manifest(out, "alpha", vars(args), [Path(args.corpus)])
    print(f"alpha for {len(rows)} fields -> {out / 'alpha.json'}")
    return 0


def cmd_sample(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.load_corpus(args.corpus)
    swap = build_swap_matrix(corpus, threshold=cfg.flow_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    swap.to_tsv(out / "swap_matrix.tsv")
    plans = _chain_plans(cfg)
    if args.resume:
        run = resume_chain(args.resume, corpus, swap, kernel=cfg.kernel)
        run.save(out / "trace_chain0.npz")
        runs = [run]
    else:
        if args.checkpoint_at is not None:
            runs = [
                run_chain(
                    corpus, swap, plans[0], kernel=cfg.kernel,
                    checkpoint_path=out / "checkpoint.pkl",
                    checkpoint_at=args.checkpoint_at,
                )
            ]
            for i, plan in enumerate(plans[1:], start=1):
                runs.append(run_chain(corpus, swap, plan, kernel=cfg.kernel))
        else:
            runs = run_chains(corpus, swap, plans, workers=cfg.workers, kernel=cfg.kernel)
        for i, run in enumerate(runs):
            run.save(out / f"trace_chain{i}.npz")
    _write_manifest(out, "sample", vars(args) | {"seeds": [p.seed for p in plans]},
                    [Path(args.corpus)])
    for i, run in enumerate(runs):
        print(
            f"chain {i}: {run.plan.n_samples} samples, acceptance "
            f"{run.acceptance['rate']:.3f}, stay fraction {run.stay_fraction:.3f}"
        )
    return 0


def _load_runs(traces_dir: Path) -> list[ChainRun]:
    files = sorted(traces_dir.glob("trace_chain*.npz"))
    if not files:
        raise FileNotFoundError(f"no trace files found in {traces_dir}")
    return [ChainRun.load(f) for f in files]


def cmd_test(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.load_corpus(args.corpus)
    swap = build_swap_matrix(corpus, threshold=cfg.flow_threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.traces:
        runs = _load_runs(Path(args.traces))
    else:
        plans = _chain_plans(cfg)
        runs = run_chains(corpus, swap, plans, workers=cfg.workers, kernel=cfg.kernel)
    # keep traces alongside the results so `report` can re-render histograms
    for i, run in enumerate(runs):
        run.save(out / f"trace_chain{i}.npz")
    suite = inference.run_full_test(
        corpus, swap, runs=runs, procedure=cfg.procedure, rate=cfg.rate
    )
    suite.save_json(out / "results.json")
    inference.results_to_csv(suite, corpus, out / "results.csv")
    histograms = {
        r.field_id: inference.histogram_json(suite, runs, r.field_id)
        for r in suite.results
    }
    with open(out / "histograms.json", "w", encoding="utf-8") as fh:
        json.dump(histograms, fh, indent=2, sort_keys=True)
    with open(out / "tree.json", "w", encoding="utf-8") as fh:
        json.dump(inference.tree_json(suite, corpus), fh, indent=2, sort_keys=True)
    _write_manifest(out, "test", vars(args), [Path(args.corpus)])
    for level, (sig, total) in sorted(suite.counts_by_level.items()):
        print(f"{level}: {sig}/{total} significant")
    return 0


def cmd_diagnose(args) -> int:
    runs = _load_runs(Path(args.traces))
    report = diagnostics.compare_chains(
        runs, fields=args.field or None, reps=args.reps, seed=args.seed or 0,
        thin=args.thin,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save_csv(out / "ks_report.csv")
    with open(out / "ks_scatter.json", "w", encoding="utf-8") as fh:
        json.dump(report.scatter_data(), fh, indent=2)
    _write_manifest(out, "diagnose", vars(args), [Path(args.traces)])
    print(
        f"{len(report.rows)} comparisons; uniformity p = {report.uniformity_p:.3f} "
        f"({'pass' if report.approximately_uniform else 'FLAG'})"
    )
    return 0


def cmd_sensitivity(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.load_corpus(args.corpus)
    scenario = sens_mod.ImputationScenario(
        kind=args.scenario, imputations=args.imputations, base_seed=cfg.seed
    )
    plans = [
        ChainPlan(
            iterations=args.iterations or SENSITIVITY_ITERATIONS,
            burn_in=args.burn_in if args.burn_in is not None else SENSITIVITY_BURN_IN,
            seed=cfg.seed,
            continue_prob=cfg.continue_prob,
        )
    ]
    report = sens_mod.run_sensitivity(
        corpus, scenario, plans, procedure=cfg.procedure, rate=cfg.rate,
        flow_threshold=cfg.flow_threshold, workers=cfg.workers, kernel=cfg.kernel,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save_csv(out / "sensitivity.csv")
    _write_manifest(out, "sensitivity", vars(args), [Path(args.corpus)])
    for level in ("terminal", "composite", "top"):
        print(f"{level}: average significant fraction {report.average(level):.3f}")
    return 0


def cmd_regress(args) -> int:
    corpus = corpus_mod.load_corpus(args.corpus)
    suite = inference.TestSuiteResult.load_json(args.results)
    rows, dropped = regression.build_covariates(corpus, suite)
    fit = regression.fit_terminal_regression(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fit.save_csv(out / "gee.csv")
    with open(out / "gee_dropped.json", "w", encoding="utf-8") as fh:
        json.dump({"dropped_fields": dropped}, fh, indent=2)
    _write_manifest(out, "regress", vars(args), [Path(args.corpus), Path(args.results)])
    print(f"fit on {len(rows)} terminal fields ({len(dropped)} dropped) -> {out / 'gee.csv'}")
    if not fit.converged:
        print("warning: IRLS did not converge", file=sys.stderr)
    return 0


def cmd_naive(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.load_corpus(args.corpus)
    collapsed, swap = inference.build_naive_null(
        corpus, args.level, threshold=cfg.flow_threshold
    )
    plans = [
        ChainPlan(
            iterations=args.iterations or NAIVE_ITERATIONS,
            burn_in=args.burn_in if args.burn_in is not None else NAIVE_BURN_IN,
            seed=int(s),
            continue_prob=cfg.continue_prob,
        )
        for s in np.random.SeedSequence(cfg.seed).generate_state(cfg.chains)
    ]
    suite = inference.run_full_test(
        collapsed, swap, plans=plans, procedure=cfg.procedure, rate=cfg.rate,
        workers=cfg.workers, kernel=cfg.kernel,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suite.save_json(out / "naive_results.json")
    inference.results_to_csv(suite, collapsed, out / "naive_results.csv")
    _write_manifest(out, "naive", vars(args), [Path(args.corpus)])
    for level, (sig, total) in sorted(suite.counts_by_level.items()):
        print(f"{level}: {sig}/{total} significant (structural-only null)")
    return 0


def cmd_synth(args) -> int:
    with open(args.spec, encoding="utf-8") as fh:
        raw = json.load(fh)
    spec = validation.SynthSpec(
        hierarchy=tuple((f, p) for f, p in raw["hierarchy"]),
        papers_per_field=raw.get("papers_per_field", 10),
        paper_sizes=raw.get("paper_sizes", 3),
        female_share=raw.get("female_share", 0.5),
        homophily=raw.get("homophily", 0.0),
        flows=tuple(tuple(x) for x in raw["flows"]) if raw.get("flows") else None,
        seed=raw.get("seed", 0),
        year=raw.get("year", 2000),
    )
    corpus = validation.generate_corpus(spec)
    out = Path(args.out)
    corpus_mod.save_corpus(corpus, out)
    _write_manifest(out, "synth", vars(args), [Path(args.spec)])
    print(f"synthetic corpus: {corpus.n_papers} papers / {corpus.n_authorships} authorships -> {out}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _merge_config(args, _CFG_KEYS)
    corpus = corpus_mod.load_corpus(args.corpus)
    swap = build_swap_matrix(corpus, threshold=cfg.flow_threshold)
    exact = validation.enumerate_null_exact(corpus, swap, cap=args.cap)
    payload = {}
    for nid in exact.node_ids:
        dist = exact.distribution(nid)
        payload[nid] = {
            "support": [
                {"alpha": v, "probability": p} for v, p in dist
            ],
            "expected_alpha": exact.e_alpha(nid),
        }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "oracle.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    _write_manifest(out, "oracle", vars(args), [Path(args.corpus)])
    print(f"exact null for {len(payload)} fields -> {out / 'oracle.json'}")
    return 0


def cmd_report(args) -> int:
    results_dir = Path(args.results)
    results_json = results_dir / "results.json"
    if not results_json.exists():
        raise FileNotFoundError(f"no results found in {results_dir}")
    corpus = corpus_mod.load_corpus(args.corpus)
    suite = inference.TestSuiteResult.load_json(results_json)
    runs = _load_runs(results_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inference.results_to_csv(suite, corpus, out / "results.csv")
    histograms = {
        r.field_id: inference.histogram_json(suite, runs, r.field_id)
        for r in suite.results
    }
    with open(out / "histograms.json", "w", encoding="utf-8") as fh:
        json.dump(histograms, fh, indent=2, sort_keys=True)
    with open(out / "tree.json", "w", encoding="utf-8") as fh:
        json.dump(inference.tree_json(suite, corpus), fh, indent=2, sort_keys=True)
    _write_manifest(out, "report", vars(args), [results_dir, Path(args.corpus)])
    print(f"report rendered -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="homophily",
        description="Assortativity and gender-blind permutation tests for "
        "hierarchically clustered co-authorship corpora.",
        epilog="Environment overrides: HOMOPHILY_WORKERS (worker pool size), "
        "HOMOPHILY_KERNEL (compiled|pure), HOMOPHILY_PURE_KERNEL=1 "
        "(force the pure kernel). Flags beat the --config file, which "
        "beats the environment.",
    )
    parser.add_argument("--config", default=None, help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse and validate the corpus files")
    p.add_argument("--papers", required=True)
    p.add_argument("--authorships", required=True)
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--flows", required=True)
    p.add_argument("--year-min", dest="year_min", type=int, default=None)
    p.add_argument("--year-max", dest="year_max", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("impute", help="impute genders from name tables")
    p.add_argument("--corpus", required=True)
    p.add_argument("--table", action="append", required=True,
                   help="name table TSV, highest priority first (repeatable)")
    p.add_argument("--imputation-threshold", dest="imputation_threshold",
                   type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("clean", help="drop unassigned authorships and thin papers")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("alpha", help="observed assortativity per field")
    p.add_argument("--corpus", required=True)
    p.add_argument("--field", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("sample", help="run null-distribution chains")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--checkpoint-at", dest="checkpoint_at", type=int, default=None)
    p.add_argument("--resume", default=None, help="checkpoint file to resume")
    _add_sampling_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("test", help="full multilevel behavioral-homophily test")
    p.add_argument("--corpus", required=True)
    p.add_argument("--traces", default=None, help="reuse traces from this directory")
    p.add_argument("--out", required=True)
    _add_sampling_flags(p)
    _add_test_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("diagnose", help="chain convergence KS report")
    p.add_argument("--traces", required=True)
    p.add_argument("--field", action="append")
    p.add_argument("--reps", type=int, default=diagnostics.DEFAULT_REPS)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--thin", type=int, default=1,
                   help="subsample traces before the KS comparison "
                   "(counteracts autocorrelation at small scale)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("sensitivity", help="missing-gender multiple imputation")
    p.add_argument("--corpus", required=True, help="post-imputation, pre-cleaning snapshot")
    p.add_argument("--scenario", choices=[sens_mod.LOW, sens_mod.HIGH], required=True)
    p.add_argument("--imputations", type=int, default=10)
    p.add_argument("--out", required=True)
    _add_sampling_flags(p)
    _add_test_flags(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("regress", help="GEE logistic secondary analysis")
    p.add_argument("--corpus", required=True, help="post-imputation, pre-cleaning snapshot")
    p.add_argument("--results", required=True, help="results.json from `test`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("naive", help="structural-only null at a hierarchy level")
    p.add_argument("--corpus", required=True)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_sampling_flags(p)
    _add_test_flags(p)
    p.set_defaults(func=cmd_naive)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True, help="JSON synthesis spec")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oracle", help="exact null by enumeration (small corpora)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--cap", type=int, default=10_000_000)
    p.add_argument("--flow-threshold", dest="flow_threshold", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="render result tables and plot data")
    p.add_argument("--results", required=True, help="directory written by `test`")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        return 1
    except Exception as exc:  # one-line machine-parsable failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
