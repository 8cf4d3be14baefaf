import json
from pathlib import Path

import numpy as np
import pytest

from homophily.cli import main

from conftest import write_corpus_files


@pytest.fixture()
def raw_files(tmp_path):
    """The two-field reversal corpus as raw ingestion files, with name-based genders."""
    female = ["alice", "carol", "dana", "erin", "fiona", "gail", "hana",
              "iris", "jane", "kara"]
    male = ["adam", "bob", "carl", "dave", "evan", "frank", "glen", "hank",
            "ivan", "jack", "kurt", "liam", "mark"]
    genders = {
        "A1": "MMF", "A2": "MM", "A3": "MMMM", "A4": "MMMF",
        "B1": "FF", "B2": "FF", "B3": "FF", "B4": "MFF",
    }
    papers = [(pid, pid[0], 2000) for pid in genders]
    auths = []
    fi = mi = 0
    for pid, gs in genders.items():
        for i, g in enumerate(gs):
            if g == "F":
                name, fi = female[fi], fi + 1
            else:
                name, mi = male[mi], mi + 1
            auths.append((f"{pid}-a{i}", pid, name.capitalize()))
    hier = [("TOP", "NULL", 1), ("A", "TOP", 2), ("B", "TOP", 2)]
    flows = [("A", "A", 1.0), ("B", "B", 1.0)]
    paths = write_corpus_files(tmp_path, papers, auths, hier, flows)
    table = tmp_path / "names.tsv"
    with open(table, "w", encoding="utf-8") as fh:
        for n in female:
            fh.write(f"{n}\t99\t1\n")
        for n in male:
            fh.write(f"{n}\t1\t99\n")
    paths["table"] = table
    return paths


def run_cli(*argv):
    return main([str(a) for a in argv])


class TestPipelineCommands:
    def test_full_pipeline(self, raw_files, tmp_path, capsys):
        raw = tmp_path / "raw_corpus"
        assert run_cli(
            "ingest", "--papers", raw_files["papers"],
            "--authorships", raw_files["authorships"],
            "--hierarchy", raw_files["hierarchy"],
            "--flows", raw_files["flows"], "--out", raw,
        ) == 0
        assert (raw / "manifest.json").exists()
        assert (raw / "ingest_report.json").exists()

        imputed = tmp_path / "imputed"
        assert run_cli(
            "impute", "--corpus", raw, "--table", raw_files["table"], "--out", imputed
        ) == 0
        report = json.loads((imputed / "imputation_report.json").read_text())
        assert report["unresolved"] == 0

        cleaned = tmp_path / "cleaned"
        assert run_cli("clean", "--corpus", imputed, "--out", cleaned) == 0

        alpha_out = tmp_path / "alpha"
        assert run_cli("alpha", "--corpus", cleaned, "--out", alpha_out) == 0
        rows = json.loads((alpha_out / "alpha.json").read_text())
        assert rows["A"]["alpha"] == pytest.approx(-2 / 11)
        assert rows["__root__"]["alpha"] == pytest.approx(9 / 20)

        results = tmp_path / "results"
        assert run_cli(
            "test", "--corpus", cleaned, "--out", results,
            "--chains", 2, "--iterations", 1500, "--burn-in", 500, "--seed", 3,
        ) == 0
        assert (results / "results.csv").exists()
        assert (results / "histograms.json").exists()
        assert (results / "tree.json").exists()
        suite = json.loads((results / "results.json").read_text())
        assert suite["n_samples"] == 2000

        diag = tmp_path / "diag"
        assert run_cli(
            "diagnose", "--traces", results, "--out", diag, "--reps", 100
        ) == 0
        assert (diag / "ks_report.csv").exists()

        report_dir = tmp_path / "report"
        assert run_cli(
            "report", "--results", results, "--corpus", cleaned, "--out", report_dir
        ) == 0
        assert (report_dir / "results.csv").exists()

    def test_sample_determinism_byte_identical(self, raw_files, tmp_path):
        raw = tmp_path / "c"
        run_cli(
            "ingest", "--papers", raw_files["papers"],
            "--authorships", raw_files["authorships"],
            "--hierarchy", raw_files["hierarchy"],
            "--flows", raw_files["flows"], "--out", raw,
        )
        imputed = tmp_path / "i"
        run_cli("impute", "--corpus", raw, "--table", raw_files["table"], "--out", imputed)
        cleaned = tmp_path / "cl"
        run_cli("clean", "--corpus", imputed, "--out", cleaned)
        out1, out2 = tmp_path / "s1", tmp_path / "s2"
        for out in (out1, out2):
            assert run_cli(
                "sample", "--corpus", cleaned, "--out", out,
                "--chains", 1, "--iterations", 800, "--burn-in", 100, "--seed", 11,
            ) == 0
        t1 = np.load(out1 / "trace_chain0.npz", allow_pickle=True)["trace"]
        t2 = np.load(out2 / "trace_chain0.npz", allow_pickle=True)["trace"]
        assert np.array_equal(t1, t2, equal_nan=True)

    def test_report_on_empty_directory_fails(self, tmp_path, capsys):
        empty = tmp_path / "nothing"
        empty.mkdir()
        code = run_cli(
            "report", "--results", empty, "--corpus", empty, "--out", tmp_path / "o"
        )
        assert code == 1
        assert "no results found" in capsys.readouterr().err

    def test_errors_are_one_line_machine_parsable(self, tmp_path, capsys):
        code = run_cli(
            "clean", "--corpus", tmp_path / "missing", "--out", tmp_path / "o"
        )
        assert code == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("error: ")
        assert "\n" not in err

    def test_config_file_supplies_defaults_and_flags_win(self, raw_files, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"year_min": 2005, "year_max": 2011}))
        out_cfg = tmp_path / "via_config"
        # config windows out every paper (all years are 2000)
        assert run_cli(
            "--config", cfg, "ingest",
            "--papers", raw_files["papers"], "--authorships", raw_files["authorships"],
            "--hierarchy", raw_files["hierarchy"], "--flows", raw_files["flows"],
            "--out", out_cfg,
        ) == 0
        report = json.loads((out_cfg / "ingest_report.json").read_text())
        assert report["papers_kept"] == 0
        # an explicit flag overrides the config file
        out_flag = tmp_path / "via_flag"
        assert run_cli(
            "--config", cfg, "ingest",
            "--papers", raw_files["papers"], "--authorships", raw_files["authorships"],
            "--hierarchy", raw_files["hierarchy"], "--flows", raw_files["flows"],
            "--year-min", 1990, "--out", out_flag,
        ) == 0
        report = json.loads((out_flag / "ingest_report.json").read_text())
        assert report["papers_kept"] == 8


class TestSynthOracleAndAnalyses:
    @pytest.fixture()
    def synth_corpus(self, tmp_path):
        spec = {
            "hierarchy": [["T1", None], ["A", "T1"], ["B", "T1"],
                          ["T2", None], ["C", "T2"]],
            "papers_per_field": 4,
            "paper_sizes": [2, 3],
            "female_share": 0.5,
            "homophily": 0.0,
            "seed": 5,
        }
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "synth"
        assert run_cli("synth", "--spec", spec_path, "--out", out) == 0
        return out

    def test_synth_then_oracle(self, synth_corpus, tmp_path):
        out = tmp_path / "oracle"
        assert run_cli("oracle", "--corpus", synth_corpus, "--out", out) == 0
        payload = json.loads((out / "oracle.json").read_text())
        assert "__root__" in payload
        total = sum(e["probability"] for e in payload["A"]["support"])
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_naive_command(self, synth_corpus, tmp_path):
        out = tmp_path / "naive"
        assert run_cli(
            "naive", "--corpus", synth_corpus, "--level", 1, "--out", out,
            "--chains", 1, "--iterations", 500, "--burn-in", 100,
        ) == 0
        assert (out / "naive_results.csv").exists()

    def test_sensitivity_command(self, tmp_path, raw_files):
        # corpus with some unresolvable names: drop a few from the table
        raw = tmp_path / "r"
        run_cli(
            "ingest", "--papers", raw_files["papers"],
            "--authorships", raw_files["authorships"],
            "--hierarchy", raw_files["hierarchy"],
            "--flows", raw_files["flows"], "--out", raw,
        )
        table = tmp_path / "partial.tsv"
        lines = Path(raw_files["table"]).read_text().splitlines()
        table.write_text("\n".join(lines[:-3]) + "\n")
        imputed = tmp_path / "imp"
        run_cli("impute", "--corpus", raw, "--table", table, "--out", imputed)
        out = tmp_path / "sens"
        assert run_cli(
            "sensitivity", "--corpus", imputed, "--scenario", "high",
            "--imputations", 2, "--out", out,
            "--chains", 1, "--iterations", 600, "--burn-in", 200,
        ) == 0
        lines = (out / "sensitivity.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_regress_command(self, tmp_path):
        # build a pre-cleaning corpus with solos across two top fields
        rng = np.random.Generator(np.random.PCG64(3))
        papers, auths = [], []
        hier = [("T1", "NULL", 1), ("T2", "NULL", 1)]
        terminals = []
        for t, top in enumerate(("T1", "T2")):
            for k in range(3):
                fid = f"F{t}{k}"
                terminals.append(fid)
                hier.append((fid, top, 2))
        flows = [(f, f, 1.0) for f in terminals]
        for f_idx, fid in enumerate(terminals):
            share = 0.2 + 0.13 * f_idx  # spans minority- to majority-female
            for i in range(3):  # solos
                papers.append((f"{fid}s{i}", fid, 2000))
                auths.append((f"{fid}s{i}-a", f"{fid}s{i}", "", "F" if i == 0 else "M"))
            for i in range(4 + 2 * f_idx):  # multis; field sizes vary
                pid = f"{fid}m{i}"
                papers.append((pid, fid, 2000))
                for j in range(3):
                    g = "F" if rng.random() < share else "M"
                    auths.append((f"{pid}-a{j}", pid, "", g))
        paths = write_corpus_files(tmp_path, papers, auths, hier, flows)
        pre = tmp_path / "pre"
        run_cli(
            "ingest", "--papers", paths["papers"], "--authorships", paths["authorships"],
            "--hierarchy", paths["hierarchy"], "--flows", paths["flows"], "--out", pre,
        )
        cleaned = tmp_path / "cl"
        run_cli("clean", "--corpus", pre, "--out", cleaned)
        results = tmp_path / "res"
        assert run_cli(
            "test", "--corpus", cleaned, "--out", results,
            "--chains", 1, "--iterations", 800, "--burn-in", 200,
        ) == 0
        out = tmp_path / "gee"
        assert run_cli(
            "regress", "--corpus", pre, "--results", results / "results.json",
            "--out", out,
        ) == 0
        lines = (out / "gee.csv").read_text().splitlines()
        assert lines[0].startswith("term\t")
        assert len(lines) == 7  # intercept + 5 covariates
