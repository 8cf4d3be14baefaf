import pytest

from homophily.corpus import Authorship, Paper, build_corpus


def make_corpus(paper_specs, hierarchy_rows, flows, year=2000):
    """paper_specs: list of (paper_id, field_id, gender string like 'MMF')."""
    papers, auths = [], []
    for pid, fid, genders in paper_specs:
        papers.append(Paper(pid, fid, year))
        for i, g in enumerate(genders):
            auths.append(Authorship(f"{pid}-a{i}", pid, None, g))
    return build_corpus(papers, auths, hierarchy_rows, flows)


def reversal_paper_specs():
    # field A: 11 M / 2 F over papers of sizes 3, 2, 4, 4
    # field B: 1 M / 8 F over papers of sizes 2, 2, 2, 3
    return [
        ("A1", "A", "MMF"),
        ("A2", "A", "MM"),
        ("A3", "A", "MMMM"),
        ("A4", "A", "MMMF"),
        ("B1", "B", "FF"),
        ("B2", "B", "FF"),
        ("B3", "B", "FF"),
        ("B4", "B", "MFF"),
    ]


@pytest.fixture(scope="session")
def reversal_corpus():
    """Two fields with per-field negative assortativity but positive pooled
    assortativity; within-field-only reassignment support."""
    return make_corpus(
        reversal_paper_specs(),
        [("TOP", None, 1), ("A", "TOP", 2), ("B", "TOP", 2)],
        (("A", "A", 1.0), ("B", "B", 1.0)),
    )


@pytest.fixture(scope="session")
def linked_corpus():
    """Small two-field corpus whose fields exchange authorships."""
    return make_corpus(
        [
            ("A1", "A", "MF"),
            ("A2", "A", "MM"),
            ("B1", "B", "FF"),
            ("B2", "B", "MF"),
        ],
        [("A", None, 1), ("B", None, 1)],
        (("A", "A", 0.8), ("A", "B", 0.2), ("B", "B", 0.7), ("B", "A", 0.3)),
    )


@pytest.fixture(scope="session")
def tiny_linked_corpus():
    """Six authorships across two linked fields; 90 distinct configurations."""
    return make_corpus(
        [
            ("A1", "A", "MF"),
            ("A2", "A", "MM"),
            ("B1", "B", "FF"),
        ],
        [("A", None, 1), ("B", None, 1)],
        (("A", "A", 0.8), ("A", "B", 0.2), ("B", "B", 0.7), ("B", "A", 0.3)),
    )


def write_corpus_files(tmp_path, papers_rows, auth_rows, hier_rows, flow_rows):
    """Write raw ingestion TSVs; rows are tuples of column values."""
    paths = {}
    for name, rows in (
        ("papers", papers_rows),
        ("authorships", auth_rows),
        ("hierarchy", hier_rows),
        ("flows", flow_rows),
    ):
        path = tmp_path / f"{name}.tsv"
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write("\t".join(str(c) for c in row) + "\n")
        paths[name] = path
    return paths
