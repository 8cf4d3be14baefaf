"""Corpus ingestion, gender imputation, and cleaning.

The analysis corpus is assembled from four tab-separated files (papers,
authorships, field hierarchy, citation flows) plus one or more name
frequency tables used to impute authorship gender from first names.
After cleaning, every paper has at least two gendered authorships and
the corpus is immutable.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

FEMALE = "F"
MALE = "M"
UNASSIGNED = "U"

GENDERS = (FEMALE, MALE, UNASSIGNED)

#: id of the synthetic all-corpus root added on top of the field forest
ROOT_FIELD_ID = "__root__"

DEFAULT_YEAR_WINDOW = (1960, 2011)


@dataclass(frozen=True)
class Authorship:
    id: str
    paper_id: str
    first_name: str | None
    gender: str = UNASSIGNED


@dataclass(frozen=True)
class Paper:
    id: str
    terminal_field_id: str
    year: int
    authorship_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class FieldNode:
    id: str
    parent_id: str | None
    level: int
    children: tuple[str, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children


class Hierarchy:
    """Field forest plus the synthetic corpus root (level 0)."""

    def __init__(self, nodes: Mapping[str, FieldNode]):
        self.nodes = dict(nodes)
        if ROOT_FIELD_ID not in self.nodes:
            raise ValueError("hierarchy is missing the synthetic root")
        self.root_id = ROOT_FIELD_ID
        self._leaves = tuple(sorted(n.id for n in self.nodes.values() if n.is_leaf))

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str | None, int]]) -> "Hierarchy":
        """Build from (field_id, parent_id_or_None, level) rows.

        Parentless fields must sit at level 1; the synthetic root at level 0
        is added here.  Validates that the rows form a forest and that every
        declared level equals the parent's level plus one.
        """
        raw: dict[str, tuple[str | None, int]] = {}
        for field_id, parent_id, level in rows:
            if field_id == ROOT_FIELD_ID:
                raise ValueError(f"field id {ROOT_FIELD_ID!r} is reserved")
            if field_id in raw:
                raise ValueError(f"duplicate field id {field_id!r} in hierarchy")
            raw[field_id] = (parent_id, level)

        children: dict[str, list[str]] = {ROOT_FIELD_ID: []}
        for field_id, (parent_id, level) in raw.items():
            if parent_id is None:
                if level != 1:
                    raise ValueError(
                        f"top-level field {field_id!r} must have level 1, got {level}"
                    )
                children[ROOT_FIELD_ID].append(field_id)
            else:
                if parent_id not in raw:
                    raise ValueError(
                        f"field {field_id!r} references unknown parent {parent_id!r}"
                    )
                plevel = raw[parent_id][1]
                if level != plevel + 1:
                    raise ValueError(
                        f"field {field_id!r} has level {level}, expected {plevel + 1}"
                    )
                children.setdefault(parent_id, []).append(field_id)

        # cycle check: every field must reach a parentless field
        for field_id in raw:
            seen = set()
            cur: str | None = field_id
            while cur is not None:
                if cur in seen:
                    raise ValueError(f"hierarchy contains a cycle through {cur!r}")
                seen.add(cur)
                cur = raw[cur][0]

        nodes = {
            ROOT_FIELD_ID: FieldNode(
                ROOT_FIELD_ID, None, 0, tuple(sorted(children[ROOT_FIELD_ID]))
            )
        }
        for field_id, (parent_id, level) in raw.items():
            nodes[field_id] = FieldNode(
                field_id,
                parent_id if parent_id is not None else ROOT_FIELD_ID,
                level,
                tuple(sorted(children.get(field_id, ()))),
            )
        return cls(nodes)

    @property
    def leaves(self) -> tuple[str, ...]:
        return self._leaves

    def node(self, field_id: str) -> FieldNode:
        try:
            return self.nodes[field_id]
        except KeyError:
            raise KeyError(f"unknown field {field_id!r}") from None

    def ancestors(self, field_id: str, include_self: bool = False):
        """Yield ancestors from the node (optionally) up to the root."""
        node = self.node(field_id)
        if include_self:
            yield node.id
        while node.parent_id is not None:
            node = self.nodes[node.parent_id]
            yield node.id

    def descendants(self, field_id: str, include_self: bool = False):
        stack = [self.node(field_id)]
        first = True
        while stack:
            node = stack.pop()
            if include_self or not first:
                yield node.id
            first = False
            stack.extend(self.nodes[c] for c in reversed(node.children))

    def leaf_descendants(self, field_id: str) -> tuple[str, ...]:
        node = self.node(field_id)
        if node.is_leaf:
            return (node.id,)
        return tuple(
            d for d in self.descendants(field_id) if self.nodes[d].is_leaf
        )

    def level_tag(self, field_id: str) -> str:
        """One of 'root', 'terminal', 'top', 'composite'."""
        node = self.node(field_id)
        if node.id == self.root_id:
            return "root"
        if node.is_leaf:
            return "terminal"
        if node.level == 1:
            return "top"
        return "composite"

    def max_depth(self) -> int:
        return max(n.level for n in self.nodes.values())

    def sorted_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.nodes))

    def __eq__(self, other) -> bool:
        return isinstance(other, Hierarchy) and self.nodes == other.nodes


@dataclass(frozen=True, eq=False)
class Corpus:
    """Immutable snapshot of papers, authorships, field hierarchy and flows."""

    papers: dict[str, Paper]
    authorships: dict[str, Authorship]
    hierarchy: Hierarchy
    flows: tuple[tuple[str, str, float], ...]
    provenance: dict = field(default_factory=dict)

    def __eq__(self, other) -> bool:
        # provenance is bookkeeping, not corpus identity
        return (
            isinstance(other, Corpus)
            and self.papers == other.papers
            and self.authorships == other.authorships
            and self.hierarchy == other.hierarchy
            and self.flows == other.flows
        )

    @property
    def n_papers(self) -> int:
        return len(self.papers)

    @property
    def n_authorships(self) -> int:
        return len(self.authorships)

    def paper_gender_counts(self, paper_id: str) -> tuple[int, int]:
        """(male, female) counts for one paper, ignoring unassigned."""
        m = f = 0
        for aid in self.papers[paper_id].authorship_ids:
            g = self.authorships[aid].gender
            if g == MALE:
                m += 1
            elif g == FEMALE:
                f += 1
        return m, f

    def papers_in_field(self, field_id: str) -> tuple[str, ...]:
        """Papers whose terminal field lies in the subtree of ``field_id``."""
        leaves = set(self.hierarchy.leaf_descendants(field_id))
        return tuple(
            pid for pid in sorted(self.papers)
            if self.papers[pid].terminal_field_id in leaves
        )

    def gender_totals(self) -> dict[str, int]:
        totals = {FEMALE: 0, MALE: 0, UNASSIGNED: 0}
        for a in self.authorships.values():
            totals[a.gender] += 1
        return totals

    def with_provenance(self, **extra) -> "Corpus":
        prov = dict(self.provenance)
        prov.update(extra)
        return replace(self, provenance=prov)


class GenderProvider(Protocol):
    """Anything that can resolve a normalized first name to a gender.

    ``resolve`` returns FEMALE or MALE when the name is used for a single
    gender with frequency >= threshold, otherwise None.  The shipped
    implementation is the file-backed NameFrequencyTable; a remote lookup
    service can implement the same surface.
    """

    name: str

    def resolve(self, normalized_name: str, threshold: float) -> str | None: ...


class NameFrequencyTable:
    """Name -> (female_count, male_count) lookups, case-normalized."""

    def __init__(self, counts: Mapping[str, tuple[int, int]], name: str = "table"):
        self.name = name
        self.counts: dict[str, tuple[int, int]] = {}
        for key, (fc, mc) in counts.items():
            if fc < 0 or mc < 0:
                raise ValueError(f"negative count for name {key!r}")
            self.counts[normalize_name(key)] = (int(fc), int(mc))

    @classmethod
    def from_tsv(cls, path: str | Path, name: str | None = None) -> "NameFrequencyTable":
        counts: dict[str, tuple[int, int]] = {}
        for lineno, row in _iter_tsv(path, 3):
            raw, f_str, m_str = row
            try:
                fc, mc = int(f_str), int(m_str)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: counts must be integers") from None
            key = normalize_name(raw)
            if key in counts:
                fc += counts[key][0]
                mc += counts[key][1]
            counts[key] = (fc, mc)
        return cls(counts, name=name or Path(path).stem)

    def resolve(self, normalized_name: str, threshold: float) -> str | None:
        entry = self.counts.get(normalized_name)
        if entry is None:
            return None
        fc, mc = entry
        total = fc + mc
        if total == 0:
            return None
        if fc / total >= threshold:
            return FEMALE
        if mc / total >= threshold:
            return MALE
        return None


_EDGE_PUNCT = re.compile(r"^[^\w]+|[^\w]+$", re.UNICODE)


def normalize_name(name: str) -> str:
    """Lowercase, strip diacritics and edge punctuation."""
    decomposed = unicodedata.normalize("NFKD", name.strip().lower())
    stripped = "".join(c for c in decomposed if not unicodedata.combining(c))
    return _EDGE_PUNCT.sub("", stripped)


def split_name_parts(normalized: str) -> list[str]:
    """Sub-names of a double name (split on hyphen or whitespace)."""
    return [p for p in re.split(r"[-\s]+", normalized) if p]


def _iter_tsv(path: str | Path, min_cols: int):
    """Yield (lineno, columns) for non-empty, non-comment lines."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < min_cols:
                raise ValueError(
                    f"{path}:{lineno}: expected at least {min_cols} columns, got {len(cols)}"
                )
            yield lineno, cols


def ingest_corpus(
    papers_file: str | Path,
    authorships_file: str | Path,
    hierarchy_file: str | Path,
    flows_file: str | Path,
    year_window: tuple[int, int] = DEFAULT_YEAR_WINDOW,
) -> Corpus:
    """Parse and validate the four corpus files into an (uncleaned) Corpus.

    Papers outside the year window are excluded and logged; authorships
    referencing them are dropped alongside.  Any other dangling reference
    is a hard error naming the offending row.
    """
    hier_rows = []
    for lineno, cols in _iter_tsv(hierarchy_file, 3):
        fid, parent, level_str = cols[0], cols[1], cols[2]
        parent_id = None if parent.upper() in ("NULL", "") else parent
        try:
            level = int(level_str)
        except ValueError:
            raise ValueError(f"{hierarchy_file}:{lineno}: level must be an integer") from None
        hier_rows.append((fid, parent_id, level))
    hierarchy = Hierarchy.from_rows(hier_rows)
    leaves = set(hierarchy.leaves)

    year_lo, year_hi = year_window
    papers: dict[str, Paper] = {}
    excluded_by_year: list[str] = []
    for lineno, cols in _iter_tsv(papers_file, 3):
        pid, fid, year_str = cols[0], cols[1], cols[2]
        if pid in papers or pid in excluded_by_year:
            raise ValueError(f"{papers_file}:{lineno}: duplicate paper id {pid!r}")
        if fid not in hierarchy.nodes:
            raise ValueError(f"{papers_file}:{lineno}: unknown field {fid!r}")
        if fid not in leaves:
            raise ValueError(
                f"{papers_file}:{lineno}: paper {pid!r} assigned to non-leaf field {fid!r}"
            )
        try:
            year = int(year_str)
        except ValueError:
            raise ValueError(f"{papers_file}:{lineno}: year must be an integer") from None
        if not (year_lo <= year <= year_hi):
            excluded_by_year.append(pid)
            continue
        papers[pid] = Paper(pid, fid, year)

    excluded_set = set(excluded_by_year)
    authorships: dict[str, Authorship] = {}
    paper_auths: dict[str, list[str]] = {pid: [] for pid in papers}
    dropped_authorships = 0
    for lineno, cols in _iter_tsv(authorships_file, 3):
        aid, pid, first_name = cols[0], cols[1], cols[2]
        gender = UNASSIGNED
        if len(cols) >= 4 and cols[3]:
            gender = cols[3].strip().upper()
            if gender not in GENDERS:
                raise ValueError(
                    f"{authorships_file}:{lineno}: gender must be one of {GENDERS}"
                )
        if aid in authorships:
            raise ValueError(f"{authorships_file}:{lineno}: duplicate authorship id {aid!r}")
        if pid in excluded_set:
            dropped_authorships += 1
            continue
        if pid not in papers:
            raise ValueError(
                f"{authorships_file}:{lineno}: authorship {aid!r} references unknown paper {pid!r}"
            )
        authorships[aid] = Authorship(aid, pid, first_name or None, gender)
        paper_auths[pid].append(aid)

    papers = {
        pid: replace(p, authorship_ids=tuple(paper_auths[pid]))
        for pid, p in papers.items()
    }

    flows: list[tuple[str, str, float]] = []
    for lineno, cols in _iter_tsv(flows_file, 3):
        src, dst, prop_str = cols[0], cols[1], cols[2]
        for fid in (src, dst):
            if fid not in leaves:
                raise ValueError(
                    f"{flows_file}:{lineno}: flow references non-terminal field {fid!r}"
                )
        try:
            prop = float(prop_str)
        except ValueError:
            raise ValueError(f"{flows_file}:{lineno}: proportion must be numeric") from None
        flows.append((src, dst, prop))

    report = {
        "papers_read": len(papers) + len(excluded_by_year),
        "papers_kept": len(papers),
        "papers_excluded_by_year": len(excluded_by_year),
        "excluded_paper_ids": sorted(excluded_by_year),
        "authorships_kept": len(authorships),
        "authorships_dropped_with_excluded_papers": dropped_authorships,
        "terminal_fields": len(leaves),
        "flow_rows": len(flows),
        "year_window": [year_lo, year_hi],
    }
    return Corpus(
        papers=papers,
        authorships=authorships,
        hierarchy=hierarchy,
        flows=tuple(flows),
        provenance={"ingestion": report},
    )


def build_corpus(
    papers: Iterable[Paper],
    authorships: Iterable[Authorship],
    hierarchy_rows: Iterable[tuple[str, str | None, int]],
    flows: Iterable[tuple[str, str, float]],
    provenance: dict | None = None,
) -> Corpus:
    """Assemble a corpus in memory (synthetic corpora, tests)."""
    hierarchy = Hierarchy.from_rows(hierarchy_rows)
    leaves = set(hierarchy.leaves)
    paper_map: dict[str, Paper] = {}
    for p in papers:
        if p.terminal_field_id not in leaves:
            raise ValueError(f"paper {p.id!r} assigned to non-leaf field")
        paper_map[p.id] = p
    auth_map: dict[str, Authorship] = {}
    paper_auths: dict[str, list[str]] = {pid: [] for pid in paper_map}
    for a in authorships:
        if a.paper_id not in paper_map:
            raise ValueError(f"authorship {a.id!r} references unknown paper {a.paper_id!r}")
        auth_map[a.id] = a
        paper_auths[a.paper_id].append(a.id)
    paper_map = {
        pid: replace(p, authorship_ids=tuple(paper_auths[pid]))
        for pid, p in paper_map.items()
    }
    return Corpus(
        papers=paper_map,
        authorships=auth_map,
        hierarchy=hierarchy,
        flows=tuple(flows),
        provenance=provenance or {},
    )


def _resolve_name(provider, name: str, threshold: float):
    """Resolve a raw first name against one provider.

    Returns FEMALE/MALE, the string "conflict" when sub-names of a double
    name resolve to different genders, or None when unresolved.
    """
    norm = normalize_name(name)
    if not norm:
        return None
    got = provider.resolve(norm, threshold)
    if got is not None:
        return got
    parts = split_name_parts(norm)
    if len(parts) < 2:
        return None
    resolved = {g for g in (provider.resolve(p, threshold) for p in parts) if g}
    if len(resolved) == 1:
        return resolved.pop()
    if len(resolved) > 1:
        return "conflict"
    return None


def impute_gender(
    corpus: Corpus,
    tables: Sequence[GenderProvider],
    threshold: float = 0.95,
) -> Corpus:
    """Impute authorship genders from name tables, in priority order.

    A name resolves when some table maps it (or, for double names, at
    least one sub-name) to a single gender with frequency >= threshold.
    Later tables are consulted only for names the earlier ones left
    unresolved.  Conflicting sub-names mark the authorship Unassigned
    without consulting lower-priority tables.  Genders already present
    (direct column or prior imputation) are never overwritten.
    """
    if not tables:
        raise ValueError("at least one name frequency table is required")
    if not (0.5 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0.5, 1], got {threshold}")

    per_source = {t.name: 0 for t in tables}
    conflicts = 0
    already = 0
    unresolved = 0
    new_auths: dict[str, Authorship] = {}
    for aid in sorted(corpus.authorships):
        a = corpus.authorships[aid]
        if a.gender != UNASSIGNED:
            already += 1
            new_auths[aid] = a
            continue
        gender = None
        if a.first_name:
            for table in tables:
                got = _resolve_name(table, a.first_name, threshold)
                if got == "conflict":
                    conflicts += 1
                    break
                if got is not None:
                    gender = got
                    per_source[table.name] += 1
                    break
        if gender is None:
            unresolved += 1
            new_auths[aid] = a
        else:
            new_auths[aid] = replace(a, gender=gender)

    n = len(new_auths) or 1
    report = {
        "threshold": threshold,
        "already_assigned": already,
        "resolved_by_source": per_source,
        "resolution_rate_by_source": {k: v / n for k, v in per_source.items()},
        "conflicting_double_names": conflicts,
        "unresolved": unresolved,
    }
    return replace(
        corpus,
        authorships=new_auths,
        provenance={**corpus.provenance, "imputation": report},
    )


def clean_corpus(corpus: Corpus) -> Corpus:
    """Drop unassigned authorships, then papers left with < 2 authorships.

    Removal statistics are kept per top-level field (proportion
    unimputed, authorships/papers remaining and lost) over the
    multi-author papers that entered cleaning.
    """
    hierarchy = corpus.hierarchy
    top_of_leaf: dict[str, str] = {}
    for leaf in hierarchy.leaves:
        chain = list(hierarchy.ancestors(leaf, include_self=True))
        # chain ends at root; the top-level field is the node just below it
        top_of_leaf[leaf] = chain[-2] if len(chain) >= 2 else leaf

    stats: dict[str, dict[str, int]] = {}

    def bucket(leaf_id: str) -> dict[str, int]:
        top = top_of_leaf[leaf_id]
        return stats.setdefault(
            top,
            {
                "authorships_before": 0,
                "unimputed": 0,
                "authorships_after": 0,
                "papers_before": 0,
                "papers_after": 0,
            },
        )

    new_papers: dict[str, Paper] = {}
    new_auths: dict[str, Authorship] = {}
    for pid in sorted(corpus.papers):
        paper = corpus.papers[pid]
        multi_author = len(paper.authorship_ids) >= 2
        b = bucket(paper.terminal_field_id) if multi_author else None
        if b is not None:
            b["papers_before"] += 1
            b["authorships_before"] += len(paper.authorship_ids)
        kept = []
        for aid in paper.authorship_ids:
            a = corpus.authorships[aid]
            if a.gender == UNASSIGNED:
                if b is not None:
                    b["unimputed"] += 1
            else:
                kept.append(aid)
        if len(kept) < 2:
            continue
        if b is not None:
            b["papers_after"] += 1
            b["authorships_after"] += len(kept)
        new_papers[pid] = replace(paper, authorship_ids=tuple(kept))
        for aid in kept:
            new_auths[aid] = corpus.authorships[aid]

    summary = {
        top: {
            "prop_unimputed": s["unimputed"] / s["authorships_before"]
            if s["authorships_before"]
            else 0.0,
            "authorships_remaining": s["authorships_after"],
            "prop_authorships_lost": 1 - s["authorships_after"] / s["authorships_before"]
            if s["authorships_before"]
            else 0.0,
            "papers_remaining": s["papers_after"],
            "prop_papers_lost": 1 - s["papers_after"] / s["papers_before"]
            if s["papers_before"]
            else 0.0,
        }
        for top, s in sorted(stats.items())
    }
    cleaning = {
        "papers_before": corpus.n_papers,
        "papers_after": len(new_papers),
        "authorships_before": corpus.n_authorships,
        "authorships_after": len(new_auths),
        "empty_result": not new_papers,
        "per_top_field": summary,
    }
    return Corpus(
        papers=new_papers,
        authorships=new_auths,
        hierarchy=corpus.hierarchy,
        flows=corpus.flows,
        provenance={**corpus.provenance, "cleaning": cleaning},
    )


def is_cleaned(corpus: Corpus) -> bool:
    return all(
        len(p.authorship_ids) >= 2 for p in corpus.papers.values()
    ) and all(a.gender != UNASSIGNED for a in corpus.authorships.values())


def save_corpus(corpus: Corpus, directory: str | Path) -> None:
    """Write a corpus snapshot (same TSV formats as ingestion, plus metadata)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "hierarchy.tsv", "w", encoding="utf-8") as fh:
        for fid in sorted(corpus.hierarchy.nodes):
            node = corpus.hierarchy.nodes[fid]
            if fid == ROOT_FIELD_ID:
                continue
            parent = node.parent_id if node.parent_id != ROOT_FIELD_ID else "NULL"
            fh.write(f"{fid}\t{parent}\t{node.level}\n")
    with open(directory / "papers.tsv", "w", encoding="utf-8") as fh:
        for pid in sorted(corpus.papers):
            p = corpus.papers[pid]
            fh.write(f"{pid}\t{p.terminal_field_id}\t{p.year}\n")
    with open(directory / "authorships.tsv", "w", encoding="utf-8") as fh:
        for pid in sorted(corpus.papers):
            for aid in corpus.papers[pid].authorship_ids:
                a = corpus.authorships[aid]
                fh.write(f"{aid}\t{a.paper_id}\t{a.first_name or ''}\t{a.gender}\n")
    with open(directory / "flows.tsv", "w", encoding="utf-8") as fh:
        for src, dst, prop in corpus.flows:
            fh.write(f"{src}\t{dst}\t{prop!r}\n")
    meta = {
        "provenance": corpus.provenance,
        "year_window": corpus.provenance.get("ingestion", {}).get(
            "year_window", list(DEFAULT_YEAR_WINDOW)
        ),
    }
    with open(directory / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def load_corpus(directory: str | Path) -> Corpus:
    directory = Path(directory)
    meta_path = directory / "meta.json"
    year_window = DEFAULT_YEAR_WINDOW
    provenance: dict = {}
    if meta_path.exists():
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
        provenance = meta.get("provenance", {})
        year_window = tuple(meta.get("year_window", DEFAULT_YEAR_WINDOW))
    corpus = ingest_corpus(
        directory / "papers.tsv",
        directory / "authorships.tsv",
        directory / "hierarchy.tsv",
        directory / "flows.tsv",
        year_window=year_window,  # papers were already filtered; re-applying is a no-op
    )
    if provenance:
        return replace(corpus, provenance=provenance)
    return corpus
