"""Field-to-field reassignment probabilities from citation flows.

The swap matrix is built in three steps: proportions below the threshold
are zeroed, support is symmetrized by averaging each entry with its
transpose, and rows are renormalized to sum to one.  Only *support*
symmetry survives normalization (p*_jk > 0 iff p*_kj > 0), which is what
the sampler's reversibility argument needs.  Fields whose flows file has
no explicit self-citation row get a self-entry equal to the residual
outgoing mass so every field can retain its own authorships.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

ROW_SUM_TOL = 1e-9


class SwapMatrix:
    """Sparse row-stochastic reassignment probabilities over terminal fields."""

    def __init__(self, fields: Iterable[str], rows: Mapping[str, Mapping[str, float]]):
        self.fields: tuple[str, ...] = tuple(sorted(fields))
        self.index: dict[str, int] = {f: i for i, f in enumerate(self.fields)}
        n = len(self.fields)
        indptr = np.zeros(n + 1, dtype=np.int64)
        cols: list[int] = []
        probs: list[float] = []
        for i, f in enumerate(self.fields):
            row = rows.get(f, {})
            for k in sorted(row, key=self.index.__getitem__):
                v = row[k]
                if v < 0:
                    raise ValueError(f"negative probability for ({f}, {k})")
                if v > 0:
                    cols.append(self.index[k])
                    probs.append(v)
            indptr[i + 1] = len(cols)
        self.indptr = indptr
        self.col_idx = np.asarray(cols, dtype=np.int32)
        self.probs = np.asarray(probs, dtype=np.float64)

    def __contains__(self, field_id: str) -> bool:
        return field_id in self.index

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    def prob(self, from_field: str, to_field: str) -> float:
        i, j = self.index[from_field], self.index[to_field]
        lo, hi = self.indptr[i], self.indptr[i + 1]
        pos = np.searchsorted(self.col_idx[lo:hi], j)
        if pos < hi - lo and self.col_idx[lo + pos] == j:
            return float(self.probs[lo + pos])
        return 0.0

    def neighbors(self, field_id: str) -> tuple[str, ...]:
        """Fields with positive support from ``field_id`` (including itself
        when the self-entry is positive); equals the into-support by symmetry."""
        i = self.index[field_id]
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return tuple(self.fields[j] for j in self.col_idx[lo:hi])

    def row_sums(self) -> np.ndarray:
        out = np.zeros(self.n_fields)
        for i in range(self.n_fields):
            out[i] = self.probs[self.indptr[i] : self.indptr[i + 1]].sum()
        return out

    def support_symmetric(self) -> bool:
        support = set()
        for i in range(self.n_fields):
            for pos in range(self.indptr[i], self.indptr[i + 1]):
                support.add((i, int(self.col_idx[pos])))
        return all((j, i) in support for i, j in support)

    def to_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, f in enumerate(self.fields):
                for pos in range(self.indptr[i], self.indptr[i + 1]):
                    fh.write(
                        f"{f}\t{self.fields[self.col_idx[pos]]}\t{float(self.probs[pos])!r}\n"
                    )

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n_fields, self.n_fields))
        for i in range(self.n_fields):
            for pos in range(self.indptr[i], self.indptr[i + 1]):
                out[i, self.col_idx[pos]] = self.probs[pos]
        return out


@dataclass(frozen=True)
class FieldComponents:
    """Partition of terminal fields into connected components of the
    positive-support graph (disjoint and exhaustive)."""

    components: tuple[frozenset[str], ...]
    field_to_component: dict[str, int]

    @property
    def n_components(self) -> int:
        return len(self.components)

    def component_of(self, field_id: str) -> int:
        return self.field_to_component[field_id]


def build_swap_matrix_from_flows(
    flows: Iterable[tuple[str, str, float]],
    terminal_fields: Iterable[str],
    threshold: float = 0.05,
) -> SwapMatrix:
    fields = sorted(set(terminal_fields))
    field_set = set(fields)
    raw: dict[str, dict[str, float]] = {f: {} for f in fields}
    for src, dst, prop in flows:
        if src not in field_set or dst not in field_set:
            raise ValueError(f"flow ({src!r}, {dst!r}) references unknown terminal field")
        if prop < 0 or prop > 1:
            raise ValueError(f"flow proportion out of [0, 1] for ({src!r}, {dst!r}): {prop}")
        if dst in raw[src]:
            raise ValueError(f"duplicate flow row for ({src!r}, {dst!r})")
        raw[src][dst] = prop

    # implicit self-flow: residual outgoing mass, added before thresholding
    for f in fields:
        if f not in raw[f]:
            raw[f][f] = max(0.0, 1.0 - sum(raw[f].values()))

    # step 1: threshold
    thresholded = {
        f: {k: v for k, v in row.items() if v >= threshold} for f, row in raw.items()
    }
    # step 2: symmetrize support by averaging with the transpose
    sym: dict[str, dict[str, float]] = {f: {} for f in fields}
    for f, row in thresholded.items():
        for k, v in row.items():
            if v == 0:
                continue
            sym[f][k] = sym[f].get(k, 0.0) + v / 2.0
            sym[k][f] = sym[k].get(f, 0.0) + v / 2.0
    # step 3: renormalize rows
    dead = [f for f in fields if not sym[f] or sum(sym[f].values()) <= 0]
    if dead:
        raise ValueError(
            "swap matrix has empty rows after thresholding for fields: "
            + ", ".join(sorted(dead))
        )
    rows = {
        f: {k: v / s for k, v in row.items()}
        for f, row in sym.items()
        for s in (sum(row.values()),)
    }
    matrix = SwapMatrix(fields, rows)
    sums = [sum(rows[f].values()) for f in fields]
    assert all(abs(s - 1.0) <= ROW_SUM_TOL for s in sums)
    return matrix


def build_swap_matrix(corpus, threshold: float = 0.05) -> SwapMatrix:
    """Swap matrix for a corpus, over its hierarchy's terminal fields."""
    return build_swap_matrix_from_flows(
        corpus.flows, corpus.hierarchy.leaves, threshold=threshold
    )


def components(swap: SwapMatrix) -> FieldComponents:
    """Union-find over the positive-support graph."""
    parent = list(range(swap.n_fields))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(swap.n_fields):
        for pos in range(swap.indptr[i], swap.indptr[i + 1]):
            j = int(swap.col_idx[pos])
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[rj] = ri

    groups: dict[int, list[str]] = {}
    for i, f in enumerate(swap.fields):
        groups.setdefault(find(i), []).append(f)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    field_to_component = {f: ci for ci, grp in enumerate(ordered) for f in grp}
    return FieldComponents(
        components=tuple(frozenset(g) for g in ordered),
        field_to_component=field_to_component,
    )


def candidate_set(configuration, field_id: str) -> frozenset[str]:
    """Authorships currently assigned to any field with positive support
    into ``field_id`` (the sampler keeps this set's size invariant)."""
    return configuration.candidate_set(field_id)
