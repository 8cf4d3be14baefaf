"""Synthetic corpora and exact-enumeration oracles.

The generator plants a controllable amount of behavioral homophily
(strength 0 reproduces the null itself: authorships assigned to papers
uniformly at random within each field).  The enumerator computes the
exact weighted null over all configurations in the permutation class,
collapsing authorships to (gender, original field) types with
multiplicity weights since the assortativity of a configuration depends
only on gender placements.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Mapping, Sequence

import numpy as np

from . import flow as flow_mod
from .corpus import Authorship, Corpus, FEMALE, MALE, Paper, build_corpus, is_cleaned
from .sampler import build_problem


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic corpus.

    ``hierarchy`` lists (field_id, parent_id_or_None) pairs; parentless
    fields are top-level and levels are derived.  Papers are generated
    for leaf fields only.  ``paper_sizes`` cycles over each field's
    papers; ``female_share`` fixes the field's gender ratio; ``homophily``
    is the probability that a paper is assembled single-gender.  With no
    ``flows`` every terminal field keeps its authorships to itself.
    """

    hierarchy: tuple[tuple[str, str | None], ...]
    papers_per_field: int | Mapping[str, int] = 10
    paper_sizes: int | Sequence[int] | Mapping[str, int | Sequence[int]] = 3
    female_share: float | Mapping[str, float] = 0.5
    homophily: float | Mapping[str, float] = 0.0
    flows: tuple[tuple[str, str, float], ...] | None = None
    seed: int = 0
    year: int = 2000


def _per_field(value, field_id, default):
    if isinstance(value, Mapping):
        return value.get(field_id, default)
    return value


def generate_corpus(spec: SynthSpec) -> Corpus:
    """Deterministic-by-seed synthetic corpus that passes cleaning unchanged."""
    parents = dict(spec.hierarchy)
    levels: dict[str, int] = {}

    def level_of(fid: str) -> int:
        if fid not in levels:
            parent = parents[fid]
            levels[fid] = 1 if parent is None else level_of(parent) + 1
        return levels[fid]

    rows = [(fid, parent, level_of(fid)) for fid, parent in spec.hierarchy]
    children = {parent for _, parent in spec.hierarchy if parent is not None}
    leaves = sorted(fid for fid, _ in spec.hierarchy if fid not in children)
    if not leaves:
        raise ValueError("hierarchy has no leaf fields")

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    papers: list[Paper] = []
    authorships: list[Authorship] = []
    for leaf in leaves:
        n_papers = _per_field(spec.papers_per_field, leaf, 10)
        if n_papers < 1:
            raise ValueError(f"field {leaf!r} requests {n_papers} papers")
        sizes_spec = _per_field(spec.paper_sizes, leaf, 3)
        if isinstance(sizes_spec, int):
            sizes = [sizes_spec] * n_papers
        else:
            sizes = [sizes_spec[i % len(sizes_spec)] for i in range(n_papers)]
        if any(s < 2 for s in sizes):
            raise ValueError(f"field {leaf!r} has a paper with fewer than 2 authors")
        share = _per_field(spec.female_share, leaf, 0.5)
        if not (0.0 <= share <= 1.0):
            raise ValueError(f"female share for {leaf!r} outside [0, 1]")
        strength = _per_field(spec.homophily, leaf, 0.0)
        if not (0.0 <= strength <= 1.0):
            raise ValueError(f"homophily strength for {leaf!r} outside [0, 1]")

        n_auth = sum(sizes)
        rem_f = round(share * n_auth)
        rem_m = n_auth - rem_f
        for p_i, size in enumerate(sizes):
            pid = f"{leaf}-p{p_i}"
            papers.append(Paper(pid, leaf, spec.year))
            homophilous = strength > 0.0 and rng.random() < strength
            genders: list[str] = []
            if homophilous:
                target = FEMALE if rng.random() * (rem_f + rem_m) < rem_f else MALE
                for _ in range(size):
                    if target == FEMALE and rem_f > 0:
                        genders.append(FEMALE)
                        rem_f -= 1
                    elif target == MALE and rem_m > 0:
                        genders.append(MALE)
                        rem_m -= 1
                    elif rem_f > 0:
                        genders.append(FEMALE)
                        rem_f -= 1
                    else:
                        genders.append(MALE)
                        rem_m -= 1
            else:
                # sequential draws without replacement = uniform assignment
                for _ in range(size):
                    if rng.random() * (rem_f + rem_m) < rem_f:
                        genders.append(FEMALE)
                        rem_f -= 1
                    else:
                        genders.append(MALE)
                        rem_m -= 1
            for a_i, g in enumerate(genders):
                authorships.append(
                    Authorship(f"{pid}-a{a_i}", pid, None, g)
                )

    flows = spec.flows
    if flows is None:
        flows = tuple((leaf, leaf, 1.0) for leaf in leaves)
    corpus = build_corpus(papers, authorships, rows, flows, provenance={"synthetic": True})
    assert is_cleaned(corpus)
    return corpus


def _compositions(total: int, caps: list[int]):
    """All ways to split ``total`` across len(caps) cells, cell i <= caps[i]."""
    n = len(caps)

    def rec(i: int, left: int, acc: list[int]):
        if i == n - 1:
            if left <= caps[i]:
                yield acc + [left]
            return
        hi = min(caps[i], left)
        for c in range(hi + 1):
            yield from rec(i + 1, left - c, acc + [c])

    yield from rec(0, total, [])


class ExactNull:
    """Exact null distribution over a small corpus.

    Per tracked node, the assortativity distribution (with an explicit
    undefined atom); per component, the normalizing constant for exact
    configuration probabilities.
    """

    def __init__(self, problem, node_dists, comp_z, comp_of_field, cap):
        self._problem = problem
        self.node_ids = problem.node_ids
        self._dists = node_dists  # node_id -> list of (alpha_or_None, prob)
        self._comp_z = comp_z
        self._comp_of_field = comp_of_field
        self.cap = cap

    def distribution(self, node_id: str):
        return self._dists[node_id]

    def total_probability(self, node_id: str) -> float:
        return sum(p for _, p in self._dists[node_id])

    def e_alpha(self, node_id: str, undefined_as_one: bool = True) -> float:
        total = 0.0
        for val, p in self._dists[node_id]:
            if val is None:
                if not undefined_as_one:
                    continue
                val = 1.0
            total += val * p
        return total

    def pvalue(self, node_id: str, observed: float | None) -> float:
        obs = 1.0 if observed is None else observed
        total = 0.0
        for val, p in self._dists[node_id]:
            v = 1.0 if val is None else val
            if v >= obs:
                total += p
        return total

    def prob_of_assignment(self, assignment: Mapping[str, str]) -> float:
        """Exact probability of a configuration given as authorship -> paper.

        Zero when the assignment leaves the permutation class (wrong paper
        sizes) or uses an unsupported reassignment.
        """
        corpus = self._problem.corpus
        swap = self._problem.swap
        sizes: dict[str, int] = {}
        for aid, pid in assignment.items():
            if aid not in corpus.authorships or pid not in corpus.papers:
                raise KeyError(f"unknown authorship or paper in assignment: {aid}, {pid}")
            sizes[pid] = sizes.get(pid, 0) + 1
        for pid, paper in corpus.papers.items():
            if sizes.get(pid, 0) != len(paper.authorship_ids):
                return 0.0
        prob_per_comp: dict[int, float] = {}
        for aid, pid in assignment.items():
            orig = corpus.papers[corpus.authorships[aid].paper_id].terminal_field_id
            dest = corpus.papers[pid].terminal_field_id
            comp = self._comp_of_field[orig]
            if self._comp_of_field[dest] != comp:
                return 0.0
            w = swap.prob(dest, orig)
            if w <= 0.0:
                return 0.0
            prob_per_comp[comp] = prob_per_comp.get(comp, 1.0) * w
        out = 1.0
        for comp, z in self._comp_z.items():
            out *= prob_per_comp.get(comp, 1.0) / z
        return out


def enumerate_null_exact(
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    cap: int = 10_000_000,
    tracked_fields: tuple[str, ...] | None = None,
) -> ExactNull:
    """Enumerate the exact weighted null; error when the instance exceeds ``cap``.

    Authorships are collapsed to (gender, original field) types; each
    class of configurations sharing a type-count matrix has constant
    weight and its size is a product of multinomials.
    """
    if not is_cleaned(corpus):
        raise ValueError("corpus must be cleaned before enumeration")
    problem = build_problem(corpus, swap, tracked_fields)
    comp_partition = flow_mod.components(swap)
    comp_of_field = dict(comp_partition.field_to_component)

    # node -> list of per-component triple distributions to convolve
    node_parts: dict[str, list[dict[tuple[float, float, int], float]]] = {
        nid: [] for nid in problem.node_ids
    }
    comp_z: dict[int, float] = {}

    for ci, comp in enumerate(problem.components):
        if comp.n_auth == 0:
            continue
        types: dict[tuple[int, int], int] = {}
        for a in range(comp.n_auth):
            key = (int(comp.auth_gender[a]), int(comp.auth_orig_field[a]))
            types[key] = types.get(key, 0) + 1
        type_list = sorted(types)
        type_counts = [types[t] for t in type_list]
        n_types = len(type_list)
        n_papers = comp.n_papers

        # crude class-count bound: product over papers of compositions
        bound = 1
        for d in range(n_papers):
            k = int(comp.paper_size[d])
            bound *= comb(k + n_types - 1, n_types - 1)
            if bound > cap:
                raise ValueError(
                    f"instance too large for exact oracle (> {cap} classes)"
                )

        weights = np.zeros((n_papers, n_types))
        for d in range(n_papers):
            fd = int(comp.paper_field[d])
            for t, (_, f_orig) in enumerate(type_list):
                weights[d, t] = comp.swap_prob(fd, f_orig)

        local_nodes = [problem.node_ids[g] for g in comp.node_global]
        n_local = len(local_nodes)
        part_dists: list[dict[tuple[float, float, int], float]] = [
            {} for _ in range(n_local)
        ]
        z_total = 0.0
        male_flags = [g for g, _ in type_list]

        paper_m = [0] * n_papers

        def rec(d: int, remaining: list[int], mult: int, weight: float):
            nonlocal z_total
            if weight == 0.0:
                return
            if d == n_papers:
                mass = mult * weight
                z_total += mass
                triples = _paper_m_to_triples(comp, paper_m, n_local)
                for n_i in range(n_local):
                    key = triples[n_i]
                    part_dists[n_i][key] = part_dists[n_i].get(key, 0.0) + mass
                return
            k = int(comp.paper_size[d])
            for combo in _compositions(k, remaining):
                w = weight
                mu = mult
                m = 0
                ok = True
                for t, c in enumerate(combo):
                    if c:
                        wt = weights[d, t]
                        if wt == 0.0:
                            ok = False
                            break
                        w *= wt ** c
                        mu *= comb(remaining[t], c)
                        if male_flags[t]:
                            m += c
                if not ok:
                    continue
                paper_m[d] = m
                rec(
                    d + 1,
                    [r - c for r, c in zip(remaining, combo)],
                    mu,
                    w,
                )
            paper_m[d] = 0

        rec(0, type_counts, 1, 1.0)
        if z_total <= 0.0:
            raise ValueError("component has no feasible configuration")
        comp_z[ci] = z_total
        for n_i, nid in enumerate(local_nodes):
            node_parts[nid].append(
                {k: v / z_total for k, v in part_dists[n_i].items()}
            )

    node_dists: dict[str, list[tuple[float | None, float]]] = {}
    for nid in problem.node_ids:
        parts = node_parts[nid]
        ntot = int(problem.node_ntot[problem.node_ids.index(nid)])
        if not parts:
            node_dists[nid] = [(None, 1.0)]
            continue
        joint: dict[tuple[float, float, int], float] = {(0.0, 0.0, 0): 1.0}
        for part in parts:
            new: dict[tuple[float, float, int], float] = {}
            if len(joint) * len(part) > cap:
                raise ValueError(f"instance too large for exact oracle (> {cap} classes)")
            for (p1, q1, m1), mass1 in joint.items():
                for (p2, q2, m2), mass2 in part.items():
                    key = (p1 + p2, q1 + q2, m1 + m2)
                    new[key] = new.get(key, 0.0) + mass1 * mass2
            joint = new
        by_alpha: dict[float | None, float] = {}
        for (p_num, q_num, n_m), mass in joint.items():
            if n_m == 0 or n_m == ntot:
                val: float | None = None
            else:
                val = p_num / n_m - q_num / (ntot - n_m)
            by_alpha[val] = by_alpha.get(val, 0.0) + mass
        node_dists[nid] = sorted(
            by_alpha.items(), key=lambda kv: (kv[0] is None, kv[0] if kv[0] is not None else 0.0)
        )

    return ExactNull(problem, node_dists, comp_z, comp_of_field, cap)


def _paper_m_to_triples(comp, paper_m: list[int], n_local: int):
    """Per-node (p_num, q_num, n_male) for one gender pattern."""
    p_num = [0.0] * n_local
    q_num = [0.0] * n_local
    n_m = [0] * n_local
    for d in range(comp.n_papers):
        m = paper_m[d]
        k = int(comp.paper_size[d])
        pc = m * (m - 1) * comp.inv_co[k]
        qc = m * (k - m) * comp.inv_co[k]
        for pos in range(comp.paper_node_ptr[d], comp.paper_node_ptr[d + 1]):
            n = comp.paper_nodes[pos]
            p_num[n] += pc
            q_num[n] += qc
            n_m[n] += m
    return [(p_num[i], q_num[i], n_m[i]) for i in range(n_local)]
