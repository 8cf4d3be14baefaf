"""Static array structures shared by the sampling kernels.

A *problem* freezes everything about (corpus, swap matrix, tracked
fields) that the chain never mutates: slot/paper/field indexing, the
candidate-set layout for O(1) uniform draws, the sparse reassignment
probabilities, and the per-node tally layout used for incremental
assortativity updates.  Chains mutate only a ComponentState.

Index conventions (all deterministic): authorships, papers, fields and
tracked nodes are ordered by sorted id; slots are laid out paper by
paper.  Every authorship belongs to the flow component of its original
terminal field and can never leave it, so the chain factorizes into
independent per-component sub-chains.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .. import flow as flow_mod
from ..corpus import Corpus, MALE


@dataclass
class ComponentProblem:
    """Static arrays for one flow component, with component-local indices."""

    n_auth: int
    n_papers: int
    n_fields: int
    n_nodes: int
    max_size: int
    auth_gender: np.ndarray        # int8[n_auth], 1 = male
    auth_orig_field: np.ndarray    # int32[n_auth]
    slot_paper: np.ndarray         # int32[n_auth]
    paper_field: np.ndarray        # int32[n_papers]
    paper_size: np.ndarray         # int32[n_papers]
    paper_slot_start: np.ndarray   # int64[n_papers]
    paper_node_ptr: np.ndarray     # int64[n_papers + 1]
    paper_nodes: np.ndarray        # int32[...]
    field_start: np.ndarray        # int64[n_fields + 1] member-block bounds
    lam_ptr: np.ndarray            # int64[n_fields + 1]
    lam_nbr: np.ndarray            # int32[...] neighbor fields
    lam_cum: np.ndarray            # int64[...] cumulative capacities
    lam_total: np.ndarray          # int64[n_fields]
    sw_indptr: np.ndarray          # int64[n_fields + 1]
    sw_col: np.ndarray             # int32[...]
    sw_prob: np.ndarray            # float64[...]
    inv_co: np.ndarray             # float64[max_size + 1]; 1/(k-1)
    node_ntot: np.ndarray          # int64[n_nodes]
    # local -> global id mappings
    auth_ids: tuple[str, ...] = ()
    paper_ids: tuple[str, ...] = ()
    field_ids: tuple[str, ...] = ()
    node_global: np.ndarray = dc_field(default_factory=lambda: np.zeros(0, np.int32))

    def swap_prob(self, from_field: int, to_field: int) -> float:
        lo, hi = self.sw_indptr[from_field], self.sw_indptr[from_field + 1]
        for pos in range(lo, hi):
            if self.sw_col[pos] == to_field:
                return float(self.sw_prob[pos])
        return 0.0


@dataclass
class Problem:
    """Full sampling problem: tracked nodes plus per-component subproblems."""

    corpus: Corpus
    swap: flow_mod.SwapMatrix
    node_ids: tuple[str, ...]
    node_ntot: np.ndarray
    components: list[ComponentProblem]
    component_auth_counts: np.ndarray  # int64[n_components]
    full: ComponentProblem             # whole corpus as a single structure

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)


def _build_structure(
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    field_ids: tuple[str, ...],
    node_ids: tuple[str, ...],
    node_index: dict[str, int],
    node_global: np.ndarray,
) -> ComponentProblem:
    field_index = {f: i for i, f in enumerate(field_ids)}
    field_set = set(field_ids)
    paper_ids = tuple(
        pid for pid in sorted(corpus.papers)
        if corpus.papers[pid].terminal_field_id in field_set
    )
    auth_ids = tuple(
        aid
        for pid in paper_ids
        for aid in sorted(corpus.papers[pid].authorship_ids)
    )
    auth_ids = tuple(sorted(auth_ids))
    auth_index = {a: i for i, a in enumerate(auth_ids)}
    n_auth, n_papers, n_fields = len(auth_ids), len(paper_ids), len(field_ids)

    paper_field = np.zeros(n_papers, np.int32)
    paper_size = np.zeros(n_papers, np.int32)
    paper_slot_start = np.zeros(n_papers, np.int64)
    slot_paper = np.zeros(n_auth, np.int32)
    auth_gender = np.zeros(n_auth, np.int8)
    auth_orig_field = np.zeros(n_auth, np.int32)
    paper_node_ptr = np.zeros(n_papers + 1, np.int64)
    paper_nodes: list[int] = []

    hierarchy = corpus.hierarchy
    slot = 0
    for p_idx, pid in enumerate(paper_ids):
        paper = corpus.papers[pid]
        f_idx = field_index[paper.terminal_field_id]
        size = len(paper.authorship_ids)
        paper_field[p_idx] = f_idx
        paper_size[p_idx] = size
        paper_slot_start[p_idx] = slot
        for aid in sorted(paper.authorship_ids):
            a_idx = auth_index[aid]
            slot_paper[slot] = p_idx
            auth_gender[a_idx] = 1 if corpus.authorships[aid].gender == MALE else 0
            auth_orig_field[a_idx] = f_idx
            slot += 1
        chain = [
            node_index[nid]
            for nid in hierarchy.ancestors(paper.terminal_field_id, include_self=True)
            if nid in node_index
        ]
        paper_nodes.extend(sorted(chain))
        paper_node_ptr[p_idx + 1] = len(paper_nodes)

    # initial slots follow paper layout; authorship a sits in its own paper
    slot_of_auth = np.zeros(n_auth, np.int32)
    cursor = {p: int(paper_slot_start[p]) for p in range(n_papers)}
    for p_idx, pid in enumerate(paper_ids):
        for aid in sorted(corpus.papers[pid].authorship_ids):
            slot_of_auth[auth_index[aid]] = cursor[p_idx]
            cursor[p_idx] += 1

    capacities = np.bincount(auth_orig_field, minlength=n_fields).astype(np.int64)
    field_start = np.zeros(n_fields + 1, np.int64)
    np.cumsum(capacities, out=field_start[1:])

    lam_ptr = np.zeros(n_fields + 1, np.int64)
    lam_nbr: list[int] = []
    lam_cum: list[int] = []
    lam_total = np.zeros(n_fields, np.int64)
    for i, fid in enumerate(field_ids):
        nbrs = sorted(
            field_index[g] for g in swap.neighbors(fid) if g in field_index
        )
        running = 0
        for g in nbrs:
            running += int(capacities[g])
            lam_nbr.append(g)
            lam_cum.append(running)
        lam_total[i] = running
        lam_ptr[i + 1] = len(lam_nbr)

    sw_indptr = np.zeros(n_fields + 1, np.int64)
    sw_col: list[int] = []
    sw_prob: list[float] = []
    for i, fid in enumerate(field_ids):
        for g in swap.neighbors(fid):
            if g in field_index:
                sw_col.append(field_index[g])
                sw_prob.append(swap.prob(fid, g))
        order = np.argsort(sw_col[sw_indptr[i]:], kind="stable")
        seg_c = [sw_col[sw_indptr[i] + o] for o in order]
        seg_p = [sw_prob[sw_indptr[i] + o] for o in order]
        sw_col[sw_indptr[i]:] = seg_c
        sw_prob[sw_indptr[i]:] = seg_p
        sw_indptr[i + 1] = len(sw_col)

    max_size = int(paper_size.max()) if n_papers else 2
    inv_co = np.zeros(max_size + 1, np.float64)
    for k in range(2, max_size + 1):
        inv_co[k] = 1.0 / (k - 1)

    node_ntot = np.zeros(len(node_ids), np.int64)
    for p_idx in range(n_papers):
        for pos in range(paper_node_ptr[p_idx], paper_node_ptr[p_idx + 1]):
            node_ntot[paper_nodes[pos]] += paper_size[p_idx]

    cp = ComponentProblem(
        n_auth=n_auth,
        n_papers=n_papers,
        n_fields=n_fields,
        n_nodes=len(node_ids),
        max_size=max_size,
        auth_gender=auth_gender,
        auth_orig_field=auth_orig_field,
        slot_paper=slot_paper,
        paper_field=paper_field,
        paper_size=paper_size,
        paper_slot_start=paper_slot_start,
        paper_node_ptr=paper_node_ptr,
        paper_nodes=np.asarray(paper_nodes, np.int32),
        field_start=field_start,
        lam_ptr=lam_ptr,
        lam_nbr=np.asarray(lam_nbr, np.int32),
        lam_cum=np.asarray(lam_cum, np.int64),
        lam_total=lam_total,
        sw_indptr=sw_indptr,
        sw_col=np.asarray(sw_col, np.int32),
        sw_prob=np.asarray(sw_prob, np.float64),
        inv_co=inv_co,
        node_ntot=node_ntot,
        auth_ids=auth_ids,
        paper_ids=paper_ids,
        field_ids=field_ids,
        node_global=node_global,
    )
    cp._initial_slot_of_auth = slot_of_auth  # type: ignore[attr-defined]
    return cp


def build_problem(
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    tracked_fields: tuple[str, ...] | None = None,
) -> Problem:
    """Freeze the sampling problem for a cleaned corpus.

    ``tracked_fields`` defaults to every hierarchy node (terminal,
    composite, top-level and root); unknown ids raise.
    """
    hierarchy = corpus.hierarchy
    if tracked_fields is None:
        node_ids = hierarchy.sorted_ids()
    else:
        for nid in tracked_fields:
            if nid not in hierarchy.nodes:
                raise KeyError(f"unknown tracked field {nid!r}")
        node_ids = tuple(sorted(set(tracked_fields)))
    node_index = {nid: i for i, nid in enumerate(node_ids)}

    comp_partition = flow_mod.components(swap)

    full = _build_structure(
        corpus, swap, swap.fields, node_ids, node_index,
        np.arange(len(node_ids), dtype=np.int32),
    )

    comps: list[ComponentProblem] = []
    counts: list[int] = []
    for group in comp_partition.components:
        fids = tuple(sorted(group))
        # a component tracks only the nodes its papers contribute to
        field_set = set(fids)
        local_nodes: set[str] = set()
        for pid, paper in corpus.papers.items():
            if paper.terminal_field_id in field_set:
                for nid in hierarchy.ancestors(paper.terminal_field_id, include_self=True):
                    if nid in node_index:
                        local_nodes.add(nid)
        local_node_ids = tuple(sorted(local_nodes))
        local_index = {nid: i for i, nid in enumerate(local_node_ids)}
        node_global = np.asarray(
            [node_index[nid] for nid in local_node_ids], np.int32
        )
        cp = _build_structure(corpus, swap, fids, local_node_ids, local_index, node_global)
        comps.append(cp)
        counts.append(cp.n_auth)

    return Problem(
        corpus=corpus,
        swap=swap,
        node_ids=node_ids,
        node_ntot=full.node_ntot,
        components=comps,
        component_auth_counts=np.asarray(counts, np.int64),
        full=full,
    )


class ComponentState:
    """Mutable chain state over one ComponentProblem."""

    __slots__ = (
        "slot_of_auth", "auth_of_slot", "paper_m", "members", "member_pos",
        "field_cnt", "node_mm", "node_fm", "node_nm", "bit_generator",
        "steps_done", "accepted", "baseline_done", "seen", "seen_stamp",
        "paper_stamp", "paper_m_old",
    )

    def __init__(self, problem: ComponentProblem, bit_generator):
        n_auth = problem.n_auth
        self.slot_of_auth = problem._initial_slot_of_auth.copy()  # type: ignore[attr-defined]
        self.auth_of_slot = np.zeros(n_auth, np.int32)
        self.auth_of_slot[self.slot_of_auth] = np.arange(n_auth, dtype=np.int32)
        self.paper_m = np.zeros(problem.n_papers, np.int32)
        for a in range(n_auth):
            if problem.auth_gender[a]:
                self.paper_m[problem.slot_paper[self.slot_of_auth[a]]] += 1
        # member blocks: authorships currently in each field, initial order ascending
        self.members = np.zeros(n_auth, np.int32)
        self.member_pos = np.zeros(n_auth, np.int32)
        self.field_cnt = np.diff(problem.field_start).astype(np.int32)
        cursor = problem.field_start[:-1].copy()
        for a in range(n_auth):
            f = problem.auth_orig_field[a]
            self.members[cursor[f]] = a
            self.member_pos[a] = cursor[f]
            cursor[f] += 1
        K = problem.max_size
        self.node_mm = np.zeros((problem.n_nodes, K + 1), np.int64)
        self.node_fm = np.zeros((problem.n_nodes, K + 1), np.int64)
        self.node_nm = np.zeros(problem.n_nodes, np.int64)
        for p in range(problem.n_papers):
            m = int(self.paper_m[p])
            k = int(problem.paper_size[p])
            for pos in range(problem.paper_node_ptr[p], problem.paper_node_ptr[p + 1]):
                n = problem.paper_nodes[pos]
                self.node_mm[n, k] += m * (m - 1)
                self.node_fm[n, k] += m * (k - m)
                self.node_nm[n] += m
        self.bit_generator = bit_generator
        self.steps_done = 0
        self.accepted = 0
        self.baseline_done = False
        self.seen = np.zeros(n_auth, np.int64)
        self.seen_stamp = 0
        self.paper_stamp = np.zeros(problem.n_papers, np.int64)
        self.paper_m_old = np.zeros(problem.n_papers, np.int32)

    def record_values(self, problem: ComponentProblem) -> np.ndarray:
        """Per-node (p_num, q_num, n_male) triple, exactly as kernels emit it."""
        out = np.zeros((problem.n_nodes, 3), np.float64)
        inv = problem.inv_co
        for n in range(problem.n_nodes):
            p = 0.0
            q = 0.0
            for k in range(2, problem.max_size + 1):
                p += self.node_mm[n, k] * inv[k]
                q += self.node_fm[n, k] * inv[k]
            out[n, 0] = p
            out[n, 1] = q
            out[n, 2] = float(self.node_nm[n])
        return out

    def conservation_ok(self, problem: ComponentProblem) -> bool:
        """All three invariants of the permutation class: per-field totals,
        paper sizes (slot bijection), and global gender counts."""
        if sorted(self.slot_of_auth.tolist()) != list(range(problem.n_auth)):
            return False
        if np.any(self.auth_of_slot[self.slot_of_auth] != np.arange(problem.n_auth)):
            return False
        field_of_auth = problem.paper_field[problem.slot_paper[self.slot_of_auth]]
        counts = np.bincount(field_of_auth, minlength=problem.n_fields)
        if np.any(counts != np.diff(problem.field_start)):
            return False
        m_check = np.zeros(problem.n_papers, np.int64)
        for a in range(problem.n_auth):
            if problem.auth_gender[a]:
                m_check[problem.slot_paper[self.slot_of_auth[a]]] += 1
        return bool(np.all(m_check == self.paper_m))

    def snapshot(self) -> dict:
        return {
            "slot_of_auth": self.slot_of_auth.copy(),
            "auth_of_slot": self.auth_of_slot.copy(),
            "paper_m": self.paper_m.copy(),
            "members": self.members.copy(),
            "member_pos": self.member_pos.copy(),
            "field_cnt": self.field_cnt.copy(),
            "node_mm": self.node_mm.copy(),
            "node_fm": self.node_fm.copy(),
            "node_nm": self.node_nm.copy(),
            "rng_state": self.bit_generator.state,
            "steps_done": self.steps_done,
            "accepted": self.accepted,
            "baseline_done": self.baseline_done,
            "seen_stamp": self.seen_stamp,
        }

    def restore(self, snap: dict) -> None:
        self.slot_of_auth[:] = snap["slot_of_auth"]
        self.auth_of_slot[:] = snap["auth_of_slot"]
        self.paper_m[:] = snap["paper_m"]
        self.members[:] = snap["members"]
        self.member_pos[:] = snap["member_pos"]
        self.field_cnt[:] = snap["field_cnt"]
        self.node_mm[:] = snap["node_mm"]
        self.node_fm[:] = snap["node_fm"]
        self.node_nm[:] = snap["node_nm"]
        self.bit_generator.state = snap["rng_state"]
        self.steps_done = snap["steps_done"]
        self.accepted = snap["accepted"]
        self.baseline_done = snap["baseline_done"]
        self.seen_stamp = snap["seen_stamp"]
        self.seen[:] = 0
        self.paper_stamp[:] = 0
