"""Permutation-cycle Metropolis-Hastings sampling of the gender-blind null.

A configuration assigns every authorship a (terminal field, document)
slot; the null distribution weights each configuration in the
permutation class of the observed one by the product of field
reassignment probabilities.  Proposals are permutation cycles: a
uniformly chosen authorship, a geometric number of further members each
drawn uniformly from the candidate set of the previous member's
original field, each member taking the next one's current slot.  The
proposal is symmetric, so the acceptance ratio is the plain probability
ratio, which telescopes to the cycle members' swap-matrix factors.

Chains factorize over flow components: each component runs its own
sub-chain on a seed-derived RNG stream, scheduled so that cycle starts
are uniform over all authorships.  Results are deterministic given
(seed, plan), independent of kernel flavor and of checkpoint/restore.
"""

from __future__ import annotations

import hashlib
import json
import math
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .. import flow as flow_mod
from .._kernels import get_kernel, kernel_flavor
from ..corpus import Corpus, is_cleaned
from ._problem import ComponentState, Problem, build_problem

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ChainPlan:
    iterations: int
    burn_in: int
    seed: int
    continue_prob: float = 0.5
    tracked_fields: tuple[str, ...] | None = None
    record_assignments: bool = False
    debug_checks: bool = False
    #: "geometric": cycle length l has P(l) = (1-p) p^(l-2), matching the
    #: symmetry proof's length factor; "capped": draw l from a geometric
    #: starting at 1 and clamp to a minimum of 2 (alternative reading of
    #: the length initialization).
    length_mode: str = "geometric"

    def validate(self) -> None:
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.iterations <= self.burn_in:
            raise ValueError(
                f"iterations ({self.iterations}) must exceed burn_in ({self.burn_in})"
            )
        if not (0.0 < self.continue_prob < 1.0):
            raise ValueError("continue_prob must be in (0, 1)")
        if self.length_mode not in ("geometric", "capped"):
            raise ValueError("length_mode must be 'geometric' or 'capped'")

    def equivalent(self, other: "ChainPlan") -> bool:
        """Same sampling plan up to the seed."""
        return (
            self.iterations == other.iterations
            and self.burn_in == other.burn_in
            and self.continue_prob == other.continue_prob
            and self.tracked_fields == other.tracked_fields
            and self.length_mode == other.length_mode
        )

    @property
    def n_samples(self) -> int:
        return self.iterations - self.burn_in


@dataclass(frozen=True)
class CycleProposal:
    """Ordered cycle members; member i takes the current slot of member i+1
    (the last takes the first's).  Reversing the order undoes the cycle."""

    member_idx: tuple[int, ...]
    authorship_ids: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.member_idx)

    def reversed(self) -> "CycleProposal":
        return CycleProposal(self.member_idx[::-1], self.authorship_ids[::-1])


class Configuration:
    """Python-level chain state over the whole corpus (all components).

    Used by the proposal/acceptance API, the exact-enumeration oracle and
    tests; production chains run through the kernels on the same layout.
    """

    def __init__(self, problem: Problem):
        self.problem = problem
        self.structure = problem.full
        self.state = ComponentState(problem.full, np.random.PCG64(0))
        self._auth_index = {a: i for i, a in enumerate(self.structure.auth_ids)}
        self._paper_index = {p: i for i, p in enumerate(self.structure.paper_ids)}
        self._field_index = {f: i for i, f in enumerate(self.structure.field_ids)}
        self._node_index = {n: i for i, n in enumerate(problem.node_ids)}

    @property
    def n_authorships(self) -> int:
        return self.structure.n_auth

    def current_field_of(self, authorship_id: str) -> str:
        a = self._auth_index[authorship_id]
        s = self.state.slot_of_auth[a]
        return self.structure.field_ids[
            self.structure.paper_field[self.structure.slot_paper[s]]
        ]

    def current_paper_of(self, authorship_id: str) -> str:
        a = self._auth_index[authorship_id]
        return self.structure.paper_ids[
            self.structure.slot_paper[self.state.slot_of_auth[a]]
        ]

    def candidate_set(self, field_id: str) -> frozenset[str]:
        """Authorships currently assigned to any field with positive support
        into ``field_id``; its size is invariant along the chain."""
        st = self.structure
        f = self._field_index.get(field_id)
        if f is None:
            raise KeyError(f"unknown terminal field {field_id!r}")
        out = []
        for pos in range(st.lam_ptr[f], st.lam_ptr[f + 1]):
            k = st.lam_nbr[pos]
            lo = int(st.field_start[k])
            hi = lo + int(self.state.field_cnt[k])
            out.extend(st.auth_ids[a] for a in self.state.members[lo:hi])
        return frozenset(out)

    def gender_counts(self, paper_id: str) -> tuple[int, int]:
        p = self._paper_index[paper_id]
        m = int(self.state.paper_m[p])
        return m, int(self.structure.paper_size[p]) - m

    def alpha(self, node_id: str) -> float | None:
        """Assortativity of a tracked node under the current assignment
        (None when a gender is absent)."""
        n = self._node_index[node_id]
        vals = _node_alpha_from_state(self.structure, self.state, n)
        return vals

    def apply(self, proposal: CycleProposal) -> None:
        _apply_cycle(self.structure, self.state, list(proposal.member_idx))

    def conservation_ok(self) -> bool:
        return self.state.conservation_ok(self.structure)


def build_configuration(
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    tracked_fields: tuple[str, ...] | None = None,
) -> Configuration:
    problem = build_problem(corpus, swap, tracked_fields)
    _check_observed_feasible(problem)
    return Configuration(problem)


def _node_alpha_from_state(structure, state, n: int) -> float | None:
    p_num = 0.0
    q_num = 0.0
    for k in range(2, structure.max_size + 1):
        p_num += state.node_mm[n, k] * structure.inv_co[k]
        q_num += state.node_fm[n, k] * structure.inv_co[k]
    n_m = int(state.node_nm[n])
    n_tot = int(structure.node_ntot[n])
    if n_m == 0 or n_m == n_tot:
        return None
    return p_num / n_m - q_num / (n_tot - n_m)


def _apply_cycle(st, state, cycle: list[int]) -> None:
    length = len(cycle)
    old_slots = [int(state.slot_of_auth[a]) for a in cycle]
    touched: dict[int, int] = {}
    for s in old_slots:
        d = int(st.slot_paper[s])
        if d not in touched:
            touched[d] = int(state.paper_m[d])
    for i, a in enumerate(cycle):
        s_new = old_slots[(i + 1) % length]
        state.slot_of_auth[a] = s_new
        state.auth_of_slot[s_new] = a
    for i, a in enumerate(cycle):
        if st.auth_gender[a]:
            state.paper_m[st.slot_paper[old_slots[i]]] -= 1
            state.paper_m[st.slot_paper[state.slot_of_auth[a]]] += 1
    for i, a in enumerate(cycle):
        f_old = st.paper_field[st.slot_paper[old_slots[i]]]
        f_new = st.paper_field[st.slot_paper[state.slot_of_auth[a]]]
        if f_old != f_new:
            last = int(st.field_start[f_old]) + int(state.field_cnt[f_old]) - 1
            pos_a = int(state.member_pos[a])
            moved = int(state.members[last])
            state.members[pos_a] = moved
            state.member_pos[moved] = pos_a
            state.field_cnt[f_old] -= 1
    for i, a in enumerate(cycle):
        f_old = st.paper_field[st.slot_paper[old_slots[i]]]
        f_new = st.paper_field[st.slot_paper[state.slot_of_auth[a]]]
        if f_old != f_new:
            idx = int(st.field_start[f_new]) + int(state.field_cnt[f_new])
            state.members[idx] = a
            state.member_pos[a] = idx
            state.field_cnt[f_new] += 1
    for d, m0 in touched.items():
        m1 = int(state.paper_m[d])
        if m0 == m1:
            continue
        k = int(st.paper_size[d])
        dmm = m1 * (m1 - 1) - m0 * (m0 - 1)
        dfm = m1 * (k - m1) - m0 * (k - m0)
        for pos in range(st.paper_node_ptr[d], st.paper_node_ptr[d + 1]):
            n = st.paper_nodes[pos]
            state.node_mm[n, k] += dmm
            state.node_fm[n, k] += dfm
            state.node_nm[n] += m1 - m0


def _draw_from_lambda(st, state, f: int, u: float) -> int:
    t = int(u * st.lam_total[f])
    base = 0
    pos = int(st.lam_ptr[f])
    while True:
        c = int(st.lam_cum[pos])
        if t < c:
            k = st.lam_nbr[pos]
            return int(state.members[int(st.field_start[k]) + (t - base)])
        base = c
        pos += 1


def _capped_length(u: float, continue_prob: float, n_auth: int) -> int:
    if u <= 0.0:
        return n_auth + 2  # astronomically rare; long cycle, rejected via repeats
    length = 1 + int(math.log(u) / math.log(continue_prob))
    return length if length >= 2 else 2


def propose_cycle(
    config: Configuration,
    rng: np.random.Generator,
    continue_prob: float = 0.5,
    length_mode: str = "geometric",
) -> CycleProposal:
    """Draw one permutation-cycle proposal.

    The first member is uniform over all authorships; each subsequent
    member is uniform over the candidate set of the previous member's
    original field.  Under the default length mode the cycle extends with
    probability ``continue_prob`` after the mandatory second member, so
    P(length = l) = (1-p) p^(l-2); the "capped" mode draws the length
    once from a geometric starting at 1 and clamps it to at least 2.
    Repeats and support violations are legal here; they zero the target
    density at acceptance.
    """
    if not (0.0 < continue_prob < 1.0):
        raise ValueError("continue_prob must be in (0, 1)")
    st = config.structure
    state = config.state
    a1 = int(rng.random() * st.n_auth)
    cycle = [a1]
    prev = a1
    if length_mode == "capped":
        target = _capped_length(rng.random(), continue_prob, st.n_auth)
        while len(cycle) < target:
            nxt = _draw_from_lambda(
                st, state, int(st.auth_orig_field[prev]), rng.random()
            )
            cycle.append(nxt)
            prev = nxt
    elif length_mode == "geometric":
        a2 = _draw_from_lambda(st, state, int(st.auth_orig_field[prev]), rng.random())
        cycle.append(a2)
        prev = a2
        while rng.random() < continue_prob:
            nxt = _draw_from_lambda(
                st, state, int(st.auth_orig_field[prev]), rng.random()
            )
            cycle.append(nxt)
            prev = nxt
    else:
        raise ValueError("length_mode must be 'geometric' or 'capped'")
    return CycleProposal(
        tuple(cycle), tuple(st.auth_ids[a] for a in cycle)
    )


def acceptance_ratio(
    config: Configuration, proposal: CycleProposal, swap=None
) -> float:
    """P(proposed)/P(current): the product over cycle members of the swap
    probability from the proposed field to the member's original field,
    divided by the same product for the current fields.  Zero on repeated
    members or unsupported reassignments."""
    st = config.structure
    state = config.state
    cycle = proposal.member_idx
    if len(set(cycle)) != len(cycle):
        return 0.0
    num = 1.0
    den = 1.0
    for i, a in enumerate(cycle):
        nxt = cycle[(i + 1) % len(cycle)]
        f_orig = int(st.auth_orig_field[a])
        f_cur = int(st.paper_field[st.slot_paper[state.slot_of_auth[a]]])
        f_new = int(st.paper_field[st.slot_paper[state.slot_of_auth[nxt]]])
        num *= st.swap_prob(f_new, f_orig)
        den *= st.swap_prob(f_cur, f_orig)
    return num / den


def cycle_proposal_probability(
    config: Configuration, members: tuple[int, ...], continue_prob: float
) -> float:
    """Analytic probability of proposing this oriented cycle.

    Sums, over every starting member, the probability of drawing the
    start uniformly, traversing the remaining members in order, and
    stopping: (1/|A|) (1-pi) pi^(l-2) times one candidate-set factor per
    hop.  Traversing the reversed cycle yields the same value, which is
    the symmetry the acceptance rule relies on.
    """
    st = config.structure
    l = len(members)
    if l < 2:
        raise ValueError("a cycle has at least two members")
    lam = [int(st.lam_total[st.auth_orig_field[a]]) for a in members]
    stop = (1.0 - continue_prob) * continue_prob ** (l - 2) / st.n_auth
    total = 0.0
    for r in range(l):
        term = stop
        # hops leave members r, r+1, ..., r+l-2; the final member draws nothing
        for j in range(l - 1):
            term *= 1.0 / lam[(r + j) % l]
        total += term
    return total


def _check_observed_feasible(problem: Problem) -> None:
    swap = problem.swap
    counts: dict[str, int] = {f: 0 for f in swap.fields}
    for paper in problem.corpus.papers.values():
        counts[paper.terminal_field_id] += len(paper.authorship_ids)
    bad = [f for f, c in counts.items() if c > 0 and swap.prob(f, f) <= 0.0]
    if bad:
        raise ValueError(
            "observed configuration has zero null probability: fields without "
            "self-support: " + ", ".join(sorted(bad))
        )


def _fingerprint(corpus: Corpus, swap: flow_mod.SwapMatrix) -> str:
    h = hashlib.sha256()
    for pid in sorted(corpus.papers):
        p = corpus.papers[pid]
        h.update(f"{pid}\t{p.terminal_field_id}\t{p.year}\n".encode())
        for aid in p.authorship_ids:
            a = corpus.authorships[aid]
            h.update(f"{aid}\t{a.gender}\n".encode())
    h.update("|".join(swap.fields).encode())
    h.update(swap.probs.tobytes())
    h.update(swap.col_idx.tobytes())
    return h.hexdigest()


class _RunContext:
    def __init__(self, corpus, swap, plan: ChainPlan, kernel=None):
        plan.validate()
        if not is_cleaned(corpus):
            raise ValueError("corpus must be cleaned before sampling")
        self.corpus = corpus
        self.swap = swap
        self.plan = plan
        self.problem = build_problem(corpus, swap, plan.tracked_fields)
        _check_observed_feasible(self.problem)
        self.kernel = get_kernel(kernel)
        n_comps = len(self.problem.components)
        counts = self.problem.component_auth_counts
        total = int(counts.sum())
        if total == 0:
            raise ValueError("corpus has no authorships to sample")
        self.active = [ci for ci in range(n_comps) if counts[ci] > 0]
        if plan.record_assignments and len(self.active) != 1:
            raise ValueError(
                "record_assignments requires a single-component swap matrix"
            )
        ss = np.random.SeedSequence(plan.seed)
        children = ss.spawn(n_comps + 1)
        T = plan.iterations
        if len(self.active) == 1:
            schedule = np.full(T, self.active[0], dtype=np.int64)
        else:
            cum = np.cumsum(counts / total)
            cum[-1] = 1.0
            sched = np.random.Generator(np.random.PCG64(children[0]))
            schedule = np.searchsorted(cum, sched.random(T), side="right").astype(np.int64)
        self.its_steps = [
            np.flatnonzero(schedule == ci).astype(np.int64) + 1 for ci in range(n_comps)
        ]
        self.states = {
            ci: ComponentState(self.problem.components[ci], np.random.PCG64(children[1 + ci]))
            for ci in self.active
        }
        self.k_pos = {ci: 0 for ci in self.active}
        self.rec_idx: dict[int, list[np.ndarray]] = {ci: [] for ci in self.active}
        self.rec_vals: dict[int, list[np.ndarray]] = {ci: [] for ci in self.active}
        self.rec_assign: dict[int, list[np.ndarray]] = {ci: [] for ci in self.active}
        self.global_pos = 0

    def advance(self, upto: int) -> None:
        if self.plan.debug_checks:
            for step in range(self.global_pos + 1, upto + 1):
                self._advance_once(step)
                for ci in self.active:
                    if not self.states[ci].conservation_ok(self.problem.components[ci]):
                        raise AssertionError(
                            f"conservation violated in component {ci} at step {step}"
                        )
            return
        self._advance_once(upto)

    def _advance_once(self, upto: int) -> None:
        for ci in self.active:
            steps = self.its_steps[ci]
            k_hi = int(np.searchsorted(steps, upto, side="right"))
            k_lo = self.k_pos[ci]
            if k_hi > k_lo:
                idx, vals, assign, _ = self.kernel.run_steps(
                    self.problem.components[ci],
                    self.states[ci],
                    steps,
                    k_lo,
                    k_hi,
                    self.plan.burn_in,
                    self.plan.continue_prob,
                    self.plan.record_assignments,
                    self.plan.length_mode == "capped",
                )
                if len(idx):
                    self.rec_idx[ci].append(idx)
                    self.rec_vals[ci].append(vals)
                    if assign is not None:
                        self.rec_assign[ci].append(assign)
                self.k_pos[ci] = k_hi
        self.global_pos = upto

    def finalize(self) -> "ChainRun":
        if self.global_pos != self.plan.iterations:
            raise RuntimeError("chain has not been advanced to completion")
        plan = self.plan
        problem = self.problem
        for ci in self.active:
            state = self.states[ci]
            if not state.baseline_done:
                vals = state.record_values(problem.components[ci])
                self.rec_idx[ci].append(np.asarray([plan.burn_in], np.int64))
                self.rec_vals[ci].append(vals.reshape(1, -1, 3))
                if plan.record_assignments:
                    self.rec_assign[ci].append(
                        state.slot_of_auth.copy().reshape(1, -1)
                    )
                state.baseline_done = True

        n_samples = plan.n_samples
        n_nodes = problem.n_nodes
        sample_idx = np.arange(plan.burn_in + 1, plan.iterations + 1, dtype=np.int64)
        pnum = np.zeros((n_samples, n_nodes))
        qnum = np.zeros((n_samples, n_nodes))
        n_male = np.zeros((n_samples, n_nodes))
        for ci in self.active:
            idx = np.concatenate(self.rec_idx[ci])
            vals = np.concatenate(self.rec_vals[ci], axis=0)
            order = np.argsort(idx, kind="stable")
            idx = idx[order]
            vals = vals[order]
            pos = np.searchsorted(idx, sample_idx, side="right") - 1
            if pos.min() < 0:
                raise RuntimeError("missing baseline record for a component")
            sel = vals[pos]
            cols = problem.components[ci].node_global
            pnum[:, cols] += sel[:, :, 0]
            qnum[:, cols] += sel[:, :, 1]
            n_male[:, cols] += sel[:, :, 2]

        ntot = problem.node_ntot.astype(np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            alpha = pnum / n_male - qnum / (ntot[None, :] - n_male)
        defined = (n_male > 0) & (n_male < ntot[None, :])
        trace = np.where(defined, alpha, np.nan)

        assignments = None
        assignment_auth_ids: tuple[str, ...] = ()
        assignment_paper_ids: tuple[str, ...] = ()
        if plan.record_assignments:
            ci = self.active[0]
            comp = problem.components[ci]
            idx = np.concatenate(self.rec_idx[ci])
            slots = np.concatenate(self.rec_assign[ci], axis=0)
            order = np.argsort(idx, kind="stable")
            keep = idx[order] > plan.burn_in
            slots = slots[order][keep]
            assignments = comp.slot_paper[slots]
            assignment_auth_ids = comp.auth_ids
            assignment_paper_ids = comp.paper_ids

        proposed = sum(len(self.its_steps[ci]) for ci in self.active)
        accepted = sum(self.states[ci].accepted for ci in self.active)
        stay_num = 0
        for ci in self.active:
            comp = problem.components[ci]
            state = self.states[ci]
            cur_field = comp.paper_field[comp.slot_paper[state.slot_of_auth]]
            stay_num += int(np.sum(cur_field == comp.auth_orig_field))
        total_auth = int(problem.component_auth_counts.sum())

        return ChainRun(
            plan=plan,
            node_ids=problem.node_ids,
            trace=trace,
            acceptance={
                "proposed": proposed,
                "accepted": int(accepted),
                "rate": accepted / proposed if proposed else 0.0,
            },
            kernel=self.kernel.FLAVOR,
            stay_fraction=stay_num / total_auth,
            assignments=assignments,
            assignment_auth_ids=assignment_auth_ids,
            assignment_paper_ids=assignment_paper_ids,
        )

    def save_checkpoint(self, path: str | Path) -> None:
        blob = {
            "version": CHECKPOINT_VERSION,
            "plan": asdict(self.plan),
            "fingerprint": _fingerprint(self.corpus, self.swap),
            "global_pos": self.global_pos,
            "k_pos": self.k_pos,
            "states": {ci: self.states[ci].snapshot() for ci in self.active},
            "rec_idx": {ci: self.rec_idx[ci] for ci in self.active},
            "rec_vals": {ci: self.rec_vals[ci] for ci in self.active},
            "rec_assign": {ci: self.rec_assign[ci] for ci in self.active},
        }
        with open(path, "wb") as fh:
            pickle.dump(blob, fh)


@dataclass
class ChainRun:
    plan: ChainPlan
    node_ids: tuple[str, ...]
    trace: np.ndarray
    acceptance: dict
    kernel: str
    stay_fraction: float
    assignments: np.ndarray | None = None
    assignment_auth_ids: tuple[str, ...] = ()
    assignment_paper_ids: tuple[str, ...] = ()

    def trace_for(self, field_id: str) -> np.ndarray:
        try:
            col = self.node_ids.index(field_id)
        except ValueError:
            raise KeyError(f"field {field_id!r} was not tracked") from None
        return self.trace[:, col]

    def assignment_keys(self) -> list[tuple[int, ...]]:
        """One hashable paper-assignment key per post-burn-in sample."""
        if self.assignments is None:
            raise ValueError("chain was run without record_assignments")
        return [tuple(int(x) for x in row) for row in self.assignments]

    def save(self, path: str | Path) -> None:
        meta = {
            "plan": asdict(self.plan),
            "acceptance": self.acceptance,
            "kernel": self.kernel,
            "stay_fraction": self.stay_fraction,
        }
        np.savez_compressed(
            path,
            trace=self.trace,
            node_ids=np.asarray(self.node_ids, dtype=object),
            meta=np.asarray([json.dumps(meta)], dtype=object),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ChainRun":
        with np.load(path, allow_pickle=True) as data:
            meta = json.loads(str(data["meta"][0]))
            plan_d = meta["plan"]
            if plan_d.get("tracked_fields") is not None:
                plan_d["tracked_fields"] = tuple(plan_d["tracked_fields"])
            plan = ChainPlan(**plan_d)
            return cls(
                plan=plan,
                node_ids=tuple(str(x) for x in data["node_ids"]),
                trace=data["trace"],
                acceptance=meta["acceptance"],
                kernel=meta["kernel"],
                stay_fraction=meta["stay_fraction"],
            )

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("sample_index\tfield_id\talpha\n")
            for s in range(self.trace.shape[0]):
                for j, nid in enumerate(self.node_ids):
                    v = self.trace[s, j]
                    fh.write(f"{s}\t{nid}\t{'' if np.isnan(v) else repr(float(v))}\n")


def run_chain(
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    plan: ChainPlan,
    kernel: str | None = None,
    checkpoint_path: str | Path | None = None,
    checkpoint_at: int | None = None,
) -> ChainRun:
    """Run one chain from the observed configuration; see module docstring.

    With ``checkpoint_path`` and ``checkpoint_at`` the mutable state is
    serialized at that global step before the run continues; resuming
    from the file reproduces the identical trace.
    """
    ctx = _RunContext(corpus, swap, plan, kernel=kernel)
    if checkpoint_at is not None:
        if not (0 < checkpoint_at < plan.iterations):
            raise ValueError("checkpoint_at must fall inside the run")
        ctx.advance(checkpoint_at)
        if checkpoint_path is not None:
            ctx.save_checkpoint(checkpoint_path)
    ctx.advance(plan.iterations)
    return ctx.finalize()


def resume_chain(
    checkpoint_path: str | Path,
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    kernel: str | None = None,
) -> ChainRun:
    """Continue a checkpointed chain to completion."""
    with open(checkpoint_path, "rb") as fh:
        blob = pickle.load(fh)
    if blob["version"] != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {blob['version']}")
    if blob["fingerprint"] != _fingerprint(corpus, swap):
        raise ValueError("checkpoint does not match this corpus/swap matrix")
    plan_d = dict(blob["plan"])
    if plan_d.get("tracked_fields") is not None:
        plan_d["tracked_fields"] = tuple(plan_d["tracked_fields"])
    plan = ChainPlan(**plan_d)
    ctx = _RunContext(corpus, swap, plan, kernel=kernel)
    ctx.global_pos = blob["global_pos"]
    ctx.k_pos = blob["k_pos"]
    for ci in ctx.active:
        ctx.states[ci].restore(blob["states"][ci])
    ctx.rec_idx = blob["rec_idx"]
    ctx.rec_vals = blob["rec_vals"]
    ctx.rec_assign = blob["rec_assign"]
    ctx.advance(plan.iterations)
    return ctx.finalize()


def _chain_worker(args) -> ChainRun:
    corpus, swap, plan, kernel = args
    return run_chain(corpus, swap, plan, kernel=kernel)


def run_chains(
    corpus: Corpus,
    swap: flow_mod.SwapMatrix,
    plans: list[ChainPlan],
    workers: int = 1,
    kernel: str | None = None,
) -> list[ChainRun]:
    """Run independent chains, optionally across a process pool."""
    if workers <= 1 or len(plans) == 1:
        return [run_chain(corpus, swap, p, kernel=kernel) for p in plans]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_chain_worker, [(corpus, swap, p, kernel) for p in plans]))


__all__ = [
    "ChainPlan",
    "ChainRun",
    "Configuration",
    "CycleProposal",
    "acceptance_ratio",
    "build_configuration",
    "build_problem",
    "cycle_proposal_probability",
    "kernel_flavor",
    "propose_cycle",
    "resume_chain",
    "run_chain",
    "run_chains",
]
