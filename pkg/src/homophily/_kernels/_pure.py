"""Pure-Python sampling kernel.

Reference implementation of the permutation-cycle Metropolis step; the
compiled kernel must reproduce its draw sequence and outputs bit for
bit.  All randomness is consumed as uniform doubles from the state's
bit generator, one draw per decision, in a fixed order per step:
cycle start, second member, then per extension a continue/stop draw
followed (on continue) by a member draw, and finally the acceptance
uniform.
"""

from __future__ import annotations

import math

import numpy as np

FLAVOR = "pure"


def run_steps(
    problem,
    state,
    global_steps: np.ndarray,
    k_from: int,
    k_to: int,
    burn_in: int,
    continue_prob: float,
    record_assign: bool = False,
    capped_length: bool = False,
):
    """Execute steps ``global_steps[k_from:k_to]`` of one component.

    Returns (rec_idx, rec_vals, rec_assign_arr, accepted_delta).  A
    record is emitted after every step whose global index exceeds
    ``burn_in``, plus a single baseline record (indexed at ``burn_in``)
    the first time the post-burn-in region is entered.
    """
    rng = np.random.Generator(state.bit_generator)
    next_double = rng.random

    n_auth = problem.n_auth
    gender = problem.auth_gender.tolist()
    orig_field = problem.auth_orig_field.tolist()
    slot_paper = problem.slot_paper.tolist()
    paper_field = problem.paper_field.tolist()
    paper_size = problem.paper_size.tolist()
    paper_node_ptr = problem.paper_node_ptr.tolist()
    paper_nodes = problem.paper_nodes.tolist()
    field_start = problem.field_start.tolist()
    lam_ptr = problem.lam_ptr.tolist()
    lam_nbr = problem.lam_nbr.tolist()
    lam_cum = problem.lam_cum.tolist()
    lam_total = problem.lam_total.tolist()
    sw_indptr = problem.sw_indptr.tolist()
    sw_col = problem.sw_col.tolist()
    sw_prob = problem.sw_prob.tolist()
    inv_co = problem.inv_co.tolist()
    n_nodes = problem.n_nodes
    max_size = problem.max_size

    slot_of_auth = state.slot_of_auth.tolist()
    auth_of_slot = state.auth_of_slot.tolist()
    paper_m = state.paper_m.tolist()
    members = state.members.tolist()
    member_pos = state.member_pos.tolist()
    field_cnt = state.field_cnt.tolist()
    node_mm = state.node_mm.tolist()
    node_fm = state.node_fm.tolist()
    node_nm = state.node_nm.tolist()
    seen = state.seen.tolist()
    stamp = state.seen_stamp
    paper_stamp = state.paper_stamp.tolist()
    paper_m_old = state.paper_m_old.tolist()

    accepted = 0
    baseline_done = state.baseline_done
    rec_idx: list[int] = []
    rec_rows: list[list[float]] = []
    rec_assigns: list[list[int]] = []

    def emit(idx: int) -> None:
        row = []
        for n in range(n_nodes):
            mm_row = node_mm[n]
            fm_row = node_fm[n]
            p = 0.0
            q = 0.0
            for k in range(2, max_size + 1):
                p += mm_row[k] * inv_co[k]
                q += fm_row[k] * inv_co[k]
            row.extend((p, q, float(node_nm[n])))
        rec_idx.append(idx)
        rec_rows.append(row)
        if record_assign:
            rec_assigns.append(list(slot_of_auth))

    def draw_lambda(f: int, u: float) -> int:
        t = int(u * lam_total[f])
        base = 0
        pos = lam_ptr[f]
        while True:
            c = lam_cum[pos]
            if t < c:
                k = lam_nbr[pos]
                return members[field_start[k] + (t - base)]
            base = c
            pos += 1

    def swap_p(fj: int, fk: int) -> float:
        for pos in range(sw_indptr[fj], sw_indptr[fj + 1]):
            if sw_col[pos] == fk:
                return sw_prob[pos]
        return 0.0

    for k_step in range(k_from, k_to):
        g_idx = int(global_steps[k_step])
        if g_idx > burn_in and not baseline_done:
            emit(burn_in)
            baseline_done = True

        # --- propose a permutation cycle ---
        a1 = int(next_double() * n_auth)
        cycle = [a1]
        prev = a1
        if capped_length:
            u_len = next_double()
            if u_len <= 0.0:
                target = n_auth + 2
            else:
                target = 1 + int(math.log(u_len) / math.log(continue_prob))
                if target < 2:
                    target = 2
            while len(cycle) < target:
                nxt = draw_lambda(orig_field[prev], next_double())
                cycle.append(nxt)
                prev = nxt
        else:
            a2 = draw_lambda(orig_field[prev], next_double())
            cycle.append(a2)
            prev = a2
            while next_double() < continue_prob:
                nxt = draw_lambda(orig_field[prev], next_double())
                cycle.append(nxt)
                prev = nxt
        u_accept = next_double()
        length = len(cycle)

        stamp += 1
        repeat = False
        for a in cycle:
            if seen[a] == stamp:
                repeat = True
            seen[a] = stamp

        if repeat:
            ratio = 0.0
        else:
            num = 1.0
            den = 1.0
            for i in range(length):
                a = cycle[i]
                nxt = cycle[i + 1] if i + 1 < length else cycle[0]
                f_orig = orig_field[a]
                f_cur = paper_field[slot_paper[slot_of_auth[a]]]
                f_new = paper_field[slot_paper[slot_of_auth[nxt]]]
                num *= swap_p(f_new, f_orig)
                den *= swap_p(f_cur, f_orig)
            ratio = num / den

        if u_accept < ratio:
            accepted += 1
            old_slots = [slot_of_auth[a] for a in cycle]
            # snapshot male counts of every affected paper before mutating
            touched = []
            for s in old_slots:
                d = slot_paper[s]
                if paper_stamp[d] != stamp:
                    paper_stamp[d] = stamp
                    paper_m_old[d] = paper_m[d]
                    touched.append(d)
            # rotate slots: a_i takes the current slot of a_{i+1}
            for i in range(length):
                a = cycle[i]
                s_new = old_slots[i + 1] if i + 1 < length else old_slots[0]
                slot_of_auth[a] = s_new
                auth_of_slot[s_new] = a
            for i in range(length):
                a = cycle[i]
                if gender[a]:
                    paper_m[slot_paper[old_slots[i]]] -= 1
                    paper_m[slot_paper[slot_of_auth[a]]] += 1
            # member blocks: phase 1 removals, phase 2 inserts
            for i in range(length):
                a = cycle[i]
                f_old = paper_field[slot_paper[old_slots[i]]]
                f_new = paper_field[slot_paper[slot_of_auth[a]]]
                if f_old != f_new:
                    last = field_start[f_old] + field_cnt[f_old] - 1
                    pos_a = member_pos[a]
                    moved = members[last]
                    members[pos_a] = moved
                    member_pos[moved] = pos_a
                    field_cnt[f_old] -= 1
            for i in range(length):
                a = cycle[i]
                f_old = paper_field[slot_paper[old_slots[i]]]
                f_new = paper_field[slot_paper[slot_of_auth[a]]]
                if f_old != f_new:
                    idx = field_start[f_new] + field_cnt[f_new]
                    members[idx] = a
                    member_pos[a] = idx
                    field_cnt[f_new] += 1
            # node tallies from per-paper deltas
            for d in touched:
                m0 = paper_m_old[d]
                m1 = paper_m[d]
                if m0 == m1:
                    continue
                size = paper_size[d]
                dmm = m1 * (m1 - 1) - m0 * (m0 - 1)
                dfm = m1 * (size - m1) - m0 * (size - m0)
                dnm = m1 - m0
                for pos in range(paper_node_ptr[d], paper_node_ptr[d + 1]):
                    n = paper_nodes[pos]
                    node_mm[n][size] += dmm
                    node_fm[n][size] += dfm
                    node_nm[n] += dnm

        if g_idx > burn_in:
            emit(g_idx)

    # write mutable state back
    state.slot_of_auth[:] = slot_of_auth
    state.auth_of_slot[:] = auth_of_slot
    state.paper_m[:] = paper_m
    state.members[:] = members
    state.member_pos[:] = member_pos
    state.field_cnt[:] = field_cnt
    state.node_mm[:] = node_mm
    state.node_fm[:] = node_fm
    state.node_nm[:] = node_nm
    state.seen[:] = seen
    state.seen_stamp = stamp
    state.paper_stamp[:] = paper_stamp
    state.paper_m_old[:] = paper_m_old
    state.accepted += accepted
    state.steps_done += k_to - k_from
    state.baseline_done = baseline_done

    n_rec = len(rec_idx)
    rec_vals = np.asarray(rec_rows, np.float64).reshape(n_rec, n_nodes, 3)
    assign_arr = (
        np.asarray(rec_assigns, np.int32).reshape(n_rec, n_auth)
        if record_assign
        else None
    )
    return np.asarray(rec_idx, np.int64), rec_vals, assign_arr, accepted
