#cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernel.

Mirrors the pure-Python kernel draw for draw: both consume uniform
doubles from the same PCG64 stream in the same order and perform the
same arithmetic, so traces are bit-identical across implementations.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport log
from numpy.random cimport bitgen_t

cnp.import_array()

FLAVOR = "compiled"


def run_steps(
    problem,
    state,
    cnp.int64_t[::1] global_steps,
    Py_ssize_t k_from,
    Py_ssize_t k_to,
    long long burn_in,
    double continue_prob,
    bint record_assign=False,
    bint capped_length=False,
):
    """Execute steps ``global_steps[k_from:k_to]`` of one component.

    Same contract as the pure kernel: returns
    (rec_idx, rec_vals, rec_assign_arr, accepted_delta).
    """
    cdef cnp.int8_t[::1] gender = problem.auth_gender
    cdef cnp.int32_t[::1] orig_field = problem.auth_orig_field
    cdef cnp.int32_t[::1] slot_paper = problem.slot_paper
    cdef cnp.int32_t[::1] paper_field = problem.paper_field
    cdef cnp.int32_t[::1] paper_size = problem.paper_size
    cdef cnp.int64_t[::1] paper_node_ptr = problem.paper_node_ptr
    cdef cnp.int32_t[::1] paper_nodes = problem.paper_nodes
    cdef cnp.int64_t[::1] field_start = problem.field_start
    cdef cnp.int64_t[::1] lam_ptr = problem.lam_ptr
    cdef cnp.int32_t[::1] lam_nbr = problem.lam_nbr
    cdef cnp.int64_t[::1] lam_cum = problem.lam_cum
    cdef cnp.int64_t[::1] lam_total = problem.lam_total
    cdef cnp.int64_t[::1] sw_indptr = problem.sw_indptr
    cdef cnp.int32_t[::1] sw_col = problem.sw_col
    cdef double[::1] sw_prob = problem.sw_prob
    cdef double[::1] inv_co = problem.inv_co

    cdef Py_ssize_t n_auth = problem.n_auth
    cdef Py_ssize_t n_nodes = problem.n_nodes
    cdef Py_ssize_t max_size = problem.max_size

    cdef cnp.int32_t[::1] slot_of_auth = state.slot_of_auth
    cdef cnp.int32_t[::1] auth_of_slot = state.auth_of_slot
    cdef cnp.int32_t[::1] paper_m = state.paper_m
    cdef cnp.int32_t[::1] members = state.members
    cdef cnp.int32_t[::1] member_pos = state.member_pos
    cdef cnp.int32_t[::1] field_cnt = state.field_cnt
    cdef cnp.int64_t[:, ::1] node_mm = state.node_mm
    cdef cnp.int64_t[:, ::1] node_fm = state.node_fm
    cdef cnp.int64_t[::1] node_nm = state.node_nm
    cdef cnp.int64_t[::1] seen = state.seen
    cdef cnp.int64_t[::1] paper_stamp = state.paper_stamp
    cdef cnp.int32_t[::1] paper_m_old = state.paper_m_old

    cdef long long stamp = state.seen_stamp
    cdef bint baseline_done = state.baseline_done

    cdef bitgen_t *rng
    capsule = state.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

    cdef Py_ssize_t cap = k_to - k_from + 1
    rec_idx_arr = np.zeros(cap, np.int64)
    rec_vals_arr = np.zeros((cap, n_nodes, 3), np.float64)
    cdef cnp.int64_t[::1] rec_idx = rec_idx_arr
    cdef double[:, :, ::1] rec_vals = rec_vals_arr
    rec_assign_arr = np.zeros((cap if record_assign else 0, n_auth), np.int32)
    cdef cnp.int32_t[:, ::1] rec_assign_view = rec_assign_arr
    cdef Py_ssize_t n_rec = 0

    cycle_arr = np.zeros(64, np.int32)
    slots_arr = np.zeros(64, np.int32)
    touched_arr = np.zeros(64, np.int32)
    cdef cnp.int32_t[::1] cycle = cycle_arr
    cdef cnp.int32_t[::1] old_slots = slots_arr
    cdef cnp.int32_t[::1] touched = touched_arr
    cdef Py_ssize_t cycle_cap = 64

    cdef long long accepted = 0
    cdef Py_ssize_t k_step, i, n, pos
    cdef Py_ssize_t length, n_touched
    cdef long long g_idx, t, base, c, target_len
    cdef int a1, a2, prev, nxt_a, a, moved, f, f_old, f_new, f_orig, f_cur
    cdef int d, m0, m1, size_d, s_new, last, pos_a, idx
    cdef long long dmm, dfm
    cdef double u, u_accept, ratio, num, den, p_acc, q_acc
    cdef bint repeat

    for k_step in range(k_from, k_to):
        g_idx = global_steps[k_step]
        if g_idx > burn_in and not baseline_done:
            rec_idx[n_rec] = burn_in
            for n in range(n_nodes):
                p_acc = 0.0
                q_acc = 0.0
                for i in range(2, max_size + 1):
                    p_acc += node_mm[n, i] * inv_co[i]
                    q_acc += node_fm[n, i] * inv_co[i]
                rec_vals[n_rec, n, 0] = p_acc
                rec_vals[n_rec, n, 1] = q_acc
                rec_vals[n_rec, n, 2] = <double> node_nm[n]
            if record_assign:
                for i in range(n_auth):
                    rec_assign_view[n_rec, i] = slot_of_auth[i]
            n_rec += 1
            baseline_done = True

        # --- propose a permutation cycle ---
        u = rng.next_double(rng.state)
        a1 = <int> (u * n_auth)
        cycle[0] = a1
        prev = a1
        length = 1
        if capped_length:
            u = rng.next_double(rng.state)
            if u <= 0.0:
                target_len = n_auth + 2
            else:
                target_len = 1 + <long long> (log(u) / log(continue_prob))
                if target_len < 2:
                    target_len = 2
        else:
            target_len = 2  # mandatory second member; extensions drawn below
        while True:
            if length >= target_len:
                if capped_length:
                    break
                # extension draw decides whether a further member is added
                u = rng.next_double(rng.state)
                if u >= continue_prob:
                    break
                target_len += 1
            f = orig_field[prev]
            u = rng.next_double(rng.state)
            t = <long long> (u * lam_total[f])
            base = 0
            pos = lam_ptr[f]
            while True:
                c = lam_cum[pos]
                if t < c:
                    nxt_a = members[field_start[lam_nbr[pos]] + (t - base)]
                    break
                base = c
                pos += 1
            if length == cycle_cap:
                cycle_cap *= 2
                new_cycle = np.zeros(cycle_cap, np.int32)
                new_cycle[:length] = cycle_arr[:length]
                cycle_arr = new_cycle
                cycle = cycle_arr
                new_slots = np.zeros(cycle_cap, np.int32)
                slots_arr = new_slots
                old_slots = slots_arr
                new_touched = np.zeros(cycle_cap, np.int32)
                touched_arr = new_touched
                touched = touched_arr
            cycle[length] = nxt_a
            length += 1
            prev = nxt_a
        u_accept = rng.next_double(rng.state)

        stamp += 1
        repeat = False
        for i in range(length):
            a = cycle[i]
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
                nxt_a = cycle[i + 1] if i + 1 < length else cycle[0]
                f_orig = orig_field[a]
                f_cur = paper_field[slot_paper[slot_of_auth[a]]]
                f_new = paper_field[slot_paper[slot_of_auth[nxt_a]]]
                p_acc = 0.0
                for pos in range(sw_indptr[f_new], sw_indptr[f_new + 1]):
                    if sw_col[pos] == f_orig:
                        p_acc = sw_prob[pos]
                        break
                num *= p_acc
                p_acc = 0.0
                for pos in range(sw_indptr[f_cur], sw_indptr[f_cur + 1]):
                    if sw_col[pos] == f_orig:
                        p_acc = sw_prob[pos]
                        break
                den *= p_acc
            ratio = num / den

        if u_accept < ratio:
            accepted += 1
            for i in range(length):
                old_slots[i] = slot_of_auth[cycle[i]]
            n_touched = 0
            for i in range(length):
                d = slot_paper[old_slots[i]]
                if paper_stamp[d] != stamp:
                    paper_stamp[d] = stamp
                    paper_m_old[d] = paper_m[d]
                    touched[n_touched] = d
                    n_touched += 1
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
            for i in range(length):
                a = cycle[i]
                f_old = paper_field[slot_paper[old_slots[i]]]
                f_new = paper_field[slot_paper[slot_of_auth[a]]]
                if f_old != f_new:
                    last = <int> (field_start[f_old] + field_cnt[f_old] - 1)
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
                    idx = <int> (field_start[f_new] + field_cnt[f_new])
                    members[idx] = a
                    member_pos[a] = idx
                    field_cnt[f_new] += 1
            for i in range(n_touched):
                d = touched[i]
                m0 = paper_m_old[d]
                m1 = paper_m[d]
                if m0 == m1:
                    continue
                size_d = paper_size[d]
                dmm = <long long> m1 * (m1 - 1) - <long long> m0 * (m0 - 1)
                dfm = <long long> m1 * (size_d - m1) - <long long> m0 * (size_d - m0)
                for pos in range(paper_node_ptr[d], paper_node_ptr[d + 1]):
                    n = paper_nodes[pos]
                    node_mm[n, size_d] += dmm
                    node_fm[n, size_d] += dfm
                    node_nm[n] += m1 - m0

        if g_idx > burn_in:
            rec_idx[n_rec] = g_idx
            for n in range(n_nodes):
                p_acc = 0.0
                q_acc = 0.0
                for i in range(2, max_size + 1):
                    p_acc += node_mm[n, i] * inv_co[i]
                    q_acc += node_fm[n, i] * inv_co[i]
                rec_vals[n_rec, n, 0] = p_acc
                rec_vals[n_rec, n, 1] = q_acc
                rec_vals[n_rec, n, 2] = <double> node_nm[n]
            if record_assign:
                for i in range(n_auth):
                    rec_assign_view[n_rec, i] = slot_of_auth[i]
            n_rec += 1

    state.seen_stamp = stamp
    state.baseline_done = baseline_done
    state.accepted += accepted
    state.steps_done += k_to - k_from

    return (
        rec_idx_arr[:n_rec],
        rec_vals_arr[:n_rec],
        rec_assign_arr[:n_rec] if record_assign else None,
        int(accepted),
    )
