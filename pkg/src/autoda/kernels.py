"""Compiled fast paths (numba).

Three kernels carry the heavy loads: the program body executor, the
random-walk attack loop for analytic oracles, and the batched
generate-and-filter pipeline.  Each has a pure-python counterpart in the
package (:func:`autoda.program.exec_encoded`, the python loop in
:mod:`autoda.engine`, :func:`autoda.generate.gen_from_uniforms` plus the
analysis filters) and is required to agree with it bitwise; the test suite
checks this differentially.  All reductions accumulate left to right,
division follows IEEE (``error_model='numpy'``), and no kernel draws its own
randomness: uniforms and noise are pregenerated by the caller.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# opcode encoding (matches autoda.ops.Op)
ADD_SS, SUB_SS, MUL_SS, DIV_SS = 0, 1, 2, 3
ADD_VV, SUB_VV, MUL_VS, DIV_VS = 4, 5, 6, 7
DOT_VV, NORM_V = 8, 9

# per-opcode operand kinds (0 scalar, 1 vector, -1 absent) and result kind
PARAM1 = np.array([0, 0, 0, 0, 1, 1, 1, 1, 1, 1], dtype=np.int64)
PARAM2 = np.array([0, 0, 0, 0, 1, 1, 0, 0, 1, -1], dtype=np.int64)
RESULT = np.array([0, 0, 0, 0, 1, 1, 1, 1, 0, 0], dtype=np.int64)
VECTOR_OPS = np.array([ADD_VV, SUB_VV, MUL_VS, DIV_VS], dtype=np.int64)

ORACLE_HALFSPACE = 0
ORACLE_SPHERE = 1
ORACLE_MLP = 2


@njit(cache=True)
def seq_dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def l2_dist(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        d = a[i] - b[i]
        acc += d * d
    return np.sqrt(acc)


@njit(cache=True)
def all_finite(a):
    for i in range(a.shape[0]):
        if not np.isfinite(a[i]):
            return False
    return True


@njit(cache=True, error_model="numpy")
def exec_body(ops, dest, aa, bb, S, V):
    """Run an encoded body in place over scalar pool S and vector pool V."""
    dim = V.shape[1]
    for i in range(ops.shape[0]):
        op = ops[i]
        d = dest[i]
        a = aa[i]
        b = bb[i]
        if op == ADD_SS:
            S[d] = S[a] + S[b]
        elif op == SUB_SS:
            S[d] = S[a] - S[b]
        elif op == MUL_SS:
            S[d] = S[a] * S[b]
        elif op == DIV_SS:
            S[d] = S[a] / S[b]
        elif op == ADD_VV:
            for j in range(dim):
                V[d, j] = V[a, j] + V[b, j]
        elif op == SUB_VV:
            for j in range(dim):
                V[d, j] = V[a, j] - V[b, j]
        elif op == MUL_VS:
            s = S[b]
            for j in range(dim):
                V[d, j] = V[a, j] * s
        elif op == DIV_VS:
            s = S[b]
            for j in range(dim):
                V[d, j] = V[a, j] / s
        elif op == DOT_VV:
            acc = 0.0
            for j in range(dim):
                acc += V[a, j] * V[b, j]
            S[d] = acc
        else:  # NORM_V
            acc = 0.0
            for j in range(dim):
                acc += V[a, j] * V[a, j]
            S[d] = np.sqrt(acc)


@njit(cache=True)
def mlp_forward(packed, x, buf_in, buf_out):
    """ReLU network forward pass from the packed layout; returns the argmax.

    ``packed`` is [n_layers, benign_label, width_0..width_L, then per layer
    a row-major weight matrix and a bias vector].  Accumulation is strictly
    sequential so every caller sees identical bits.
    """
    n_layers = int(packed[0])
    widths_at = 2
    cursor = widths_at + n_layers + 1
    n_in = int(packed[widths_at])
    for j in range(n_in):
        buf_in[j] = x[j]
    for layer in range(n_layers):
        n_out = int(packed[widths_at + layer + 1])
        for r in range(n_out):
            acc = 0.0
            base = cursor + r * n_in
            for c in range(n_in):
                acc += packed[base + c] * buf_in[c]
            buf_out[r] = acc
        cursor += n_out * n_in
        for r in range(n_out):
            buf_out[r] += packed[cursor + r]
            if layer < n_layers - 1 and buf_out[r] < 0.0:
                buf_out[r] = 0.0
        cursor += n_out
        for r in range(n_out):
            buf_in[r] = buf_out[r]
        n_in = n_out
    best = 0
    for r in range(1, n_in):
        if buf_in[r] > buf_in[best]:
            best = r
    return best


@njit(cache=True)
def oracle_decide(kind, ovec, oscal, oside, x):
    """Label a point: True means adversarial."""
    if kind == ORACLE_HALFSPACE:
        return seq_dot(ovec, x) + oscal > 0.0
    if kind == ORACLE_MLP:
        width = 0
        n_layers = int(ovec[0])
        for i in range(n_layers + 1):
            w = int(ovec[2 + i])
            if w > width:
                width = w
        buf_in = np.empty(width, dtype=np.float64)
        buf_out = np.empty(width, dtype=np.float64)
        return mlp_forward(ovec, x, buf_in, buf_out) != int(ovec[1])
    d = l2_dist(x, ovec)
    if oside > 0:  # adversarial outside
        return d > oscal
    return d < oscal


@njit(cache=True)
def ctrl_factor(p, lo, hi, pbar):
    """Two-segment piecewise linear map with f(0)=lo, f(pbar)=1, f(1)=hi."""
    if p < 0.0:
        p = 0.0
    elif p > 1.0:
        p = 1.0
    if p <= pbar:
        return lo + (1.0 - lo) * p / pbar
    return 1.0 + (hi - 1.0) * (p - pbar) / (1.0 - pbar)


@njit(cache=True)
def ctrl_update(p, k, hypers, alpha, lo, hi, pbar):
    """Decay the success rate with outcome k, then scale every hyperparameter."""
    p = alpha * p + (1.0 - alpha) * k
    g = ctrl_factor(p, lo, hi, pbar) ** 0.1
    for i in range(hypers.shape[0]):
        hypers[i] = hypers[i] * g
    return p


@njit(cache=True, error_model="numpy")
def attack_run(ops, dest, aa, bb, hyper_slots, input_slots, return_slot,
               S, V, hypers, x0, x, d_min,
               noise, oracle_kind, ovec, oscal, oside,
               queries, budget, adapt, alpha, lo, hi, pbar, p,
               log_q, log_d):
    """One block of random-walk iterations; state is threaded in and out.

    Iterates over the rows of ``noise`` or until ``budget`` oracle queries
    have been spent (budget < 0 means unbounded).  Mutates ``x`` (current
    best adversarial example), ``hypers`` and the scratch pools; fills
    ``log_q``/``log_d`` with one record per accepted update.

    Returns (d_min, p, queries, n_logged, iterations_done).
    """
    dim = x0.shape[0]
    in0 = input_slots[0]
    in1 = input_slots[1]
    in2 = input_slots[2]
    n_logged = 0
    it = 0
    for it in range(noise.shape[0]):
        if budget >= 0 and queries >= budget:
            return d_min, p, queries, n_logged, it
        for j in range(dim):
            V[in0, j] = x0[j]
            V[in1, j] = x[j]
            V[in2, j] = noise[it, j]
        for h in range(hyper_slots.shape[0]):
            S[hyper_slots[h]] = hypers[h]
        exec_body(ops, dest, aa, bb, S, V)
        out = V[return_slot]
        k = 0.0
        if all_finite(out):
            dist = l2_dist(out, x0)
            if dist < d_min:
                queries += 1
                if oracle_decide(oracle_kind, ovec, oscal, oside, out):
                    k = 1.0
                    d_min = dist
                    for j in range(dim):
                        x[j] = out[j]
                    log_q[n_logged] = queries
                    log_d[n_logged] = d_min
                    n_logged += 1
        if adapt:
            p = ctrl_update(p, k, hypers, alpha, lo, hi, pbar)
    return d_min, p, queries, n_logged, noise.shape[0]


@njit(cache=True, error_model="numpy")
def gen_filter_batch(uniforms, max_len, n_hyper, hyper_init, bias, predefined,
                     do_inputs_check, require_hyper, do_distance_test,
                     tx0, tx, tn, tthr,
                     out_ops, out_dest, out_a, out_b, out_meta):
    """Generate programs from uniform blocks and apply the static/dynamic filters.

    ``uniforms`` is (G, 3*max_len); each row yields one program.  Survivors
    are written to the ``out_*`` buffers in kind-local encoded form (same
    layout as ``EncodedProgram``): ``out_meta[s] = (n_scalar, n_vector,
    return_slot, generated_index)``.  Stops early when the buffers fill.

    Returns (generated, failed_inputs, failed_distance, survivors).
    Programs failing both filters are attributed to the inputs check.
    """
    G = uniforms.shape[0]
    cap = out_ops.shape[0]
    dim = tx0.shape[1]
    n_cases = tx0.shape[0]
    n_pre = 3 if predefined else 0
    n_values = n_hyper + 3 + max_len

    kinds = np.empty(n_values, dtype=np.int64)
    used = np.empty(n_values, dtype=np.uint8)
    loc = np.empty(n_values, dtype=np.int64)  # global value index -> kind-local slot
    alive = np.empty(n_values, dtype=np.uint8)
    ops = np.empty(max_len, dtype=np.int64)
    ga = np.empty(max_len, dtype=np.int64)  # global operand indices
    gb = np.empty(max_len, dtype=np.int64)
    feas = np.empty(10, dtype=np.int64)
    S = np.empty(n_values, dtype=np.float64)
    V = np.empty((n_values, dim), dtype=np.float64)

    n_failed_inputs = 0
    n_failed_distance = 0
    n_surv = 0
    g = 0
    while g < G and n_surv < cap:
        u = uniforms[g]
        # --- generate ---
        for i in range(n_hyper):
            kinds[i] = 0
            used[i] = 0
        for i in range(n_hyper, n_hyper + 3):
            kinds[i] = 1
            used[i] = 0
        nv = n_hyper + 3
        n_scal = n_hyper
        n_vec = 3
        pos = 0
        if predefined:
            i_x0 = n_hyper
            i_x = n_hyper + 1
            ops[0] = SUB_VV
            ga[0] = i_x0
            gb[0] = i_x
            used[i_x0] = 1
            used[i_x] = 1
            kinds[nv] = 1
            used[nv] = 0
            v_idx = nv
            nv += 1
            n_vec += 1
            ops[1] = NORM_V
            ga[1] = v_idx
            gb[1] = -1
            used[v_idx] = 1
            kinds[nv] = 0
            used[nv] = 0
            d_idx = nv
            nv += 1
            n_scal += 1
            ops[2] = DIV_VS
            ga[2] = v_idx
            gb[2] = d_idx
            used[d_idx] = 1
            kinds[nv] = 1
            used[nv] = 0
            nv += 1
            n_vec += 1
            pos = 3
        while pos < max_len:
            cursor = 3 * (pos - n_pre)
            final = pos == max_len - 1
            n_feas = 0
            if final:
                for oi in range(4):
                    op = VECTOR_OPS[oi]
                    if (PARAM2[op] != 0 or n_scal > 0):
                        feas[n_feas] = op
                        n_feas += 1
            else:
                for op in range(10):
                    ok = True
                    if PARAM1[op] == 0 and n_scal == 0:
                        ok = False
                    if PARAM2[op] == 0 and n_scal == 0:
                        ok = False
                    if ok:
                        feas[n_feas] = op
                        n_feas += 1
            idx = int(u[cursor] * n_feas)
            if idx >= n_feas:
                idx = n_feas - 1
            op = feas[idx]
            # operands
            a_g = -1
            b_g = -1
            for argpos in range(2):
                want = PARAM1[op] if argpos == 0 else PARAM2[op]
                if want < 0:
                    break
                total = 0.0
                for i in range(nv):
                    if kinds[i] == want:
                        total += bias if used[i] == 0 else 1.0
                target = u[cursor + 1 + argpos] * total
                acc = 0.0
                chosen = -1
                for i in range(nv):
                    if kinds[i] == want:
                        acc += bias if used[i] == 0 else 1.0
                        if chosen < 0 and target < acc:
                            chosen = i
                if chosen < 0:  # target == total edge; take the last candidate
                    for i in range(nv):
                        if kinds[i] == want:
                            chosen = i
                used[chosen] = 1
                if argpos == 0:
                    a_g = chosen
                else:
                    b_g = chosen
            ops[pos] = op
            ga[pos] = a_g
            gb[pos] = b_g
            kinds[nv] = RESULT[op]
            used[nv] = 0
            if RESULT[op] == 0:
                n_scal += 1
            else:
                n_vec += 1
            nv += 1
            pos += 1
        g += 1
        ret_g = nv - 1  # last dest, vector by construction

        # --- liveness / inputs check ---
        if do_inputs_check or do_distance_test:
            for i in range(nv):
                alive[i] = 0
            alive[ret_g] = 1
            for i in range(max_len - 1, -1, -1):
                d_g = n_hyper + 3 + i
                if alive[d_g] == 1:
                    alive[ga[i]] = 1
                    if gb[i] >= 0:
                        alive[gb[i]] = 1
        if do_inputs_check:
            ok = alive[n_hyper] == 1 and alive[n_hyper + 1] == 1 and alive[n_hyper + 2] == 1
            if ok and require_hyper:
                for i in range(n_hyper):
                    if alive[i] == 0:
                        ok = False
                        break
            if not ok:
                n_failed_inputs += 1
                continue

        # --- kind-local slot numbering ---
        si = 0
        vi = 0
        for i in range(nv):
            if kinds[i] == 0:
                loc[i] = si
                si += 1
            else:
                loc[i] = vi
                vi += 1
        ret_slot = loc[ret_g]

        # --- distance test ---
        if do_distance_test:
            passed = True
            for c in range(n_cases):
                for i in range(n_hyper):
                    S[i] = hyper_init
                for j in range(dim):
                    V[0, j] = tx0[c, j]
                    V[1, j] = tx[c, j]
                    V[2, j] = tn[c, j]
                # execute with translated slots
                for i in range(max_len):
                    op = ops[i]
                    d = loc[n_hyper + 3 + i]
                    a = loc[ga[i]]
                    b = loc[gb[i]] if gb[i] >= 0 else -1
                    if op == ADD_SS:
                        S[d] = S[a] + S[b]
                    elif op == SUB_SS:
                        S[d] = S[a] - S[b]
                    elif op == MUL_SS:
                        S[d] = S[a] * S[b]
                    elif op == DIV_SS:
                        S[d] = S[a] / S[b]
                    elif op == ADD_VV:
                        for j in range(dim):
                            V[d, j] = V[a, j] + V[b, j]
                    elif op == SUB_VV:
                        for j in range(dim):
                            V[d, j] = V[a, j] - V[b, j]
                    elif op == MUL_VS:
                        s = S[b]
                        for j in range(dim):
                            V[d, j] = V[a, j] * s
                    elif op == DIV_VS:
                        s = S[b]
                        for j in range(dim):
                            V[d, j] = V[a, j] / s
                    elif op == DOT_VV:
                        acc = 0.0
                        for j in range(dim):
                            acc += V[a, j] * V[b, j]
                        S[d] = acc
                    else:
                        acc = 0.0
                        for j in range(dim):
                            acc += V[a, j] * V[a, j]
                        S[d] = np.sqrt(acc)
                out = V[ret_slot]
                if not all_finite(out):
                    passed = False
                    break
                if not (l2_dist(out, tx0[c]) < tthr[c]):
                    passed = False
                    break
            if not passed:
                n_failed_distance += 1
                continue

        # --- emit survivor (kind-local encoding) ---
        s = n_surv
        for i in range(max_len):
            out_ops[s, i] = ops[i]
            out_dest[s, i] = loc[n_hyper + 3 + i]
            out_a[s, i] = loc[ga[i]]
            out_b[s, i] = loc[gb[i]] if gb[i] >= 0 else -1
        out_meta[s, 0] = si
        out_meta[s, 1] = vi
        out_meta[s, 2] = ret_slot
        out_meta[s, 3] = g - 1
        n_surv += 1

    return g, n_failed_inputs, n_failed_distance, n_surv


@njit(cache=True, error_model="numpy")
def stage1_eval(out_ops, out_dest, out_a, out_b, out_meta, n_progs, n_hyper, hyper_init,
                x0, x1, noise, oracle_kind, ovec, oscal, oside,
                adapt, alpha, lo, hi, pbar, p_init, budget, ratios, queries_out):
    """Evaluate a batch of generator-encoded programs on one shared example.

    Every program starts the walk from ``x1`` with the same ``noise`` matrix
    (one row per iteration), so the resulting distortion ratios are mutually
    comparable.  ``budget`` caps total oracle queries across the whole batch
    (< 0 means unbounded); it is threaded through the programs in order.
    Returns total queries spent.
    """
    dim = x0.shape[0]
    d0 = l2_dist(x1, x0)
    max_s = 1
    max_v = 1
    for s in range(n_progs):
        if out_meta[s, 0] > max_s:
            max_s = out_meta[s, 0]
        if out_meta[s, 1] > max_v:
            max_v = out_meta[s, 1]
    S = np.zeros(max_s)
    V = np.zeros((max_v, dim))
    x = np.empty(dim)
    hypers = np.empty(n_hyper)
    hyper_slots = np.arange(n_hyper)
    input_slots = np.array([0, 1, 2], dtype=np.int64)
    log_q = np.empty(noise.shape[0], dtype=np.int64)
    log_d = np.empty(noise.shape[0])
    total = 0
    for s in range(n_progs):
        for j in range(dim):
            x[j] = x1[j]
        for h in range(n_hyper):
            hypers[h] = hyper_init
        rb = -1 if budget < 0 else budget - total
        d_min, p, q, n_logged, done = attack_run(
            out_ops[s], out_dest[s], out_a[s], out_b[s],
            hyper_slots, input_slots, out_meta[s, 2],
            S, V, hypers, x0, x, d0, noise,
            oracle_kind, ovec, oscal, oside,
            0, rb, adapt, alpha, lo, hi, pbar, p_init, log_q, log_d)
        ratios[s] = d_min / d0
        queries_out[s] = q
        total += q
    return total


def warmup(dim: int = 4) -> None:
    """Force compilation of all kernels (populates the on-disk cache)."""
    ops = np.array([ADD_VV], dtype=np.int64)
    dest = np.array([0], dtype=np.int64)
    aa = np.array([1], dtype=np.int64)
    bb = np.array([2], dtype=np.int64)
    S = np.zeros(1)
    V = np.zeros((3, dim))
    exec_body(ops, dest, aa, bb, S, V)
    x0 = np.zeros(dim)
    x = np.ones(dim)
    attack_run(ops, dest, aa, bb, np.zeros(0, dtype=np.int64),
               np.array([0, 1, 2], dtype=np.int64), 0,
               S, V, np.zeros(0), x0, x, float(np.sqrt(dim)),
               np.zeros((1, dim)), ORACLE_HALFSPACE, np.ones(dim), 0.0, 1,
               0, -1, False, 0.95, 0.5, 1.5, 0.25, 0.25,
               np.zeros(4, dtype=np.int64), np.zeros(4))
    stage1_eval(np.zeros((1, 1), dtype=np.int64) + ADD_VV, np.zeros((1, 1), dtype=np.int64),
                np.ones((1, 1), dtype=np.int64), np.full((1, 1), 2, dtype=np.int64),
                np.array([[1, 3, 0, 0]], dtype=np.int64), 1, 1, 0.01,
                x0, x, np.zeros((1, dim)), ORACLE_HALFSPACE, np.ones(dim), 0.0, 1,
                False, 0.95, 0.5, 1.5, 0.25, 0.25, -1,
                np.zeros(1), np.zeros(1, dtype=np.int64))
    cases = np.zeros((1, dim))
    gen_filter_batch(np.random.default_rng(0).random((2, 12)), 4, 1, 0.01, 4.0, True,
                     True, True, True, cases, cases + 1.0, cases, np.full(1, float(dim)),
                     np.zeros((2, 4), dtype=np.int64), np.zeros((2, 4), dtype=np.int64),
                     np.zeros((2, 4), dtype=np.int64), np.zeros((2, 4), dtype=np.int64),
                     np.zeros((2, 4), dtype=np.int64))
    # one-layer identity-ish network: packs as [1, 0, dim, 1, W(1xdim), b(1)]
    mlp = np.concatenate((np.array([1.0, 0.0, float(dim), 1.0]), np.ones(dim), np.zeros(1)))
    oracle_decide(ORACLE_MLP, mlp, 0.0, 0, x0)
