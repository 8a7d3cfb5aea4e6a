"""Pure-NumPy fallback kernels (TANDEMFLEX_BACKEND=numpy, or no numba).

Same signatures and bit-identical results as the jitted kernels: every
floating-point expression is evaluated in the same order, only the looping
strategy differs (vectorized across actions, policies, or replications
wherever the level-order data dependency allows).
"""

import numpy as np

ARGMIN_TIE_TOL = 1e-12


def solve_kernel(n_max, h1, h2, class_start, act_r1, act_r2):
    nstates = (n_max + 1) * (n_max + 2) // 2
    values = np.zeros(nstates, dtype=np.float64)
    chosen = np.full(nstates, -1, dtype=np.int32)
    gap = np.full(nstates, np.inf, dtype=np.float64)
    # Pre-sliced per-class action arrays.
    slices = [(act_r1[class_start[c]:class_start[c + 1]],
               act_r2[class_start[c]:class_start[c + 1]]) for c in range(9)]
    for n in range(1, n_max + 1):
        base = n * (n + 1) // 2
        base_prev = (n - 1) * n // 2
        for x1 in range(n + 1):
            x2 = n - x1
            i = base + x1
            r1s, r2s = slices[3 * min(x1, 2) + min(x2, 2)]
            hx = h1 * x1 + h2 * x2
            vup = values[i - 1] if x1 >= 1 else 0.0
            vdn = values[base_prev + x1] if x2 >= 1 else 0.0
            q = (hx + r1s * vup + r2s * vdn) / (r1s + r2s)
            qmin = float(q.min())
            tol = ARGMIN_TIE_TOL * (1.0 + abs(qmin))
            values[i] = qmin
            chosen[i] = int(np.argmax(q <= qmin + tol))
            gap[i] = float(np.partition(q, 1)[1]) - qmin if q.size > 1 else np.inf
    return values, chosen, gap


def policy_value_kernel(n_max, h1, h2, rho1, rho2):
    # The same-level dependency makes this an inherently sequential scan.
    nstates = (n_max + 1) * (n_max + 2) // 2
    values = np.zeros(nstates, dtype=np.float64)
    for n in range(1, n_max + 1):
        base = n * (n + 1) // 2
        base_prev = (n - 1) * n // 2
        for x1 in range(n + 1):
            x2 = n - x1
            i = base + x1
            hx = h1 * x1 + h2 * x2
            vup = values[i - 1] if x1 >= 1 else 0.0
            vdn = values[base_prev + x1] if x2 >= 1 else 0.0
            values[i] = (hx + rho1[i] * vup + rho2[i] * vdn) / (rho1[i] + rho2[i])
    return values


def _triangle_maps(n_max):
    n_of = np.concatenate([np.full(n + 1, n, dtype=np.int64) for n in range(n_max + 1)])
    x1_of = np.concatenate([np.arange(n + 1, dtype=np.int64) for n in range(n_max + 1)])
    x2_of = n_of - x1_of
    idx = np.arange(n_of.shape[0], dtype=np.int64)
    up = np.where(x1_of >= 1, idx - 1, idx)  # coefficient is exactly 0 when unused
    dn = np.where(x2_of >= 1, (n_of - 1) * n_of // 2 + x1_of, idx)
    return x1_of, x2_of, up, dn


def value_iteration_kernel(n_max, h1, h2, class_start, act_r1, act_r2, tol, max_iter):
    nstates = (n_max + 1) * (n_max + 2) // 2
    x1_of, x2_of, up, dn = _triangle_maps(n_max)
    cid = 3 * np.minimum(x1_of, 2) + np.minimum(x2_of, 2)
    groups = []
    for c in range(1, 9):
        members = np.nonzero((cid == c) & (x1_of + x2_of > 0))[0]
        if members.size == 0:
            continue
        r1s = act_r1[class_start[c]:class_start[c + 1]]
        r2s = act_r2[class_start[c]:class_start[c + 1]]
        loop = 1.0 - r1s - r2s
        hx = h1 * x1_of[members] + h2 * x2_of[members]
        groups.append((members, up[members], dn[members], hx, r1s, r2s, loop))
    values = np.zeros(nstates, dtype=np.float64)
    fresh = np.zeros(nstates, dtype=np.float64)
    iters = 0
    span = np.inf
    while iters < max_iter:
        for members, ups, dns, hx, r1s, r2s, loop in groups:
            w = (r1s[None, :] * values[ups][:, None]
                 + r2s[None, :] * values[dns][:, None]
                 + loop[None, :] * values[members][:, None])
            fresh[members] = hx + w.min(axis=1)
        iters += 1
        diff = fresh - values
        span = float(diff.max()) - float(diff.min())
        values, fresh = fresh, values
        if span < tol:
            break
    return values, iters, span


def enumerate_min_kernel(n_policies, hx, up, dn, st_start, strides, n_act, act_r1, act_r2):
    m = hx.shape[0] - 1
    vmin = np.full(m + 1, np.inf, dtype=np.float64)
    vmin[0] = 0.0
    chunk = 1 << 18
    for k0 in range(0, n_policies, chunk):
        ks = np.arange(k0, min(k0 + chunk, n_policies), dtype=np.int64)
        scratch = np.zeros((m + 1, ks.shape[0]), dtype=np.float64)
        for i in range(1, m + 1):
            a = st_start[i] + (ks // strides[i]) % n_act[i]
            r1 = act_r1[a]
            r2 = act_r2[a]
            scratch[i] = (hx[i] + r1 * scratch[up[i]] + r2 * scratch[dn[i]]) / (r1 + r2)
        np.minimum(vmin, scratch.min(axis=1), out=vmin)
    return vmin


def simulate_paths_kernel(start_x1, start_x2, h1, h2, rho1, rho2, exps, unifs):
    reps, steps = exps.shape
    x1 = np.full(reps, start_x1, dtype=np.int64)
    x2 = np.full(reps, start_x2, dtype=np.int64)
    costs = np.zeros(reps, dtype=np.float64)
    for t in range(steps):
        n = x1 + x2
        i = n * (n + 1) // 2 + x1
        r1 = rho1[i]
        r2 = rho2[i]
        total = r1 + r2
        costs += (h1 * x1 + h2 * x2) * (exps[:, t] / total)
        move = (unifs[:, t] < r1 / total).astype(np.int64)
        x1 = x1 - move
        x2 = x2 + 2 * move - 1
    return costs
