"""Numba-jitted hot loops (default backend).

All kernels take flat primitive arrays; the triangular state layout is
idx(x1, x2) = n*(n+1)//2 + x1 with n = x1 + x2, so the same-level neighbor
(x1-1, x2+1) sits at idx-1 and the downstream neighbor (x1, x2-1) at
(n-1)*n//2 + x1.  Rates must already be normalized where a kernel relies on
self-loop probabilities (value iteration); the others are unit-agnostic.
"""

import numpy as np
from numba import njit

ARGMIN_TIE_TOL = 1e-12


@njit(cache=True, nogil=True)
def solve_kernel(n_max, h1, h2, class_start, act_r1, act_r2):
    """Level-order exact recursion; returns (V, chosen local action, q-gap)."""
    nstates = (n_max + 1) * (n_max + 2) // 2
    values = np.zeros(nstates, dtype=np.float64)
    chosen = np.full(nstates, -1, dtype=np.int32)
    gap = np.full(nstates, np.inf, dtype=np.float64)
    for n in range(1, n_max + 1):
        base = n * (n + 1) // 2
        base_prev = (n - 1) * n // 2
        for x1 in range(n + 1):
            x2 = n - x1
            i = base + x1
            cid = 3 * min(x1, 2) + min(x2, 2)
            start = class_start[cid]
            end = class_start[cid + 1]
            hx = h1 * x1 + h2 * x2
            vup = values[i - 1] if x1 >= 1 else 0.0
            vdn = values[base_prev + x1] if x2 >= 1 else 0.0
            qmin = np.inf
            qsec = np.inf
            for a in range(start, end):
                q = (hx + act_r1[a] * vup + act_r2[a] * vdn) / (act_r1[a] + act_r2[a])
                if q < qmin:
                    qsec = qmin
                    qmin = q
                elif q < qsec:
                    qsec = q
            tol = ARGMIN_TIE_TOL * (1.0 + abs(qmin))
            pick = start
            for a in range(start, end):
                q = (hx + act_r1[a] * vup + act_r2[a] * vdn) / (act_r1[a] + act_r2[a])
                if q <= qmin + tol:
                    pick = a
                    break
            values[i] = qmin
            chosen[i] = np.int32(pick - start)
            gap[i] = qsec - qmin
    return values, chosen, gap


@njit(cache=True, nogil=True)
def policy_value_kernel(n_max, h1, h2, rho1, rho2):
    """Exact cost of a fixed feasible allocation per state."""
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


@njit(cache=True, nogil=True)
def value_iteration_kernel(n_max, h1, h2, class_start, act_r1, act_r2, tol, max_iter):
    """Synchronous Bellman sweeps on the uniformized chain (rates sum to 1)."""
    nstates = (n_max + 1) * (n_max + 2) // 2
    values = np.zeros(nstates, dtype=np.float64)
    fresh = np.zeros(nstates, dtype=np.float64)
    iters = 0
    span = np.inf
    while iters < max_iter:
        dmin = 0.0  # the empty state never moves
        dmax = 0.0
        for n in range(1, n_max + 1):
            base = n * (n + 1) // 2
            base_prev = (n - 1) * n // 2
            for x1 in range(n + 1):
                x2 = n - x1
                i = base + x1
                cid = 3 * min(x1, 2) + min(x2, 2)
                hx = h1 * x1 + h2 * x2
                vup = values[i - 1] if x1 >= 1 else 0.0
                vdn = values[base_prev + x1] if x2 >= 1 else 0.0
                wmin = np.inf
                for a in range(class_start[cid], class_start[cid + 1]):
                    w = act_r1[a] * vup + act_r2[a] * vdn \
                        + (1.0 - act_r1[a] - act_r2[a]) * values[i]
                    if w < wmin:
                        wmin = w
                fresh[i] = hx + wmin
                diff = fresh[i] - values[i]
                if diff > dmax:
                    dmax = diff
                if diff < dmin:
                    dmin = diff
        iters += 1
        span = dmax - dmin
        values, fresh = fresh, values
        if span < tol:
            break
    return values, iters, span


@njit(cache=True, nogil=True)
def enumerate_min_kernel(n_policies, hx, up, dn, st_start, strides, n_act, act_r1, act_r2):
    """Pointwise minimum of exact policy costs over every stationary policy.

    States 1..M are in topological (level, x1) order; policy ``k`` picks
    local action (k // strides[i]) % n_act[i] at state i.
    """
    m = hx.shape[0] - 1
    vmin = np.full(m + 1, np.inf, dtype=np.float64)
    vmin[0] = 0.0
    scratch = np.zeros(m + 1, dtype=np.float64)
    for k in range(n_policies):
        for i in range(1, m + 1):
            a = st_start[i] + (k // strides[i]) % n_act[i]
            r1 = act_r1[a]
            r2 = act_r2[a]
            scratch[i] = (hx[i] + r1 * scratch[up[i]] + r2 * scratch[dn[i]]) / (r1 + r2)
            if scratch[i] < vmin[i]:
                vmin[i] = scratch[i]
    return vmin


@njit(cache=True, nogil=True)
def simulate_paths_kernel(start_x1, start_x2, h1, h2, rho1, rho2, exps, unifs):
    """Accumulated holding cost per replication along pre-drawn randomness.

    ``exps`` are standard exponentials, ``unifs`` uniform(0,1); one column per
    service completion (a clearing path from (x1, x2) has exactly 2*x1 + x2).
    """
    reps = exps.shape[0]
    steps = exps.shape[1]
    costs = np.zeros(reps, dtype=np.float64)
    for r in range(reps):
        x1 = start_x1
        x2 = start_x2
        acc = 0.0
        for t in range(steps):
            n = x1 + x2
            i = n * (n + 1) // 2 + x1
            r1 = rho1[i]
            r2 = rho2[i]
            total = r1 + r2
            acc += (h1 * x1 + h2 * x2) * (exps[r, t] / total)
            if unifs[r, t] < r1 / total:
                x1 -= 1
                x2 += 1
            else:
                x2 -= 1
        costs[r] = acc
    return costs
