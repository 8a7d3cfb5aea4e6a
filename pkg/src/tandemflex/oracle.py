"""Independent correctness oracles for the exact solver.

Two routes that share nothing with the level-order argmin: exhaustive
enumeration of every deterministic stationary policy (each evaluated exactly,
then minimized pointwise) at tiny depths, and fixed-point value iteration on
the normalized chain at moderate depths.  Both report the worst absolute
disagreement with the solver in original time units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import MaxIterationsExceeded, SearchSpaceTooLarge
from .model import build_action_tables, class_id, ensure_solver_params
from .solver import ValueTable, coordinate_maps, solve, tri_size

ENUMERATION_LIMIT = 10_000_000


def _reference_values(params, n_max, table):
    """Solver values on the (prefix-closed) triangle of depth n_max."""
    if table is None or table.n_max < n_max:
        table, _ = solve(params, n_max)
    return table.values[:tri_size(n_max)]


@dataclass(frozen=True)
class OracleResult:
    method: str
    n_max: int
    values: np.ndarray          # oracle's best cost per state, original units
    residual: float             # max |oracle - solver| over all states
    policies_examined: int | None = None
    iterations: int | None = None
    convergence_gap: float | None = None


def _prune_dominated(allocs):
    """Keep, for each distinct rho1, only the largest-rho2 action.

    Safe because for a fixed upstream rate more downstream rate only helps;
    used to cross-check that dominated actions never matter.
    """
    best = {}
    for alloc in allocs:
        cur = best.get(alloc.rho1)
        if cur is None or alloc.rho2 > cur.rho2:
            best[alloc.rho1] = alloc
    return [a for a in allocs if best[a.rho1] is a]


def enumerate_policies(params, n_max: int, prune_dominated: bool = False,
                       limit: int = ENUMERATION_LIMIT,
                       table: ValueTable | None = None) -> OracleResult:
    """Brute-force the optimum: pointwise min of V^pi over all policies.

    The policy space is the product of per-state action sets over the
    triangle; SearchSpaceTooLarge beyond ``limit`` policies (depth 3 with
    both dedicated servers is about 4.3 million).
    """
    p = ensure_solver_params(params)
    reference = _reference_values(p, n_max, table)
    _, _, _, class_allocs = build_action_tables(p)
    if prune_dominated:
        class_allocs = [_prune_dominated(a) for a in class_allocs]

    nstates = tri_size(n_max)
    x1_of, x2_of = coordinate_maps(n_max)
    n_policies = 1
    per_state = [None]
    for i in range(1, nstates):
        allocs = class_allocs[class_id(int(x1_of[i]), int(x2_of[i]))]
        per_state.append(allocs)
        n_policies *= len(allocs)
        if n_policies > limit:
            raise SearchSpaceTooLarge(
                f"{n_policies}+ deterministic policies at n_max={n_max} exceeds limit {limit}")

    m = nstates - 1
    hx = np.zeros(nstates)
    up = np.zeros(nstates, dtype=np.int64)
    dn = np.zeros(nstates, dtype=np.int64)
    st_start = np.zeros(nstates, dtype=np.int64)
    n_act = np.ones(nstates, dtype=np.int64)
    flat_r1, flat_r2 = [], []
    for i in range(1, nstates):
        x1, x2 = int(x1_of[i]), int(x2_of[i])
        n = x1 + x2
        hx[i] = p.h1 * x1 + p.h2 * x2
        up[i] = i - 1 if x1 >= 1 else i
        dn[i] = (n - 1) * n // 2 + x1 if x2 >= 1 else i
        st_start[i] = len(flat_r1)
        n_act[i] = len(per_state[i])
        flat_r1.extend(a.rho1 for a in per_state[i])
        flat_r2.extend(a.rho2 for a in per_state[i])
    strides = np.ones(nstates, dtype=np.int64)
    for i in range(m - 1, 0, -1):
        strides[i] = strides[i + 1] * n_act[i + 1]

    vmin = kernels.enumerate_min_kernel(
        n_policies, hx, up, dn, st_start, strides, n_act,
        np.asarray(flat_r1), np.asarray(flat_r2))
    values = vmin / p.uniformization_scale
    residual = float(np.max(np.abs(values - reference)))
    return OracleResult(method="enumeration", n_max=n_max, values=values,
                        residual=residual, policies_examined=n_policies)


def value_iteration(params, n_max: int, tol: float = 1e-10,
                    max_iter: int = 1_000_000,
                    table: ValueTable | None = None) -> OracleResult:
    """Bellman fixed point from V = 0, stopped on the span of sweep updates."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    p = ensure_solver_params(params)
    reference = _reference_values(p, n_max, table)
    class_start, act_r1, act_r2, _ = build_action_tables(p)
    values_norm, iters, span = kernels.value_iteration_kernel(
        n_max, p.h1, p.h2, class_start, act_r1, act_r2, tol, max_iter)
    if span >= tol:
        raise MaxIterationsExceeded(
            f"value iteration span {span:.3e} >= tol {tol:.3e} after {iters} sweeps")
    values = values_norm / p.uniformization_scale
    residual = float(np.max(np.abs(values - reference)))
    return OracleResult(method="value-iteration", n_max=n_max, values=values,
                        residual=residual, iterations=iters, convergence_gap=float(span))
