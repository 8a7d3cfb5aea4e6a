"""Exact solver: closed-form backward recursion over a triangular domain.

The clearing dynamics only ever move a job downstream (x1-1, x2+1) or out of
the system (x1, x2-1), so ordering states by total jobs n = x1 + x2 and, within
a level, by increasing x1 makes the optimality equation explicit: with the
per-action self-loop eliminated algebraically, the cost of taking allocation
(rho1, rho2) in state (x1, x2) is

    q = (h1*x1 + h2*x2 + rho1*V(x1-1, x2+1) + rho2*V(x1, x2-1)) / (rho1 + rho2)

and V(x1, x2) is the minimum of q over the feasible allocations.  One pass
computes the exact V with no fixed-point iteration and no convergence
threshold.  Values are reported in the original (pre-normalization) time
units; the normalized view used by the structural identities is
``values_normalized = values * params.uniformization_scale``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .backend import kernels
from .errors import DependencyMissing, InfeasibleAction
from .model import (
    FLEX_CODES,
    FLEX_LABELS,
    IDLE,
    WORK,
    Allocation,
    State,
    SystemParams,
    build_action_tables,
    ensure_solver_params,
    feasible_allocations,
)

FLOAT_FMT = "%.17g"  # shortest round-trip width for float64


def tri_size(n_max: int) -> int:
    return (n_max + 1) * (n_max + 2) // 2


def tri_index(x1: int, x2: int) -> int:
    n = x1 + x2
    return n * (n + 1) // 2 + x1


@lru_cache(maxsize=32)
def coordinate_maps(n_max: int):
    """(x1, x2) coordinates for every triangular index, cached per depth."""
    n_of = np.concatenate([np.full(n + 1, n, dtype=np.int64) for n in range(n_max + 1)])
    x1_of = np.concatenate([np.arange(n + 1, dtype=np.int64) for n in range(n_max + 1)])
    x1_of.setflags(write=False)
    x2_of = n_of - x1_of
    x2_of.setflags(write=False)
    return x1_of, x2_of


@dataclass(frozen=True)
class ValueTable:
    """Minimal expected clearing cost on {x1 + x2 <= n_max}.

    ``values`` are in original time units; ``params`` is the normalized
    parameter set whose ``uniformization_scale`` converts between clocks.
    """

    n_max: int
    params: SystemParams
    values: np.ndarray

    @property
    def values_normalized(self) -> np.ndarray:
        return self.values * self.params.uniformization_scale

    def __contains__(self, state) -> bool:
        x1, x2 = state
        return x1 >= 0 and x2 >= 0 and x1 + x2 <= self.n_max

    def value(self, x1: int, x2: int) -> float:
        if (x1, x2) not in self:
            raise KeyError(f"state {(x1, x2)} outside solved domain n_max={self.n_max}")
        return float(self.values[tri_index(x1, x2)])


@dataclass(frozen=True)
class Policy:
    """One optimal allocation per nonempty state, plus the argmin margin.

    Arrays are parallel to the triangular layout; entries at (0, 0) are
    sentinels.  ``rho1``/``rho2`` are in normalized units; ``q_gap`` (second
    best minus best one-step-eliminated cost) is in original cost units and
    infinite where only one action is feasible.
    """

    n_max: int
    params: SystemParams
    rho1: np.ndarray
    rho2: np.ndarray
    flex: np.ndarray      # int8 codes, see model.FLEX_CODES
    d1_work: np.ndarray   # bool
    d2_work: np.ndarray
    collab1: np.ndarray
    collab2: np.ndarray
    q_gap: np.ndarray

    def allocation(self, x1: int, x2: int) -> Allocation:
        if x1 + x2 < 1 or x1 + x2 > self.n_max or x1 < 0 or x2 < 0:
            raise KeyError(f"no action stored for state {(x1, x2)}")
        i = tri_index(x1, x2)
        return Allocation(
            d1=WORK if self.d1_work[i] else IDLE,
            d2=WORK if self.d2_work[i] else IDLE,
            flex=FLEX_LABELS[int(self.flex[i])],
            collab1=bool(self.collab1[i]),
            collab2=bool(self.collab2[i]),
            rho1=float(self.rho1[i]),
            rho2=float(self.rho2[i]),
        )

    def flex_station(self, x1: int, x2: int) -> str:
        return FLEX_LABELS[int(self.flex[tri_index(x1, x2)])]


def q_value(state: State, alloc: Allocation, table, params: SystemParams | None = None) -> float:
    """One-step-eliminated cost of taking ``alloc`` in ``state``.

    ``table`` may be a ValueTable (normalized values and rates are used; the
    allocation must carry normalized rates) or any mapping from (x1, x2) to
    values in units consistent with the allocation rates and ``params``.
    Raises DependencyMissing when a required neighbor value is absent.
    """
    rho1, rho2 = alloc.rho1, alloc.rho2
    if rho1 + rho2 <= 0:
        raise ValueError("allocation has zero total rate")
    if isinstance(table, ValueTable):
        params = table.params
        store = table.values_normalized

        def lookup(x1, x2):
            if (x1, x2) not in table:
                raise DependencyMissing(f"V({x1},{x2}) not in solved domain")
            return float(store[tri_index(x1, x2)])
    else:
        if params is None:
            raise ValueError("params are required when table is a plain mapping")

        def lookup(x1, x2):
            try:
                return table[(x1, x2)]
            except KeyError as exc:
                raise DependencyMissing(f"V({x1},{x2}) has not been computed") from exc

    vup = lookup(state.x1 - 1, state.x2 + 1) if rho1 > 0 else 0.0
    vdn = lookup(state.x1, state.x2 - 1) if rho2 > 0 else 0.0
    hx = params.h1 * state.x1 + params.h2 * state.x2
    return (hx + rho1 * vup + rho2 * vdn) / (rho1 + rho2)


def _materialize_policy(params, n_max, class_allocs, chosen, gap_original):
    nstates = tri_size(n_max)
    x1_of, x2_of = coordinate_maps(n_max)
    cid_of = 3 * np.minimum(x1_of, 2) + np.minimum(x2_of, 2)
    rho1 = np.zeros(nstates)
    rho2 = np.zeros(nstates)
    flex = np.full(nstates, FLEX_CODES[IDLE], dtype=np.int8)
    d1_work = np.zeros(nstates, dtype=bool)
    d2_work = np.zeros(nstates, dtype=bool)
    collab1 = np.zeros(nstates, dtype=bool)
    collab2 = np.zeros(nstates, dtype=bool)
    for cid in range(1, 9):
        members = np.nonzero((cid_of == cid) & (x1_of + x2_of > 0))[0]
        if members.size == 0:
            continue
        allocs = class_allocs[cid]
        local = chosen[members]
        rho1[members] = np.array([a.rho1 for a in allocs])[local]
        rho2[members] = np.array([a.rho2 for a in allocs])[local]
        flex[members] = np.array([FLEX_CODES[a.flex] for a in allocs], dtype=np.int8)[local]
        d1_work[members] = np.array([a.d1 == WORK for a in allocs])[local]
        d2_work[members] = np.array([a.d2 == WORK for a in allocs])[local]
        collab1[members] = np.array([a.collab1 for a in allocs])[local]
        collab2[members] = np.array([a.collab2 for a in allocs])[local]
    for arr in (rho1, rho2, flex, d1_work, d2_work, collab1, collab2, gap_original):
        arr.setflags(write=False)
    return Policy(n_max, params, rho1, rho2, flex, d1_work, d2_work,
                  collab1, collab2, gap_original)


def solve(params: SystemParams | dict, n_max: int) -> tuple[ValueTable, Policy]:
    """Exact V and an optimal stationary policy on {x1 + x2 <= n_max}.

    Accepts raw or normalized parameters; raw ones are validated and
    normalized first.  Ties at the argmin (within 1e-12*(1+|V|)) resolve to
    the preferred label: non-idling, then flexible upstream, then separate
    jobs over sharing.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    p = ensure_solver_params(params)
    class_start, act_r1, act_r2, class_allocs = build_action_tables(p)
    values_norm, chosen, gap_norm = kernels.solve_kernel(
        n_max, p.h1, p.h2, class_start, act_r1, act_r2)
    scale = p.uniformization_scale
    values = values_norm / scale
    values.setflags(write=False)
    table = ValueTable(n_max=n_max, params=p, values=values)
    policy = _materialize_policy(p, n_max, class_allocs, chosen, gap_norm / scale)
    return table, policy


def _policy_rho_arrays(params: SystemParams, policy, n_max: int):
    """Normalized (rho1, rho2) per state from a Policy, mapping, or callable."""
    nstates = tri_size(n_max)
    if isinstance(policy, Policy):
        if policy.n_max < n_max:
            raise InfeasibleAction(
                f"policy covers n_max={policy.n_max} < requested {n_max}")
        # The triangular layout is prefix-closed in the level, so the first
        # tri_size(n_max) entries are exactly the shallower domain.
        return policy.rho1[:nstates].copy(), policy.rho2[:nstates].copy()

    if callable(policy):
        get = lambda x1, x2: policy(State(x1, x2))  # noqa: E731
    else:
        def get(x1, x2):
            try:
                return policy[(x1, x2)]
            except KeyError as exc:
                raise InfeasibleAction(f"policy defines no action for {(x1, x2)}") from exc

    rho1 = np.zeros(nstates)
    rho2 = np.zeros(nstates)
    x1_of, x2_of = coordinate_maps(n_max)
    for i in range(1, nstates):
        x1, x2 = int(x1_of[i]), int(x2_of[i])
        entry = get(x1, x2)
        if isinstance(entry, Allocation):
            pair = (entry.rho1, entry.rho2)
        else:
            pair = (float(entry[0]), float(entry[1]))
        match = _match_rho_pair(State(x1, x2), params, pair)
        rho1[i], rho2[i] = match.rho1, match.rho2
    return rho1, rho2


def _match_rho_pair(state: State, params: SystemParams, pair, rel_tol=1e-9) -> Allocation:
    """Find the feasible allocation whose rate pair matches ``pair``.

    Accepts rates in normalized or original units (original-unit CSV dumps
    divide by the recorded scale on read); raises InfeasibleAction otherwise.
    """
    candidates = feasible_allocations(state, params)
    for scaled in (1.0, params.uniformization_scale):
        want = (pair[0] / scaled, pair[1] / scaled)
        for alloc in candidates:
            if (math.isclose(alloc.rho1, want[0], rel_tol=rel_tol, abs_tol=1e-15)
                    and math.isclose(alloc.rho2, want[1], rel_tol=rel_tol, abs_tol=1e-15)):
                return alloc
    raise InfeasibleAction(
        f"rates {pair} are not feasible at state {(state.x1, state.x2)}")


def evaluate_policy(params: SystemParams | dict, policy, n_max: int) -> ValueTable:
    """Exact cost V^pi of an arbitrary feasible stationary policy.

    ``policy`` may be a Policy, a mapping (x1, x2) -> Allocation or rate
    pair, or a callable State -> Allocation.  Same level-order recursion as
    :func:`solve` with the minimization replaced by the fixed action.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    p = ensure_solver_params(params)
    rho1, rho2 = _policy_rho_arrays(p, policy, n_max)
    totals = rho1[1:] + rho2[1:]
    if np.any(totals <= 0):
        bad = int(np.argmax(totals <= 0)) + 1
        x1_of, x2_of = coordinate_maps(n_max)
        raise InfeasibleAction(
            f"policy allocates zero total rate at state {(int(x1_of[bad]), int(x2_of[bad]))}")
    values_norm = kernels.policy_value_kernel(n_max, p.h1, p.h2, rho1, rho2)
    values = values_norm / p.uniformization_scale
    values.setflags(write=False)
    return ValueTable(n_max=n_max, params=p, values=values)


# --- value/policy CSV -------------------------------------------------------

CSV_COLUMNS = ("x1", "x2", "V", "rho1", "rho2", "d1", "d2", "flex", "q_gap")


def write_policy_csv(path, table: ValueTable, policy: Policy | None = None) -> None:
    """Deterministic dump, one row per state ordered by (level, x1).

    V, rho1, rho2 and q_gap are in original time units.  Without a policy
    (plain V^pi tables) the action columns echo idle labels and q_gap is nan.
    """
    scale = table.params.uniformization_scale
    x1_of, x2_of = coordinate_maps(table.n_max)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for i in range(tri_size(table.n_max)):
            x1, x2 = int(x1_of[i]), int(x2_of[i])
            if policy is not None and x1 + x2 >= 1:
                row = [
                    x1, x2,
                    FLOAT_FMT % table.values[i],
                    FLOAT_FMT % (policy.rho1[i] * scale),
                    FLOAT_FMT % (policy.rho2[i] * scale),
                    WORK if policy.d1_work[i] else IDLE,
                    WORK if policy.d2_work[i] else IDLE,
                    FLEX_LABELS[int(policy.flex[i])],
                    FLOAT_FMT % policy.q_gap[i],
                ]
            else:
                row = [x1, x2, FLOAT_FMT % table.values[i], FLOAT_FMT % 0.0,
                       FLOAT_FMT % 0.0, IDLE, IDLE, IDLE, "nan"]
            writer.writerow(row)


def read_policy_csv(path) -> dict:
    """Rows keyed by state: {(x1, x2): {"V": float, "rho": (r1, r2), ...}}."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(CSV_COLUMNS):
            raise ValueError(f"unexpected CSV header in {path}: {reader.fieldnames}")
        for row in reader:
            key = (int(row["x1"]), int(row["x2"]))
            out[key] = {
                "V": float(row["V"]),
                "rho": (float(row["rho1"]), float(row["rho2"])),
                "d1": row["d1"],
                "d2": row["d2"],
                "flex": row["flex"],
                "q_gap": float(row["q_gap"]),
            }
    return out
