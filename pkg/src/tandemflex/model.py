"""System parameters, states, and the feasible action set.

Two tandem stations hold x1 and x2 jobs; completed Station-1 jobs join
Station 2, completed Station-2 jobs leave.  Station i has a dedicated server
(rate nu_i, absent when nu_i == 0) and may be attended by the one flexible
server (rate mu_i).  When the dedicated and flexible server share one job the
station rate is nu_i + xi_i (subadditive: xi_i <= mu_i); on separate jobs
(possible only with x_i >= 2) it is nu_i + mu_i.  Holding cost accrues at
h_i per job per unit time until the system clears.

Everything here is an immutable value type and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from .errors import (
    CollaborationBoundViolated,
    EmptySystem,
    NonPositiveRate,
    OrphanCollaboration,
)

WORK = "work"
IDLE = "idle"
STATION1 = "station1"
STATION2 = "station2"

#: integer codes used for the flexible server in packed policy arrays
FLEX_CODES = {STATION1: 0, STATION2: 1, IDLE: 2}
FLEX_LABELS = {v: k for k, v in FLEX_CODES.items()}

RATE_FIELDS = ("nu1", "nu2", "mu1", "mu2", "xi1", "xi2")
PARAM_FIELDS = RATE_FIELDS + ("h1", "h2")


@dataclass(frozen=True)
class SystemParams:
    """The eight model parameters plus the uniformization scale.

    ``uniformization_scale`` is 1.0 for raw (as-given) rates; after
    :func:`uniformize` it records the total event rate of the original
    instance, and the six stored rates sum to one.
    """

    nu1: float
    nu2: float
    mu1: float
    mu2: float
    xi1: float
    xi2: float
    h1: float
    h2: float
    uniformization_scale: float = 1.0

    @property
    def rate_sum(self) -> float:
        return self.nu1 + self.nu2 + self.mu1 + self.mu2 + self.xi1 + self.xi2

    @property
    def is_normalized(self) -> bool:
        return abs(self.rate_sum - 1.0) <= 1e-12

    @property
    def full_collaboration(self) -> tuple[bool, bool]:
        """Diagnostic flags: station i collaborates at the boundary xi_i == mu_i."""
        return (self.nu1 > 0 and self.xi1 == self.mu1,
                self.nu2 > 0 and self.xi2 == self.mu2)

    def as_dict(self) -> dict:
        d = {name: getattr(self, name) for name in PARAM_FIELDS}
        d["uniformization_scale"] = self.uniformization_scale
        return d

    @classmethod
    def from_dict(cls, data) -> "SystemParams":
        missing = [k for k in PARAM_FIELDS if k not in data]
        if missing:
            raise NonPositiveRate(f"instance is missing fields: {missing}")
        kwargs = {k: float(data[k]) for k in PARAM_FIELDS}
        kwargs["uniformization_scale"] = float(data.get("uniformization_scale", 1.0))
        return cls(**kwargs)


@dataclass(frozen=True)
class State:
    """Job counts (x1, x2); (0, 0) is the absorbing empty state."""

    x1: int
    x2: int

    def __post_init__(self):
        if self.x1 < 0 or self.x2 < 0:
            raise ValueError(f"job counts must be nonnegative, got {(self.x1, self.x2)}")

    @property
    def level(self) -> int:
        return self.x1 + self.x2


@dataclass(frozen=True)
class Allocation:
    """A server-assignment tuple and the service rates it induces.

    ``collab1``/``collab2`` mean both servers share one job in that station;
    with a single job present and both servers assigned, sharing is forced.
    """

    d1: str
    d2: str
    flex: str
    collab1: bool
    collab2: bool
    rho1: float
    rho2: float

    @property
    def total_rate(self) -> float:
        return self.rho1 + self.rho2

    def label(self) -> str:
        parts = [f"d1={self.d1}", f"d2={self.d2}", f"flex={self.flex}"]
        if self.collab1:
            parts.append("share1")
        if self.collab2:
            parts.append("share2")
        return ",".join(parts)


def _check_finite(name, value):
    if not math.isfinite(value):
        raise NonPositiveRate(f"{name} must be finite, got {value!r}")


def validate(params: SystemParams | dict) -> SystemParams:
    """Check all parameter invariants; returns the (unchanged) params.

    Superadditive collaboration (xi_i > mu_i) is rejected: a system in which
    sharing a job always beats splitting reduces to an additive-rate model
    with flexible rates xi1, xi2, so it is out of scope here.
    """
    if isinstance(params, dict):
        params = SystemParams.from_dict(params)
    for name in PARAM_FIELDS + ("uniformization_scale",):
        _check_finite(name, getattr(params, name))
    if params.mu1 <= 0 or params.mu2 <= 0:
        raise NonPositiveRate(f"flexible rates must be positive, got mu1={params.mu1}, mu2={params.mu2}")
    if params.h1 <= 0 or params.h2 <= 0:
        raise NonPositiveRate(f"holding costs must be positive, got h1={params.h1}, h2={params.h2}")
    if params.uniformization_scale <= 0:
        raise NonPositiveRate(f"uniformization_scale must be positive, got {params.uniformization_scale}")
    for i, (nu, mu, xi) in enumerate(((params.nu1, params.mu1, params.xi1),
                                      (params.nu2, params.mu2, params.xi2)), start=1):
        if nu < 0 or xi < 0:
            raise NonPositiveRate(f"station {i}: rates must be nonnegative, got nu={nu}, xi={xi}")
        if nu == 0:
            if xi > 0:
                raise OrphanCollaboration(
                    f"station {i}: xi={xi} > 0 but there is no dedicated server to collaborate with")
            continue
        if xi > mu:
            raise CollaborationBoundViolated(
                f"station {i}: xi={xi} > mu={mu} (superadditive collaboration is out of scope; "
                "it reduces to an additive model with flexible rates xi1, xi2)")
        if xi <= 0:
            raise CollaborationBoundViolated(
                f"station {i}: collaboration increment must satisfy 0 < xi <= mu, got xi={xi}")
        if nu + xi <= mu:
            raise CollaborationBoundViolated(
                f"station {i}: collaboration must beat the flexible server alone, "
                f"but nu + xi = {nu + xi} <= mu = {mu}")
    return params


def uniformize(params: SystemParams) -> SystemParams:
    """Rescale the six rates to sum to one; the sum is recorded as the scale.

    Holding costs are unchanged.  The optimal policy is invariant under this
    time rescaling; costs in the normalized clock are ``scale`` times the
    original-clock costs.
    """
    s = params.rate_sum
    return replace(
        params,
        nu1=params.nu1 / s, nu2=params.nu2 / s,
        mu1=params.mu1 / s, mu2=params.mu2 / s,
        xi1=params.xi1 / s, xi2=params.xi2 / s,
        uniformization_scale=s,
    )


def ensure_solver_params(params: SystemParams | dict) -> SystemParams:
    """Validate and, unless already normalized, uniformize."""
    params = validate(params)
    if params.is_normalized:
        return params
    return uniformize(params)


def _station_rate(nu, mu, xi, dedicated, flexible, collab):
    if dedicated and flexible:
        return nu + xi if collab else nu + mu
    if dedicated:
        return nu
    if flexible:
        return mu
    return 0.0


def _preference_key(alloc: Allocation, x1: int, x2: int, nu1: float, nu2: float):
    # Order used both for deduplication and argmin tie-breaks: fewer idle
    # servers first, then flexible to Station 1 before Station 2 before idle,
    # then separate jobs before sharing one.
    idle = 0
    if nu1 > 0 and x1 >= 1 and alloc.d1 == IDLE:
        idle += 1
    if nu2 > 0 and x2 >= 1 and alloc.d2 == IDLE:
        idle += 1
    if alloc.flex == IDLE:
        idle += 1
    return (idle, FLEX_CODES[alloc.flex], alloc.collab1 + alloc.collab2,
            alloc.d1 == IDLE, alloc.d2 == IDLE, alloc.collab1, alloc.collab2)


def _enumerate_allocations(x1: int, x2: int, params: SystemParams) -> list[Allocation]:
    d1_opts = (WORK, IDLE) if (params.nu1 > 0 and x1 >= 1) else (IDLE,)
    d2_opts = (WORK, IDLE) if (params.nu2 > 0 and x2 >= 1) else (IDLE,)
    flex_opts = []
    if x1 >= 1:
        flex_opts.append(STATION1)
    if x2 >= 1:
        flex_opts.append(STATION2)
    flex_opts.append(IDLE)

    raw = []
    for d1, d2, flex in product(d1_opts, d2_opts, flex_opts):
        if d1 == IDLE and d2 == IDLE and flex == IDLE:
            continue
        both1 = d1 == WORK and flex == STATION1
        both2 = d2 == WORK and flex == STATION2
        c1_opts = (False, True) if (both1 and x1 >= 2) else ((True,) if both1 else (False,))
        c2_opts = (False, True) if (both2 and x2 >= 2) else ((True,) if both2 else (False,))
        for c1 in c1_opts:
            for c2 in c2_opts:
                rho1 = _station_rate(params.nu1, params.mu1, params.xi1,
                                     d1 == WORK, flex == STATION1, c1)
                rho2 = _station_rate(params.nu2, params.mu2, params.xi2,
                                     d2 == WORK, flex == STATION2, c2)
                raw.append(Allocation(d1, d2, flex, c1, c2, rho1, rho2))

    raw.sort(key=lambda a: _preference_key(a, x1, x2, params.nu1, params.nu2))
    out, seen = [], set()
    for alloc in raw:
        pair = (alloc.rho1, alloc.rho2)
        if pair in seen:
            continue
        seen.add(pair)
        out.append(alloc)
    return out


def feasible_allocations(state: State, params: SystemParams) -> list[Allocation]:
    """All feasible allocations at ``state``, preference-ordered, deduplicated.

    Duplicate (rho1, rho2) pairs (e.g. sharing vs. splitting under full
    collaboration) keep the preferred assignment label.  Dominated actions
    (single servers, idling, sharing with x_i >= 2) are kept on purpose: the
    solver's minimization is what establishes they are never used.
    """
    if state.x1 == 0 and state.x2 == 0:
        raise EmptySystem("no feasible action in the empty state")
    return _enumerate_allocations(state.x1, state.x2, params)


# --- packed action tables -------------------------------------------------
#
# The action set depends on the state only through (min(x1, 2), min(x2, 2)),
# giving nine state classes indexed cid = 3*min(x1,2) + min(x2,2).  Class 0
# is the empty state and stays empty.

N_CLASSES = 9


def class_id(x1: int, x2: int) -> int:
    return 3 * min(x1, 2) + min(x2, 2)


def build_action_tables(params: SystemParams):
    """Flattened per-class action arrays for the kernels.

    Returns (class_start, rho1, rho2, class_allocs) where actions of class
    ``cid`` occupy slots class_start[cid]:class_start[cid+1], in preference
    order.
    """
    class_allocs: list[list[Allocation]] = [[]]
    for cid in range(1, N_CLASSES):
        c1, c2 = divmod(cid, 3)
        class_allocs.append(_enumerate_allocations(c1, c2, params))
    class_start = np.zeros(N_CLASSES + 1, dtype=np.int64)
    for cid in range(N_CLASSES):
        class_start[cid + 1] = class_start[cid] + len(class_allocs[cid])
    total = int(class_start[-1])
    rho1 = np.empty(total, dtype=np.float64)
    rho2 = np.empty(total, dtype=np.float64)
    pos = 0
    for allocs in class_allocs:
        for alloc in allocs:
            rho1[pos] = alloc.rho1
            rho2[pos] = alloc.rho2
            pos += 1
    return class_start, rho1, rho2, class_allocs


def max_rate(nu: float, mu: float, xi: float, x: int) -> float:
    """Largest feasible service rate at a station holding ``x`` jobs."""
    if x <= 0:
        return 0.0
    if nu > 0:
        return nu + xi if x == 1 else nu + mu
    return mu
