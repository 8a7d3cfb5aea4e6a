"""Continuous-time Monte Carlo cross-check of the exact solver.

Simulation runs directly in the original clock: in each visited state the
policy's total rate drives an exponential sojourn, holding cost accrues
linearly, and the job either moves downstream or leaves.  A clearing path
from (x1, x2) has exactly 2*x1 + x2 service completions, so per-replication
randomness is pre-drawn as fixed-shape arrays; replication r consumes the
stream seeded with seed XOR r, which is reproducible and parallel-safe.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import DeadPolicy
from .model import State, ensure_solver_params
from .solver import Policy, coordinate_maps, tri_index, tri_size

#: fixed draw order per replication: exponentials first, then the routing uniforms
_DRAWS_PER_STEP = 2


@dataclass(frozen=True)
class SimConfig:
    start: State
    replications: int
    seed: int
    policy_source: str = "optimal"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


@dataclass(frozen=True)
class SimResult:
    mean: float
    stderr: float
    replications: int
    digest: str  # sha256 of the per-replication cost stream


def simulate(params, policy, config: SimConfig) -> SimResult:
    """Mean and standard error of the clearing cost under ``policy``.

    ``policy`` is a Policy (rates in normalized units; the recorded scale
    restores the original clock) or a mapping (x1, x2) -> (rho1, rho2) in
    original units.  Raises DeadPolicy if any state reachable from the start
    carries zero total rate.
    """
    p = ensure_solver_params(params)
    start = config.start
    steps = 2 * start.x1 + start.x2
    reps = config.replications

    n_max = start.level
    if n_max == 0:
        digest = hashlib.sha256(np.zeros(reps).tobytes()).hexdigest()
        return SimResult(mean=0.0, stderr=0.0, replications=reps, digest=digest)

    rho1, rho2 = _original_rate_arrays(p, policy, n_max)
    _check_alive(rho1, rho2, start, n_max)

    exps = np.empty((reps, steps))
    unifs = np.empty((reps, steps))
    for r in range(reps):
        rng = np.random.default_rng(config.seed ^ r)
        exps[r] = rng.exponential(size=steps)
        unifs[r] = rng.random(size=steps)

    costs = kernels.simulate_paths_kernel(
        start.x1, start.x2, p.h1, p.h2, rho1, rho2, exps, unifs)
    mean = float(np.mean(costs))
    stderr = 0.0 if reps == 1 else float(np.std(costs, ddof=1) / math.sqrt(reps))
    digest = hashlib.sha256(costs.tobytes()).hexdigest()
    return SimResult(mean=mean, stderr=stderr, replications=reps, digest=digest)


def _original_rate_arrays(params, policy, n_max):
    nstates = tri_size(n_max)
    if isinstance(policy, Policy):
        if policy.n_max < n_max:
            raise DeadPolicy(f"policy covers n_max={policy.n_max} < start level {n_max}")
        scale = params.uniformization_scale
        return policy.rho1[:nstates] * scale, policy.rho2[:nstates] * scale
    rho1 = np.zeros(nstates)
    rho2 = np.zeros(nstates)
    x1_of, x2_of = coordinate_maps(n_max)
    for i in range(1, nstates):
        entry = policy.get((int(x1_of[i]), int(x2_of[i])))
        if entry is None:
            continue  # dead only if actually reachable; checked below
        rho1[i], rho2[i] = float(entry[0]), float(entry[1])
    return rho1, rho2


def _check_alive(rho1, rho2, start, n_max):
    """Walk the policy's own transition graph from ``start``."""
    seen = set()
    stack = [(start.x1, start.x2)]
    while stack:
        x1, x2 = stack.pop()
        if (x1, x2) == (0, 0) or (x1, x2) in seen:
            continue
        seen.add((x1, x2))
        i = tri_index(x1, x2)
        r1, r2 = float(rho1[i]), float(rho2[i])
        if r1 + r2 <= 0:
            raise DeadPolicy(f"zero total service rate at reachable state {(x1, x2)}")
        if r1 > 0:
            stack.append((x1 - 1, x2 + 1))
        if r2 > 0:
            stack.append((x1, x2 - 1))
