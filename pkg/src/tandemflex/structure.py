"""Structural analysis of solved instances.

From a solved value table this module computes the incentive differences

    f(x1, x2) = V(x1, x2) - V(x1-1, x2+1)        (x1 >= 1)
    g(x1, x2) = V(x1, x2-1) - V(x1, x2)          (x2 >= 1, g(x1, 0) = 0)

and the four decision functions d = mu1*f + mu2*g, dtilde = xi1*f + mu2*g,
dhat = mu1*f + xi2*g, dbar = xi1*f + xi2*g, whose signs select the flexible
server's station.  Which function governs a state depends on whether each
station holds one job or several and on whether its dedicated server exists:
the coefficient of f is xi1 only when x1 == 1 and nu1 > 0 (else mu1), and
symmetrically for g.  All decision-function values are in normalized time
units (rates summing to one), matching the recursion identities they feed.

On top of these the module extracts switching curves t(x1) and idling
thresholds t2(x1) from a policy and verifies, numerically and with witnesses,
every structural claim: monotonicity of V, positivity of f in the non-idling
regime, monotone decrease and finite-domain zero crossings of the decision
functions, the slope bound on t(x1), priority rules, idling thresholds, the
work-conservation properties of optimal actions, and the recursion identities
satisfied by the decision functions on the solved table.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainTooSmall,
    HypothesisNotMet,
    IdlingRegimeRequired,
    NotThresholdShaped,
)
from .model import FLEX_CODES, IDLE, STATION1, STATION2, SystemParams
from .solver import Policy, ValueTable, coordinate_maps, tri_index, tri_size

#: sign-classification band for decision functions, relative to local V
SIGN_TOL = 1e-10
#: tolerance for the recursion identity residuals
IDENTITY_TOL = 1e-8
#: numerical slack for pointwise inequality claims
INEQ_SLACK = 1e-12

FLEX1 = FLEX_CODES[STATION1]
FLEX2 = FLEX_CODES[STATION2]
FLEXIDLE = FLEX_CODES[IDLE]


# --------------------------------------------------------------------------
# decision functions


@dataclass(frozen=True)
class DecisionFunctions:
    """f, g and the four decision functions on the solved triangle.

    Arrays are parallel to the triangular layout, NaN outside each
    function's support.  ``governing`` holds, for states with jobs in both
    stations, the value of whichever decision function governs that state.
    """

    n_max: int
    params: SystemParams
    f: np.ndarray
    g: np.ndarray
    d: np.ndarray
    dtilde: np.ndarray
    dhat: np.ndarray
    dbar: np.ndarray
    governing: np.ndarray

    def value(self, name: str, x1: int, x2: int) -> float:
        arr = getattr(self, name)
        if x1 < 0 or x2 < 0 or x1 + x2 > self.n_max:
            raise KeyError(f"state {(x1, x2)} outside domain")
        v = float(arr[tri_index(x1, x2)])
        if math.isnan(v):
            raise KeyError(f"{name} is not defined at {(x1, x2)}")
        return v


def decision_functions(table: ValueTable) -> DecisionFunctions:
    """All decision functions of a solved table (normalized units)."""
    if table.n_max < 2:
        raise DomainTooSmall(f"need n_max >= 2 for decision functions, got {table.n_max}")
    p = table.params
    values = table.values_normalized
    nstates = tri_size(table.n_max)
    x1_of, x2_of = coordinate_maps(table.n_max)
    idx = np.arange(nstates)
    n_of = x1_of + x2_of

    f = np.full(nstates, np.nan)
    m1 = x1_of >= 1
    f[m1] = values[idx[m1]] - values[idx[m1] - 1]

    g = np.full(nstates, np.nan)
    m2 = x2_of >= 1
    dn = (n_of - 1) * n_of // 2 + x1_of
    g[m2] = values[dn[m2]] - values[idx[m2]]
    g[(x2_of == 0) & m1] = 0.0  # boundary convention used by d(x1, 0)

    d = np.full(nstates, np.nan)
    d[m1] = p.mu1 * f[m1] + p.mu2 * g[m1]

    dtilde = np.full(nstates, np.nan)
    mt = x1_of == 1
    dtilde[mt] = p.xi1 * f[mt] + p.mu2 * g[mt]

    dhat = np.full(nstates, np.nan)
    mh = (x2_of == 1) & m1
    dhat[mh] = p.mu1 * f[mh] + p.xi2 * g[mh]

    dbar = np.full(nstates, np.nan)
    i11 = tri_index(1, 1)
    dbar[i11] = p.xi1 * f[i11] + p.xi2 * g[i11]

    governing = np.full(nstates, np.nan)
    mg = m1 & m2
    a = np.where((x1_of == 1) & (p.nu1 > 0), p.xi1, p.mu1)
    b = np.where((x2_of == 1) & (p.nu2 > 0), p.xi2, p.mu2)
    governing[mg] = a[mg] * f[mg] + b[mg] * g[mg]

    for arr in (f, g, d, dtilde, dhat, dbar, governing):
        arr.setflags(write=False)
    return DecisionFunctions(table.n_max, p, f, g, d, dtilde, dhat, dbar, governing)


def write_decision_grid_csv(path, fns: DecisionFunctions) -> None:
    """Dump the decision grids; undefined entries are left empty."""
    import csv

    x1_of, x2_of = coordinate_maps(fns.n_max)
    cols = ("f", "g", "d", "dtilde", "dhat", "dbar")

    def fmt(v):
        return "" if math.isnan(v) else "%.17g" % v

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("x1", "x2") + cols)
        for i in range(tri_size(fns.n_max)):
            writer.writerow([int(x1_of[i]), int(x2_of[i])]
                            + [fmt(float(getattr(fns, c)[i])) for c in cols])


# --------------------------------------------------------------------------
# regime classification


@dataclass(frozen=True)
class RegimeFlags:
    """Which structural results apply to an instance (params only)."""

    nonidling: bool
    thm1: bool
    thm2_curve: bool
    thm2_priority: bool
    thm3_curve: bool
    thm3_priority: bool
    thm4: bool
    thm5: bool
    thm6: bool
    lemma3: bool
    lemma4: bool
    lemma56: bool
    recursion_identities: bool

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def classify_regime(params: SystemParams) -> RegimeFlags:
    """Hypothesis flags; a pure function of the parameters."""
    p = params
    savings1 = p.mu1 * (p.h1 - p.h2)
    savings2 = p.mu2 * p.h2
    full1, full2 = p.full_collaboration
    h_ge = p.h1 >= p.h2
    lemma4 = h_ge and p.nu1 > 0 and p.nu2 >= p.mu2
    return RegimeFlags(
        nonidling=h_ge or p.nu1 == 0,
        thm1=h_ge and p.nu1 > 0 and p.nu2 >= p.mu2 and p.mu1 >= p.mu2,
        thm2_curve=p.nu1 == 0 and savings1 < savings2 and p.nu2 >= p.mu2,
        thm2_priority=p.nu1 == 0 and savings1 >= savings2,
        thm3_curve=p.nu2 == 0 and h_ge and p.mu1 >= p.mu2,
        thm3_priority=p.nu2 == 0 and h_ge and p.mu1 >= p.mu2 and savings1 <= savings2,
        thm4=not h_ge,
        thm5=not h_ge and p.nu1 > 0 and (p.nu2 >= p.mu2 or (full1 and full2)),
        thm6=not h_ge and p.nu1 > 0 and p.nu2 == 0,
        lemma3=h_ge,
        lemma4=lemma4,
        lemma56=lemma4 and p.mu1 >= p.mu2,
        recursion_identities=h_ge and p.nu1 > 0 and p.nu2 > 0,
    )


# --------------------------------------------------------------------------
# switching curves and idling thresholds


@dataclass(frozen=True)
class SwitchingCurve:
    """Thresholds per x1 = 1, 2, ...; None marks "beyond the solved domain".

    ``t`` is the flexible server's switch-to-downstream threshold.  For
    idling analyses ``t1`` repeats t and ``t2`` is the smallest x2 at which
    the Station-1 dedicated server idles.  ``slope_ok`` is the t(x1+1) >=
    t(x1) - 1 bound (None when not evaluated); ``nondecreasing`` is a
    diagnostic, never a hard claim for t.
    """

    t: tuple
    t1: tuple | None
    t2: tuple | None
    slope_ok: bool | None
    nondecreasing: bool | None
    slope_witness: tuple | None = None

    def threshold(self, x1: int):
        return self.t[x1 - 1]


def _column_indices(x1: int, x2_hi: int) -> np.ndarray:
    x2s = np.arange(1, x2_hi + 1, dtype=np.int64)
    n = x1 + x2s
    return n * (n + 1) // 2 + x1


def _first_crossing(flags: np.ndarray):
    """(first index of True, index of a later False) for a 0/1 column."""
    if not flags.any():
        return None, None
    first = int(np.argmax(flags))
    tail = flags[first:]
    if tail.all():
        return first, None
    return first, first + int(np.argmax(~tail))


def _slope_check(thresholds, n_max):
    """Check t(x1+1) >= t(x1) - 1 with None treated as a lower bound.

    A None at x1 means the true threshold exceeds n_max - x1, so only a
    finite successor below that bound can certify a violation.
    """
    for k in range(len(thresholds) - 1):
        x1 = k + 1
        cur = thresholds[k] if thresholds[k] is not None else (n_max - x1 + 1)
        nxt = thresholds[k + 1]
        if nxt is not None and nxt < cur - 1:
            return False, (x1, thresholds[k], nxt)
    return True, None


def _nondecreasing_check(thresholds, n_max) -> bool:
    for k in range(len(thresholds) - 1):
        x1 = k + 1
        cur = thresholds[k] if thresholds[k] is not None else (n_max - x1 + 1)
        nxt = thresholds[k + 1]
        if nxt is not None and nxt < cur:
            return False
    return True


def extract_switching_curve(policy: Policy, fns: DecisionFunctions) -> SwitchingCurve:
    """t(x1) = smallest x2 >= 1 with the flexible server downstream.

    Requires a non-idling regime (h1 >= h2, or no Station-1 dedicated
    server).  Raises NotThresholdShaped if some column assigns the server
    back upstream above its switch point.
    """
    p = policy.params
    if not (p.h1 >= p.h2 or p.nu1 == 0):
        raise HypothesisNotMet(
            "switching-curve extraction requires h1 >= h2 or nu1 == 0 (non-idling regime)")
    n_max = policy.n_max
    thresholds = []
    for x1 in range(1, n_max):
        col = _column_indices(x1, n_max - x1)
        downstream = policy.flex[col] == FLEX2
        first, bad = _first_crossing(downstream)
        if bad is not None:
            raise NotThresholdShaped(
                f"flexible server returns upstream at (x1={x1}, x2={bad + 1}) "
                f"after switching at x2={first + 1}",
                witness={"x1": x1, "x2_switch": first + 1, "x2_return": bad + 1})
        thresholds.append(None if first is None else first + 1)
    slope_ok, slope_witness = _slope_check(thresholds, n_max)
    return SwitchingCurve(
        t=tuple(thresholds), t1=None, t2=None,
        slope_ok=slope_ok, nondecreasing=_nondecreasing_check(thresholds, n_max),
        slope_witness=slope_witness)


def extract_idling_thresholds(policy: Policy, fns: DecisionFunctions) -> SwitchingCurve:
    """t2(x1) = smallest x2 at which the Station-1 dedicated server idles.

    Only meaningful for h1 < h2 with a dedicated server upstream.  Also
    extracts the flexible server's switch point t1(x1) and checks both
    columns are single-crossing; ``nondecreasing`` refers to t2.
    """
    p = policy.params
    if p.h1 >= p.h2:
        raise IdlingRegimeRequired(f"idling thresholds require h1 < h2, got h1={p.h1} >= h2={p.h2}")
    if p.nu1 == 0:
        raise HypothesisNotMet("no Station-1 dedicated server to idle (nu1 == 0)")
    n_max = policy.n_max
    t1s, t2s = [], []
    for x1 in range(1, n_max):
        col = _column_indices(x1, n_max - x1)
        idling = ~policy.d1_work[col]
        first, bad = _first_crossing(idling)
        if bad is not None:
            raise NotThresholdShaped(
                f"dedicated server 1 resumes work at (x1={x1}, x2={bad + 1}) "
                f"after idling at x2={first + 1}",
                witness={"x1": x1, "x2_idle": first + 1, "x2_resume": bad + 1})
        t2s.append(None if first is None else first + 1)
        downstream = policy.flex[col] == FLEX2
        first, bad = _first_crossing(downstream)
        if bad is not None:
            raise NotThresholdShaped(
                f"flexible server returns upstream at (x1={x1}, x2={bad + 1})",
                witness={"x1": x1, "x2_switch": first + 1, "x2_return": bad + 1})
        t1s.append(None if first is None else first + 1)
    return SwitchingCurve(
        t=tuple(t1s), t1=tuple(t1s), t2=tuple(t2s),
        slope_ok=None, nondecreasing=_nondecreasing_check(t2s, n_max))


# --------------------------------------------------------------------------
# verdicts and reports


@dataclass
class Verdict:
    claim: str
    passed: bool | None  # None = hypotheses not met, check skipped
    witness: dict | None = None
    residual: float | None = None
    detail: str | None = None

    def as_dict(self) -> dict:
        out = {"claim": self.claim, "pass": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.residual is not None:
            out["residual"] = self.residual
        if self.detail is not None:
            out["detail"] = self.detail
        return out


@dataclass
class StructureReport:
    regime: dict
    verdicts: list[Verdict] = field(default_factory=list)
    t: list | None = None
    t1: list | None = None
    t2: list | None = None
    findings: dict = field(default_factory=dict)

    def all_pass(self) -> bool:
        return all(v.passed is not False for v in self.verdicts)

    def verdict(self, claim: str) -> Verdict:
        for v in self.verdicts:
            if v.claim == claim:
                return v
        raise KeyError(claim)

    def extend(self, other: "StructureReport") -> None:
        self.verdicts.extend(other.verdicts)
        self.findings.update(other.findings)
        for name in ("t", "t1", "t2"):
            if getattr(other, name) is not None:
                setattr(self, name, getattr(other, name))

    def as_dict(self) -> dict:
        return {
            "regime": self.regime,
            "verdicts": [v.as_dict() for v in self.verdicts],
            "t": self.t,
            "t1": self.t1,
            "t2": self.t2,
            "findings": self.findings,
        }


def _state_witness(x1_of, x2_of, i, **values) -> dict:
    return {"state": [int(x1_of[i]), int(x2_of[i])],
            **{k: float(v) for k, v in values.items()}}


def flex_priority_witness(policy: Policy, station_code: int, need_x2: int):
    """First state (x1 >= 1, x2 >= need_x2) violating a strict priority rule."""
    x1_of, x2_of = coordinate_maps(policy.n_max)
    scope = (x1_of >= 1) & (x2_of >= need_x2)
    bad = np.nonzero(scope & (policy.flex != station_code))[0]
    if bad.size == 0:
        return None
    i = bad[0]
    return {"state": [int(x1_of[i]), int(x2_of[i])], "flex": int(policy.flex[i])}


# --------------------------------------------------------------------------
# lemma suite


def verify_lemmas(fns: DecisionFunctions, params: SystemParams | None = None) -> StructureReport:
    """Monotonicity and sign claims for V, f and the decision functions.

    Claims whose hypotheses the instance does not satisfy are reported with
    pass=None.  The divergence claims are checked as finite-domain
    surrogates: monotone decrease everywhere, plus a zero crossing within
    the domain once it is at least 200 levels deep (dtilde along x1 = 1,
    d along every column x1 <= 10).
    """
    p = params or fns.params
    flags = classify_regime(p)
    n_max = fns.n_max
    x1_of, x2_of = coordinate_maps(n_max)
    report = StructureReport(regime=flags.as_dict())
    add = report.verdicts.append

    # V strictly increasing in x2: g < 0 wherever defined.
    m = x2_of >= 1
    bad = np.nonzero(m & (fns.g >= 0))[0]
    add(Verdict("lemma1", bool(bad.size == 0),
                None if not bad.size else _state_witness(x1_of, x2_of, bad[0], g=fns.g[bad[0]]),
                detail="V strictly increasing in each coordinate"))
    # V strictly increasing in x1: V(x1,x2) - V(x1-1,x2) = f(x1,x2) - g(x1-1,x2+1).
    if report.verdicts[-1].passed:
        m = x1_of >= 1
        idx = np.nonzero(m)[0]
        growth = fns.f[idx] - fns.g[idx - 1]
        bad = idx[growth <= 0]
        if bad.size:
            report.verdicts[-1] = Verdict(
                "lemma1", False,
                _state_witness(x1_of, x2_of, bad[0], increase_x1=growth[np.argmax(idx == bad[0])]),
                detail="V strictly increasing in each coordinate")

    if flags.lemma3:
        m = x1_of >= 1
        bad = np.nonzero(m & ~(fns.f > 0))[0]
        add(Verdict("lemma3", bool(bad.size == 0),
                    None if not bad.size else _state_witness(x1_of, x2_of, bad[0], f=fns.f[bad[0]]),
                    detail="f > 0 for x1 >= 1 when h1 >= h2"))
    else:
        add(Verdict("lemma3", None, detail="requires h1 >= h2"))

    def column(arr, x1, x2_lo=0):
        x2s = np.arange(x2_lo, n_max - x1 + 1, dtype=np.int64)
        n = x1 + x2s
        return x2s, arr[n * (n + 1) // 2 + x1]

    # dtilde(1, .) strictly decreasing, with a zero crossing in deep domains.
    if flags.lemma4:
        x2s, vals = column(fns.dtilde, 1)
        rises = np.nonzero(np.diff(vals) >= 0)[0]
        add(Verdict("lemma4_monotone", bool(rises.size == 0),
                    None if not rises.size else
                    {"state": [1, int(x2s[rises[0]])],
                     "value": float(vals[rises[0]]), "next": float(vals[rises[0] + 1])},
                    detail="dtilde(1, x2) strictly decreasing"))
        if n_max >= 200:
            crossed = bool((vals < 0).any())
            add(Verdict("lemma4_crossing", crossed,
                        None if crossed else {"state": [1, int(x2s[-1])], "value": float(vals[-1])},
                        detail="dtilde(1, .) crosses below zero within the domain"))
        else:
            add(Verdict("lemma4_crossing", None, detail="needs n_max >= 200"))
    else:
        add(Verdict("lemma4_monotone", None, detail="requires h1 >= h2, nu1 > 0, nu2 >= mu2"))
        add(Verdict("lemma4_crossing", None, detail="requires h1 >= h2, nu1 > 0, nu2 >= mu2"))

    if flags.lemma56:
        witness = None
        for x1 in range(1, n_max):
            x2s, vals = column(fns.d, x1)
            rises = np.nonzero(np.diff(vals) >= 0)[0]
            if rises.size:
                witness = {"state": [x1, int(x2s[rises[0]])],
                           "value": float(vals[rises[0]]), "next": float(vals[rises[0] + 1])}
                break
        add(Verdict("lemma5_monotone", witness is None, witness,
                    detail="d(x1, x2) strictly decreasing in x2"))
        if n_max >= 200:
            witness = None
            for x1 in range(1, min(10, n_max - 1) + 1):
                _, vals = column(fns.d, x1)
                if not (vals < 0).any():
                    witness = {"state": [x1, int(n_max - x1)], "value": float(vals[-1])}
                    break
            add(Verdict("lemma5_crossing", witness is None, witness,
                        detail="d(x1, .) crosses below zero within the domain, x1 <= 10"))
        else:
            add(Verdict("lemma5_crossing", None, detail="needs n_max >= 200"))

        # Pointwise implications bounding how the decision functions move
        # along a diagonal; these cap the switching curve's slope at -1.
        def implied(name, lhs_states, lhs_arr, rhs_states, rhs_arr, direction):
            witness = None
            for (sx1, sx2), (rx1, rx2) in zip(lhs_states, rhs_states):
                lhs = lhs_arr[tri_index(sx1, sx2)]
                rhs = rhs_arr[tri_index(rx1, rx2)]
                if math.isnan(lhs) or math.isnan(rhs) or lhs < 0:
                    continue
                slack = INEQ_SLACK * (1.0 + max(abs(lhs), abs(rhs)))
                ok = (lhs >= rhs - slack) if direction == ">=" else (lhs <= rhs + slack)
                if not ok:
                    witness = {"state": [sx1, sx2], "lhs": float(lhs),
                               "other_state": [rx1, rx2], "rhs": float(rhs)}
                    break
            add(Verdict(name, witness is None, witness))

        implied("lemma6_i",
                [(2, x2) for x2 in range(1, n_max - 1)], fns.d,
                [(1, x2 + 1) for x2 in range(1, n_max - 1)], fns.d, ">=")
        implied("lemma6_ii",
                [(1, x2) for x2 in range(2, n_max)], fns.dtilde,
                [(2, x2 - 1) for x2 in range(2, n_max)], fns.d, "<=")
        implied("lemma6_iii",
                [(x1, x2) for x1 in range(2, n_max - 1) for x2 in range(2, n_max - x1 + 1)],
                fns.d,
                [(x1 + 1, x2 - 1) for x1 in range(2, n_max - 1) for x2 in range(2, n_max - x1 + 1)],
                fns.d, "<=")
    else:
        why = "requires h1 >= h2, nu1 > 0, nu2 >= mu2, mu1 >= mu2"
        for name in ("lemma5_monotone", "lemma5_crossing", "lemma6_i", "lemma6_ii", "lemma6_iii"):
            add(Verdict(name, None, detail=why))

    return report


# --------------------------------------------------------------------------
# work conservation / rate maximality of the solved policy


def verify_propositions(table: ValueTable, policy: Policy,
                        fns: DecisionFunctions) -> StructureReport:
    """Optimal actions never starve Station 2 and use rho1 = max-or-zero.

    Checks, at every nonempty state: (a) whenever x2 >= 1, the dedicated
    downstream server works and the flexible server is not idle, and rho2 is
    the largest rate compatible with the flexible server's station; (b) rho1
    is the largest compatible rate when f > 0 and zero when f < 0 (either is
    accepted inside the sign-tolerance band); (c) the flexible server sits
    upstream exactly where the governing decision function is nonnegative.
    """
    p = table.params
    n_max = table.n_max
    x1_of, x2_of = coordinate_maps(n_max)
    values = table.values_normalized
    eps = SIGN_TOL * (1.0 + np.abs(values))

    def close(a, b):
        return np.abs(a - b) <= 1e-12 * (1.0 + np.abs(b))

    flex = policy.flex
    nonempty = x1_of + x2_of >= 1

    # Proposition-1 side: maximal downstream rate.
    has2 = x2_of >= 1
    exp_rho2_flex2 = np.where(p.nu2 > 0,
                              np.where(x2_of == 1, p.nu2 + p.xi2, p.nu2 + p.mu2),
                              p.mu2)
    exp_rho2_other = p.nu2 if p.nu2 > 0 else 0.0
    prop1_bad = nonempty & has2 & (
        ((p.nu2 > 0) & ~policy.d2_work)
        | (flex == FLEXIDLE)
        | ((flex == FLEX2) & ~close(policy.rho2, exp_rho2_flex2))
        | ((flex != FLEX2) & ~close(policy.rho2, exp_rho2_other))
    )

    # Proposition-2 side: rho1 maximal-or-zero by the sign of f.
    has1 = x1_of >= 1
    exp_rho1_flex1 = np.where(p.nu1 > 0,
                              np.where(x1_of == 1, p.nu1 + p.xi1, p.nu1 + p.mu1),
                              p.mu1)
    exp_rho1_other = p.nu1
    maximal1 = np.where(flex == FLEX1,
                        close(policy.rho1, exp_rho1_flex1),
                        close(policy.rho1, exp_rho1_other))
    zero1 = policy.rho1 == 0.0
    f = fns.f
    fpos = f > eps
    fneg = f < -eps
    prop2_bad = nonempty & has1 & (
        (fpos & ~maximal1) | (fneg & ~zero1) | (~fpos & ~fneg & ~(maximal1 | zero1))
    )

    # Sign/assignment consistency of the flexible server.
    gov = fns.governing
    both = has1 & has2
    sign_bad = both & (((gov > eps) & (flex != FLEX1)) | ((gov < -eps) & (flex != FLEX2)))

    report = StructureReport(regime=classify_regime(p).as_dict())
    for claim, bad, ctx in (("prop1_max_rho2", prop1_bad, {"rho2": policy.rho2}),
                            ("prop2_rho1_sign", prop2_bad, {"rho1": policy.rho1, "f": f}),
                            ("sign_consistency", sign_bad, {"governing": gov})):
        where = np.nonzero(bad)[0]
        witness = None
        if where.size:
            i = where[0]
            witness = _state_witness(x1_of, x2_of, i, **{k: v[i] for k, v in ctx.items()})
            witness["flex"] = int(flex[i])
            witness["count"] = int(where.size)
        report.verdicts.append(Verdict(claim, bool(where.size == 0), witness))
    return report


# --------------------------------------------------------------------------
# recursion identities on the decision functions


def verify_appendix_recursions(table: ValueTable, fns: DecisionFunctions) -> StructureReport:
    """Substitute the solved values into the decision-function recursions.

    The identities hold in the generic non-idling setting, so they require
    h1 >= h2 and both dedicated servers present; otherwise HypothesisNotMet.
    Each residual is |lhs - rhs| relative to the largest participating term;
    pass iff the maximum residual is <= 1e-8.
    """
    if table.n_max < 6:
        raise DomainTooSmall(f"identity checks need n_max >= 6, got {table.n_max}")
    p = table.params
    if not (p.h1 >= p.h2 and p.nu1 > 0 and p.nu2 > 0):
        raise HypothesisNotMet(
            "the decision-function recursions require h1 >= h2 and dedicated "
            "servers at both stations")

    values = table.values_normalized
    n_max = table.n_max

    def V(x1, x2):
        return float(values[tri_index(x1, x2)])

    def F(x1, x2):
        return float(fns.f[tri_index(x1, x2)])

    def G(x1, x2):
        return float(fns.g[tri_index(x1, x2)])

    def D(x1, x2):
        return float(fns.d[tri_index(x1, x2)])

    def DT(x2):
        return float(fns.dtilde[tri_index(1, x2)])

    def DH(x1):
        return float(fns.dhat[tri_index(x1, 1)])

    DB = float(fns.dbar[tri_index(1, 1)])
    pos = lambda a: max(a, 0.0)  # noqa: E731
    neg = lambda a: min(a, 0.0)  # noqa: E731

    nu1, nu2, mu1, mu2, xi1, xi2 = p.nu1, p.nu2, p.mu1, p.mu2, p.xi1, p.xi2
    h1, h2 = p.h1, p.h2

    cases: dict[str, list] = {name: [] for name in
                              ("identity_15", "identity_16", "identity_17", "identity_20",
                               "identity_21", "identity_22", "identity_23", "identity_24")}

    cases["identity_15"].append(((1, 0), DT(0), [
        xi1 * (h1 - h2), xi1 * (nu2 + xi2) * V(0, 1),
        (nu2 + mu1 + mu2 + xi2) * DT(0)]))

    cases["identity_16"].append(((1, 1), DT(1), [
        xi1 * (h1 - h2), -mu2 * h2, nu2 * DT(0), mu1 * DT(1),
        nu1 * mu2 * G(0, 2), xi1 * xi2 * F(1, 1), mu2 * mu2 * G(1, 1),
        xi1 * neg(DB), mu2 * pos(DB)]))

    for x2 in range(2, n_max):
        prev_neg = neg(DB) if x2 == 2 else neg(DT(x2 - 1))
        cases["identity_17"].append(((1, x2), DT(x2), [
            xi1 * (h1 - h2), -mu2 * h2, nu2 * DT(x2 - 1), (mu1 + xi2) * DT(x2),
            nu1 * mu2 * G(0, x2 + 1), xi1 * neg(DT(x2)), mu2 * pos(DT(x2)),
            mu2 * prev_neg]))

    cases["identity_20"].append(((1, 0), D(1, 0), [
        mu1 * (h1 - h2), mu1 * (nu2 + xi2) * V(0, 1),
        (nu2 + mu1 + mu2 + xi2) * D(1, 0)]))

    for x2 in range(1, n_max):
        flex_neg = neg(DB) if x2 == 1 else neg(DT(x2))
        shift_neg = 0.0 if x2 == 1 else (neg(DB) if x2 == 2 else neg(DT(x2 - 1)))
        cases["identity_21"].append(((1, x2), D(1, x2), [
            mu1 * (h1 - h2), -mu2 * h2, nu2 * D(1, x2 - 1),
            (mu1 + mu2 + xi2) * D(1, x2), mu2 * (nu1 + xi1 - mu1) * G(0, x2 + 1),
            (mu1 - mu2) * flex_neg, mu2 * shift_neg]))

    for x1 in range(2, n_max + 1):
        up_pos = pos(DB) if x1 == 2 else pos(DH(x1 - 1))
        cases["identity_22"].append(((x1, 0), D(x1, 0), [
            mu1 * (h1 - h2), nu1 * mu1 * F(x1 - 1, 1), -mu1 * (nu2 + xi2) * G(x1 - 1, 1),
            (nu2 + mu2 + xi1 + xi2) * D(x1, 0), mu1 * up_pos]))

    for x1 in range(2, n_max):
        up_pos = pos(DT(2)) if x1 == 2 else pos(D(x1 - 1, 2))
        cases["identity_23"].append(((x1, 1), D(x1, 1), [
            mu1 * (h1 - h2), -mu2 * h2, nu1 * D(x1 - 1, 2), nu2 * D(x1, 0),
            (xi1 + xi2) * D(x1, 1), mu2 * (mu2 - xi2) * G(x1, 1),
            mu1 * neg(DH(x1)), mu2 * pos(DH(x1)), mu1 * up_pos]))

    for x1 in range(2, n_max - 1):
        for x2 in range(2, n_max - x1 + 1):
            up_pos = pos(DT(x2 + 1)) if x1 == 2 else pos(D(x1 - 1, x2 + 1))
            dn_neg = neg(DH(x1)) if x2 == 2 else neg(D(x1, x2 - 1))
            cases["identity_24"].append(((x1, x2), D(x1, x2), [
                mu1 * (h1 - h2), -mu2 * h2, nu1 * D(x1 - 1, x2 + 1), nu2 * D(x1, x2 - 1),
                (xi1 + xi2) * D(x1, x2), mu1 * neg(D(x1, x2)), mu2 * pos(D(x1, x2)),
                mu1 * up_pos, mu2 * dn_neg]))

    report = StructureReport(regime=classify_regime(p).as_dict())
    for name, entries in cases.items():
        worst = 0.0
        witness = None
        for state, lhs, terms in entries:
            rhs = math.fsum(terms)
            scale = max(1.0, abs(lhs), max(abs(t) for t in terms))
            res = abs(lhs - rhs) / scale
            if res > worst:
                worst = res
                witness = {"state": list(state), "lhs": lhs, "rhs": rhs}
        ok = worst <= IDENTITY_TOL
        report.verdicts.append(Verdict(name, ok, None if ok else witness, residual=worst))
    return report
