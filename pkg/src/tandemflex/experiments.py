"""Randomized structural studies and the two golden counterexamples.

Instances are drawn log-uniformly (rates on [0.05, 10], holding costs on
[0.1, 20] by default) and pushed into a named regime by deterministic
transforms (swapping h's or rates) plus bounded rejection.  Everything is
reproducible: instance ``index`` under ``seed`` uses the RNG stream seeded
with ``seed XOR index``.

Regimes whose claims are finite-domain surrogates of limit statements
(idling thresholds in-domain, decision functions crossing zero) default to
narrower sampling ranges; with extreme rate ratios the crossing point of a
decision function can sit beyond any fixed domain, so the surrogate is only
meaningful for moderate instances.  The ranges remain configurable.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import GoldenMismatch, HypothesisNotMet, NotThresholdShaped, RegimeUnsatisfiable, TandemError
from .model import STATION1, STATION2, SystemParams, validate
from .solver import solve
from .structure import (
    FLEX1,
    FLEX2,
    Verdict,
    decision_functions,
    extract_idling_thresholds,
    extract_switching_curve,
    flex_priority_witness,
    verify_lemmas,
    verify_propositions,
)

DEFAULT_RATE_RANGE = (0.05, 10.0)
DEFAULT_H_RANGE = (0.1, 20.0)

#: the slope-below-minus-one counterexample ("three jobs each, server moves
#: upstream after an upstream completion")
EXAMPLE1 = SystemParams(nu1=0.8, nu2=0.6, mu1=0.6, mu2=8.0, xi1=0.03, xi2=7.43,
                        h1=16.0, h2=1.5)
#: the priority-rule counterexample with no downstream dedicated server
EXAMPLE2 = SystemParams(nu1=1.3, nu2=0.0, mu1=0.9, mu2=7.7, xi1=0.1, xi2=0.0,
                        h1=11.4, h2=1.2)


@dataclass(frozen=True)
class RegimeDef:
    description: str
    claims: tuple
    rate_range: tuple | None = None
    h_range: tuple | None = None


REGIMES: dict[str, RegimeDef] = {
    "generic": RegimeDef(
        "all four service rates positive, no ordering constraints",
        ("lemma1", "props")),
    "nonidling_generic": RegimeDef(
        "h1 >= h2 with both dedicated servers",
        ("lemma1", "lemma3", "props", "sign_consistency")),
    "thm1_hypotheses": RegimeDef(
        "h1 >= h2, nu2 >= mu2, mu1 >= mu2",
        ("switching_single_crossing", "slope_ok", "lemma1", "lemma3",
         "props", "sign_consistency")),
    "thm1_violate_nu2": RegimeDef(
        "h1 >= h2, nu2 < mu2 <= mu1 (first hypothesis violated)",
        ("switching_single_crossing", "slope_ok", "props")),
    "thm1_violate_mu1": RegimeDef(
        "h1 >= h2, mu1 < mu2 <= nu2 (second hypothesis violated)",
        ("switching_single_crossing", "slope_ok", "props")),
    "thm1_violate_both": RegimeDef(
        "h1 >= h2, nu2 < mu2 and mu1 < mu2 (slope may drop below -1)",
        ("switching_single_crossing", "props")),
    "thm2_hypotheses": RegimeDef(
        "nu1 = 0, mu1*(h1-h2) < mu2*h2, nu2 >= mu2",
        ("switching_single_crossing", "slope_ok", "props")),
    "thm2_nu2_lt_mu2": RegimeDef(
        "nu1 = 0, mu1*(h1-h2) < mu2*h2, nu2 < mu2",
        ("switching_single_crossing", "slope_ok", "props")),
    "thm2_priority": RegimeDef(
        "nu1 = 0, mu1*(h1-h2) >= mu2*h2: flexible server stays upstream",
        ("flex_priority_station1", "props")),
    "thm3_hypotheses": RegimeDef(
        "nu2 = 0, h1 >= h2, mu1 >= mu2",
        ("switching_single_crossing", "slope_ok", "props")),
    "thm3_priority": RegimeDef(
        "nu2 = 0, h1 >= h2, mu1 >= mu2, mu1*(h1-h2) <= mu2*h2: t(x1) = 1",
        ("flex_priority_station2", "props")),
    "thm3_mu1_lt_mu2": RegimeDef(
        "nu2 = 0, h1 >= h2, mu1 < mu2, mu1*(h1-h2) > mu2*h2",
        ("switching_single_crossing", "slope_ok", "props")),
    "idling_h1_lt_h2": RegimeDef(
        "h2 >= 2*h1, nu2 >= mu2, moderate rates: idling thresholds in-domain",
        ("idling_threshold_exists", "idling_single_crossing",
         "two_thresholds_x1_1", "props"),
        rate_range=(0.5, 2.0)),
    "thm6_nu2_zero": RegimeDef(
        "h1 < h2, nu2 = 0: flexible server downstream, t2 nondecreasing",
        ("flex_priority_station2", "idling_single_crossing",
         "t2_nondecreasing", "props")),
    "lemma_suite": RegimeDef(
        "h1 >= h2, nu2 >= mu2 >= ... narrow ranges so zero crossings stay in-domain",
        ("lemma1", "lemma3", "lemma4_monotone", "lemma4_crossing",
         "lemma5_monotone", "lemma5_crossing", "lemma6_i", "lemma6_ii",
         "lemma6_iii", "props", "sign_consistency"),
        rate_range=(0.7, 1.4), h_range=(0.7, 1.4)),
}


@dataclass(frozen=True)
class ExperimentConfig:
    regime: str
    count: int
    seed: int
    n_max: int = 40
    rate_range: tuple | None = None
    h_range: tuple | None = None
    max_resample: int = 10_000
    keep_witnesses: int = 5

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; known: {sorted(REGIMES)}")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.n_max < 10:
            raise ValueError("n_max must be >= 10 for structural sweeps")

    @property
    def resolved_rate_range(self) -> tuple:
        return self.rate_range or REGIMES[self.regime].rate_range or DEFAULT_RATE_RANGE

    @property
    def resolved_h_range(self) -> tuple:
        return self.h_range or REGIMES[self.regime].h_range or DEFAULT_H_RANGE


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _draw_xi(rng, nu, mu, budget):
    """xi = u*mu with u ~ U[0.05, 1], redrawn until nu + xi > mu."""
    if nu == 0:
        return 0.0
    for _ in range(budget):
        xi = rng.uniform(0.05, 1.0) * mu
        if nu + xi > mu:
            return xi
    raise RegimeUnsatisfiable(f"could not draw xi with nu={nu}, mu={mu}")


def generate_instance(config: ExperimentConfig, index: int) -> SystemParams:
    """Deterministic regime-constrained instance ``index`` of the stream."""
    rng = np.random.default_rng(config.seed ^ index)
    rate_lo, rate_hi = config.resolved_rate_range
    h_lo, h_hi = config.resolved_h_range
    regime = config.regime

    for _ in range(config.max_resample):
        nu1 = _log_uniform(rng, rate_lo, rate_hi)
        nu2 = _log_uniform(rng, rate_lo, rate_hi)
        mu1 = _log_uniform(rng, rate_lo, rate_hi)
        mu2 = _log_uniform(rng, rate_lo, rate_hi)
        h1 = _log_uniform(rng, h_lo, h_hi)
        h2 = _log_uniform(rng, h_lo, h_hi)

        if regime in ("thm2_hypotheses", "thm2_nu2_lt_mu2", "thm2_priority"):
            nu1 = 0.0
        if regime in ("thm3_hypotheses", "thm3_priority", "thm3_mu1_lt_mu2", "thm6_nu2_zero"):
            nu2 = 0.0

        # Deterministic transforms first, rejection only for what they
        # cannot enforce.
        if regime in ("nonidling_generic", "thm1_hypotheses", "thm1_violate_nu2",
                      "thm1_violate_mu1", "thm1_violate_both", "thm3_hypotheses",
                      "thm3_priority", "thm3_mu1_lt_mu2", "lemma_suite"):
            if h1 < h2:
                h1, h2 = h2, h1
        if regime in ("idling_h1_lt_h2", "thm6_nu2_zero"):
            if h1 >= h2:
                h1, h2 = h2, h1
            if h1 == h2:
                continue
        if regime in ("thm1_hypotheses", "lemma_suite"):
            # mu2 becomes the smallest of the three; the other two keep
            # their draw order, so nu2 vs mu1 stays unconstrained.
            triple = [nu2, mu1, mu2]
            mu2 = triple.pop(min(range(3), key=triple.__getitem__))
            nu2, mu1 = triple
        if regime in ("thm2_hypotheses", "idling_h1_lt_h2"):
            if nu2 < mu2:
                nu2, mu2 = mu2, nu2
        if regime in ("thm3_hypotheses", "thm3_priority"):
            if mu1 < mu2:
                mu1, mu2 = mu2, mu1
        if regime == "thm3_mu1_lt_mu2":
            if mu1 > mu2:
                mu1, mu2 = mu2, mu1
            if mu1 == mu2:
                continue

        # Rejection predicates.
        if regime == "thm1_violate_nu2" and not (nu2 < mu2 <= mu1):
            continue
        if regime == "thm1_violate_mu1" and not (mu1 < mu2 <= nu2):
            continue
        if regime == "thm1_violate_both" and not (nu2 < mu2 and mu1 < mu2):
            continue
        if regime in ("thm2_hypotheses", "thm2_nu2_lt_mu2") and not (mu1 * (h1 - h2) < mu2 * h2):
            continue
        if regime == "thm2_nu2_lt_mu2" and not (nu2 < mu2):
            continue
        if regime == "thm2_priority" and not (mu1 * (h1 - h2) >= mu2 * h2):
            continue
        if regime == "thm3_priority" and not (mu1 * (h1 - h2) <= mu2 * h2):
            continue
        if regime == "thm3_mu1_lt_mu2" and not (mu1 * (h1 - h2) > mu2 * h2):
            continue
        if regime == "idling_h1_lt_h2" and not (h2 >= 2.0 * h1):
            continue

        xi1 = _draw_xi(rng, nu1, mu1, config.max_resample)
        xi2 = _draw_xi(rng, nu2, mu2, config.max_resample)
        return validate(SystemParams(nu1=nu1, nu2=nu2, mu1=mu1, mu2=mu2,
                                     xi1=xi1, xi2=xi2, h1=h1, h2=h2))
    raise RegimeUnsatisfiable(
        f"regime {regime!r} not satisfied within {config.max_resample} draws "
        f"(seed={config.seed}, index={index})")


@dataclass
class BatchReport:
    """Aggregated claim outcomes over a seeded batch of instances."""

    regime: str
    count: int
    seed: int
    n_max: int
    checked: dict = field(default_factory=dict)     # claim -> instances evaluated
    violations: dict = field(default_factory=dict)  # claim -> violation count
    witnesses: list = field(default_factory=list)   # first few full reproducers
    findings: dict = field(default_factory=dict)    # observations, not claims
    errors: list = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def total_violations(self) -> int:
        return sum(self.violations.values())

    def ok(self) -> bool:
        return self.total_violations == 0 and not self.errors

    def as_dict(self) -> dict:
        return {
            "regime": self.regime, "count": self.count, "seed": self.seed,
            "n_max": self.n_max, "checked": self.checked,
            "violations": self.violations, "witnesses": self.witnesses,
            "findings": self.findings, "errors": self.errors,
            "wall_clock_s": self.wall_clock,
        }


def evaluate_instance_claims(params, n_max, claims):
    """Solve one instance and evaluate ``claims``; returns (verdicts, findings)."""
    table, policy = solve(params, n_max)
    fns = decision_functions(table)
    verdicts: list[Verdict] = []
    findings: dict = {}
    claims = tuple(claims)

    lemma_names = tuple(c for c in claims if c.startswith("lemma"))
    if lemma_names:
        rep = verify_lemmas(fns)
        verdicts += [v for v in rep.verdicts if v.claim in lemma_names]
    if "props" in claims or "sign_consistency" in claims:
        rep = verify_propositions(table, policy, fns)
        wanted = set()
        if "props" in claims:
            wanted |= {"prop1_max_rho2", "prop2_rho1_sign"}
        if "sign_consistency" in claims:
            wanted.add("sign_consistency")
        verdicts += [v for v in rep.verdicts if v.claim in wanted]

    if "switching_single_crossing" in claims or "slope_ok" in claims:
        try:
            curve = extract_switching_curve(policy, fns)
        except NotThresholdShaped as exc:
            verdicts.append(Verdict("switching_single_crossing", False, exc.witness))
            if "slope_ok" in claims:
                verdicts.append(Verdict("slope_ok", None, detail="curve not threshold-shaped"))
        else:
            if "switching_single_crossing" in claims:
                verdicts.append(Verdict("switching_single_crossing", True))
            if "slope_ok" in claims:
                witness = None
                if not curve.slope_ok:
                    x1, cur, nxt = curve.slope_witness
                    witness = {"x1": x1, "t_x1": cur, "t_next": nxt}
                verdicts.append(Verdict("slope_ok", bool(curve.slope_ok), witness))
            findings["slope_below_minus1"] = not curve.slope_ok
            findings["t_nondecreasing"] = curve.nondecreasing
            findings["t"] = list(curve.t)

    if "flex_priority_station1" in claims:
        witness = flex_priority_witness(policy, FLEX1, need_x2=0)
        verdicts.append(Verdict("flex_priority_station1", witness is None, witness))
    if "flex_priority_station2" in claims:
        witness = flex_priority_witness(policy, FLEX2, need_x2=1)
        verdicts.append(Verdict("flex_priority_station2", witness is None, witness))

    idling_claims = {"idling_threshold_exists", "idling_single_crossing",
                     "two_thresholds_x1_1", "t2_nondecreasing"} & set(claims)
    if idling_claims:
        try:
            curve = extract_idling_thresholds(policy, fns)
        except NotThresholdShaped as exc:
            if "idling_single_crossing" in idling_claims:
                verdicts.append(Verdict("idling_single_crossing", False, exc.witness))
            for claim in idling_claims - {"idling_single_crossing"}:
                verdicts.append(Verdict(claim, None, detail="idling column not single-crossing"))
        except HypothesisNotMet as exc:
            for claim in idling_claims:
                verdicts.append(Verdict(claim, None, detail=str(exc)))
        else:
            if "idling_single_crossing" in idling_claims:
                verdicts.append(Verdict("idling_single_crossing", True))
            if "idling_threshold_exists" in idling_claims:
                width = min(20, n_max - 1)
                missing = [x1 for x1 in range(1, width + 1) if curve.t2[x1 - 1] is None]
                verdicts.append(Verdict(
                    "idling_threshold_exists", not missing,
                    None if not missing else {"x1": missing[0], "scanned_x2_up_to": n_max - missing[0]}))
            if "two_thresholds_x1_1" in idling_claims:
                t1, t2 = curve.t1[0], curve.t2[0]
                ok = t1 is not None and t2 is not None and t1 <= t2
                verdicts.append(Verdict(
                    "two_thresholds_x1_1", ok,
                    None if ok else {"t1": t1, "t2": t2}))
            if "t2_nondecreasing" in idling_claims:
                verdicts.append(Verdict("t2_nondecreasing", bool(curve.nondecreasing),
                                        None if curve.nondecreasing else {"t2": list(curve.t2)}))
            findings["t1"] = list(curve.t1)
            findings["t2"] = list(curve.t2)

    return verdicts, findings


def run_batch(config: ExperimentConfig, threads: int = 1) -> BatchReport:
    """Generate, solve and verify ``config.count`` instances of a regime.

    Per-instance solver errors are recorded, not raised; violation records
    carry the (seed, index) pair that regenerates the exact instance.
    """
    claims = REGIMES[config.regime].claims
    report = BatchReport(regime=config.regime, count=config.count,
                         seed=config.seed, n_max=config.n_max)
    started = time.perf_counter()

    def work(index):
        params = generate_instance(config, index)
        return params, evaluate_instance_claims(params, config.n_max, claims)

    def consume(index, params, verdicts, findings):
        for v in verdicts:
            if v.passed is None:
                continue
            report.checked[v.claim] = report.checked.get(v.claim, 0) + 1
            if not v.passed:
                report.violations[v.claim] = report.violations.get(v.claim, 0) + 1
                if len(report.witnesses) < config.keep_witnesses:
                    report.witnesses.append({
                        "claim": v.claim, "index": index, "seed": config.seed,
                        "params": params.as_dict(), "witness": v.witness,
                    })
        if findings.get("slope_below_minus1"):
            report.findings["slope_below_minus1"] = report.findings.get("slope_below_minus1", 0) + 1
            report.findings.setdefault("slope_witness_indices", [])
            if len(report.findings["slope_witness_indices"]) < config.keep_witnesses:
                report.findings["slope_witness_indices"].append(index)
        if findings.get("t_nondecreasing") is False:
            report.findings["t_decreasing_somewhere"] = \
                report.findings.get("t_decreasing_somewhere", 0) + 1

    def safe_work(index):
        try:
            return index, work(index), None
        except TandemError as exc:
            return index, None, {"index": index, "error": type(exc).__name__,
                                 "message": str(exc)}

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(safe_work, range(config.count)))
    else:
        results = map(safe_work, range(config.count))
    for index, outcome, error in results:
        if error is not None:
            report.errors.append(error)
            continue
        params, (verdicts, findings) = outcome
        consume(index, params, verdicts, findings)

    report.wall_clock = time.perf_counter() - started
    return report


# --------------------------------------------------------------------------
# golden counterexamples


def reproduce_paper_examples(n_max: int = 12, strict: bool = True) -> BatchReport:
    """Re-derive the two published counterexample policies exactly.

    Example 1: with three jobs in each station the flexible server belongs
    downstream, yet after one upstream completion -- state (2, 4) -- it moves
    upstream, so the switching curve has a slope below -1.  Example 2: even
    though the downstream one-step savings mu2*h2 exceed mu1*(h1-h2), the
    flexible server is assigned upstream in state (3, 1).
    """
    report = BatchReport(regime="paper_examples", count=2, seed=0, n_max=n_max)
    started = time.perf_counter()

    table1, policy1 = solve(EXAMPLE1, n_max)
    fns1 = decision_functions(table1)
    curve1 = extract_switching_curve(policy1, fns1)
    checks = [
        ("example1_flex_station2_at_3_3", policy1.flex_station(3, 3) == STATION2,
         {"state": [3, 3], "flex": policy1.flex_station(3, 3)}),
        ("example1_flex_station1_at_2_4", policy1.flex_station(2, 4) == STATION1,
         {"state": [2, 4], "flex": policy1.flex_station(2, 4)}),
        ("example1_slope_below_minus1", not curve1.slope_ok,
         {"t": list(curve1.t)}),
    ]

    table2, policy2 = solve(EXAMPLE2, n_max)
    savings1 = EXAMPLE2.mu1 * (EXAMPLE2.h1 - EXAMPLE2.h2)
    savings2 = EXAMPLE2.mu2 * EXAMPLE2.h2
    checks += [
        ("example2_savings_favor_station2", savings1 < savings2,
         {"mu1_h1_minus_h2": savings1, "mu2_h2": savings2}),
        ("example2_flex_station1_at_3_1", policy2.flex_station(3, 1) == STATION1,
         {"state": [3, 1], "flex": policy2.flex_station(3, 1)}),
    ]

    for claim, ok, info in checks:
        report.checked[claim] = 1
        if not ok:
            report.violations[claim] = 1
            report.witnesses.append({"claim": claim, "witness": info})
    report.findings["example1_t"] = list(curve1.t)
    report.wall_clock = time.perf_counter() - started

    if strict and not report.ok():
        raise GoldenMismatch(f"paper-example mismatch: {report.violations}; "
                             f"witnesses: {report.witnesses}")
    return report
