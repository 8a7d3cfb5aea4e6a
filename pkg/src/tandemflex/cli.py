"""Command-line entry point.

Subcommands: solve, policy, verify, sweep, simulate, oracle, paper-examples.
Every report embeds a run manifest (resolved config, seeds, input digests,
tool version); given the same manifest the output bytes are identical.
Flags can be preset through environment variables named TANDEMFLEX_<FLAG>
(e.g. TANDEMFLEX_NMAX, TANDEMFLEX_SEED).  Exit codes: 0 success, 1 failed
assertions or golden mismatches, 2 usage errors, 3 invalid instances.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time

from . import __version__
from .backend import backend_name
from .errors import TandemError, ValidationError
from .experiments import (
    REGIMES,
    ExperimentConfig,
    reproduce_paper_examples,
    run_batch,
)
from .model import State, SystemParams, validate
from .oracle import enumerate_policies, value_iteration
from .simulate import SimConfig, simulate
from .solver import evaluate_policy, read_policy_csv, solve, write_policy_csv
from .structure import (
    FLEX1,
    FLEX2,
    StructureReport,
    Verdict,
    classify_regime,
    decision_functions,
    extract_idling_thresholds,
    extract_switching_curve,
    flex_priority_witness,
    verify_appendix_recursions,
    verify_lemmas,
    verify_propositions,
    write_decision_grid_csv,
)
from .errors import (
    DomainTooSmall,
    HypothesisNotMet,
    NotThresholdShaped,
)

ENV_PREFIX = "TANDEMFLEX_"


def _env(name, cast, default):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    return cast(raw)


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _manifest(subcommand, args, extra=None):
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    digests = {}
    for key in ("instance", "policy"):
        path = config.get(key)
        if path:
            digests[key] = _sha256_file(path)
    out = {
        "tool": "tandemflex",
        "version": __version__,
        "backend": backend_name(),
        "subcommand": subcommand,
        "config": config,
        "input_digests": digests,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if extra:
        out.update(extra)
    return out


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _load_instance(path) -> SystemParams:
    with open(path) as fh:
        return validate(SystemParams.from_dict(json.load(fh)))


def _load_policy_map(path):
    rows = read_policy_csv(path)
    return {state: row["rho"] for state, row in rows.items()}


def cmd_solve(args):
    params = _load_instance(args.instance)
    table, policy = solve(params, args.nmax)
    out = args.out or "value_policy.csv"
    write_policy_csv(out, table, policy)
    if args.grid_out:
        write_decision_grid_csv(args.grid_out, decision_functions(table))
    print(f"solved n_max={args.nmax}; V(apex)={table.values[-1]:.12g}; wrote {out}")
    return 0


def cmd_policy(args):
    params = _load_instance(args.instance)
    policy_map = _load_policy_map(args.policy)
    table = evaluate_policy(params, policy_map, args.nmax)
    out = args.out or "policy_value.csv"
    write_policy_csv(out, table)
    print(f"evaluated stored policy at n_max={args.nmax}; wrote {out}")
    return 0


def cmd_verify(args):
    params = _load_instance(args.instance)
    table, policy = solve(params, args.nmax)
    fns = decision_functions(table)
    flags = classify_regime(table.params)
    report = StructureReport(regime=flags.as_dict())
    report.extend(verify_lemmas(fns))
    report.extend(verify_propositions(table, policy, fns))

    if flags.nonidling:
        try:
            curve = extract_switching_curve(policy, fns)
            report.verdicts.append(Verdict("switching_single_crossing", True))
            report.t = list(curve.t)
            report.findings["slope_below_minus1"] = not curve.slope_ok
            report.findings["t_nondecreasing"] = curve.nondecreasing
            if flags.thm1 or flags.thm2_curve or flags.thm3_curve:
                report.verdicts.append(Verdict("slope_ok", bool(curve.slope_ok),
                                               None if curve.slope_ok else
                                               {"witness": curve.slope_witness}))
        except NotThresholdShaped as exc:
            report.verdicts.append(Verdict("switching_single_crossing", False, exc.witness))
        if flags.thm2_priority:
            witness = flex_priority_witness(policy, FLEX1, need_x2=0)
            report.verdicts.append(Verdict("flex_priority_station1", witness is None, witness))
        if flags.thm3_priority:
            witness = flex_priority_witness(policy, FLEX2, need_x2=1)
            report.verdicts.append(Verdict("flex_priority_station2", witness is None, witness))
    else:
        try:
            curve = extract_idling_thresholds(policy, fns)
            report.verdicts.append(Verdict("idling_single_crossing", True))
            report.t1, report.t2 = list(curve.t1), list(curve.t2)
            if args.nmax >= 200:
                width = min(20, args.nmax - 1)
                missing = [x1 for x1 in range(1, width + 1) if curve.t2[x1 - 1] is None]
                report.verdicts.append(Verdict("idling_threshold_exists", not missing,
                                               None if not missing else {"x1": missing[0]}))
            if flags.thm5:
                t1, t2 = curve.t1[0], curve.t2[0]
                ok = t1 is not None and t2 is not None and t1 <= t2
                report.verdicts.append(Verdict("two_thresholds_x1_1", ok,
                                               None if ok else {"t1": t1, "t2": t2}))
            if flags.thm6:
                report.verdicts.append(Verdict("t2_nondecreasing", bool(curve.nondecreasing)))
                witness = flex_priority_witness(policy, FLEX2, need_x2=1)
                report.verdicts.append(Verdict("flex_priority_station2", witness is None, witness))
        except NotThresholdShaped as exc:
            report.verdicts.append(Verdict("idling_single_crossing", False, exc.witness))
        except HypothesisNotMet as exc:
            report.verdicts.append(Verdict("idling_single_crossing", None, detail=str(exc)))

    try:
        report.extend(verify_appendix_recursions(table, fns))
    except (HypothesisNotMet, DomainTooSmall) as exc:
        report.verdicts.append(Verdict("appendix_identities", None, detail=str(exc)))

    payload = {"manifest": _manifest("verify", args), **report.as_dict()}
    _write_json(args.out, payload)
    failed = [v.claim for v in report.verdicts if v.passed is False]
    if failed:
        print(f"FAILED claims: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(args):
    config = ExperimentConfig(regime=args.regime, count=args.count, seed=args.seed,
                              n_max=args.nmax)
    report = run_batch(config, threads=args.threads)
    payload = {"manifest": _manifest("sweep", args), **report.as_dict()}
    _write_json(args.out, payload)
    status = "ok" if report.ok() else f"violations={report.violations} errors={len(report.errors)}"
    print(f"sweep {args.regime}: {report.count} instances, {status}, "
          f"{report.wall_clock:.1f}s", file=sys.stderr)
    return 0 if report.ok() else 1


def cmd_simulate(args):
    params = _load_instance(args.instance)
    x1, x2 = (int(v) for v in args.start.split(","))
    start = State(x1, x2)
    nmax = args.nmax or start.level
    if args.policy:
        policy = _load_policy_map(args.policy)
        exact = None
    else:
        table, policy = solve(params, max(nmax, start.level))
        exact = table.value(x1, x2) if start.level <= table.n_max else None
    config = SimConfig(start=start, replications=args.reps, seed=args.seed,
                       policy_source="file" if args.policy else "optimal")
    result = simulate(params, policy, config)
    payload = {
        "manifest": _manifest("simulate", args),
        "mean": result.mean,
        "se": result.stderr,
        "reps": result.replications,
        "digest": result.digest,
    }
    if exact is not None:
        payload["exact_value"] = exact
        payload["z"] = 0.0 if result.stderr == 0 else (result.mean - exact) / result.stderr
    _write_json(args.out, payload)
    return 0


def cmd_oracle(args):
    params = _load_instance(args.instance)
    if args.method == "enum":
        result = enumerate_policies(params, args.nmax)
    else:
        result = value_iteration(params, args.nmax, tol=args.vi_tol)
    payload = {
        "manifest": _manifest("oracle", args),
        "method": result.method,
        "residual": result.residual,
        "policies_examined": result.policies_examined,
        "iterations": result.iterations,
        "convergence_gap": result.convergence_gap,
    }
    _write_json(args.out, payload)
    if result.residual > args.tol:
        print(f"oracle disagreement: residual {result.residual:.3e} > tol {args.tol:.3e}",
              file=sys.stderr)
        return 1
    return 0


def cmd_paper_examples(args):
    report = reproduce_paper_examples(strict=False)
    payload = {"manifest": _manifest("paper-examples", args), **report.as_dict()}
    _write_json(args.out, payload)
    if not report.ok():
        print(f"golden mismatch: {report.violations}", file=sys.stderr)
        return 1
    print("paper examples reproduced", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tandemflex",
        description="Optimal flexible-server allocation in two-station tandem "
                    "clearing systems: exact solve, structure checks, sweeps, "
                    "simulation, oracles.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, fn, **kwargs):
        sp = sub.add_parser(name, **kwargs)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", default=_env("out", str, None),
                        help="output file (default: stdout for reports)")
        return sp

    def required(sp, flag, **kwargs):
        # every flag can also be preset via TANDEMFLEX_<FLAG>
        preset = _env(flag, str, None)
        sp.add_argument("--" + flag, default=preset, required=preset is None, **kwargs)

    sp = add("solve", cmd_solve, help="exact value table and optimal policy -> CSV")
    required(sp, "instance", help="instance JSON file")
    sp.add_argument("--nmax", type=int, default=_env("nmax", int, 40))
    sp.add_argument("--grid-out", default=_env("grid_out", str, None),
                    help="also dump decision-function grid CSV")

    sp = add("policy", cmd_policy, help="evaluate a stored policy CSV exactly")
    required(sp, "instance")
    required(sp, "policy", help="policy CSV from `solve`")
    sp.add_argument("--nmax", type=int, default=_env("nmax", int, 40))

    sp = add("verify", cmd_verify, help="structural + identity suite on one instance")
    required(sp, "instance")
    sp.add_argument("--nmax", type=int, default=_env("nmax", int, 40))

    sp = add("sweep", cmd_sweep, help="randomized batch study of one regime")
    required(sp, "regime", choices=sorted(REGIMES))
    sp.add_argument("--count", type=int, default=_env("count", int, 1000))
    sp.add_argument("--seed", type=int, default=_env("seed", int, 0))
    sp.add_argument("--nmax", type=int, default=_env("nmax", int, 40))
    sp.add_argument("--threads", type=int, default=_env("threads", int, 1))

    sp = add("simulate", cmd_simulate, help="Monte Carlo clearing cost under a policy")
    required(sp, "instance")
    required(sp, "start", help="initial state, e.g. 5,5")
    sp.add_argument("--reps", type=int, default=_env("reps", int, 100_000))
    sp.add_argument("--seed", type=int, default=_env("seed", int, 0))
    sp.add_argument("--policy", default=_env("policy", str, None),
                    help="policy CSV (default: solve optimally)")
    sp.add_argument("--nmax", type=int, default=_env("nmax", int, None))

    sp = add("oracle", cmd_oracle, help="independent solver cross-check")
    required(sp, "instance")
    sp.add_argument("--nmax", type=int, default=_env("nmax", int, 3))
    sp.add_argument("--method", choices=("enum", "vi"),
                    default=_env("method", str, "enum"))
    sp.add_argument("--tol", type=float, default=_env("tol", float, 1e-6),
                    help="max allowed |oracle - solver| disagreement")
    sp.add_argument("--vi-tol", type=float, default=_env("vi_tol", float, 1e-10),
                    help="value-iteration span stopping tolerance")

    add("paper-examples", cmd_paper_examples,
        help="reproduce the two published counterexamples")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"invalid instance: {exc}", file=sys.stderr)
        return 3
    except TandemError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
