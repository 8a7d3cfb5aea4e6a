"""Optimal dynamic allocation of a flexible server in two-station tandem
clearing systems: exact dynamic-programming solver, structural verification
of switching-curve and idling-threshold results, randomized batch studies,
Monte Carlo simulation, and brute-force / fixed-point correctness oracles.
"""

__version__ = "0.1.0"

from .backend import backend_name
from .errors import (
    CollaborationBoundViolated,
    DeadPolicy,
    DependencyMissing,
    DomainTooSmall,
    EmptySystem,
    GoldenMismatch,
    HypothesisNotMet,
    IdlingRegimeRequired,
    InfeasibleAction,
    MaxIterationsExceeded,
    NonPositiveRate,
    NotThresholdShaped,
    OrphanCollaboration,
    RegimeUnsatisfiable,
    SearchSpaceTooLarge,
    TandemError,
    ValidationError,
)
from .experiments import (
    EXAMPLE1,
    EXAMPLE2,
    REGIMES,
    BatchReport,
    ExperimentConfig,
    evaluate_instance_claims,
    generate_instance,
    reproduce_paper_examples,
    run_batch,
)
from .model import (
    Allocation,
    State,
    SystemParams,
    ensure_solver_params,
    feasible_allocations,
    uniformize,
    validate,
)
from .oracle import OracleResult, enumerate_policies, value_iteration
from .simulate import SimConfig, SimResult, simulate
from .solver import (
    Policy,
    ValueTable,
    evaluate_policy,
    q_value,
    read_policy_csv,
    solve,
    tri_index,
    write_policy_csv,
)
from .structure import (
    DecisionFunctions,
    RegimeFlags,
    StructureReport,
    SwitchingCurve,
    Verdict,
    classify_regime,
    decision_functions,
    extract_idling_thresholds,
    extract_switching_curve,
    verify_appendix_recursions,
    verify_lemmas,
    verify_propositions,
    write_decision_grid_csv,
)
