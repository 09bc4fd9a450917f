"""School choice with hierarchical school bundles.

Students submit short rank-order lists whose entries may be bundles —
groups of schools requested as one option — and a modified deferred
acceptance assigns bundles stably; a second stage then seats bundle admits
at specific schools.  The package also ships stability checkers, exhaustive
size-maximality oracles, and replications of two lab experiments.
"""

from .audit import (
    DEFAULT_ORACLE_BOUND,
    EnvyPairReport,
    OracleBoundExceeded,
    StabilityVerdict,
    audit_rol_dominance,
    check_bundle_stability,
    check_standard_stability,
    find_stable_pareto_improvement,
    oracle_pareto_undominated_size_maximal,
    oracle_size_maximal,
    property_supbundle_monotone,
    property_truthtelling,
)
from .engines import (
    EngineTrace,
    engines_agree_on_simple,
    run_bundle_da,
    run_bundle_da_general,
    run_bundle_da_simple,
    run_standard_da,
)
from .experiments import (
    Exp1Config,
    Exp2Config,
    OutcomeMetrics,
    StrategyProfile,
    compute_metrics,
    equilibrium_profile,
    equilibrium_verify,
    exp1_deviation_value,
    exp1_exact_expectation,
    experiment_matching_for_instance,
    experiment_rols_for_instance,
    feasible_rols,
    play_fixed_round,
    round_instance,
    sample_scores,
    simulate_rounds,
)
from .implementation import (
    ImplementationPolicy,
    enumerate_implementations,
    implement,
    implement_with_preferences,
)
from .io import (
    canonical_document,
    canonicalize,
    content_digest,
    emit_csv,
    trace_csv,
    parse_instance,
    parse_matching,
    parse_profile,
    parse_rols,
    serialize_instance,
)
from .cli import main, run_cli
from .model import (
    UNMATCHED,
    BundleMatching,
    Instance,
    StandardMatching,
    ValidationReport,
    detect_simplicity,
    implements,
    induced_preference,
    validate_instance,
    validate_rols,
)

__all__ = [name for name in dir() if not name.startswith("_")]
