"""Interactive Bayesian optimization over the hierarchical model/feature space."""

from .analysis import (  # noqa: F401
    AnalysisError,
    TrialSummary,
    best_so_far,
    hyperparameter_importance,
    summarize_trials,
)
from .engine import (  # noqa: F401
    OptimizerError,
    OptimizerRun,
    TrialRecord,
    ledger_from_jsonl,
    ledger_to_jsonl,
    run_optimization,
    trial_seed,
)
from .guidance import (  # noqa: F401
    GuidanceContext,
    GuidanceDirective,
    GuidanceError,
    apply_guidance,
)
from .space import (  # noqa: F401
    Configuration,
    Dimension,
    SearchSpace,
    SpaceError,
    default_search_space,
    random_sample,
)
from .tpe import (  # noqa: F401
    SurrogateState,
    fit_surrogate,
    propose_batch,
    propose_configuration,
)
