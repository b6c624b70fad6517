"""Energy-flow simulation and action-ranking optimizers for PV prosumer neighbourhoods."""

from .dispatch import FlowLedger, StepFlows, simulate, step
from .errors import (
    CapExceededError,
    DegenerateInputError,
    InvalidArgumentError,
    InvariantViolation,
    ProfileFormatError,
    ProsumerError,
)
from .model import (
    Action,
    NeighbourhoodState,
    ScenarioSpec,
    SCENARIO_IDS,
    effective_prefix,
    scenario_preset,
    validate_ranking,
)
from .objective import ObjectiveBreakdown, ObjectiveWeights, compare, evaluate
from .optim import (
    RankingEvaluator,
    SaConfig,
    SearchResult,
    exhaustive_search,
    gradient_descent,
    metropolis_accept,
    positions_to_ranking,
    simulated_annealing,
)
from .profiles import (
    EnergyProfile,
    ProfileSet,
    default_profiles,
    export_csv,
    generate_loads,
    generate_pv,
    import_csv,
    normalize,
)

__version__ = "0.1.0"
