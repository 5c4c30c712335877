"""Handover planning and signaling-latency simulation for LEO constellations."""

from .alloc import (
    AllocationVector,
    BisectionParams,
    allocate_bisection,
    allocate_closed_form,
    solve_subproblem,
    subproblem_value,
)
from .baselines import BaselineKind, run_baseline
from .channel import ChannelParams, RateMatrix, compute_rates
from .errors import (
    AllocationConvergenceError,
    InfeasibleError,
    LeohoError,
    OracleCapError,
    ParseError,
    UtilityDomainError,
    ValidationError,
)
from .geometry import VisibilityMap, build_visibility, elevation_deg, propagate
from .planner import (
    AssociationPlan,
    PlanObjective,
    evaluate_plan,
    initial_plan,
    optimize_ue,
    plan,
    segment_utility,
)
from .protosim import (
    HandoverTimeline,
    LatencyParams,
    latency_cdf,
    simulate_handover,
    xn_hops,
)
from .scenario import (
    ConstellationSpec,
    Scenario,
    TimeGrid,
    UePopulation,
    load_scenario,
    save_scenario,
    synthesize_ues,
)
from .utility import UtilitySpec, utility, utility_derivative

__version__ = "0.1.0"
