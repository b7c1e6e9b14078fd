"""Parallel position auctions with ML-advised reserves and ROAS autobidders.

Simulation of VCG/GSP/GFP position auctions with personalized eager
reserves, individual-welfare metrics and closed-form lower bounds, covering
enumeration, feasibility search oracles, and two-phase gradient-descent
bidding dynamics.
"""

from .bounds import (
    BoundReport,
    CoveringSet,
    DomainError,
    EnumerationCapError,
    ImprovedBound,
    bound_report,
    delta_separation,
    enumerate_coverings,
    gsp_gfp_bound,
    improved_bound,
    outcome_coverings,
    required_beta,
    restricted_efficient_welfare,
    valid_multiplier_region,
    vcg_bound,
)
from .core import (
    AuctionResult,
    AuctionSpec,
    InstanceSpec,
    Mechanism,
    ShapeError,
    allocate,
    clear_bids,
    evaluate_bids,
    load_instance,
    pay,
    run_instance,
    save_instance,
)
from .dynamics import (
    DynamicsConfig,
    DynamicsTrace,
    EnsembleResult,
    gd_round,
    run_cdf_ensemble,
    run_two_phase,
    uniform_bids,
)
from .instances import (
    AdviceSpec,
    ImpossibilityParams,
    dynamics_ensemble_instance,
    impossibility_instance,
    is_beta_approximate,
    ml_advice,
    motivating_example,
    random_instance,
    random_separated_instance,
    region_example_instance,
    tightness_instance,
)
from .search import (
    BestResponse,
    GridSizeError,
    GridSpec,
    RegionMap,
    WorstCase,
    brute_force_assignment_oracle,
    brute_force_best_response,
    critical_multipliers,
    map_uniform_region,
    sample_competitor_bids,
    sample_undominated_profiles,
    winner_patterns,
    worst_case_general,
    worst_case_uniform,
)
from .welfare import (
    EfficientOutcome,
    ROAS_TOL,
    WelfareReport,
    build_report,
    efficient_outcome,
    empirical_cdf,
    loss_to_guarantee,
    roas_check,
    welfare_loss,
)

__version__ = "0.1.0"
