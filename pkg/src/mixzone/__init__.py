"""Mix-zone location privacy with virtual pseudonym changes."""

from .adversary import (
    AdversarySettings,
    Assignment,
    PrivacyReport,
    ScoreMatrix,
    anonymity_metrics,
    attack,
    build_scores,
    count_feasible_mappings,
    entropy_bits,
    link_greedy,
    link_ml,
    prune,
    score_pair,
)
from .errors import (
    DegenerateRowWarning,
    DimensionMismatch,
    InvalidConfig,
    InvalidScenario,
    InvalidThreshold,
    InvalidWindow,
    MixZoneError,
    NegativeEntry,
    NonStochasticRow,
    NotSquare,
    ParseError,
    TooLarge,
    ValidationError,
    WrongLane,
)
from .scenario import (
    EXAMPLE_STATE,
    EXAMPLE_TRANSITION,
    Scenario,
    load_scenario,
    low_traffic_scenario,
    make_zone,
    sweep,
    example_scenario,
    uniform_transition,
    write_scenario,
)
from .traffic import (
    ArrivalModel,
    Kind,
    Observation,
    PairingPolicy,
    Trace,
    extract_state,
    read_trace,
    sample_exit_gate,
    simulate,
    write_trace,
)
from .wmap import ActivationPlan, WMap, compute_wmap, log_raw_weight, plan_activation, raw_weight
from .zone import (
    Lane,
    StateMatrix,
    TransitionMatrix,
    TravelTime,
    TravelTimeModel,
    ZoneConfig,
    validate_transition_matrix,
    validate_zone_config,
)

__version__ = "0.1.0"
