"""collapsesim: stochastic simulator of a functional model of quantum
measurement, where particle/waves are amplitude-weighted path collections and
measurement interactions select paths, exchange information through
probabilistic projections, entangle exit pairs, and collapse entry tables.
"""

__version__ = "0.1.0"

from .constants import Constants, DEFAULT_CONSTANTS, Force, ParticleType
from .engine import (
    BhabhaProjection,
    Decision,
    ExitGrid,
    InteractionConfig,
    InteractionResult,
    MappingProjection,
    PwFluctuation,
    probabilistic_projection,
    run_interaction,
    sample_fluctuation_position,
    select_partner,
)
from .errors import (
    AllAmplitudesZero,
    BelowThreshold,
    CollapseSimError,
    DetectorMiss,
    EmptySupport,
    ForceMismatch,
    InsufficientCounts,
    MemberAlreadyEntangled,
    NoOpenExitStates,
    OffShell,
    ParseError,
    PropagatorPole,
    ShapeMismatch,
    StaleCollection,
    UnknownComponentKind,
    UnknownScenario,
    ValidationError,
)
from .harness import (
    ChiSquareResult,
    OutcomeHistogram,
    PeakReport,
    asymmetry_sweep,
    chi_square_test,
    correlation,
    peak_metric,
    run_trials,
)
from .pathspace import (
    ComponentKind,
    EntanglementRegistry,
    ParticleWave,
    PathState,
    PwCollection,
    StateComponent,
    audit_registry,
    born_probabilities,
    collapse,
    join_entangled,
    marginal_probabilities,
    particle,
    path_state,
    sample_rows,
    select_path,
)
from .pipeline import (
    Apparatus,
    ApparatusStage,
    AxisBinDetector,
    EprSetup,
    FieldObject,
    MajorityDetector,
    MeasurementRecord,
    ScreenObject,
    epr_scenario,
    repeated_projection_apparatus,
    run_measurement,
    spin_half_input,
    stern_gerlach_scenario,
)
from .qft import (
    CHANNELS,
    DIRAC_BASIS,
    GAMMA,
    FourMomentum,
    GammaBasis,
    SpinLabel,
    bhabha_amplitude,
    channel_weights,
    dirac_adjoint,
    four_momentum,
    mandelstam,
    spinor_u,
    spinor_v,
)
from .rng import TraceRng, trial_seed
from .scenario import ScenarioFile, parse_scenario, render_scenario
