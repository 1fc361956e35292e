"""Movable-antenna ISAC lab: CRB-optimal sensing arrays and robust secrecy beamforming."""

from .errors import (
    AmbiguousEstimateError,
    ConfigError,
    DegenerateLinearizationError,
    InfeasibleRegionError,
    InvalidPairError,
    SingularGeometryError,
)
from .geometry import (
    ArrayLayout,
    PathGain,
    SceneConstants,
    Wavevector,
    comm_channel,
    echo_channel,
    field_response,
    path_gain,
    wavevector_from_angles,
)
from .sensing import (
    CrbPair,
    EchoObservation,
    FisherInfo,
    ProbeMatrix,
    UncertaintyRegion,
    crb_closed_form,
    crb_from_fim,
    fim_numeric,
    mle_estimate,
    probe_dft,
    synthesize_echo,
    uncertainty_region,
)
from .sensing_placement import (
    AoConfig,
    SensingResult,
    eta_bounds,
    optimize_sensing_layout,
    random_feasible_positions,
)
from .beamforming import (
    BeamformerSolution,
    HullSamples,
    robust_beamform,
    sample_uncertainty,
    secrecy_rate,
    worst_case_secrecy,
)
from .comm_placement import (
    CommOptConfig,
    CommOptResult,
    optimize_comm_stage,
    select_worst_estimate,
)
from .benchmarks import (
    antenna_selection,
    legit_gain_positions,
    mrt_beamformer,
    mrt_zf_an_rates,
    rect_layout,
    theoretical_crb_bound,
    upa_layout,
)
from .config import (
    ExperimentConfig,
    convert_units,
    dbm_to_watts,
    dbsm_to_m2,
    load_config,
    parse_config,
)
from .experiments import (
    EXPERIMENT_KINDS,
    SECRECY_SCHEMES,
    RunRecord,
    angle_box_region,
    derive_seed,
    emit_csv,
    read_csv,
    run_experiment,
)

__version__ = "0.1.0"
