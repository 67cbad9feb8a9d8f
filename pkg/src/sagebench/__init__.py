"""Synthetic channel-sounding testbed.

Synthesizes chamber-style multipath snapshots on a cylindrical array,
extracts path parameters with a SAGE estimator, and sweeps estimation error
against antenna-subset size and scenario.
"""

from .array_geometry import (
    ArrayGeometry,
    ColumnScheme,
    ElementGeometry,
    ExplicitScheme,
    PatternSpec,
    RowScheme,
    SubarraySelection,
    build_cylindrical_array,
    default_cylindrical_array,
    element_gain,
    enumerate_rotations,
    full_selection,
    select_subarray,
    steering_vector,
)
from .channel import (
    ChannelData,
    FrequencyGrid,
    PathLabel,
    PathParams,
    Reflector,
    ScenarioSpec,
    apply_los_dominance,
    default_grid,
    ground_truth_from_scenario,
    load_bundled_scenario,
    load_channel,
    load_scenario,
    restrict_channel,
    save_channel,
    save_scenario,
    synthesize_channel,
)
from .evaluation import (
    CellStats,
    ExperimentReport,
    MatchReport,
    export_report,
    import_report,
    match_paths,
    rerun_from_report,
    run_cell,
    run_experiment,
)
from .sage import (
    EstimationResult,
    SageConfig,
    expectation_step,
    initialize_paths,
    maximize_coordinate,
    objective,
    run_sage,
)

__version__ = "0.1.0"
