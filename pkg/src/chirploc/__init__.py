"""chirploc: acoustic chirp pseudoranging at tank scale.

Speakers transmit staggered linear chirps; a receiver matched-filters its
single hydrophone recording, converts first-peak sample indices to
pseudoranges, and solves position plus clock bias by iterative weighted
least squares.  Constellation quality is judged by GDOP maps, and a small
chirp codebook carries one-way motion commands.
"""

from .commander import (
    CommandCodebook,
    CommandDecision,
    classify_command,
    default_codebook,
)
from .config import (
    Scenario,
    SolverSettings,
    ToolkitConfig,
    default_config,
    load_config,
    load_scenario,
    save_config,
)
from .detector import (
    SPEED_OF_SOUND,
    CorrelationSeries,
    PeakPolicy,
    PseudorangeSet,
    extract_pseudoranges,
    matched_filter,
    pick_first_peak,
    pseudorange_from_sample,
)
from .errors import (
    ChirplocError,
    ConfigError,
    DataError,
    DetectionError,
    GeometryError,
)
from .signals import (
    ChirpSpec,
    SampledSignal,
    SequenceLayout,
    assemble_sequence,
    generate_chirp,
    read_wav,
    write_wav,
)
from .simulator import (
    ChannelModel,
    ReceiverState,
    WaypointResult,
    run_scenario,
    simulate_reception,
)
from .solver import (
    Box,
    Constellation,
    Cylinder,
    FixEstimate,
    GdopGrid,
    PositionFix,
    classify_gdop,
    gdop,
    gdop_map,
    solve_fix,
)

__version__ = "0.1.0"

__all__ = [
    "Box",
    "ChannelModel",
    "ChirpSpec",
    "ChirplocError",
    "CommandCodebook",
    "CommandDecision",
    "ConfigError",
    "Constellation",
    "CorrelationSeries",
    "Cylinder",
    "DataError",
    "DetectionError",
    "FixEstimate",
    "GdopGrid",
    "GeometryError",
    "PeakPolicy",
    "PositionFix",
    "PseudorangeSet",
    "ReceiverState",
    "SPEED_OF_SOUND",
    "SampledSignal",
    "Scenario",
    "SequenceLayout",
    "SolverSettings",
    "ToolkitConfig",
    "WaypointResult",
    "assemble_sequence",
    "classify_command",
    "classify_gdop",
    "default_codebook",
    "default_config",
    "extract_pseudoranges",
    "gdop",
    "gdop_map",
    "generate_chirp",
    "load_config",
    "load_scenario",
    "matched_filter",
    "pick_first_peak",
    "pseudorange_from_sample",
    "read_wav",
    "run_scenario",
    "save_config",
    "simulate_reception",
    "solve_fix",
    "write_wav",
]
