"""photocensus: from sighting annotations to individuals and population estimates."""

__version__ = "0.1.0"

from .census import (
    CaptureSummary,
    NoRecaptureError,
    PopulationEstimate,
    automation_rate,
    capture_summary,
    export_geojson,
    format_rate,
    individual_stats,
    lincoln_petersen,
    strategy_stats,
)
from .ingest import ManifestError, ParseReport, parse_manifest, write_cameras, write_manifest
from .lca import LcaConfig, LcaEngine, RunResult, RunState, run_lca
from .matchers import SimHuman, SimOracleModel, SimRanker, SimVerifier, SimulatedHumanChannel
from .pipeline import Encounter, FilterConfig, FunnelReport, run_funnel
from .simulate import EvalReport, SimConfig, evaluate, generate, planted_population
from .state import StateError, load_state, save_state
from .types import Annotation, Camera, Dataset, Source, Species, Strategy, Viewpoint
