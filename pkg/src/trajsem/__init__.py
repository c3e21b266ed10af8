"""Infer occupation, activity sequence and a narrative from daily stay trajectories with an LLM."""

from .chain import TrajectoryChain, build_chain, render_mobility_info
from .errors import (
    BackendUnavailable,
    ConfigError,
    DataError,
    EmptyDay,
    EmptyGroup,
    EmptyRegion,
    FixtureMissing,
    ParseFailure,
)
from .gateway import BackendConfig, LlmGateway, LlmRequest, LlmResponse
from .geo import (
    CategoryTaxonomy,
    FunctionGroup,
    RegionRegistry,
    assign_pois_to_regions,
    load_pois,
    load_regions,
    load_taxonomy,
    region_distance,
)
from .pipeline import PipelineConfig, cmd_format, cmd_infer, cmd_profile, cmd_run, cmd_validate
from .profile import compute_document_frequency, compute_tfidf, group_weights
from .prompt import PromptConfig, load_template, render_prompt
from .results import parse_result, validate_result
from .sampling import SamplerConfig, sample_region, softmax_group
from .trajectory import SlottedTrajectory, StayRecord, slot_trajectory, validate_trajectory

__version__ = "0.1.0"
