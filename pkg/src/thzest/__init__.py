"""Wideband THz MIMO channel simulation and beam-split-aware estimation."""

from .arrays import (
    ArrayConfig,
    Dictionary,
    Direction,
    SubcarrierGrid,
    array_gain,
    beam_split_far,
    beam_split_near,
    build_dictionary,
    fraunhofer_distance,
    spatial_direction,
    steering_far,
    steering_near,
    ula_fraunhofer_distance,
)
from .channel import (
    ChannelRealization,
    PathParams,
    PilotObservation,
    gen_channel,
    gen_pilot_matrix,
    observe,
)
from .sbce import SbceConfig, SbceResult, run_sbce
from .harness import ExperimentConfig, nmse, rmse_deg, run_sweep

__all__ = [
    "ArrayConfig", "Dictionary", "Direction", "SubcarrierGrid",
    "array_gain", "beam_split_far", "beam_split_near", "build_dictionary",
    "fraunhofer_distance", "spatial_direction", "steering_far",
    "steering_near", "ula_fraunhofer_distance",
    "ChannelRealization", "PathParams", "PilotObservation",
    "gen_channel", "gen_pilot_matrix", "observe",
    "SbceConfig", "SbceResult", "run_sbce",
    "ExperimentConfig", "nmse", "rmse_deg", "run_sweep",
]
