"""Event-level simulation of heralded photons, the screen and its detectors."""

from .engine import PHASES, apply_dead_time, generate_heralds, propagate_and_detect, run_experiment, simulate_phase
from .specs import (
    HERALD_CHANNEL,
    HERALD_NAME,
    ChannelOffsets,
    Coherent,
    DetectorSpec,
    Fock1,
    SourceSpec,
    TagStream,
    TimeTag,
)
from .tagio import TagFormatError, read_tags, write_tags

__all__ = [
    "PHASES",
    "HERALD_CHANNEL",
    "HERALD_NAME",
    "ChannelOffsets",
    "Coherent",
    "DetectorSpec",
    "Fock1",
    "SourceSpec",
    "TagFormatError",
    "TagStream",
    "TimeTag",
    "apply_dead_time",
    "generate_heralds",
    "propagate_and_detect",
    "read_tags",
    "run_experiment",
    "simulate_phase",
    "write_tags",
]
