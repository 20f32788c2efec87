"""Calibrated 60 GHz picocell link simulator with blockage-aware handoffs."""

from picocell60.detector import (
    BlockageDetector,
    BlockageFeatures,
    Centroid,
    ClassificationResult,
    DetectorConfig,
    DetectorEvent,
    classify,
    euclidean_distance,
)
from picocell60.distributions import EpisodeDistributions, default_distributions
from picocell60.handoff import HandoffConfig, HandoffController, HandoffRecord, total_switch_time
from picocell60.link_model import (
    BlockageEpisode,
    LinkConfig,
    Trace,
    azimuth_gain,
    baseline_quality,
    render_trace,
    sample_episode,
    throughput_of,
)

__version__ = "0.1.0"

__all__ = [
    "BlockageDetector",
    "BlockageEpisode",
    "BlockageFeatures",
    "Centroid",
    "ClassificationResult",
    "DetectorConfig",
    "DetectorEvent",
    "EpisodeDistributions",
    "HandoffConfig",
    "HandoffController",
    "HandoffRecord",
    "LinkConfig",
    "Trace",
    "azimuth_gain",
    "baseline_quality",
    "classify",
    "default_distributions",
    "euclidean_distance",
    "render_trace",
    "sample_episode",
    "throughput_of",
    "total_switch_time",
]
