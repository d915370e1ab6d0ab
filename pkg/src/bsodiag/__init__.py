"""Batch-servers-outage diagnosis toolkit.

Detects outage-related failure events from multi-source monitoring data,
mines failure correlations from history into a knowledge graph, and ranks
root-cause candidates plus an inferred propagation path on a weighted
event cause graph. Ships with a synthetic cloud-infrastructure scenario
generator and an evaluation harness.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, SpotConfig, WalkConfig, load_config
from .model import (
    Alert,
    Change,
    Event,
    Failure,
    FailureTypeCatalog,
    Incident,
    OutageSnapshot,
    WindowParams,
    load_catalog,
    load_snapshot,
    save_snapshot,
)

__all__ = [
    "Alert",
    "Change",
    "Event",
    "Failure",
    "FailureTypeCatalog",
    "Incident",
    "OutageSnapshot",
    "PipelineConfig",
    "SpotConfig",
    "WalkConfig",
    "WindowParams",
    "load_catalog",
    "load_config",
    "load_snapshot",
    "save_snapshot",
    "__version__",
]
