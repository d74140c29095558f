"""Configuration-driven pipelines of loosely coupled components.

Experiments are described in YAML as a task feeding batches into a
priority-ordered set of components that communicate through named
streams. Generic workers train, validate and evaluate such pipelines.
"""

from ptp.config import GlobalParams, load_config, merge
from ptp.pipeline import Pipeline, build_pipeline
from ptp.streams import ANY, BATCH, Batch, StreamDefinition, definition_satisfies

__version__ = "0.1.0"

__all__ = [
    "ANY", "BATCH", "Batch", "GlobalParams", "Pipeline", "StreamDefinition", "build_pipeline",
    "definition_satisfies", "load_config", "merge",
]
