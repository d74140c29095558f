"""Built-in component library. Importing this package fills :data:`REGISTRY`."""

from ptp.components.base import (
    REGISTRY, Component, Loss, Model, Task, create_component, default_params, register,
)
from ptp.components.tasks import CsvTask, GaussianBlobs, Parity
from ptp.components.models import FeedForward
from ptp.components.transforms import Concat, LabelIndexer, OneHot, Vocabulary
from ptp.components.losses import MSELoss, NLLLoss
from ptp.components.viewers import Accuracy, StreamCsvExporter, StreamViewer

__all__ = [
    "REGISTRY", "Component", "Loss", "Model", "Task", "create_component", "default_params",
    "register", "CsvTask", "GaussianBlobs", "Parity", "FeedForward", "Concat", "LabelIndexer",
    "OneHot", "Vocabulary", "MSELoss", "NLLLoss", "Accuracy", "StreamCsvExporter", "StreamViewer",
]
