"""Streaming feature-trajectory scoring with curvature-gated bounded memory.

The package scores each incoming feature vector by how sharply the feature
trajectory bends, adapts dual retention thresholds online from the score
distribution, routes frames into Clear/Blurred/Discard tiers, and keeps a
strictly bounded FIFO memory of admitted frames. A simulator, strategy
baselines, an evaluator, and a CLI make the selection behavior testable end
to end at desk scale.
"""

__version__ = "0.1.0"

from .config import RunConfig, make_config
from .engine import Engine, StepTrace
from .stream_io import FrameFeature, read_stream, write_stream

__all__ = [
    "__version__",
    "RunConfig",
    "make_config",
    "Engine",
    "StepTrace",
    "FrameFeature",
    "read_stream",
    "write_stream",
]
