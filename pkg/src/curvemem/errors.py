"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data and
I/O problems exit 1, replay divergence exits 3.
"""

from __future__ import annotations


class StreamError(Exception):
    """Base class for stream ingestion failures."""


class StreamFormatError(StreamError):
    """Header or container is not a recognizable feature stream."""


class StreamCorruptionError(StreamError):
    """Stream started out valid but violated the format mid-file."""


class RejectedFrameError(StreamError):
    """A frame failed ingestion validation (for example a zero vector)."""

    def __init__(self, frame_id: int, reason: str):
        super().__init__(f"frame {frame_id} rejected: {reason}")
        self.frame_id = frame_id
        self.reason = reason


class ConfigError(ValueError):
    """Invalid run configuration; names the offending field."""


class SequencingError(ValueError):
    """Frames were pushed to the engine out of order."""
