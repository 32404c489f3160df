"""Per-frame trajectory scoring.

Two ingredients feed one composite score: the cosine gap between consecutive
feature vectors (first-order motion) and the cosine gap between consecutive
displacement directions (second-order bend). Straight-line motion at any
speed bends nothing, so redundancy scores low even when frames differ; a
direction change spikes the bend term regardless of step size.

All arithmetic is double precision. Cosines are clamped into [-1, 1] before
forming 1 - cos, and identical inputs short-circuit to exactly 0.0 so the
"no change" cases are exact rather than within rounding.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Final

import numpy as np

from .stream_io import FrameFeature

# displacements shorter than this give no usable direction; the bend term
# degrades to 0 with a degenerate marker instead of amplifying noise
EPS_DISP: Final = 1e-8


@dataclass(frozen=True)
class ScoreRecord:
    """Score breakdown for one frame."""

    frame_id: int
    motion: float
    curvature: float
    score: float
    degenerate: bool


def _cosine_gap(a: np.ndarray, b: np.ndarray) -> float:
    if np.array_equal(a, b):
        return 0.0
    cos = float(np.dot(a, b)) / (
        math.sqrt(float(np.dot(a, a))) * math.sqrt(float(np.dot(b, b)))
    )
    cos = min(1.0, max(-1.0, cos))
    return 1.0 - cos


def motion_variation(prev: np.ndarray, curr: np.ndarray) -> float:
    """Cosine gap between consecutive feature vectors, in [0, 2]."""
    prev = np.asarray(prev, dtype=np.float64)
    curr = np.asarray(curr, dtype=np.float64)
    if prev.shape != curr.shape:
        raise ValueError(f"dimension mismatch: {prev.shape} vs {curr.shape}")
    return _cosine_gap(prev, curr)


def geometric_curvature(d1: np.ndarray, d2: np.ndarray) -> tuple[float, bool]:
    """Cosine gap between consecutive displacement directions.

    Returns (value, degenerate). A displacement below EPS_DISP has no
    direction: the value degrades to 0.0 and degenerate is True. Equal
    displacements (constant velocity) return exactly 0.0.
    """
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    if d1.shape != d2.shape:
        raise ValueError(f"dimension mismatch: {d1.shape} vs {d2.shape}")
    n1 = math.sqrt(float(np.dot(d1, d1)))
    n2 = math.sqrt(float(np.dot(d2, d2)))
    if n1 < EPS_DISP or n2 < EPS_DISP:
        return 0.0, True
    return _cosine_gap(d1, d2), False


class TrajectoryScorer:
    """Stateful scorer over a sliding window of the last three frames.

    Warm-up: the first frame yields no score; the second yields a
    motion-only score with curvature 0 marked degenerate; from the third
    frame on both terms are live.
    """

    def __init__(self, curvature_weight: float):
        if not (curvature_weight >= 0 and math.isfinite(curvature_weight)):
            raise ValueError(f"curvature_weight must be finite and >= 0, got {curvature_weight}")
        self.curvature_weight = float(curvature_weight)
        self._window: deque[np.ndarray] = deque(maxlen=3)

    def reset(self) -> None:
        self._window.clear()

    def score_frame(self, frame: FrameFeature) -> ScoreRecord | None:
        vector = np.asarray(frame.vector, dtype=np.float64)
        if vector.ndim != 1:
            raise ValueError(f"frame {frame.frame_id}: vector must be 1-D")
        if self._window and vector.shape != self._window[-1].shape:
            raise ValueError(
                f"frame {frame.frame_id}: dimension {vector.shape[0]} differs from "
                f"{self._window[-1].shape[0]}"
            )
        self._window.append(vector)
        if len(self._window) == 1:
            return None

        motion = _cosine_gap(self._window[-2], self._window[-1])
        if len(self._window) == 2:
            curvature, degenerate = 0.0, True
        else:
            d1 = self._window[-2] - self._window[-3]
            d2 = self._window[-1] - self._window[-2]
            curvature, degenerate = geometric_curvature(d1, d2)
        score = motion + self.curvature_weight * curvature
        return ScoreRecord(
            frame_id=frame.frame_id,
            motion=motion,
            curvature=curvature,
            score=score,
            degenerate=degenerate,
        )
