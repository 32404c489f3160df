"""Adaptive score distribution, dual thresholds, routing, and the bounded
FIFO memory queue.

The distribution is an exponential moving estimate of the score stream. The
update order is load-bearing: the mean moves first and the variance is
measured against the NEW mean; tests demonstrate the other order diverges.
Thresholds are mean + k * sigma with k1 < k2. Routing is a total three-way
split: score >= g2 keeps a frame Clear (high resolution), g1 <= score < g2
keeps it Blurred (low resolution), anything below g1 is discarded. A query
frame is forced Clear regardless of score.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum


class RetentionState(str, Enum):
    CLEAR = "Clear"
    BLURRED = "Blurred"
    DISCARD = "Discard"


class Resolution(str, Enum):
    HIGH = "High"
    LOW = "Low"
    NONE = "None"


@dataclass(frozen=True)
class DistributionState:
    """Running estimate of the score stream's mean and variance."""

    momentum: float
    mean: float = 0.0
    variance: float = 0.0
    observations: int = 0


def update_distribution(dist: DistributionState, score: float) -> DistributionState:
    """Fold one score into the running estimate.

    mean moves first; the variance term uses the updated mean. The variance
    is clamped at zero (each term is non-negative, but the clamp guards any
    future refactor of the arithmetic).
    """
    if not math.isfinite(score):
        raise ValueError(f"score must be finite, got {score!r}")
    g = dist.momentum
    mean = g * dist.mean + (1.0 - g) * score
    variance = g * dist.variance + (1.0 - g) * (score - mean) ** 2
    return replace(
        dist,
        mean=mean,
        variance=max(0.0, variance),
        observations=dist.observations + 1,
    )


@dataclass(frozen=True)
class Thresholds:
    g1: float
    g2: float


def thresholds_from(dist: DistributionState, k1: float, k2: float) -> Thresholds:
    sigma = math.sqrt(max(0.0, dist.variance))
    return Thresholds(g1=dist.mean + k1 * sigma, g2=dist.mean + k2 * sigma)


@dataclass(frozen=True)
class RetentionDecision:
    state: RetentionState
    resolution: Resolution
    forced: bool


_RESOLUTION_FOR = {
    RetentionState.CLEAR: Resolution.HIGH,
    RetentionState.BLURRED: Resolution.LOW,
    RetentionState.DISCARD: Resolution.NONE,
}


def route(score: float, thresholds: Thresholds, is_query: bool) -> RetentionDecision:
    """Map one score onto a retention state; total over all finite scores."""
    if not math.isfinite(score):
        raise ValueError(f"score must be finite, got {score!r}")
    if is_query:
        state = RetentionState.CLEAR
    elif score >= thresholds.g2:
        state = RetentionState.CLEAR
    elif score >= thresholds.g1:
        state = RetentionState.BLURRED
    else:
        state = RetentionState.DISCARD
    return RetentionDecision(state=state, resolution=_RESOLUTION_FOR[state], forced=is_query)


@dataclass(frozen=True)
class MemoryEntry:
    frame_id: int
    timestamp: float
    state: RetentionState
    resolution: Resolution
    token_cost: float
    score: float


class MemoryQueue:
    """Strictly bounded FIFO of admitted frames.

    Eviction is arrival-ordered and ignores retention state; the eviction
    log is append-only and never replayed.
    """

    def __init__(self, capacity: int):
        if not (isinstance(capacity, int) and capacity >= 1):
            raise ValueError(f"capacity must be an integer >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: deque[MemoryEntry] = deque()
        self.eviction_log: list[int] = []

    def __len__(self) -> int:
        return len(self._entries)

    def admit(self, entry: MemoryEntry) -> list[int]:
        """Append one entry, evicting from the front while over capacity.

        Returns the evicted frame_ids in eviction order (at most one per
        admit given capacity >= 1, but the loop keeps the invariant local).
        """
        self._entries.append(entry)
        evicted: list[int] = []
        while len(self._entries) > self.capacity:
            evicted.append(self._entries.popleft().frame_id)
        self.eviction_log.extend(evicted)
        return evicted

    def frame_ids(self) -> list[int]:
        return [entry.frame_id for entry in self._entries]

    def entries(self) -> list[MemoryEntry]:
        return list(self._entries)
