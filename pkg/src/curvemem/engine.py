"""The streaming engine: score, adapt, route, admit, trace.

Each step runs the full pipeline in published order: score the frame,
fold the score into the running distribution, derive thresholds from the
UPDATED distribution, route, then admit non-discarded frames into the
bounded FIFO queue. Every step emits a StepTrace whose JSONL rendering is
the package's stable machine-readable contract (see docs/formats.md).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator

from .config import RunConfig, validate_config
from .errors import SequencingError
from .memory import (
    DistributionState,
    MemoryEntry,
    MemoryQueue,
    RetentionState,
    route,
    thresholds_from,
    update_distribution,
)
from .scoring import TrajectoryScorer
from .stream_io import FrameFeature

_TRACE_FIELDS = (
    "t", "id", "M", "C", "CS", "mu", "sigma", "g1", "g2",
    "state", "forced", "evicted", "queue_len", "tokens_total",
)


@dataclass(frozen=True)
class StepTrace:
    """One engine step. Score and threshold fields are None on warm-up
    frames (no score exists yet); everything else is always populated."""

    t: int
    frame_id: int
    motion: float | None
    curvature: float | None
    score: float | None
    mean: float
    sigma: float
    g1: float | None
    g2: float | None
    state: RetentionState | None
    forced: bool
    evicted: list[int]
    queue_len: int
    tokens_total: float

    def to_json_obj(self) -> dict:
        return {
            "t": self.t,
            "id": self.frame_id,
            "M": self.motion,
            "C": self.curvature,
            "CS": self.score,
            "mu": self.mean,
            "sigma": self.sigma,
            "g1": self.g1,
            "g2": self.g2,
            "state": None if self.state is None else self.state.value,
            "forced": self.forced,
            "evicted": self.evicted,
            "queue_len": self.queue_len,
            "tokens_total": self.tokens_total,
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"), allow_nan=False)


class Engine:
    """Stateful engine over one stream; one instance per stream."""

    def __init__(self, config: RunConfig):
        self.config = validate_config(config)
        self._scorer = TrajectoryScorer(curvature_weight=config.curvature_weight)
        self._dist = DistributionState(momentum=config.momentum)
        self.queue = MemoryQueue(capacity=config.capacity)
        self._t = 0
        self._tokens = 0.0
        self._last_id: int | None = None
        self._query_ids = frozenset(config.query_frames)
        self.clear_count = 0
        self.blurred_count = 0
        self.discard_count = 0
        self.warmup_count = 0

    @property
    def distribution(self) -> DistributionState:
        return self._dist

    @property
    def tokens_total(self) -> float:
        return self._tokens

    def step(self, frame: FrameFeature, is_query: bool = False) -> StepTrace:
        if self._last_id is not None and frame.frame_id <= self._last_id:
            raise SequencingError(
                f"frame ids must be strictly increasing, got {frame.frame_id} "
                f"after {self._last_id}"
            )
        self._t += 1
        self._last_id = frame.frame_id
        forced = bool(is_query) or frame.frame_id in self._query_ids

        record = self._scorer.score_frame(frame)
        if record is None:
            # warm-up: nothing to score, route, or admit, query flag or not
            self.warmup_count += 1
            return StepTrace(
                t=self._t,
                frame_id=frame.frame_id,
                motion=None,
                curvature=None,
                score=None,
                mean=self._dist.mean,
                sigma=math.sqrt(self._dist.variance),
                g1=None,
                g2=None,
                state=None,
                forced=False,
                evicted=[],
                queue_len=len(self.queue),
                tokens_total=self._tokens,
            )

        self._dist = update_distribution(self._dist, record.score)
        thresholds = thresholds_from(self._dist, self.config.k1, self.config.k2)
        decision = route(record.score, thresholds, forced)

        evicted: list[int] = []
        if decision.state is RetentionState.DISCARD:
            self.discard_count += 1
        else:
            if decision.state is RetentionState.CLEAR:
                cost = self.config.cost_high
                self.clear_count += 1
            else:
                cost = self.config.effective_cost_low()
                self.blurred_count += 1
            entry = MemoryEntry(
                frame_id=frame.frame_id,
                timestamp=frame.timestamp,
                state=decision.state,
                resolution=decision.resolution,
                token_cost=cost,
                score=record.score,
            )
            evicted = self.queue.admit(entry)
            self._tokens += cost

        return StepTrace(
            t=self._t,
            frame_id=frame.frame_id,
            motion=record.motion,
            curvature=record.curvature,
            score=record.score,
            mean=self._dist.mean,
            sigma=math.sqrt(self._dist.variance),
            g1=thresholds.g1,
            g2=thresholds.g2,
            state=decision.state,
            forced=decision.forced,
            evicted=evicted,
            queue_len=len(self.queue),
            tokens_total=self._tokens,
        )

    def run(
        self,
        stream: Iterable[FrameFeature | tuple[FrameFeature, bool]],
    ) -> Iterator[StepTrace]:
        """Step through a stream of frames or (frame, is_query) pairs."""
        for item in stream:
            if isinstance(item, tuple):
                frame, is_query = item
            else:
                frame, is_query = item, False
            yield self.step(frame, is_query=is_query)

    def summary(self) -> str:
        return (
            f"frames={self._t} warmup={self.warmup_count} clear={self.clear_count} "
            f"blurred={self.blurred_count} discarded={self.discard_count} "
            f"evicted={len(self.queue.eviction_log)} queue={len(self.queue)} "
            f"tokens={self._tokens}"
        )
