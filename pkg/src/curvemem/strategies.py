"""Baseline frame-selection strategies behind one selector interface.

Four kinds, all returning at most ``budget`` frame ids in ascending
order:

* ``uniform``       evenly spaced ids, floor(i * n / budget), or a fixed
                    stride when one is configured
* ``motion_topk``   largest first-order motion values, optionally gated
                    by a fixed minimum-motion threshold
* ``curvature_topk`` largest composite scores (motion plus weighted
                    curvature)
* ``engine``        runs the full streaming engine and keeps the final
                    queue's sharp entries first, then the downsampled
                    ones, truncated to the budget

Score ties always resolve toward the smaller frame id so selections are
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import RunConfig, make_config
from .engine import Engine
from .errors import ConfigError
from .memory import RetentionState
from .scoring import TrajectoryScorer
from .stream_io import FrameFeature

SELECTOR_KINDS = ("uniform", "motion_topk", "curvature_topk", "engine")


@dataclass(frozen=True)
class SelectorConfig:
    kind: str
    budget: int
    curvature_weight: float = 0.2
    min_motion: float | None = None
    stride: int | None = None
    engine: RunConfig | None = None


def _validate(config: SelectorConfig, stream: Sequence[FrameFeature]) -> None:
    if config.kind not in SELECTOR_KINDS:
        raise ConfigError(f"unknown selector kind {config.kind!r}")
    if not isinstance(config.budget, int) or config.budget < 1:
        raise ConfigError("budget must be a positive integer")
    if config.stride is not None and (
        not isinstance(config.stride, int) or config.stride < 1
    ):
        raise ConfigError("stride must be a positive integer")
    if len(stream) == 0:
        raise ConfigError("selection needs a non-empty stream")


def _uniform(config: SelectorConfig, stream: Sequence[FrameFeature]) -> list[int]:
    n = len(stream)
    if config.stride is not None:
        indices = range(0, n, config.stride)
    else:
        indices = (i * n // config.budget for i in range(config.budget))
    picked = sorted(set(indices))[: config.budget]
    return [stream[i].frame_id for i in picked]


def _ranked(config: SelectorConfig, stream: Sequence[FrameFeature]) -> list[int]:
    by_motion = config.kind == "motion_topk"
    weight = 0.0 if by_motion else config.curvature_weight
    scorer = TrajectoryScorer(curvature_weight=weight)
    candidates = []
    for frame in stream:
        record = scorer.score_frame(frame)
        if record is None:
            continue
        if by_motion:
            if config.min_motion is not None and record.motion < config.min_motion:
                continue
            candidates.append((-record.motion, record.frame_id))
        else:
            candidates.append((-record.score, record.frame_id))
    candidates.sort()
    return sorted(frame_id for _, frame_id in candidates[: config.budget])


def _engine_queue(config: SelectorConfig, stream: Sequence[FrameFeature]) -> list[int]:
    engine = Engine(config.engine if config.engine is not None else make_config())
    for frame in stream:
        engine.step(frame)
    entries = engine.queue.entries()
    ordered = [e.frame_id for e in entries if e.state is RetentionState.CLEAR]
    ordered += [e.frame_id for e in entries if e.state is RetentionState.BLURRED]
    return sorted(ordered[: config.budget])


def select(config: SelectorConfig, stream: Sequence[FrameFeature]) -> list[int]:
    """Frame ids chosen by ``config`` over ``stream``, ascending."""
    _validate(config, stream)
    if config.kind == "uniform":
        return _uniform(config, stream)
    if config.kind == "engine":
        return _engine_queue(config, stream)
    return _ranked(config, stream)
