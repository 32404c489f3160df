"""Synthetic unit-sphere streams with known direction-change ground truth.

The generator transports a position/tangent pair (p, u) along a great
circle: each step rotates both by the drift angle inside their shared
plane. A transition at index k rotates the tangent by the turn angle
toward a fresh direction orthogonal to both p and u, *before* the step
that produces frame k, so the curvature spike lands exactly at k.

Noise perturbs the step direction: before each step the unit tangent
gets per-coordinate Gaussian noise and is renormalized. Measured
against the unit-length tangent, a small sigma wobbles the path's
heading by roughly sigma radians per step while leaving the step size
alone, so smooth segments stay drift-dominated and planted turns stay
the only large direction changes. (Adding the same noise to emitted
frames instead would compare sigma against the much shorter per-step
chord and drown the turn signal.) Frames are exact path points.

All randomness comes from one seeded generator, consumed in a fixed
order (initial position, initial tangent, then per-transition turn
directions and per-step direction noise as they occur), so a spec
fully determines its stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .stream_io import FrameFeature

# transitions need three scored frames in front of them and enough room
# between spikes for the running statistics to settle
MIN_TRANSITION_INDEX = 3
MIN_TRANSITION_GAP = 4

_REDRAW_EPS = 1e-6


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic stream."""

    dimension: int
    total_frames: int
    transitions: tuple[int, ...] = ()
    drift_step: float = 0.01
    turn_angle: float = math.pi / 2
    noise_sigma: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class LabeledStream:
    frames: list[FrameFeature] = field(repr=False)
    transitions: tuple[int, ...]
    spec: SyntheticSpec | None = None  # None for streams loaded from files


def validate_spec(spec: SyntheticSpec) -> None:
    if not isinstance(spec.dimension, int) or spec.dimension < 2:
        raise ConfigError("dimension must be an integer >= 2")
    if not isinstance(spec.total_frames, int) or spec.total_frames < 1:
        raise ConfigError("total_frames must be a positive integer")
    if not (math.isfinite(spec.drift_step) and spec.drift_step >= 0.0):
        raise ConfigError("drift_step must be finite and non-negative")
    if not math.isfinite(spec.turn_angle):
        raise ConfigError("turn_angle must be finite")
    if not (math.isfinite(spec.noise_sigma) and spec.noise_sigma >= 0.0):
        raise ConfigError("noise_sigma must be finite and non-negative")
    if spec.transitions:
        if spec.dimension < 3:
            raise ConfigError(
                "transitions need dimension >= 3: turning requires a "
                "direction orthogonal to both the position and the tangent"
            )
        previous = None
        for index in spec.transitions:
            if not isinstance(index, int):
                raise ConfigError("transition indices must be integers")
            if index < MIN_TRANSITION_INDEX or index >= spec.total_frames:
                raise ConfigError(
                    f"transition {index} outside "
                    f"[{MIN_TRANSITION_INDEX}, {spec.total_frames})"
                )
            if previous is not None and index - previous < MIN_TRANSITION_GAP:
                raise ConfigError(
                    f"transitions {previous} and {index} closer than "
                    f"{MIN_TRANSITION_GAP} frames"
                )
            previous = index


def _unit(vector: np.ndarray) -> np.ndarray:
    return vector / np.linalg.norm(vector)


def _draw_orthogonal(rng: np.random.Generator, basis: list[np.ndarray]) -> np.ndarray:
    """Unit vector orthogonal to every basis vector, redrawn if degenerate."""
    dim = basis[0].shape[0]
    while True:
        candidate = rng.standard_normal(dim)
        for b in basis:
            candidate -= (candidate @ b) * b
        norm = np.linalg.norm(candidate)
        if norm > _REDRAW_EPS:
            return candidate / norm


def _perturb_direction(
    rng: np.random.Generator,
    tangent: np.ndarray,
    position: np.ndarray,
    sigma: float,
) -> np.ndarray:
    """Tangent plus per-coordinate noise, kept orthogonal to the position."""
    dim = tangent.shape[0]
    while True:
        candidate = tangent + sigma * rng.standard_normal(dim)
        candidate -= (candidate @ position) * position
        norm = np.linalg.norm(candidate)
        if norm > _REDRAW_EPS:
            return candidate / norm


def generate(spec: SyntheticSpec) -> LabeledStream:
    """Produce the labeled stream described by ``spec``."""
    validate_spec(spec)
    rng = np.random.default_rng(spec.seed)
    transition_set = frozenset(spec.transitions)

    position = _unit(rng.standard_normal(spec.dimension))
    tangent = _draw_orthogonal(rng, [position])

    cos_s, sin_s = math.cos(spec.drift_step), math.sin(spec.drift_step)
    cos_a, sin_a = math.cos(spec.turn_angle), math.sin(spec.turn_angle)

    frames: list[FrameFeature] = []
    for index in range(spec.total_frames):
        if index > 0:
            if index in transition_set:
                fresh = _draw_orthogonal(rng, [position, tangent])
                tangent = cos_a * tangent + sin_a * fresh
                tangent = _unit(tangent - (tangent @ position) * position)
            if spec.noise_sigma > 0.0:
                tangent = _perturb_direction(rng, tangent, position, spec.noise_sigma)
            position, tangent = (
                cos_s * position + sin_s * tangent,
                -sin_s * position + cos_s * tangent,
            )
            # re-orthonormalize so rounding cannot random-walk off the sphere
            position = _unit(position)
            tangent = _unit(tangent - (tangent @ position) * position)

        frames.append(
            FrameFeature(frame_id=index, timestamp=float(index), vector=position.copy())
        )

    return LabeledStream(frames=frames, transitions=spec.transitions, spec=spec)


def place_transitions(
    count: int,
    total_frames: int,
    rng: np.random.Generator,
    forbidden: set[int] | frozenset[int] = frozenset(),
) -> tuple[int, ...]:
    """Pick ``count`` valid transition indices uniformly at random.

    Indices respect the warm-up margin and minimum spacing and avoid the
    ``forbidden`` set. Raises ConfigError when no placement exists in a
    bounded number of attempts.
    """
    if count == 0:
        return ()
    candidates = [
        i for i in range(MIN_TRANSITION_INDEX, total_frames) if i not in forbidden
    ]
    for _ in range(200):
        chosen: list[int] = []
        for index in rng.permutation(len(candidates)):
            value = candidates[index]
            if all(abs(value - c) >= MIN_TRANSITION_GAP for c in chosen):
                chosen.append(value)
                if len(chosen) == count:
                    return tuple(sorted(chosen))
    raise ConfigError(
        f"cannot place {count} transitions in {total_frames} frames "
        f"with spacing {MIN_TRANSITION_GAP}"
    )
