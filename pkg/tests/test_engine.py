"""Engine step-loop tests.

The main oracle is an offline transliteration of the published pipeline
(score, update distribution, thresholds, route, admit) written directly in
the test; engine traces must match it field-for-field, bit-for-bit.
"""

from __future__ import annotations

import json
import math
from collections import deque

import numpy as np
import pytest

from conftest import make_frames, random_unit, unit

from curvemem.config import make_config
from curvemem.engine import Engine
from curvemem.errors import SequencingError
from curvemem.memory import RetentionState


def offline_trace_lines(frames, query_ids, cfg):
    """Straight-line recomputation of the whole pipeline in plain Python."""
    window: list[np.ndarray] = []
    mean, variance = 0.0, 0.0
    queue: deque[int] = deque()
    tokens = 0.0
    lines = []
    cost_low = cfg.effective_cost_low()
    for t, frame in enumerate(frames, start=1):
        vec = np.asarray(frame.vector, dtype=np.float64)
        window.append(vec)
        window = window[-3:]
        line = {"t": t, "id": frame.frame_id}
        if len(window) == 1:
            line.update(
                M=None, C=None, CS=None, mu=mean, sigma=math.sqrt(variance),
                g1=None, g2=None, state=None, forced=False, evicted=[],
                queue_len=len(queue), tokens_total=tokens,
            )
            lines.append(line)
            continue

        def gap(a, b):
            if np.array_equal(a, b):
                return 0.0
            cos = float(np.dot(a, b)) / (
                math.sqrt(float(np.dot(a, a))) * math.sqrt(float(np.dot(b, b)))
            )
            return 1.0 - min(1.0, max(-1.0, cos))

        motion = gap(window[-2], window[-1])
        if len(window) == 2:
            curvature = 0.0
        else:
            d1 = window[-2] - window[-3]
            d2 = window[-1] - window[-2]
            if (
                math.sqrt(float(np.dot(d1, d1))) < 1e-8
                or math.sqrt(float(np.dot(d2, d2))) < 1e-8
            ):
                curvature = 0.0
            else:
                curvature = gap(d1, d2)
        score = motion + cfg.curvature_weight * curvature

        g = cfg.momentum
        mean = g * mean + (1.0 - g) * score
        variance = max(0.0, g * variance + (1.0 - g) * (score - mean) ** 2)
        sigma = math.sqrt(variance)
        g1 = mean + cfg.k1 * sigma
        g2 = mean + cfg.k2 * sigma

        is_query = frame.frame_id in query_ids
        if is_query or score >= g2:
            state, cost = "Clear", cfg.cost_high
        elif score >= g1:
            state, cost = "Blurred", cost_low
        else:
            state, cost = "Discard", 0.0

        evicted = []
        if state != "Discard":
            queue.append(frame.frame_id)
            while len(queue) > cfg.capacity:
                evicted.append(queue.popleft())
            tokens += cost

        line.update(
            M=motion, C=curvature, CS=score, mu=mean, sigma=sigma, g1=g1, g2=g2,
            state=state, forced=is_query, evicted=evicted,
            queue_len=len(queue), tokens_total=tokens,
        )
        lines.append(line)
    return [json.dumps(line, separators=(",", ":"), allow_nan=False) for line in lines]


def run_engine_lines(frames, query_ids, cfg):
    engine = Engine(cfg)
    return [
        engine.step(frame, is_query=frame.frame_id in query_ids).to_json_line()
        for frame in frames
    ]


def test_offline_recomputation_bit_exact():
    rng = np.random.default_rng(2024)
    frames = make_frames([random_unit(rng, 8) for _ in range(200)])
    cfg = make_config(capacity=5, query_frames=(50, 120))
    queries = {50, 120}
    assert run_engine_lines(frames, queries, cfg) == offline_trace_lines(frames, queries, cfg)


def test_offline_recomputation_other_config():
    rng = np.random.default_rng(77)
    frames = make_frames([random_unit(rng, 4) for _ in range(150)])
    cfg = make_config(**{"lambda": 0.8, "gamma": 0.97, "k1": -0.5, "k2": 0.5, "capacity": 3})
    assert run_engine_lines(frames, set(), cfg) == offline_trace_lines(frames, set(), cfg)


def test_identical_frames_all_clear():
    v = unit([0.3, -0.2, 0.9])
    frames = make_frames([v.copy() for _ in range(10)])
    engine = Engine(make_config())
    traces = [engine.step(f) for f in frames]
    assert traces[0].state is None
    for trace in traces[1:]:
        assert trace.score == 0.0
        assert trace.mean == 0.0
        assert trace.sigma == 0.0
        assert trace.g2 == 0.0
        assert trace.state is RetentionState.CLEAR  # 0 >= 0 boundary
    assert traces[-1].queue_len == 9
    assert traces[-1].tokens_total == 9.0


def test_trace_json_shape():
    frames = make_frames([unit([1, 0]), unit([0, 1]), unit([1, 1])])
    engine = Engine(make_config())
    lines = [engine.step(f).to_json_line() for f in frames]
    warm = json.loads(lines[0])
    assert list(warm.keys()) == [
        "t", "id", "M", "C", "CS", "mu", "sigma", "g1", "g2",
        "state", "forced", "evicted", "queue_len", "tokens_total",
    ]
    assert warm["M"] is None and warm["C"] is None and warm["CS"] is None
    assert warm["g1"] is None and warm["g2"] is None and warm["state"] is None
    assert warm["mu"] == 0.0 and warm["sigma"] == 0.0
    assert warm["forced"] is False and warm["evicted"] == []
    assert warm["queue_len"] == 0 and warm["tokens_total"] == 0.0
    scored = json.loads(lines[1])
    assert scored["state"] in ("Clear", "Blurred", "Discard")
    assert isinstance(scored["CS"], float)


def test_first_scored_frame_is_clear_at_defaults():
    rng = np.random.default_rng(3)
    for _ in range(20):
        frames = make_frames([random_unit(rng, 6) for _ in range(2)])
        engine = Engine(make_config())
        engine.step(frames[0])
        trace = engine.step(frames[1])
        assert trace.state is RetentionState.CLEAR


def test_query_forcing_overrides_low_score():
    # identical tail frames score 0; a mid-tail query must still go Clear
    v1, v2 = unit([1, 0, 0]), unit([1, 1, 0])
    tail = unit([0, 1, 1])
    frames = make_frames([v1, v2, tail, tail.copy(), tail.copy(), tail.copy()])
    cfg = make_config(**{"k1": 0.5, "k2": 1.5})  # raise g1 so zeros discard
    engine = Engine(cfg)
    traces = [engine.step(f, is_query=(f.frame_id == 5)) for f in frames]
    assert traces[4].state is RetentionState.DISCARD
    assert traces[5].state is RetentionState.CLEAR
    assert traces[5].forced is True
    assert traces[5].score == traces[4].score  # forcing does not touch the score


def test_query_on_warmup_frame_routes_nothing():
    frames = make_frames([unit([1, 0]), unit([0, 1])])
    engine = Engine(make_config())
    trace = engine.step(frames[0], is_query=True)
    assert trace.state is None
    assert trace.forced is False
    assert trace.queue_len == 0
    # the next frame scores and routes normally
    assert engine.step(frames[1]).state is RetentionState.CLEAR


def test_engine_honors_config_query_frames():
    rng = np.random.default_rng(15)
    frames = make_frames([random_unit(rng, 5) for _ in range(6)])
    cfg = make_config(query_frames=(4,))
    engine = Engine(cfg)
    traces = [engine.step(f) for f in frames]
    assert traces[4].forced is True
    assert traces[4].state is RetentionState.CLEAR


def test_sequencing_and_dimension_errors():
    frames = make_frames([unit([1, 0]), unit([0, 1])])
    engine = Engine(make_config())
    engine.step(frames[1])
    with pytest.raises(SequencingError):
        engine.step(frames[0])
    other = Engine(make_config())
    other.step(frames[0])
    with pytest.raises(ValueError):
        other.step(make_frames([unit([1, 0, 0])], start_id=9)[0])


def test_token_accounting():
    rng = np.random.default_rng(44)
    frames = make_frames([random_unit(rng, 6) for _ in range(80)])

    for cfg, expected_low in [
        (make_config(), 0.25),
        (make_config(high_res_side=448), 0.25),
        (make_config(high_res_side=320), (224 / 320) ** 2),
        (make_config(high_res_side=224), 1.0),
        (make_config(cost_low=0.5, high_res_side=320), 0.5),  # explicit wins
    ]:
        engine = Engine(cfg)
        traces = [engine.step(f) for f in frames]
        clear = sum(1 for t in traces if t.state is RetentionState.CLEAR)
        blurred = sum(1 for t in traces if t.state is RetentionState.BLURRED)
        total = traces[-1].tokens_total
        assert total == pytest.approx(clear * 1.0 + blurred * expected_low, abs=1e-12)
        # cumulative cost never decreases, even across evictions
        values = [t.tokens_total for t in traces]
        assert values == sorted(values)


def test_eviction_is_fifo_by_arrival():
    rng = np.random.default_rng(90)
    frames = make_frames([random_unit(rng, 4) for _ in range(40)])
    cfg = make_config(capacity=3)
    engine = Engine(cfg)
    admitted, evictions = [], []
    for frame in frames:
        trace = engine.step(frame)
        if trace.state in (RetentionState.CLEAR, RetentionState.BLURRED):
            admitted.append(frame.frame_id)
        evictions.extend(trace.evicted)
    assert evictions == admitted[: len(evictions)]
    assert engine.queue.frame_ids() == admitted[len(evictions):]


def test_trace_byte_determinism():
    rng = np.random.default_rng(321)
    frames = make_frames([random_unit(rng, 16) for _ in range(100)])
    cfg = make_config()
    lines_a = run_engine_lines(frames, {30}, cfg)
    lines_b = run_engine_lines(frames, {30}, cfg)
    assert lines_a == lines_b
