"""Distribution, threshold, routing, and queue tests.

Oracles: the score-distribution recursion re-derived in 60-digit mpmath
arithmetic, and queue behavior replayed against a plain collections.deque.
"""

from __future__ import annotations

from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp, mpf

from curvemem.memory import (
    DistributionState,
    MemoryEntry,
    MemoryQueue,
    Resolution,
    RetentionState,
    Thresholds,
    route,
    thresholds_from,
    update_distribution,
)


def oracle_ema(scores, momentum: float, dps: int = 60):
    """Extended-precision reference for the adaptive distribution: the mean
    moves first and the variance is measured against the NEW mean."""
    with mp.workdps(dps):
        g = mpf(momentum)
        mean, var = mpf(0), mpf(0)
        out = []
        for score in scores:
            s = mpf(score)
            mean = g * mean + (1 - g) * s
            var = g * var + (1 - g) * (s - mean) ** 2
            out.append((float(mean), float(var)))
    return out


def wrong_order_ema(scores, momentum: float):
    """Deliberately faulty variant measuring variance against the OLD mean;
    used to demonstrate the published update order is load-bearing."""
    mean, var = 0.0, 0.0
    out = []
    for score in scores:
        var = momentum * var + (1 - momentum) * (score - mean) ** 2
        mean = momentum * mean + (1 - momentum) * score
        out.append((mean, var))
    return out


# -- distribution -------------------------------------------------------------


def test_initial_state_is_zero():
    dist = DistributionState(momentum=0.9)
    assert dist.mean == 0.0
    assert dist.variance == 0.0
    assert dist.observations == 0


def test_single_update_example():
    dist = DistributionState(momentum=0.9)
    dist = update_distribution(dist, 1.0)
    assert dist.mean == pytest.approx(0.1, abs=1e-15)
    assert dist.variance == pytest.approx(0.081, abs=1e-15)
    assert dist.observations == 1


def test_matches_extended_precision_oracle():
    rng = np.random.default_rng(1234)
    scores = np.abs(rng.standard_normal(1000)) * 0.5
    for momentum in (0.9, 0.99, 0.5):
        dist = DistributionState(momentum=momentum)
        expected = oracle_ema(scores, momentum)
        for score, (mean_ref, var_ref) in zip(scores, expected):
            dist = update_distribution(dist, float(score))
            assert abs(dist.mean - mean_ref) <= 1e-12 * max(1.0, abs(mean_ref))
            assert abs(dist.variance - var_ref) <= 1e-12 * max(1.0, abs(var_ref))


def test_wrong_update_order_diverges():
    # spiky sequence: mostly quiet with bursts; measuring the variance
    # against the stale mean inflates it far beyond rounding noise
    scores = [0.01] * 20 + [10.0] + [0.01] * 20 + [10.0] + [0.01] * 10
    reference = oracle_ema(scores, 0.9)
    wrong = wrong_order_ema(scores, 0.9)
    divergence = max(
        abs(w_var - r_var) / max(1e-12, abs(r_var))
        for (_, w_var), (_, r_var) in zip(wrong, reference)
    )
    assert divergence > 1e-6


def test_update_rejects_non_finite():
    dist = DistributionState(momentum=0.9)
    for bad in (float("nan"), float("inf"), float("-inf")):
        with pytest.raises(ValueError):
            update_distribution(dist, bad)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(min_value=0, max_value=1e12, allow_nan=False), min_size=1, max_size=60),
    st.floats(min_value=0.01, max_value=0.99),
)
def test_variance_never_negative(scores, momentum):
    dist = DistributionState(momentum=momentum)
    for score in scores:
        dist = update_distribution(dist, score)
        assert dist.variance >= 0.0


# -- thresholds ---------------------------------------------------------------


def test_threshold_examples():
    dist = DistributionState(momentum=0.9, mean=0.5, variance=0.01)
    th = thresholds_from(dist, k1=0.0, k2=1.0)
    assert th.g1 == pytest.approx(0.5, abs=1e-15)
    assert th.g2 == pytest.approx(0.6, abs=1e-15)
    wide = thresholds_from(dist, k1=-1.0, k2=3.0)
    assert wide.g1 == pytest.approx(0.4, abs=1e-15)
    assert wide.g2 == pytest.approx(0.8, abs=1e-15)


@settings(max_examples=300, deadline=None)
@given(
    st.floats(min_value=-10, max_value=10, allow_nan=False),
    st.floats(min_value=0, max_value=100, allow_nan=False),
    st.floats(min_value=-5, max_value=5, allow_nan=False),
    st.floats(min_value=1e-9, max_value=5, allow_nan=False),
)
def test_threshold_order_property(mean, variance, k1, gap):
    dist = DistributionState(momentum=0.9, mean=mean, variance=variance)
    th = thresholds_from(dist, k1=k1, k2=k1 + gap)
    assert th.g1 <= th.g2


# -- routing ------------------------------------------------------------------


def test_route_three_way_partition():
    th = Thresholds(g1=0.2, g2=0.6)
    cases = [
        (0.7, RetentionState.CLEAR, Resolution.HIGH),
        (0.6, RetentionState.CLEAR, Resolution.HIGH),  # score == g2 is Clear
        (0.59, RetentionState.BLURRED, Resolution.LOW),
        (0.2, RetentionState.BLURRED, Resolution.LOW),  # score == g1 is Blurred
        (0.19, RetentionState.DISCARD, Resolution.NONE),
        (0.0, RetentionState.DISCARD, Resolution.NONE),
    ]
    for score, state, resolution in cases:
        decision = route(score, th, is_query=False)
        assert decision.state is state
        assert decision.resolution is resolution
        assert decision.forced is False


def test_route_query_forcing():
    th = Thresholds(g1=0.2, g2=0.6)
    rng = np.random.default_rng(8)
    for score in rng.uniform(0, 1, size=100):
        decision = route(float(score), th, is_query=True)
        assert decision.state is RetentionState.CLEAR
        assert decision.resolution is Resolution.HIGH
        assert decision.forced is True


def test_route_degenerate_band():
    # when g1 == g2 the Blurred band is empty and the split is two-way
    th = Thresholds(g1=0.3, g2=0.3)
    assert route(0.3, th, is_query=False).state is RetentionState.CLEAR
    assert route(0.2999, th, is_query=False).state is RetentionState.DISCARD


def test_route_rejects_non_finite_score():
    th = Thresholds(g1=0.0, g2=1.0)
    with pytest.raises(ValueError):
        route(float("nan"), th, is_query=False)


# -- bounded queue ------------------------------------------------------------


def entry(frame_id: int, state: RetentionState = RetentionState.CLEAR) -> MemoryEntry:
    resolution = Resolution.HIGH if state is RetentionState.CLEAR else Resolution.LOW
    cost = 1.0 if state is RetentionState.CLEAR else 0.25
    return MemoryEntry(
        frame_id=frame_id,
        timestamp=float(frame_id),
        state=state,
        resolution=resolution,
        token_cost=cost,
        score=0.5,
    )


def test_queue_evicts_from_front():
    queue = MemoryQueue(capacity=2)
    assert queue.admit(entry(1)) == []
    assert queue.admit(entry(2)) == []
    assert queue.admit(entry(3)) == [1]
    assert queue.frame_ids() == [2, 3]
    assert queue.eviction_log == [1]


def test_queue_capacity_one():
    queue = MemoryQueue(capacity=1)
    for fid in range(5):
        queue.admit(entry(fid))
    assert queue.frame_ids() == [4]
    assert queue.eviction_log == [0, 1, 2, 3]


def test_queue_eviction_ignores_state():
    # FIFO eviction is strictly arrival-ordered: an old Clear frame leaves
    # before a newer Blurred one
    queue = MemoryQueue(capacity=2)
    queue.admit(entry(1, RetentionState.CLEAR))
    queue.admit(entry(2, RetentionState.BLURRED))
    evicted = queue.admit(entry(3, RetentionState.BLURRED))
    assert evicted == [1]
    assert [e.state for e in queue.entries()] == [
        RetentionState.BLURRED,
        RetentionState.BLURRED,
    ]


def test_queue_rejects_bad_capacity():
    with pytest.raises(ValueError):
        MemoryQueue(capacity=0)


@settings(max_examples=200, deadline=None)
@given(
    st.integers(min_value=1, max_value=25),
    st.integers(min_value=0, max_value=200),
)
def test_queue_matches_deque_oracle(capacity, count):
    queue = MemoryQueue(capacity=capacity)
    oracle: deque[int] = deque(maxlen=capacity)
    evicted_all: list[int] = []
    for fid in range(count):
        expected_evicted = [oracle[0]] if len(oracle) == capacity else []
        oracle.append(fid)
        got = queue.admit(entry(fid))
        assert got == expected_evicted
        evicted_all.extend(got)
        assert len(queue) <= capacity
        assert queue.frame_ids() == list(oracle)
    assert queue.eviction_log == evicted_all
    assert sorted(queue.frame_ids() + evicted_all) == list(range(count))
