"""Run selectors and full engines over labeled streams and report metrics.

A sweep is a cross product over parameter axes, but each selector kind
only varies along the axes it actually reads: uniform and motion_topk
vary by budget alone, curvature_topk adds the curvature weight, and the
engine kind adds the distribution and queue parameters. This keeps the
row count predictable (a five-value weight sweep is exactly five rows)
and avoids duplicate rows that differ only in ignored parameters.

Rows come out in a fixed order (stream major, then strategy in the
order given, then the kind's axes nested budget -> weight -> momentum
-> k1 -> k2 -> capacity), so reports are byte-deterministic.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .config import make_config
from .engine import Engine
from .errors import ConfigError
from .memory import RetentionState
from .stream_io import FrameFeature
from .strategies import SELECTOR_KINDS, SelectorConfig, select

SCHEMA_VERSION = 1

CSV_HEADER = (
    "schema_version,stream,strategy,budget,lambda,gamma,k1,k2,capacity,"
    "window,selected_count,recall,precision,precision_defined,"
    "mean_queue_len,clear_ratio,tokens_total,error"
)

# full-resolution cost per retained frame for selector kinds that never
# touch the engine's cost model
FLAT_FRAME_COST = 1.0


class LabeledLike(Protocol):
    frames: Sequence[FrameFeature]
    transitions: tuple[int, ...]


@dataclass(frozen=True)
class MatchResult:
    recall: float
    precision: float
    precision_defined: bool
    matched: int


def _require_ascending(values: Sequence[int], label: str) -> None:
    for a, b in zip(values, values[1:]):
        if b <= a:
            raise ValueError(f"{label} must be strictly ascending")


def match_selections(
    selected: Sequence[int], truth: Sequence[int], window: int = 1
) -> MatchResult:
    """Greedy one-to-one matching of selected ids to truth indices.

    Both inputs ascending; a pair matches when the ids differ by at most
    ``window``. Recall is over truth (vacuously 1 when truth is empty),
    precision over selected (flagged undefined and reported 0.0 when
    nothing was selected).
    """
    if not isinstance(window, int) or window < 0:
        raise ValueError("window must be a non-negative integer")
    _require_ascending(selected, "selected ids")
    _require_ascending(truth, "truth indices")

    matched = 0
    i = j = 0
    while i < len(truth) and j < len(selected):
        if selected[j] < truth[i] - window:
            j += 1
        elif selected[j] > truth[i] + window:
            i += 1
        else:
            matched += 1
            i += 1
            j += 1

    recall = 1.0 if not truth else matched / len(truth)
    defined = len(selected) > 0
    precision = matched / len(selected) if defined else 0.0
    return MatchResult(recall, precision, defined, matched)


@dataclass(frozen=True)
class SweepGrid:
    strategies: tuple[str, ...] = SELECTOR_KINDS
    budgets: tuple[int, ...] = (10,)
    lambdas: tuple[float, ...] = (0.2,)
    gammas: tuple[float, ...] = (0.9,)
    k1s: tuple[float, ...] = (0.0,)
    k2s: tuple[float, ...] = (1.0,)
    capacities: tuple[int, ...] = (20,)


@dataclass(frozen=True)
class EvalRow:
    stream: str
    strategy: str
    budget: int
    lam: float | None
    gamma: float | None
    k1: float | None
    k2: float | None
    capacity: int | None
    window: int
    selected: tuple[int, ...] = ()
    selected_count: int | None = None
    recall: float | None = None
    precision: float | None = None
    precision_defined: bool | None = None
    mean_queue_len: float | None = None
    clear_ratio: float | None = None
    tokens_total: float | None = None
    error: str = ""
    trace_lines: tuple[str, ...] = field(default=(), repr=False)


def _validate_grid(grid: SweepGrid, window: int) -> None:
    if not isinstance(window, int) or window < 0:
        raise ConfigError("window must be a non-negative integer")
    for name in ("strategies", "budgets", "lambdas", "gammas", "k1s", "k2s", "capacities"):
        if not getattr(grid, name):
            raise ConfigError(f"grid axis {name} is empty")
    for kind in grid.strategies:
        if kind not in SELECTOR_KINDS:
            raise ConfigError(f"unknown selector kind {kind!r}")
    for budget in grid.budgets:
        if not isinstance(budget, int) or budget < 1:
            raise ConfigError("budgets must be positive integers")


def _selector_row(
    name: str, stream: LabeledLike, kind: str, budget: int,
    lam: float | None, window: int,
) -> EvalRow:
    base = dict(
        stream=name, strategy=kind, budget=budget, lam=lam,
        gamma=None, k1=None, k2=None, capacity=None, window=window,
    )
    if lam is not None and not lam >= 0.0:
        return EvalRow(**base, error="lambda must be non-negative")
    config = SelectorConfig(
        kind=kind, budget=budget,
        curvature_weight=lam if lam is not None else 0.0,
    )
    picked = select(config, stream.frames)
    result = match_selections(picked, stream.transitions, window)
    return EvalRow(
        **base,
        selected=tuple(picked),
        selected_count=len(picked),
        recall=result.recall,
        precision=result.precision,
        precision_defined=result.precision_defined,
        tokens_total=len(picked) * FLAT_FRAME_COST,
    )


def _engine_row(
    name: str, stream: LabeledLike, budget: int,
    lam: float, gamma: float, k1: float, k2: float, capacity: int,
    window: int,
) -> EvalRow:
    base = dict(
        stream=name, strategy="engine", budget=budget, lam=lam,
        gamma=gamma, k1=k1, k2=k2, capacity=capacity, window=window,
    )
    try:
        config = make_config(
            **{"lambda": lam, "gamma": gamma, "k1": k1, "k2": k2, "capacity": capacity}
        )
    except ConfigError as exc:
        return EvalRow(**base, error=str(exc))

    engine = Engine(config)
    traces = [engine.step(frame) for frame in stream.frames]
    entries = engine.queue.entries()
    ordered = [e.frame_id for e in entries if e.state is RetentionState.CLEAR]
    ordered += [e.frame_id for e in entries if e.state is RetentionState.BLURRED]
    picked = sorted(ordered[:budget])
    result = match_selections(picked, stream.transitions, window)

    decided = engine.clear_count + engine.blurred_count
    return EvalRow(
        **base,
        selected=tuple(picked),
        selected_count=len(picked),
        recall=result.recall,
        precision=result.precision,
        precision_defined=result.precision_defined,
        mean_queue_len=statistics.fmean(t.queue_len for t in traces),
        clear_ratio=(engine.clear_count / decided) if decided else None,
        tokens_total=engine.tokens_total,
        trace_lines=tuple(t.to_json_line() for t in traces),
    )


def run_sweep(
    streams: Sequence[tuple[str, LabeledLike]],
    grid: SweepGrid,
    window: int = 1,
) -> list[EvalRow]:
    """One row per (stream, strategy, applicable parameter cell)."""
    _validate_grid(grid, window)
    if not streams:
        raise ConfigError("no streams to evaluate")
    names = [name for name, _ in streams]
    if len(set(names)) != len(names):
        raise ConfigError("stream names must be unique")

    rows: list[EvalRow] = []
    for name, stream in streams:
        for kind in grid.strategies:
            if kind in ("uniform", "motion_topk"):
                for budget in grid.budgets:
                    rows.append(_selector_row(name, stream, kind, budget, None, window))
            elif kind == "curvature_topk":
                for budget in grid.budgets:
                    for lam in grid.lambdas:
                        rows.append(_selector_row(name, stream, kind, budget, lam, window))
            else:
                for budget in grid.budgets:
                    for lam in grid.lambdas:
                        for gamma in grid.gammas:
                            for k1 in grid.k1s:
                                for k2 in grid.k2s:
                                    for capacity in grid.capacities:
                                        rows.append(
                                            _engine_row(
                                                name, stream, budget, lam, gamma,
                                                k1, k2, capacity, window,
                                            )
                                        )
    return rows


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: Sequence[EvalRow]) -> str:
    """Frozen schema; trace lines are not part of the CSV."""
    import csv
    import io

    sink = io.StringIO()
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(CSV_HEADER.split(","))
    for row in rows:
        writer.writerow(
            [
                str(SCHEMA_VERSION),
                row.stream,
                row.strategy,
                str(row.budget),
                _cell(row.lam),
                _cell(row.gamma),
                _cell(row.k1),
                _cell(row.k2),
                _cell(row.capacity),
                str(row.window),
                _cell(row.selected_count),
                _cell(row.recall),
                _cell(row.precision),
                _cell(row.precision_defined),
                _cell(row.mean_queue_len),
                _cell(row.clear_ratio),
                _cell(row.tokens_total),
                row.error,
            ]
        )
    return sink.getvalue()
