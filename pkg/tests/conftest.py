"""Shared test helpers: frame builders and an in-process CLI runner."""

from __future__ import annotations

import io
from contextlib import redirect_stderr, redirect_stdout
from dataclasses import dataclass

import numpy as np
import pytest


def unit(values) -> np.ndarray:
    vec = np.asarray(values, dtype=np.float64)
    return vec / np.linalg.norm(vec)


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    vec = rng.standard_normal(dim)
    while np.linalg.norm(vec) < 1e-6:
        vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def make_frames(vectors, start_id: int = 0):
    """Wrap unit vectors into FrameFeature objects with 1-second spacing."""
    from curvemem.stream_io import FrameFeature

    frames = []
    for offset, vec in enumerate(vectors):
        frames.append(
            FrameFeature(
                frame_id=start_id + offset,
                timestamp=float(start_id + offset),
                vector=np.asarray(vec, dtype=np.float64),
            )
        )
    return frames


def random_unit_frames(seed: int, count: int, dim: int):
    rng = np.random.default_rng(seed)
    return make_frames([random_unit(rng, dim) for _ in range(count)])


@dataclass
class CliResult:
    code: int
    out: str
    err: str


@pytest.fixture
def run_cli():
    """Invoke the CLI in-process and capture its streams and exit code."""
    from curvemem import cli

    def _run(*argv: str, stdin_text: str | None = None) -> CliResult:
        out, err = io.StringIO(), io.StringIO()
        stdin = io.StringIO(stdin_text) if stdin_text is not None else None
        with redirect_stdout(out), redirect_stderr(err):
            code = cli.main(list(argv), stdin=stdin)
        return CliResult(code=code, out=out.getvalue(), err=err.getvalue())

    return _run
