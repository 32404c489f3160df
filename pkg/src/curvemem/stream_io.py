"""Feature-stream containers: a seekable binary format and JSONL.

Both formats carry float32 payloads and the same logical record
(frame_id, timestamp, vector). Ingestion is where normalization happens:
vectors are projected onto the float32 unit sphere exactly once, so a
written stream survives any number of write/read cycles byte-for-byte.
Layout details and a hex-dumped example live in docs/formats.md.

Binary layout (little-endian):
  offset  0: 4 bytes  magic "CVST"
  offset  4: u32      container version (1)
  offset  8: u32      vector dimension D (>= 2)
  offset 12: u32      frame count (0 = unknown / open-ended)
  offset 16: u8       payload dtype code (1 = float32)
  offset 17: 7 bytes  zero padding; records start at offset 24
  records:   u64 frame_id, f64 timestamp, D x f32 vector (stride 16 + 4*D)
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Final, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    RejectedFrameError,
    StreamCorruptionError,
    StreamFormatError,
)

BINARY_MAGIC: Final = b"CVST"
BINARY_VERSION: Final = 1
DTYPE_FLOAT32: Final = 1
HEADER_SIZE: Final = 24

# vectors whose raw norm falls below this are rejected at ingestion rather
# than normalized into amplified noise
EPS_ZERO: Final = 1e-8

_HEADER = struct.Struct("<4sIIIB7x")
_RECORD_PREFIX = struct.Struct("<Qd")


@dataclass(eq=False)
class FrameFeature:
    """One frame's feature vector.

    After ingestion the vector is float64, unit-norm within 1e-6, and lies
    exactly on the float32 lattice so re-serialization is lossless.
    """

    frame_id: int
    timestamp: float
    vector: np.ndarray


_UNIT_NORM_BAND: Final = 2.0 ** -23  # twice the float32 rounding bound on a unit norm


def project_unit_f32(values: np.ndarray | Sequence[float]) -> np.ndarray:
    """Project a vector onto the float32 unit sphere, idempotently.

    Normalizes in float64 and rounds to the float32 grid. A vector whose
    norm already sits within _UNIT_NORM_BAND of 1 is returned unchanged:
    rounding an exact unit vector to float32 moves its norm by at most
    2**-24 (a squared-weight average of per-component relative errors), so
    every output of this function re-enters the skip band and projecting
    twice equals projecting once. That keeps write/read cycles byte-exact.
    Chasing an exact fixed point of v <- f32(v / ||v||) instead does not
    terminate: a component much smaller than the norm takes a multiplicative
    nudge each pass and walks its own mantissa grid without repeating.
    """
    vec = np.asarray(values, dtype=np.float64)
    vec = vec.astype(np.float32).astype(np.float64)
    norm = math.sqrt(float(np.dot(vec, vec)))
    if abs(norm - 1.0) > _UNIT_NORM_BAND:
        vec = (vec / norm).astype(np.float32).astype(np.float64)
    return vec


def _ingest_vector(raw: np.ndarray, frame_id: int) -> np.ndarray:
    quantized = raw.astype(np.float32).astype(np.float64)
    if not np.all(np.isfinite(quantized)):
        raise StreamCorruptionError(f"frame {frame_id}: non-finite vector value")
    norm = math.sqrt(float(np.dot(quantized, quantized)))
    if norm < EPS_ZERO:
        raise RejectedFrameError(frame_id, f"vector norm {norm:.3e} below {EPS_ZERO:.0e}")
    return project_unit_f32(quantized)


def _check_meta(frame_id: int, timestamp: float, last_id: int | None) -> None:
    if frame_id < 0:
        raise StreamCorruptionError(f"frame id {frame_id} is negative")
    if last_id is not None and frame_id <= last_id:
        raise StreamCorruptionError(
            f"frame ids must be strictly increasing, got {frame_id} after {last_id}"
        )
    if not math.isfinite(timestamp) or timestamp < 0:
        raise StreamCorruptionError(f"frame {frame_id}: bad timestamp {timestamp!r}")


# -- binary container --------------------------------------------------------


def _read_binary(path: Path) -> Iterator[tuple[FrameFeature, bool]]:
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE:
        raise StreamFormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, version, dim, count, dtype_code = _HEADER.unpack_from(blob, 0)
    if magic != BINARY_MAGIC:
        raise StreamFormatError(f"{path}: bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise StreamFormatError(f"{path}: unsupported container version {version}")
    if dim < 2:
        raise StreamFormatError(f"{path}: dimension must be >= 2, header says {dim}")
    if dtype_code != DTYPE_FLOAT32:
        raise StreamFormatError(f"{path}: unknown dtype code {dtype_code}")

    payload = blob[HEADER_SIZE:]
    stride = _RECORD_PREFIX.size + 4 * dim

    def records() -> Iterator[tuple[FrameFeature, bool]]:
        if len(payload) % stride != 0:
            raise StreamCorruptionError(
                f"{path}: payload of {len(payload)} bytes is not a multiple of the "
                f"{stride}-byte record stride"
            )
        total = len(payload) // stride
        if count != 0 and total != count:
            raise StreamCorruptionError(
                f"{path}: header declares {count} frames but payload holds {total}"
            )
        last_id: int | None = None
        for index in range(total):
            base = index * stride
            frame_id_u64, timestamp = _RECORD_PREFIX.unpack_from(payload, base)
            frame_id = int(frame_id_u64)
            _check_meta(frame_id, timestamp, last_id)
            raw = np.frombuffer(
                payload, dtype="<f4", count=dim, offset=base + _RECORD_PREFIX.size
            ).astype(np.float64)
            vector = _ingest_vector(raw, frame_id)
            last_id = frame_id
            yield FrameFeature(frame_id, timestamp, vector), False

    return records()


def _write_binary(path: Path, frames: Sequence[FrameFeature], dim: int) -> None:
    with open(path, "wb") as fobj:
        fobj.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, dim, len(frames), DTYPE_FLOAT32))
        for frame in frames:
            fobj.write(_RECORD_PREFIX.pack(frame.frame_id, frame.timestamp))
            fobj.write(np.asarray(frame.vector, dtype="<f4").tobytes())


# -- JSONL container ---------------------------------------------------------

_ALLOWED_KEYS = {"id", "t", "vec", "q"}


def _reject_constant(name: str):
    raise StreamCorruptionError(f"non-finite JSON value {name}")


def _read_jsonl(lines: Iterable[str], source: str) -> Iterator[tuple[FrameFeature, bool]]:
    dim: int | None = None
    last_id: int | None = None
    for lineno, raw_line in enumerate(lines, start=1):
        line = raw_line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise StreamCorruptionError(f"{source}:{lineno}: not a JSON object: {exc}") from exc
        if not isinstance(obj, dict):
            raise StreamCorruptionError(f"{source}:{lineno}: expected an object")
        unknown = set(obj) - _ALLOWED_KEYS
        if unknown or not {"id", "t", "vec"} <= set(obj):
            raise StreamCorruptionError(
                f"{source}:{lineno}: record keys must be id/t/vec (optional q), got {sorted(obj)}"
            )
        frame_id, timestamp, vec, flag = obj["id"], obj["t"], obj["vec"], obj.get("q", False)
        if isinstance(frame_id, bool) or not isinstance(frame_id, int):
            raise StreamCorruptionError(f"{source}:{lineno}: id must be an integer")
        if isinstance(timestamp, bool) or not isinstance(timestamp, (int, float)):
            raise StreamCorruptionError(f"{source}:{lineno}: t must be a number")
        if not isinstance(flag, bool):
            raise StreamCorruptionError(f"{source}:{lineno}: q must be a boolean")
        if not isinstance(vec, list) or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in vec
        ):
            raise StreamCorruptionError(f"{source}:{lineno}: vec must be a list of numbers")
        if dim is None:
            if len(vec) < 2:
                raise StreamFormatError(f"{source}:{lineno}: dimension must be >= 2")
            dim = len(vec)
        elif len(vec) != dim:
            raise StreamCorruptionError(
                f"{source}:{lineno}: dimension changed from {dim} to {len(vec)}"
            )
        _check_meta(frame_id, float(timestamp), last_id)
        vector = _ingest_vector(np.array(vec, dtype=np.float64), frame_id)
        last_id = frame_id
        yield FrameFeature(frame_id, float(timestamp), vector), flag


def _write_jsonl(path: Path, frames: Sequence[FrameFeature]) -> None:
    with open(path, "w", encoding="utf-8") as fobj:
        for frame in frames:
            obj = {
                "id": frame.frame_id,
                "t": frame.timestamp,
                "vec": [float(v) for v in frame.vector],
            }
            fobj.write(json.dumps(obj, separators=(",", ":"), allow_nan=False))
            fobj.write("\n")


# -- public API ---------------------------------------------------------------


def detect_format(path: str | Path) -> str:
    """Sniff binary vs JSONL from the leading bytes."""
    with open(path, "rb") as fobj:
        head = fobj.read(4)
    if head == BINARY_MAGIC:
        return "binary"
    if head[:1] == b"{":
        return "jsonl"
    raise StreamFormatError(f"{path}: neither a {BINARY_MAGIC!r} container nor JSONL")


def read_stream_flagged(
    source: str | Path | IO[str], fmt: str = "auto"
) -> Iterator[tuple[FrameFeature, bool]]:
    """Yield (frame, is_query) pairs; the flag comes from the optional JSONL
    "q" field and is always False for binary streams."""
    if hasattr(source, "read"):
        if fmt == "binary":
            raise StreamFormatError("binary streams are file-based; pipe input must be JSONL")
        return _read_jsonl(iter(source), getattr(source, "name", "<stream>"))
    path = Path(source)
    if fmt == "auto":
        fmt = detect_format(path)
    if fmt == "binary":
        return _read_binary(path)
    if fmt == "jsonl":
        with open(path, "r", encoding="utf-8") as fobj:
            lines = fobj.readlines()
        return _read_jsonl(lines, str(path))
    raise StreamFormatError(f"unknown stream format {fmt!r}")


def read_stream(source: str | Path | IO[str], fmt: str = "auto") -> Iterator[FrameFeature]:
    """Yield frames in file order, normalized exactly once at ingestion."""
    return (frame for frame, _ in read_stream_flagged(source, fmt))


def write_stream(path: str | Path, frames: Iterable[FrameFeature], fmt: str = "binary") -> None:
    """Serialize valid frames (consistent dimension, strictly increasing ids,
    unit vectors) to the chosen container."""
    seq = list(frames)
    dim = _validate_for_write(seq)
    path = Path(path)
    if fmt == "binary":
        _write_binary(path, seq, dim)
    elif fmt == "jsonl":
        _write_jsonl(path, seq)
    else:
        raise StreamFormatError(f"unknown stream format {fmt!r}")


def _validate_for_write(frames: Sequence[FrameFeature]) -> int:
    dim = 2
    last_id: int | None = None
    for frame in frames:
        vec = np.asarray(frame.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] < 2:
            raise ValueError(f"frame {frame.frame_id}: vector must be 1-D with dimension >= 2")
        if last_id is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise ValueError(
                f"frame {frame.frame_id}: dimension {vec.shape[0]} differs from {dim}"
            )
        if last_id is not None and frame.frame_id <= last_id:
            raise ValueError(
                f"frame ids must be strictly increasing, got {frame.frame_id} after {last_id}"
            )
        if frame.frame_id < 0:
            raise ValueError(f"frame id {frame.frame_id} is negative")
        if not math.isfinite(frame.timestamp) or frame.timestamp < 0:
            raise ValueError(f"frame {frame.frame_id}: bad timestamp {frame.timestamp!r}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"frame {frame.frame_id}: non-finite vector value")
        norm = float(np.linalg.norm(vec))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(
                f"frame {frame.frame_id}: vector norm {norm:.8f} is not 1 within 1e-6; "
                "streams carry normalized features"
            )
        last_id = frame.frame_id
    return dim
