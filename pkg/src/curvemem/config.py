"""Run configuration: defaults, validation, and the key=value file format.

One flat mapping drives the scorer, thresholds, and memory queue. External
spellings (config files, CLI flags, the printed audit) use ``lambda`` and
``gamma``; the dataclass uses ``curvature_weight`` and ``momentum`` because
``lambda`` is reserved in Python.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Final, Iterable, Mapping

from .errors import ConfigError

# external key ordering is the canonical --print-config / config-file order
CONFIG_KEYS: Final[tuple[str, ...]] = (
    "lambda",
    "gamma",
    "k1",
    "k2",
    "capacity",
    "cost_high",
    "cost_low",
    "high_res_side",
    "transition_size",
    "query_frames",
)

_KEY_TO_FIELD: Final[dict[str, str]] = {
    "lambda": "curvature_weight",
    "gamma": "momentum",
    "k1": "k1",
    "k2": "k2",
    "capacity": "capacity",
    "cost_high": "cost_high",
    "cost_low": "cost_low",
    "high_res_side": "high_res_side",
    "transition_size": "transition_size",
    "query_frames": "query_frames",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated engine configuration; construct via :func:`make_config`."""

    curvature_weight: float = 0.2
    momentum: float = 0.9
    k1: float = 0.0
    k2: float = 1.0
    capacity: int = 20
    cost_high: float = 1.0
    cost_low: float | None = None
    high_res_side: int | None = None
    transition_size: int = 224
    query_frames: tuple[int, ...] = ()

    def effective_cost_low(self) -> float:
        """Token cost of a Blurred admission.

        An explicit cost_low wins; otherwise it is derived from the square of
        the downscale ratio when a nominal high-res side is configured, and
        falls back to 0.25.
        """
        if self.cost_low is not None:
            return self.cost_low
        if self.high_res_side is not None:
            return (self.transition_size / self.high_res_side) ** 2
        return 0.25


def validate_config(cfg: RunConfig) -> RunConfig:
    if not (cfg.curvature_weight >= 0 and _finite(cfg.curvature_weight)):
        raise ConfigError(f"lambda must be a finite value >= 0, got {cfg.curvature_weight}")
    if not (0.0 < cfg.momentum < 1.0):
        raise ConfigError(f"gamma must lie strictly between 0 and 1, got {cfg.momentum}")
    if not (_finite(cfg.k1) and _finite(cfg.k2)):
        raise ConfigError(f"k1/k2 must be finite, got k1={cfg.k1} k2={cfg.k2}")
    if not cfg.k1 < cfg.k2:
        raise ConfigError(f"k1 must be strictly less than k2, got k1={cfg.k1} k2={cfg.k2}")
    if not (isinstance(cfg.capacity, int) and cfg.capacity >= 1):
        raise ConfigError(f"capacity must be an integer >= 1, got {cfg.capacity}")
    if not (_finite(cfg.cost_high) and cfg.cost_high >= 0):
        raise ConfigError(f"cost_high must be a finite value >= 0, got {cfg.cost_high}")
    if cfg.cost_low is not None and not (_finite(cfg.cost_low) and cfg.cost_low >= 0):
        raise ConfigError(f"cost_low must be a finite value >= 0, got {cfg.cost_low}")
    if cfg.high_res_side is not None and not (
        isinstance(cfg.high_res_side, int) and cfg.high_res_side >= 1
    ):
        raise ConfigError(f"high_res_side must be an integer >= 1, got {cfg.high_res_side}")
    if not (isinstance(cfg.transition_size, int) and cfg.transition_size >= 1):
        raise ConfigError(f"transition_size must be an integer >= 1, got {cfg.transition_size}")
    if any(q < 0 for q in cfg.query_frames):
        raise ConfigError(f"query_frames must be non-negative ids, got {cfg.query_frames}")
    return cfg


def make_config(**overrides: Any) -> RunConfig:
    """Build a validated config from keyword overrides on the defaults."""
    return apply_overrides(RunConfig(), overrides)


def apply_overrides(cfg: RunConfig, values: Mapping[str, Any]) -> RunConfig:
    """Layer external-key overrides onto cfg and re-validate.

    A value of None clears an optional field; unknown keys raise ConfigError.
    """
    fields: dict[str, Any] = {}
    for key, value in values.items():
        field = _KEY_TO_FIELD.get(key)
        if field is None:
            raise ConfigError(f"unknown config key: {key}")
        fields[field] = value
    return validate_config(replace(cfg, **fields))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """Parse the key=value config format into an external-key mapping.

    Blank lines and '#' comments are ignored; an empty value clears an
    optional key. Later assignments win.
    """
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"{source}:{lineno}: unknown config key: {key}")
        values[key] = parse_config_value(key, value.strip(), f"{source}:{lineno}")
    return values


def parse_config_value(key: str, text: str, source: str = "<config>") -> Any:
    if text == "":
        return None if key in ("cost_low", "high_res_side") else _empty_default(key, source)
    try:
        if key in ("capacity", "high_res_side", "transition_size"):
            return int(text)
        if key == "query_frames":
            return tuple(int(part) for part in text.split(",") if part.strip() != "")
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"{source}: bad value for {key}: {text!r}") from exc


def _empty_default(key: str, source: str) -> Any:
    if key == "query_frames":
        return ()
    raise ConfigError(f"{source}: {key} requires a value")


def render_config(cfg: RunConfig) -> str:
    """Render the effective config in the same key=value format it is read
    from; cost_low shows the resolved value so the audit is self-contained."""
    shown: dict[str, Any] = {
        "lambda": cfg.curvature_weight,
        "gamma": cfg.momentum,
        "k1": cfg.k1,
        "k2": cfg.k2,
        "capacity": cfg.capacity,
        "cost_high": cfg.cost_high,
        "cost_low": cfg.effective_cost_low(),
        "high_res_side": cfg.high_res_side,
        "transition_size": cfg.transition_size,
        "query_frames": ",".join(str(q) for q in cfg.query_frames),
    }
    lines = []
    for key in CONFIG_KEYS:
        value = shown[key]
        if value is None:
            rendered = ""
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key}={rendered}")
    return "\n".join(lines) + "\n"


def _finite(x: float) -> bool:
    return isinstance(x, (int, float)) and x == x and abs(x) != float("inf")


def parse_id_list(text: str) -> tuple[int, ...]:
    """Parse a comma-separated id list CLI argument."""
    if not text.strip():
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad id list: {text!r}") from exc


def merge_sources(
    file_values: Mapping[str, Any] | None, flag_values: Mapping[str, Any] | None
) -> RunConfig:
    """Defaults, then config file, then explicit flags."""
    cfg = RunConfig()
    if file_values:
        cfg = apply_overrides(cfg, file_values)
    if flag_values:
        cfg = apply_overrides(cfg, flag_values)
    return validate_config(cfg)


def grid_values(text: str, key: str) -> tuple[Any, ...]:
    """Parse a comma-separated sweep grid for one config key."""
    parts = [p.strip() for p in text.split(",") if p.strip() != ""]
    if not parts:
        raise ConfigError(f"empty grid for {key}")
    return tuple(parse_config_value(key, p) for p in parts)


def config_keys(values: Iterable[str]) -> None:
    for key in values:
        if key not in _KEY_TO_FIELD:
            raise ConfigError(f"unknown config key: {key}")
