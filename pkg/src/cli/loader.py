"""Run-file loading.

A run is described by an optional TOML file plus ``--set dotted.key=value``
overrides. Override values are parsed as TOML literals (``1e-3``,
``"fold"``, ``[0.5, 2.0]``, ``true``); anything that is not a valid literal
is taken as a bare string. Overrides are merged into the file's tables
before validation, so they pass through the same RunConfig checks.
"""

from __future__ import annotations

import tomllib
from typing import TYPE_CHECKING, Any

import structlog
from pydantic import ValidationError

from src.core.exceptions import ConfigurationError
from src.models.config import RunConfig

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

logger: structlog.stdlib.BoundLogger = structlog.get_logger()


def parse_override(text: str) -> tuple[list[str], Any]:
    """Split ``a.b.c=value`` into its key path and parsed value."""
    key, eq, raw = text.partition("=")
    path = [part.strip() for part in key.split(".")]
    if not eq or not all(path):
        raise ConfigurationError(
            f"override {text!r} is not of the form key=value", details={"override": text}
        )
    try:
        value = tomllib.loads(f"value = {raw.strip()}")["value"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return path, value


def apply_override(data: dict[str, Any], path: Sequence[str], value: Any) -> None:
    table = data
    for part in path[:-1]:
        nested = table.setdefault(part, {})
        if not isinstance(nested, dict):
            raise ConfigurationError(
                f"cannot set {'.'.join(path)}: {part!r} is not a table",
                details={"key": ".".join(path)},
            )
        table = nested
    table[path[-1]] = value


def read_run_file(path: Path) -> dict[str, Any]:
    try:
        with path.open("rb") as handle:
            return tomllib.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"cannot read run file {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"run file {path} is not valid TOML: {exc}") from exc


def load_run_config(
    path: Path | None = None,
    overrides: Sequence[str] = (),
    *,
    output_dir: Path | None = None,
) -> RunConfig:
    """Validated RunConfig from a run file, overrides and the output flag."""
    data = read_run_file(path) if path is not None else {}
    for text in overrides:
        key_path, value = parse_override(text)
        apply_override(data, key_path, value)
    if output_dir is not None:
        data["output_dir"] = str(output_dir)

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        errors = [
            {"loc": ".".join(str(part) for part in err["loc"]), "msg": err["msg"]}
            for err in exc.errors()
        ]
        raise ConfigurationError("invalid run configuration", details={"errors": errors}) from exc

    logger.debug("run_config_loaded", path=str(path) if path else None, problem=config.problem)
    return config
