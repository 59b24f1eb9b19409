"""Binary state snapshots.

Layout on disk:

    problem=ddc2d
    parameter=2500.0
    param.pr=1.0
    ...
    layout=u:velocity:47x48,w:velocity:48x47,...
    byteorder=little
    dtype=<f8
    count=9118
    <blank line>
    <count little-endian float64 values, block order, row-major per field>

Floats in the header are written with repr() so they round-trip exactly;
the payload is the raw IEEE bytes, so write-then-read is bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
import structlog

from src.core.exceptions import SnapshotError
from src.services.problems.base import StateLayout

if TYPE_CHECKING:
    from pathlib import Path

    from src.models.domain import FloatArray

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

DTYPE = "<f8"
_SEPARATOR = b"\n\n"
_PARAM_PREFIX = "param."


@dataclass(frozen=True, slots=True)
class Snapshot:
    problem: str
    parameter: float
    layout: StateLayout
    state: FloatArray
    parameters: dict[str, float] = field(default_factory=dict)


def write_snapshot(path: Path, snapshot: Snapshot) -> None:
    state = np.ascontiguousarray(snapshot.state, dtype=DTYPE)
    if state.shape != (snapshot.layout.size,):
        raise SnapshotError(
            "state does not match its layout",
            details={"state": state.shape, "layout": snapshot.layout.size},
        )
    lines = [f"problem={snapshot.problem}", f"parameter={snapshot.parameter!r}"]
    lines += [
        f"{_PARAM_PREFIX}{key}={float(value)!r}" for key, value in snapshot.parameters.items()
    ]
    lines += [
        f"layout={snapshot.layout.describe()}",
        "byteorder=little",
        f"dtype={DTYPE}",
        f"count={state.size}",
    ]
    header = "\n".join(lines).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + _SEPARATOR + state.tobytes())
    logger.debug("snapshot_written", path=str(path), parameter=snapshot.parameter)


def read_snapshot(path: Path) -> Snapshot:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SnapshotError(f"cannot read snapshot {path}") from exc

    head, sep, payload = raw.partition(_SEPARATOR)
    if not sep:
        raise SnapshotError("snapshot header is not terminated by a blank line")

    entries: dict[str, str] = {}
    for line in head.decode("utf-8").splitlines():
        key, eq, value = line.partition("=")
        if not eq:
            raise SnapshotError(f"malformed header line {line!r}")
        entries[key] = value

    try:
        problem = entries["problem"]
        parameter = float(entries["parameter"])
        layout = StateLayout.parse(entries["layout"])
        count = int(entries["count"])
        dtype = entries["dtype"]
        byteorder = entries["byteorder"]
    except (KeyError, ValueError) as exc:
        raise SnapshotError(
            "incomplete snapshot header", details={"keys": sorted(entries)}
        ) from exc

    if dtype != DTYPE or byteorder != "little":
        raise SnapshotError("unsupported payload encoding", details={"dtype": dtype})
    if count != layout.size or len(payload) != count * 8:
        raise SnapshotError(
            "payload size does not match the header",
            details={"count": count, "layout": layout.size, "bytes": len(payload)},
        )

    parameters = {
        key.removeprefix(_PARAM_PREFIX): float(value)
        for key, value in entries.items()
        if key.startswith(_PARAM_PREFIX)
    }
    state = np.frombuffer(payload, dtype=DTYPE).astype(np.float64)
    return Snapshot(
        problem=problem,
        parameter=parameter,
        layout=layout,
        state=state,
        parameters=parameters,
    )
