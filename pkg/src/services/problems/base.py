"""Problem contract and state layout.

A physics problem splits its time derivative into a nonlinear part N
(advection, forcing, pressure, inhomogeneous boundary data) and a linear
homogeneous part L (diffusion), and knows how to invert the shifted
operator I - dt L block by block. The stepper preconditioner builds every
residual and Jacobian action from these hooks alone.

The continuation vector is flat. StateLayout maps it onto named fields,
and every field belongs to one equation block; fields of a block are
contiguous so block-wise scalings are plain slices.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import prod
from typing import TYPE_CHECKING, ClassVar

import numpy as np

from src.core.exceptions import SnapshotError

if TYPE_CHECKING:
    from collections.abc import Callable, Mapping, Sequence

    from src.models.config import PreconditionerSpec
    from src.models.domain import FloatArray


@dataclass(frozen=True, slots=True)
class FieldSlot:
    """One named field of the state, stored row-major with ``shape``."""

    name: str
    block: str
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return prod(self.shape)


class StateLayout:
    """Offsets of named fields and equation blocks inside the flat state."""

    def __init__(self, fields: Sequence[FieldSlot]) -> None:
        if not fields:
            raise ValueError("a layout needs at least one field")
        self.fields: tuple[FieldSlot, ...] = tuple(fields)

        self._field_slices: dict[str, slice] = {}
        self._block_slices: dict[str, slice] = {}
        offset = 0
        for slot in self.fields:
            if slot.name in self._field_slices:
                raise ValueError(f"duplicate field {slot.name!r}")
            start = offset
            offset += slot.size
            self._field_slices[slot.name] = slice(start, offset)
            if slot.block in self._block_slices:
                previous = self._block_slices[slot.block]
                if previous.stop != start:
                    raise ValueError(f"fields of block {slot.block!r} must be contiguous")
                self._block_slices[slot.block] = slice(previous.start, offset)
            else:
                self._block_slices[slot.block] = slice(start, offset)
        self.size = offset

    @property
    def block_names(self) -> tuple[str, ...]:
        return tuple(self._block_slices)

    def field_slice(self, name: str) -> slice:
        return self._field_slices[name]

    def block_slice(self, block: str) -> slice:
        return self._block_slices[block]

    def view(self, vector: FloatArray, name: str) -> FloatArray:
        slot = next(s for s in self.fields if s.name == name)
        return vector[self._field_slices[name]].reshape(slot.shape)

    def split(self, vector: FloatArray) -> dict[str, FloatArray]:
        if vector.shape != (self.size,):
            raise ValueError(f"state has shape {vector.shape}, layout expects ({self.size},)")
        return {s.name: vector[self._field_slices[s.name]].reshape(s.shape) for s in self.fields}

    def join(self, fields: Mapping[str, FloatArray]) -> FloatArray:
        return np.concatenate(
            [np.asarray(fields[s.name], dtype=np.float64).reshape(-1) for s in self.fields]
        )

    def broadcast(self, values: Mapping[str, float]) -> FloatArray:
        """Expand one scalar per block into a full-length vector."""
        out = np.empty(self.size)
        for block, block_slice in self._block_slices.items():
            out[block_slice] = values[block]
        return out

    # -- text form used by snapshot headers: name:block:AxB,... --

    def describe(self) -> str:
        return ",".join(
            f"{s.name}:{s.block}:{'x'.join(str(n) for n in s.shape)}" for s in self.fields
        )

    @classmethod
    def parse(cls, text: str) -> StateLayout:
        try:
            slots = []
            for item in text.split(","):
                name, block, dims = item.split(":")
                slots.append(FieldSlot(name, block, tuple(int(n) for n in dims.split("x"))))
            return cls(slots)
        except ValueError as exc:
            raise SnapshotError(f"malformed layout {text!r}") from exc

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StateLayout) and self.fields == other.fields

    def __hash__(self) -> int:
        return hash(self.fields)


class Problem(ABC):
    """A steady-state problem F(u) = N(u) + L u = 0 with a continuation parameter.

    ``delta_t`` arguments map block name to the block's time step. N may
    depend on it (the DDC pressure projection does); L and the shifted
    solves act block-diagonally.
    """

    name: ClassVar[str]
    layout: StateLayout

    @property
    @abstractmethod
    def parameter(self) -> float:
        """Current value of the continuation parameter."""

    @parameter.setter
    @abstractmethod
    def parameter(self, value: float) -> None: ...

    @abstractmethod
    def parameter_values(self) -> dict[str, float]:
        """All physical parameters, for snapshot headers and logs."""

    @abstractmethod
    def default_preconditioner(self) -> PreconditionerSpec: ...

    @abstractmethod
    def metric_diffusivity(self, block: str) -> float:
        """Kappa of the (1 + kappa dt)/dt convergence-metric scaling."""

    @abstractmethod
    def eval_N(self, state: FloatArray, delta_t: Mapping[str, float]) -> FloatArray: ...

    @abstractmethod
    def apply_L(self, vector: FloatArray) -> FloatArray: ...

    @abstractmethod
    def solve_shifted(self, delta_t: Mapping[str, float], rhs: FloatArray) -> FloatArray:
        """Apply (I - dt_b L_b)^-1 on every block b."""

    @abstractmethod
    def eval_dN(
        self,
        base: FloatArray,
        direction: FloatArray,
        delta_t: Mapping[str, float],
    ) -> FloatArray: ...

    @abstractmethod
    def preliminary(self, state: FloatArray) -> dict[str, FloatArray]:
        """Derived fields computed before a step (pressure, streamfunction)."""

    @abstractmethod
    def diagnostic(self, state: FloatArray) -> float:
        """Problem-specific branch norm (kinetic energy, N_u, ...)."""

    def linearization(
        self,
        base: FloatArray,
        delta_t: Mapping[str, float],
    ) -> Callable[[FloatArray], FloatArray]:
        """Return v -> dN(base) v; problems override to reuse base-state work."""
        return lambda direction: self.eval_dN(base, direction, delta_t)

    def residual(self, state: FloatArray, delta_t: Mapping[str, float]) -> FloatArray:
        """Directly assembled F(u) = N(u) + L u."""
        return self.eval_N(state, delta_t) + self.apply_L(state)
