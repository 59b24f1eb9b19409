"""Small algebraic problems with closed-form branches.

They plug into the same Problem contract as the PDEs, which lets the
continuation engine be checked against exact answers. The linear part is
a multiple of the identity (zero by default, which turns the stepper
preconditioner into the identity when dt = 1).
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from src.models.config import PreconditionerSpec, ToyKind
from src.services.problems.base import FieldSlot, Problem, StateLayout

if TYPE_CHECKING:
    from collections.abc import Callable, Mapping

    from src.models.domain import FloatArray

BLOCK = "system"


class AlgebraicProblem(Problem):
    """F(u, lambda) = residual(u, lambda) with an analytic Jacobian.

    N is defined as F - L u so that N + L u reproduces F for any choice of
    the linear coefficient.
    """

    name = "toy"

    def __init__(
        self,
        residual: Callable[[FloatArray, float], FloatArray],
        jacobian: Callable[[FloatArray, float], FloatArray],
        *,
        size: int,
        parameter: float = 0.0,
        linear: float = 0.0,
        label: str = "custom",
    ) -> None:
        self._residual = residual
        self._jacobian = jacobian
        self._parameter = float(parameter)
        self.linear = float(linear)
        self.label = label
        self.layout = StateLayout([FieldSlot("u", BLOCK, (size,))])

    @property
    def parameter(self) -> float:
        return self._parameter

    @parameter.setter
    def parameter(self, value: float) -> None:
        self._parameter = float(value)

    def parameter_values(self) -> dict[str, float]:
        return {"lambda": self._parameter, "linear": self.linear}

    def default_preconditioner(self) -> PreconditionerSpec:
        return PreconditionerSpec.uniform(self.layout.block_names, 1.0)

    def metric_diffusivity(self, block: str) -> float:
        return abs(self.linear)

    def eval_N(self, state: FloatArray, delta_t: Mapping[str, float]) -> FloatArray:
        return np.asarray(self._residual(state, self._parameter), dtype=np.float64) - (
            self.linear * state
        )

    def apply_L(self, vector: FloatArray) -> FloatArray:
        return self.linear * vector

    def solve_shifted(self, delta_t: Mapping[str, float], rhs: FloatArray) -> FloatArray:
        return rhs / (1.0 - delta_t[BLOCK] * self.linear)

    def eval_dN(
        self,
        base: FloatArray,
        direction: FloatArray,
        delta_t: Mapping[str, float],
    ) -> FloatArray:
        jac = np.atleast_2d(self._jacobian(base, self._parameter))
        return jac @ direction - self.linear * direction

    def preliminary(self, state: FloatArray) -> dict[str, FloatArray]:
        return {}

    def diagnostic(self, state: FloatArray) -> float:
        return float(state[0])


# ---------------------------------------------------------------------------
# Factories
# ---------------------------------------------------------------------------


def fold_problem(parameter: float = 0.0) -> AlgebraicProblem:
    """F = lambda - u^2; branches u = +-sqrt(lambda), fold at lambda = 0."""
    return AlgebraicProblem(
        lambda u, lam: np.array([lam - u[0] ** 2]),
        lambda u, lam: np.array([[-2.0 * u[0]]]),
        size=1,
        parameter=parameter,
        label=ToyKind.FOLD,
    )


def parabola_problem(parameter: float = 0.0) -> AlgebraicProblem:
    """F = u^2 + lambda - 1; a fold at (u, lambda) = (0, 1)."""
    return AlgebraicProblem(
        lambda u, lam: np.array([u[0] ** 2 + lam - 1.0]),
        lambda u, lam: np.array([[2.0 * u[0]]]),
        size=1,
        parameter=parameter,
        label=ToyKind.PARABOLA,
    )


def circle_problem(parameter: float = 0.0) -> AlgebraicProblem:
    """F = u^2 + lambda^2 - 1; folds at lambda = +-1."""
    return AlgebraicProblem(
        lambda u, lam: np.array([u[0] ** 2 + lam**2 - 1.0]),
        lambda u, lam: np.array([[2.0 * u[0]]]),
        size=1,
        parameter=parameter,
        label=ToyKind.CIRCLE,
    )


def scalar_linear_problem(
    *,
    linear: float,
    nonlinear: Callable[[float], float] | None = None,
    derivative: Callable[[float], float] | None = None,
) -> AlgebraicProblem:
    """du/dt = N(u) + linear * u for a scalar N (zero when omitted)."""
    n = nonlinear or (lambda u: 0.0)
    dn = derivative or (lambda u: 0.0)
    return AlgebraicProblem(
        lambda u, lam: np.array([n(float(u[0])) + linear * u[0]]),
        lambda u, lam: np.array([[dn(float(u[0])) + linear]]),
        size=1,
        linear=linear,
        label="scalar_linear",
    )


def build_toy(kind: ToyKind, parameter: float = 0.0) -> AlgebraicProblem:
    factories: dict[ToyKind, Callable[[float], AlgebraicProblem]] = {
        ToyKind.FOLD: fold_problem,
        ToyKind.PARABOLA: parabola_problem,
        ToyKind.CIRCLE: circle_problem,
    }
    return factories[kind](parameter)
