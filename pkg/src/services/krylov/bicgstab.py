"""Matrix-free BiCGStab.

Solves A x = b given only the action of A. The operator is the
preconditioned Jacobian supplied by the time-stepper, so no further
preconditioning happens here. Iteration starts from x = 0 with the shadow
residual fixed to the initial residual, which makes the iterates a
deterministic function of (A, b).

Breakdowns are reported rather than patched by a restart: the
continuation layer answers every KrylovFailure by retrying a smaller step.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import structlog

from src.core.exceptions import BreakdownError, MaxItersExceededError

if TYPE_CHECKING:
    from collections.abc import Callable

    from src.models.config import KrylovConfig
    from src.models.domain import FloatArray

logger: structlog.stdlib.BoundLogger = structlog.get_logger()


def bicgstab(
    apply_A: Callable[[FloatArray], FloatArray],
    rhs: FloatArray,
    config: KrylovConfig,
) -> tuple[FloatArray, int]:
    """Return (x, iterations) with ||A x - rhs|| <= rel_tol ||rhs||.

    Whenever the recursive residual meets the tolerance, the true
    residual is recomputed with one extra operator application. If it
    misses, the recursive residual is replaced by the true one and the
    iteration continues with the same shadow vector.

    Raises
    ------
    MaxItersExceededError
        No certified solution within ``config.max_iters`` iterations.
    BreakdownError
        rho, <r_hat, v> or omega fell below ``config.breakdown_eps``.
    """
    b = np.asarray(rhs, dtype=np.float64)
    x = np.zeros_like(b)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return x, 0

    target = config.rel_tol * b_norm
    eps = config.breakdown_eps

    r = b.copy()
    r_hat = b.copy()
    p = np.zeros_like(b)
    v = np.zeros_like(b)
    rho_old = alpha = omega = 1.0

    for iteration in range(1, config.max_iters + 1):
        rho = float(r_hat @ r)
        if abs(rho) < eps:
            _breakdown("rho", rho, iteration)

        beta = (rho / rho_old) * (alpha / omega)
        p = r + beta * (p - omega * v)
        v = apply_A(p)

        denom = float(r_hat @ v)
        if abs(denom) < eps:
            _breakdown("r_hat_v", denom, iteration)
        alpha = rho / denom
        x = x + alpha * p
        s = r - alpha * v

        # Early exit on the half step also avoids omega = 0 when s vanishes.
        if np.linalg.norm(s) <= target:
            s, certified = _certify(apply_A, b, x, target)
            if certified:
                return x, iteration

        t = apply_A(s)
        tt = float(t @ t)
        if tt < eps:
            _breakdown("t_t", tt, iteration)
        omega = float(t @ s) / tt
        if abs(omega) < eps:
            _breakdown("omega", omega, iteration)

        x = x + omega * s
        r = s - omega * t
        rho_old = rho

        if np.linalg.norm(r) <= target:
            r, certified = _certify(apply_A, b, x, target)
            if certified:
                return x, iteration

    raise MaxItersExceededError(
        f"BiCGStab did not reach rel_tol={config.rel_tol} in {config.max_iters} iterations",
        iterations=config.max_iters,
        details={"residual": float(np.linalg.norm(r)), "target": target},
    )


def _certify(
    apply_A: Callable[[FloatArray], FloatArray],
    b: FloatArray,
    x: FloatArray,
    target: float,
) -> tuple[FloatArray, bool]:
    true_residual = b - apply_A(x)
    norm = float(np.linalg.norm(true_residual))
    if norm <= target:
        return true_residual, True
    logger.debug("krylov_residual_replaced", true_residual=norm, target=target)
    return true_residual, False


def _breakdown(quantity: str, value: float, iteration: int) -> None:
    logger.warning("krylov_breakdown", quantity=quantity, value=value, iteration=iteration)
    raise BreakdownError(
        f"BiCGStab breakdown: {quantity}={value:.3e} at iteration {iteration}",
        iterations=iteration,
        details={"quantity": quantity, "value": value},
    )
