"""Doubly diffusive convection in a 2D cavity.

x is vertical (buoyancy acts along +x) on [0, L_x], z horizontal on [0, 1].
Walls are no-slip; T and C are insulating at the x-walls and fixed at the
z-walls (0 at z = 0, 1 at z = 1). In conduction the opposing gradients
cancel exactly: u = 0, T = C = z.

Staggered (MAC) grid with nx x nz cells:

    u   x-faces strictly inside the cavity   (nx - 1, nz)
    w   z-faces strictly inside the cavity   (nx, nz - 1)
    T,C cell centres                          (nx, nz)
    p   cell centres (derived)

Momentum carries Pr on the pressure, buoyancy and viscous terms,

    du/dt = -(u.grad)u + Pr (-grad p + Ra (T - C) x + lap u),

which has the same steady states as the inertia-scaled form. The pressure
is absorbed as Pr p and obtained from the projection of the explicit
predictor u + dt (N_exp + Pr lap u), so the pressure source depends on the
velocity block's dt. At a steady state the velocity is discretely
divergence-free and the pressure is dt-independent.

The inhomogeneous z-wall data of T and C enter N through a lifting term on
the top row; L is the homogeneous Laplacian with the boundary rows built in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import structlog
from scipy import sparse
from scipy.sparse.linalg import splu, spsolve

from src.core.exceptions import ContinuationError
from src.models.config import Ddc2dConfig, PreconditionerSpec
from src.services.problems.base import FieldSlot, Problem, StateLayout

if TYPE_CHECKING:
    from collections.abc import Callable, Mapping

    from numpy.typing import NDArray
    from scipy.sparse.linalg import SuperLU

    from src.models.domain import FloatArray

logger: structlog.stdlib.BoundLogger = structlog.get_logger()

VELOCITY = "velocity"
TEMPERATURE = "temperature"
CONCENTRATION = "concentration"

DEFAULT_DELTA_T = 0.06
PRESSURE_COMPATIBILITY_TOL = 1e-8

# End-row diagonal of the 1D second difference for each wall treatment.
_END_DIAGONAL = {
    "neumann_cell": -1.0,  # ghost = first interior value
    "dirichlet_cell": -3.0,  # ghost = -first (zero wall between ghost and cell)
    "dirichlet_node": -2.0,  # wall node itself is zero
}


def second_difference(n: int, h: float, kind: str) -> sparse.csr_matrix:
    main = np.full(n, -2.0)
    main[0] = main[-1] = _END_DIAGONAL[kind]
    off = np.ones(n - 1)
    return sparse.diags([off, main, off], [-1, 0, 1], format="csr") / h**2


def face_gradient(n: int, h: float) -> sparse.csr_matrix:
    """Cell values (n) -> interior face differences (n - 1)."""
    ones = np.ones(n - 1)
    return sparse.diags([-ones, ones], [0, 1], shape=(n - 1, n), format="csr") / h


def _pad_x_faces(u: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.pad(u, ((1, 1), (0, 0)))


def _pad_z_faces(w: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.pad(w, ((0, 0), (1, 1)))


@dataclass(frozen=True, slots=True)
class MomentumStages:
    """Intermediate results of one split momentum step (flat velocity vectors).

    ``projected`` = predicted + dt Pr lap u - dt grad p is the field the
    pressure makes divergence-free; ``corrected`` = predicted - dt grad p
    enters the viscous solve.
    """

    predicted: FloatArray
    pressure: FloatArray
    projected: FloatArray
    corrected: FloatArray
    velocity: FloatArray


class Ddc2dProblem(Problem):
    """Staggered finite-difference cavity with the Rayleigh number as parameter."""

    name = "ddc2d"

    def __init__(self, config: Ddc2dConfig | None = None) -> None:
        config = config or Ddc2dConfig()
        self.config = config
        self.nx, self.nz = config.nx, config.nz
        self.hx = config.aspect / config.nx
        self.hz = 1.0 / config.nz
        self.pr = config.pr
        self.tau = config.tau
        self._ra = config.ra

        nx, nz = self.nx, self.nz
        self.layout = StateLayout(
            [
                FieldSlot("u", VELOCITY, (nx - 1, nz)),
                FieldSlot("w", VELOCITY, (nx, nz - 1)),
                FieldSlot("T", TEMPERATURE, (nx, nz)),
                FieldSlot("C", CONCENTRATION, (nx, nz)),
            ]
        )
        self._build_operators()
        self._shifted: dict[tuple[str, float], SuperLU] = {}

        self.x_centres = (np.arange(nx) + 0.5) * self.hx
        self.z_centres = (np.arange(nz) + 0.5) * self.hz
        lifting = np.zeros((nx, nz))
        lifting[:, -1] = 2.0 / self.hz**2
        self._lifting = lifting.ravel()

    def _build_operators(self) -> None:
        nx, nz, hx, hz = self.nx, self.nz, self.hx, self.hz
        eye = sparse.identity

        self.lap_scalar = (
            sparse.kron(second_difference(nx, hx, "neumann_cell"), eye(nz))
            + sparse.kron(eye(nx), second_difference(nz, hz, "dirichlet_cell"))
        ).tocsr()
        lap_u = sparse.kron(
            second_difference(nx - 1, hx, "dirichlet_node"), eye(nz)
        ) + sparse.kron(eye(nx - 1), second_difference(nz, hz, "dirichlet_cell"))
        lap_w = sparse.kron(
            second_difference(nx, hx, "dirichlet_cell"), eye(nz - 1)
        ) + sparse.kron(eye(nx), second_difference(nz - 1, hz, "dirichlet_node"))
        self.lap_velocity = sparse.block_diag([lap_u, lap_w], format="csr")

        self.gradient = sparse.vstack(
            [
                sparse.kron(face_gradient(nx, hx), eye(nz)),
                sparse.kron(eye(nx), face_gradient(nz, hz)),
            ],
            format="csr",
        )
        self.divergence = (-self.gradient.T).tocsr()

        # Neumann pressure Laplacian, singular on constants: pin the first cell.
        poisson = (self.divergence @ self.gradient).tolil()
        poisson[0, :] = 0.0
        poisson[0, 0] = 1.0
        self._pressure_lu = splu(poisson.tocsc())

    # ------------------------------------------------------------------
    # Parameters
    # ------------------------------------------------------------------

    @property
    def parameter(self) -> float:
        return self._ra

    @parameter.setter
    def parameter(self, value: float) -> None:
        self._ra = float(value)

    def parameter_values(self) -> dict[str, float]:
        return {
            "ra": self._ra,
            "pr": self.pr,
            "tau": self.tau,
            "aspect": self.config.aspect,
            "nx": self.nx,
            "nz": self.nz,
        }

    def default_preconditioner(self) -> PreconditionerSpec:
        return PreconditionerSpec.uniform(self.layout.block_names, DEFAULT_DELTA_T)

    def metric_diffusivity(self, block: str) -> float:
        return 1.0

    # ------------------------------------------------------------------
    # States and diagnostics
    # ------------------------------------------------------------------

    def conduction_state(self) -> FloatArray:
        """Motionless state u = 0, T = C = z."""
        profile = np.broadcast_to(self.z_centres, (self.nx, self.nz))
        return self.layout.join(
            {
                "u": np.zeros((self.nx - 1, self.nz)),
                "w": np.zeros((self.nx, self.nz - 1)),
                "T": profile,
                "C": profile,
            }
        )

    def perturbed_conduction(self, amplitude: float) -> FloatArray:
        """Conduction plus a single smooth temperature mode."""
        state = self.conduction_state()
        x = self.x_centres[:, None] / self.config.aspect
        bump = amplitude * np.cos(np.pi * x) * np.sin(np.pi * self.z_centres[None, :])
        state[self.layout.field_slice("T")] += bump.ravel()
        return state

    def kinetic_energy(self, state: FloatArray) -> float:
        """Area average of (u^2 + w^2) / 2."""
        vel = state[self.layout.block_slice(VELOCITY)]
        return float(0.5 * (vel @ vel) * self.hx * self.hz / self.config.aspect)

    def diagnostic(self, state: FloatArray) -> float:
        return self.kinetic_energy(state)

    def divergence_of(self, state: FloatArray) -> FloatArray:
        return self.divergence @ state[self.layout.block_slice(VELOCITY)]

    # ------------------------------------------------------------------
    # Discrete advection and buoyancy
    # ------------------------------------------------------------------

    def _scalar_advection(
        self,
        u: NDArray[np.float64],
        w: NDArray[np.float64],
        s: NDArray[np.float64],
        top: float,
    ) -> NDArray[np.float64]:
        """(u.grad) s at cell centres; ``top`` is the wall value at z = 1."""
        g = np.empty((self.nx + 2, self.nz + 2))
        g[1:-1, 1:-1] = s
        g[1:-1, 0] = -s[:, 0]
        g[1:-1, -1] = 2.0 * top - s[:, -1]
        g[0] = g[1]
        g[-1] = g[-2]

        faces_u = _pad_x_faces(u)
        faces_w = _pad_z_faces(w)
        uc = 0.5 * (faces_u[:-1] + faces_u[1:])
        wc = 0.5 * (faces_w[:, :-1] + faces_w[:, 1:])
        return uc * (g[2:, 1:-1] - g[:-2, 1:-1]) / (2.0 * self.hx) + wc * (
            g[1:-1, 2:] - g[1:-1, :-2]
        ) / (2.0 * self.hz)

    def _momentum_advection(
        self,
        ua: NDArray[np.float64],
        wa: NDArray[np.float64],
        ub: NDArray[np.float64],
        wb: NDArray[np.float64],
    ) -> FloatArray:
        """(a.grad) b on the faces of b, as one flat velocity vector."""
        hx, hz = self.hx, self.hz

        faces_ub = _pad_x_faces(ub)
        dudx = (faces_ub[2:] - faces_ub[:-2]) / (2.0 * hx)
        ghost_u = np.pad(ub, ((0, 0), (1, 1)))
        ghost_u[:, 0] = -ub[:, 0]
        ghost_u[:, -1] = -ub[:, -1]
        dudz = (ghost_u[:, 2:] - ghost_u[:, :-2]) / (2.0 * hz)
        faces_wa = _pad_z_faces(wa)
        w_at_u = 0.25 * (
            faces_wa[:-1, :-1] + faces_wa[:-1, 1:] + faces_wa[1:, :-1] + faces_wa[1:, 1:]
        )
        adv_u = ua * dudx + w_at_u * dudz

        faces_wb = _pad_z_faces(wb)
        dwdz = (faces_wb[:, 2:] - faces_wb[:, :-2]) / (2.0 * hz)
        ghost_w = np.pad(wb, ((1, 1), (0, 0)))
        ghost_w[0] = -wb[0]
        ghost_w[-1] = -wb[-1]
        dwdx = (ghost_w[2:] - ghost_w[:-2]) / (2.0 * hx)
        faces_ua = _pad_x_faces(ua)
        u_at_w = 0.25 * (
            faces_ua[:-1, :-1] + faces_ua[1:, :-1] + faces_ua[:-1, 1:] + faces_ua[1:, 1:]
        )
        adv_w = u_at_w * dwdx + wa * dwdz

        return np.concatenate([adv_u.ravel(), adv_w.ravel()])

    def _buoyancy(self, T: NDArray[np.float64], C: NDArray[np.float64]) -> FloatArray:
        """Pr Ra (T - C) averaged onto the u-faces, zero on the w-faces."""
        contrast = T - C
        on_u = self.pr * self._ra * 0.5 * (contrast[:-1] + contrast[1:])
        return np.concatenate([on_u.ravel(), np.zeros(self.nx * (self.nz - 1))])

    def explicit_momentum(self, state: FloatArray) -> FloatArray:
        """-(u.grad)u + Pr Ra (T - C) x, before the pressure."""
        f = self.layout.split(state)
        return -self._momentum_advection(f["u"], f["w"], f["u"], f["w"]) + self._buoyancy(
            f["T"], f["C"]
        )

    # ------------------------------------------------------------------
    # Pressure
    # ------------------------------------------------------------------

    def solve_pressure(self, source: FloatArray) -> FloatArray:
        """Zero-mean p with (div grad) p = source."""
        total = float(source.sum())
        if abs(total) > PRESSURE_COMPATIBILITY_TOL * max(1.0, float(np.abs(source).sum())):
            logger.warning("pressure_incompatible", source_sum=total)
        rhs = source.copy()
        rhs[0] = 0.0
        p = self._pressure_lu.solve(rhs)
        return p - p.mean()

    def _velocity_tendency(
        self,
        velocity: FloatArray,
        explicit: FloatArray,
        delta_t: float,
    ) -> FloatArray:
        source = self.divergence @ (
            velocity / delta_t + explicit + self.pr * (self.lap_velocity @ velocity)
        )
        return explicit - self.gradient @ self.solve_pressure(source)

    # ------------------------------------------------------------------
    # Problem contract
    # ------------------------------------------------------------------

    def preliminary(
        self,
        state: FloatArray,
        delta_t: float = DEFAULT_DELTA_T,
    ) -> dict[str, FloatArray]:
        """Pressure of the projection step at the velocity block dt."""
        velocity = state[self.layout.block_slice(VELOCITY)]
        source = self.divergence @ (
            velocity / delta_t
            + self.explicit_momentum(state)
            + self.pr * (self.lap_velocity @ velocity)
        )
        return {"p": self.solve_pressure(source).reshape(self.nx, self.nz)}

    def eval_N(self, state: FloatArray, delta_t: Mapping[str, float]) -> FloatArray:
        f = self.layout.split(state)
        velocity = state[self.layout.block_slice(VELOCITY)]
        explicit = self.explicit_momentum(state)
        n_T = -self._scalar_advection(f["u"], f["w"], f["T"], 1.0).ravel() + self._lifting
        n_C = (
            -self._scalar_advection(f["u"], f["w"], f["C"], 1.0).ravel()
            + self.tau * self._lifting
        )
        return np.concatenate(
            [self._velocity_tendency(velocity, explicit, delta_t[VELOCITY]), n_T, n_C]
        )

    def eval_dN(
        self,
        base: FloatArray,
        direction: FloatArray,
        delta_t: Mapping[str, float],
    ) -> FloatArray:
        return self.linearization(base, delta_t)(direction)

    def linearization(
        self,
        base: FloatArray,
        delta_t: Mapping[str, float],
    ) -> Callable[[FloatArray], FloatArray]:
        b = self.layout.split(base)
        dt_velocity = delta_t[VELOCITY]
        block = self.layout.block_slice(VELOCITY)

        def apply(direction: FloatArray) -> FloatArray:
            d = self.layout.split(direction)
            explicit = -(
                self._momentum_advection(b["u"], b["w"], d["u"], d["w"])
                + self._momentum_advection(d["u"], d["w"], b["u"], b["w"])
            ) + self._buoyancy(d["T"], d["C"])
            n_T = -(
                self._scalar_advection(b["u"], b["w"], d["T"], 0.0)
                + self._scalar_advection(d["u"], d["w"], b["T"], 1.0)
            )
            n_C = -(
                self._scalar_advection(b["u"], b["w"], d["C"], 0.0)
                + self._scalar_advection(d["u"], d["w"], b["C"], 1.0)
            )
            return np.concatenate(
                [
                    self._velocity_tendency(direction[block], explicit, dt_velocity),
                    n_T.ravel(),
                    n_C.ravel(),
                ]
            )

        return apply

    def apply_L(self, vector: FloatArray) -> FloatArray:
        f = self.layout
        return np.concatenate(
            [
                self.pr * (self.lap_velocity @ vector[f.block_slice(VELOCITY)]),
                self.lap_scalar @ vector[f.block_slice(TEMPERATURE)],
                self.tau * (self.lap_scalar @ vector[f.block_slice(CONCENTRATION)]),
            ]
        )

    def assemble_L(self) -> sparse.csr_matrix:
        """Sparse form of apply_L (the Stokes operator without pressure)."""
        return sparse.block_diag(
            [self.pr * self.lap_velocity, self.lap_scalar, self.tau * self.lap_scalar],
            format="csr",
        )

    def project_null_modes(self, vector: FloatArray) -> FloatArray:
        """L has no null modes: no-slip velocity, fixed T and C at the z-walls."""
        return vector

    def solve_L(self, rhs: FloatArray) -> FloatArray:
        return spsolve(self.assemble_L().tocsc(), rhs)

    def _factor(self, block: str, delta_t: float) -> SuperLU:
        key = (block, delta_t)
        if key not in self._shifted:
            if block == VELOCITY:
                op = self.pr * self.lap_velocity
            elif block == TEMPERATURE:
                op = self.lap_scalar
            else:
                op = self.tau * self.lap_scalar
            shifted = sparse.identity(op.shape[0], format="csc") - delta_t * op.tocsc()
            self._shifted[key] = splu(shifted.tocsc())
            logger.debug("shifted_operator_factored", block=block, delta_t=delta_t)
        return self._shifted[key]

    def solve_shifted(self, delta_t: Mapping[str, float], rhs: FloatArray) -> FloatArray:
        out = np.empty_like(rhs)
        for block in self.layout.block_names:
            block_slice = self.layout.block_slice(block)
            out[block_slice] = self._factor(block, delta_t[block]).solve(rhs[block_slice])
        return out

    # ------------------------------------------------------------------
    # Stage-wise steps
    # ------------------------------------------------------------------

    def step_scalar(
        self,
        state: FloatArray,
        name: str,
        delta_t: float,
    ) -> NDArray[np.float64]:
        """Implicit-Euler step of T ("T") or C ("C") advected by the state's velocity."""
        f = self.layout.split(state)
        diffusivity = 1.0 if name == "T" else self.tau
        block = TEMPERATURE if name == "T" else CONCENTRATION
        tendency = -self._scalar_advection(f["u"], f["w"], f[name], 1.0).ravel()
        rhs = f[name].ravel() + delta_t * (tendency + diffusivity * self._lifting)
        return self._factor(block, delta_t).solve(rhs).reshape(self.nx, self.nz)

    def step_momentum(self, state: FloatArray, delta_t: float) -> MomentumStages:
        """Explicit predictor, pressure projection, implicit viscous solve."""
        velocity = state[self.layout.block_slice(VELOCITY)]
        predicted = velocity + delta_t * self.explicit_momentum(state)
        viscous = self.pr * (self.lap_velocity @ velocity)
        pressure = self.solve_pressure(self.divergence @ (predicted / delta_t + viscous))
        grad_p = self.gradient @ pressure
        corrected = predicted - delta_t * grad_p
        return MomentumStages(
            predicted=predicted,
            pressure=pressure,
            projected=corrected + delta_t * viscous,
            corrected=corrected,
            velocity=self._factor(VELOCITY, delta_t).solve(corrected),
        )

    def step(self, state: FloatArray, delta_t: float) -> FloatArray:
        """One full time step with the same dt on every block."""
        steps = dict.fromkeys(self.layout.block_names, delta_t)
        return self.solve_shifted(steps, state + delta_t * self.eval_N(state, steps))

    def integrate(self, state: FloatArray, delta_t: float, steps: int) -> FloatArray:
        """March ``steps`` time steps; used to reach a convecting seed."""
        current = np.array(state, dtype=np.float64, copy=True)
        for n in range(steps):
            current = self.step(current, delta_t)
            if not np.all(np.isfinite(current)):
                raise ContinuationError(
                    "time integration diverged", details={"step": n, "delta_t": delta_t}
                )
            if (n + 1) % 500 == 0:
                logger.info(
                    "time_integration_progress",
                    step=n + 1,
                    kinetic_energy=self.kinetic_energy(current),
                )
        return current
