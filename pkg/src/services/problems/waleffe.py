"""Reduced plane-Waleffe model.

Unknowns on the (y, z) cross-section:

    u0      streamwise-invariant streamwise velocity   real, cosine parity
    omega   streamwise vorticity                       real, sine parity
    v, w    fluctuation amplitudes at wavenumber alpha  complex, sine / cosine parity

with the streamfunction phi = lap^-1 omega and the fluctuation pressure
p = 2i alpha (alpha^2 - lap)^-1 (v dy u0 + w dz u0) as derived fields.
Mean equations evolve on the slow time eps * t, so in fast time

    d(u0, omega)/dt = eps * (N11, N12) + eps * lap (u0, omega)
    d(v, w)/dt      = N2 + eps * lap (v, w)

with N11 = -J(phi, u0) + forcing,
     N12 = -J(phi, omega) - 2 (dyy - dzz) Re(v w*) - 2 dy dz (|w|^2 - |v|^2),
     N2  = -i alpha u0 (v, w) - grad p.

Every nonlinear term is a bilinear form B(x, y) of the state, which gives
N(x) = forcing + B(x, x) and dN(x) d = B(x, d) + B(d, x). Products are
taken in physical space on the full y-node set and dealiased afterwards.

The mean of u0 is a conserved gauge (no equation changes it); the shifted
solve pins it to zero, so states on the branch have zero-mean u0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from src.models.config import PreconditionerBlock, PreconditionerSpec, WaleffeConfig
from src.models.domain import Parity
from src.services.problems.base import FieldSlot, Problem, StateLayout
from src.services.spectral.grid import SpectralGrid

if TYPE_CHECKING:
    from collections.abc import Callable, Mapping

    from numpy.typing import NDArray

    from src.models.domain import FloatArray
    from src.services.spectral.grid import ComplexArray

MEAN = "mean"
FLUCTUATION = "fluctuation"

COS = Parity.COSINE
SIN = Parity.SINE

FORCING_AMPLITUDE = np.sqrt(2.0) * np.pi**2 / 4.0
LAMINAR_AMPLITUDE = np.sqrt(2.0)
DEFAULT_FLUCTUATION_STEP = 2.0


@dataclass(frozen=True, slots=True)
class _Spectra:
    u0: ComplexArray
    omega: ComplexArray
    v: ComplexArray
    w: ComplexArray


@dataclass(frozen=True, slots=True)
class _Prepared:
    """Physical full-node fields entering the bilinear terms."""

    u0: NDArray[np.float64]
    du0y: NDArray[np.float64]
    du0z: NDArray[np.float64]
    dphiy: NDArray[np.float64]
    dphiz: NDArray[np.float64]
    domegay: NDArray[np.float64]
    domegaz: NDArray[np.float64]
    v: ComplexArray
    w: ComplexArray


@dataclass(frozen=True, slots=True)
class _Tendency:
    """Spectral nonlinear terms (N11, N12, N2_v, N2_w)."""

    u0: ComplexArray
    omega: ComplexArray
    v: ComplexArray
    w: ComplexArray

    def __add__(self, other: _Tendency) -> _Tendency:
        return _Tendency(
            self.u0 + other.u0,
            self.omega + other.omega,
            self.v + other.v,
            self.w + other.w,
        )


class WaleffeProblem(Problem):
    """Two-block Waleffe problem with the Reynolds number as parameter."""

    name = "waleffe"

    def __init__(self, config: WaleffeConfig | None = None) -> None:
        config = config or WaleffeConfig()
        self.config = config
        self.grid = SpectralGrid(config.n_y, config.n_z, config.l_z)
        self.alpha = config.alpha
        self._re = config.re

        cos_shape = self.grid.shape(COS)
        sin_shape = self.grid.shape(SIN)
        self.layout = StateLayout(
            [
                FieldSlot("u0", MEAN, cos_shape),
                FieldSlot("omega", MEAN, sin_shape),
                FieldSlot("v_re", FLUCTUATION, sin_shape),
                FieldSlot("v_im", FLUCTUATION, sin_shape),
                FieldSlot("w_re", FLUCTUATION, cos_shape),
                FieldSlot("w_im", FLUCTUATION, cos_shape),
            ]
        )
        y, _ = self.grid.mesh(COS)
        self._forcing = self.grid.analyze(FORCING_AMPLITUDE * np.sin(np.pi * y / 2.0), COS)

    # ------------------------------------------------------------------
    # Parameters
    # ------------------------------------------------------------------

    @property
    def parameter(self) -> float:
        return self._re

    @parameter.setter
    def parameter(self, value: float) -> None:
        if value <= 0.0:
            raise ValueError("the Reynolds number must be positive")
        self._re = float(value)

    @property
    def epsilon(self) -> float:
        return 1.0 / self._re

    def parameter_values(self) -> dict[str, float]:
        return {
            "re": self._re,
            "alpha": self.alpha,
            "l_z": self.config.l_z,
            "n_y": self.config.n_y,
            "n_z": self.config.n_z,
        }

    def default_preconditioner(self) -> PreconditionerSpec:
        """dt_1 = Re turns the mean-block shift into I - lap."""
        return PreconditionerSpec(
            blocks=(
                PreconditionerBlock(name=MEAN, delta_t="parameter"),
                PreconditionerBlock(name=FLUCTUATION, delta_t=DEFAULT_FLUCTUATION_STEP),
            )
        )

    def metric_diffusivity(self, block: str) -> float:
        return self.epsilon

    # ------------------------------------------------------------------
    # States
    # ------------------------------------------------------------------

    def laminar_state(self) -> FloatArray:
        """u0 = sqrt(2) sin(pi y / 2), everything else at rest."""
        y, _ = self.grid.mesh(COS)
        fields = {slot.name: np.zeros(slot.shape) for slot in self.layout.fields}
        fields["u0"] = LAMINAR_AMPLITUDE * np.sin(np.pi * y / 2.0)
        return self.layout.join(fields)

    def random_state(self, rng: np.random.Generator, amplitude: float = 1.0) -> FloatArray:
        """Dealiased random state with zero-mean u0."""
        fields: dict[str, FloatArray] = {}
        for slot in self.layout.fields:
            parity = COS if slot.name in ("u0", "w_re", "w_im") else SIN
            coeffs = self.grid.dealias_coeffs(
                self.grid.analyze(amplitude * rng.standard_normal(slot.shape), parity), parity
            )
            if slot.name == "u0":
                coeffs[0, 0] = 0.0
            fields[slot.name] = self.grid.synthesize_real(coeffs, parity)
        return self.layout.join(fields)

    def n_u(self, state: FloatArray) -> float:
        """Domain average of u0^2 (laminar flow has N_u = 1)."""
        return self.grid.mean_square(self.layout.view(state, "u0"), COS)

    def diagnostic(self, state: FloatArray) -> float:
        return self.n_u(state)

    # ------------------------------------------------------------------
    # Transforms between the flat state and spectral fields
    # ------------------------------------------------------------------

    def _spectra(self, state: FloatArray) -> _Spectra:
        f = self.layout.split(state)
        return _Spectra(
            u0=self.grid.analyze(f["u0"], COS),
            omega=self.grid.analyze(f["omega"], SIN),
            v=self.grid.analyze(f["v_re"] + 1j * f["v_im"], SIN),
            w=self.grid.analyze(f["w_re"] + 1j * f["w_im"], COS),
        )

    def _state(
        self,
        u0: ComplexArray,
        omega: ComplexArray,
        v: ComplexArray,
        w: ComplexArray,
    ) -> FloatArray:
        grid = self.grid
        v_phys = grid.synthesize(v, SIN)
        w_phys = grid.synthesize(w, COS)
        return self.layout.join(
            {
                "u0": grid.synthesize_real(u0, COS),
                "omega": grid.synthesize_real(omega, SIN),
                "v_re": v_phys.real,
                "v_im": v_phys.imag,
                "w_re": w_phys.real,
                "w_im": w_phys.imag,
            }
        )

    def _streamfunction(self, omega: ComplexArray) -> ComplexArray:
        return -self.grid.helmholtz(omega, SIN, 0.0)

    def _prepare(self, s: _Spectra) -> _Prepared:
        grid = self.grid

        def cos_phys(coeffs: ComplexArray) -> NDArray[np.float64]:
            return grid.synthesize_real(coeffs, COS)

        def sin_phys(coeffs: ComplexArray) -> NDArray[np.float64]:
            return grid.to_full(grid.synthesize_real(coeffs, SIN), SIN)

        phi = self._streamfunction(s.omega)
        return _Prepared(
            u0=cos_phys(s.u0),
            du0y=sin_phys(grid.dy(s.u0, COS)[0]),
            du0z=cos_phys(grid.dz(s.u0)),
            dphiy=cos_phys(grid.dy(phi, SIN)[0]),
            dphiz=sin_phys(grid.dz(phi)),
            domegay=cos_phys(grid.dy(s.omega, SIN)[0]),
            domegaz=sin_phys(grid.dz(s.omega)),
            v=grid.to_full(grid.synthesize(s.v, SIN), SIN),
            w=grid.synthesize(s.w, COS),
        )

    def _project(self, values: np.ndarray, parity: Parity) -> ComplexArray:
        """Full-node product -> dealiased spectrum."""
        grid = self.grid
        return grid.dealias_coeffs(grid.analyze(grid.from_full(values, parity), parity), parity)

    # ------------------------------------------------------------------
    # Bilinear terms
    # ------------------------------------------------------------------

    def _pressure(self, x: _Prepared, y: _Prepared) -> ComplexArray:
        source = self._project(x.v * y.du0y + x.w * y.du0z, COS)
        return 2j * self.alpha * self.grid.helmholtz(source, COS, self.alpha**2)

    def _bilinear(self, x: _Prepared, y: _Prepared) -> _Tendency:
        grid = self.grid
        jac_u0 = self._project(x.dphiy * y.du0z - x.dphiz * y.du0y, COS)
        jac_omega = self._project(x.dphiy * y.domegaz - x.dphiz * y.domegay, SIN)
        stress = self._project(np.real(x.v * np.conj(y.w)), SIN)
        normal = self._project(
            np.real(x.w * np.conj(y.w)) - np.real(x.v * np.conj(y.v)), COS
        )
        pressure = self._pressure(x, y)

        n12 = (
            -jac_omega
            - 2.0 * (grid.dyy(stress, SIN) - grid.dz(stress, 2))
            - 2.0 * grid.dz(grid.dy(normal, COS)[0], 1)
        )
        n2_v = -1j * self.alpha * self._project(y.u0 * x.v, SIN) - grid.dy(pressure, COS)[0]
        n2_w = -1j * self.alpha * self._project(y.u0 * x.w, COS) - grid.dz(pressure, 1)
        return _Tendency(u0=-jac_u0, omega=n12, v=n2_v, w=n2_w)

    def _to_state(self, tendency: _Tendency, *, forcing: bool) -> FloatArray:
        n11 = tendency.u0 + self._forcing if forcing else tendency.u0
        eps = self.epsilon
        return self._state(eps * n11, eps * tendency.omega, tendency.v, tendency.w)

    # ------------------------------------------------------------------
    # Problem contract
    # ------------------------------------------------------------------

    def preliminary(self, state: FloatArray) -> dict[str, FloatArray]:
        """Streamfunction and fluctuation pressure of ``state``."""
        s = self._spectra(state)
        prepared = self._prepare(s)
        pressure = self.grid.synthesize(self._pressure(prepared, prepared), COS)
        return {
            "phi": self.grid.synthesize_real(self._streamfunction(s.omega), SIN),
            "p_re": pressure.real,
            "p_im": pressure.imag,
        }

    def eval_N(self, state: FloatArray, delta_t: Mapping[str, float]) -> FloatArray:
        prepared = self._prepare(self._spectra(state))
        return self._to_state(self._bilinear(prepared, prepared), forcing=True)

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
        prepared_base = self._prepare(self._spectra(base))

        def apply(direction: FloatArray) -> FloatArray:
            d = self._prepare(self._spectra(direction))
            tendency = self._bilinear(prepared_base, d) + self._bilinear(d, prepared_base)
            return self._to_state(tendency, forcing=False)

        return apply

    def apply_L(self, vector: FloatArray) -> FloatArray:
        s = self._spectra(vector)
        grid, eps = self.grid, self.epsilon
        return self._state(
            eps * grid.laplacian(s.u0, COS),
            eps * grid.laplacian(s.omega, SIN),
            eps * grid.laplacian(s.v, SIN),
            eps * grid.laplacian(s.w, COS),
        )

    def solve_shifted(self, delta_t: Mapping[str, float], rhs: FloatArray) -> FloatArray:
        s = self._spectra(rhs)
        grid, eps = self.grid, self.epsilon
        mean = eps * delta_t[MEAN]
        fluct = eps * delta_t[FLUCTUATION]
        u0 = grid.shifted_inverse(s.u0, COS, mean)
        u0[0, 0] = 0.0
        return self._state(
            u0,
            grid.shifted_inverse(s.omega, SIN, mean),
            grid.shifted_inverse(s.v, SIN, fluct),
            grid.shifted_inverse(s.w, COS, fluct),
        )

    def project_null_modes(self, vector: FloatArray) -> FloatArray:
        """Drop the cosine mean modes of u0 and w, which L annihilates."""
        s = self._spectra(vector)
        u0, w = s.u0.copy(), s.w.copy()
        u0[0, 0] = 0.0
        w[0, 0] = 0.0
        return self._state(u0, s.omega, s.v, w)

    def solve_L(self, rhs: FloatArray) -> FloatArray:
        """L^-1 rhs on the complement of the null modes."""
        s = self._spectra(self.project_null_modes(rhs))
        grid, eps = self.grid, self.epsilon
        return self._state(
            -grid.helmholtz(s.u0, COS, 0.0) / eps,
            -grid.helmholtz(s.omega, SIN, 0.0) / eps,
            -grid.helmholtz(s.v, SIN, 0.0) / eps,
            -grid.helmholtz(s.w, COS, 0.0) / eps,
        )

    # ------------------------------------------------------------------
    # Euler steps with explicit block steps
    # ------------------------------------------------------------------

    def _steps(self, dt_mean: float, dt_fluct: float) -> dict[str, float]:
        return {MEAN: dt_mean, FLUCTUATION: dt_fluct}

    def step(self, state: FloatArray, dt_mean: float, dt_fluct: float) -> FloatArray:
        """One split-block Euler step (explicit N, implicit diffusion)."""
        steps = self._steps(dt_mean, dt_fluct)
        dt = self.layout.broadcast(steps)
        return self.solve_shifted(steps, state + dt * self.eval_N(state, steps))

    def linearized_step(
        self,
        base: FloatArray,
        direction: FloatArray,
        dt_mean: float,
        dt_fluct: float,
    ) -> FloatArray:
        steps = self._steps(dt_mean, dt_fluct)
        dt = self.layout.broadcast(steps)
        return self.solve_shifted(steps, direction + dt * self.eval_dN(base, direction, steps))
