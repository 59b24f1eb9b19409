"""Cosine/sine x Fourier transforms on the (y, z) cross-section.

y spans [-1, 1] on N = n_y intervals with nodes y_n = -1 + 2n/N. The wall
condition of a field decides its y-expansion:

    cosine parity (Neumann walls):   f(y_n) = sum_{k=0..N}   a_k cos(k pi (y_n + 1) / 2)
    sine parity (Dirichlet walls):   f(y_n) = sum_{k=1..N-1} b_k sin(k pi (y_n + 1) / 2)

Cosine fields live on all N + 1 nodes (DCT-I), sine fields only on the
N - 1 interior nodes (DST-I); the wall values of a sine field are zero by
construction. z is periodic on [0, L_z) with n_z points and a plain FFT.

Spectral arrays are complex with shape (modes_y, n_z). Complex physical
fields (the fluctuation amplitudes) are transformed in y by acting on the
real and imaginary parts separately.
"""

from __future__ import annotations

from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy import fft

from src.core.exceptions import CompatibilityError
from src.models.domain import Field2D, Parity, Representation

ComplexArray = NDArray[np.complex128]
Axis = Literal["y", "z"]

COMPATIBILITY_TOL = 1e-10


def _flip(parity: Parity) -> Parity:
    return Parity.SINE if parity is Parity.COSINE else Parity.COSINE


class SpectralGrid:
    """Immutable transform plan and wavenumber tables for one resolution."""

    def __init__(self, n_y: int = 32, n_z: int = 32, l_z: float = np.pi) -> None:
        if n_y < 4 or n_z < 4:
            raise ValueError("spectral grids need at least 4 points per direction")
        if n_z % 2:
            raise ValueError("n_z must be even")
        self.n_y = n_y
        self.n_z = n_z
        self.l_y = 2.0
        self.l_z = float(l_z)

        self.y = -1.0 + 2.0 * np.arange(n_y + 1) / n_y
        self.z = self.l_z * np.arange(n_z) / n_z

        self._ky = {
            Parity.COSINE: (np.pi / 2.0) * np.arange(n_y + 1, dtype=np.float64),
            Parity.SINE: (np.pi / 2.0) * np.arange(1, n_y, dtype=np.float64),
        }
        self.kz = 2.0 * np.pi * fft.fftfreq(n_z, d=self.l_z / n_z)
        # Odd z-derivatives cannot represent the Nyquist mode of a real field.
        self._kz_odd = self.kz.copy()
        self._kz_odd[n_z // 2] = 0.0

        z_index = np.abs(fft.fftfreq(n_z) * n_z)
        keep_z = z_index < n_z / 3.0
        self._mask = {
            parity: np.outer(self._y_index(parity) < 2.0 * n_y / 3.0, keep_z)
            for parity in Parity
        }

    # ------------------------------------------------------------------
    # Geometry
    # ------------------------------------------------------------------

    def _y_index(self, parity: Parity) -> NDArray[np.int64]:
        if parity is Parity.COSINE:
            return np.arange(self.n_y + 1)
        return np.arange(1, self.n_y)

    def shape(self, parity: Parity) -> tuple[int, int]:
        rows = self.n_y + 1 if parity is Parity.COSINE else self.n_y - 1
        return rows, self.n_z

    def y_nodes(self, parity: Parity) -> NDArray[np.float64]:
        return self.y if parity is Parity.COSINE else self.y[1:-1]

    def mesh(self, parity: Parity) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """(Y, Z) coordinate arrays matching ``shape(parity)``."""
        return np.meshgrid(self.y_nodes(parity), self.z, indexing="ij")

    def ky(self, parity: Parity) -> NDArray[np.float64]:
        return self._ky[parity]

    def _check(self, values: np.ndarray, parity: Parity) -> None:
        if values.shape != self.shape(parity):
            raise ValueError(
                f"{parity.value} field has shape {values.shape}, grid expects {self.shape(parity)}"
            )

    # ------------------------------------------------------------------
    # Array-level transforms
    # ------------------------------------------------------------------

    def analyze(self, values: np.ndarray, parity: Parity) -> ComplexArray:
        """Physical values -> spectral coefficients."""
        self._check(values, parity)
        hat = fft.fft(values, axis=1) / self.n_z
        n = self.n_y
        if parity is Parity.COSINE:
            coeffs = (
                fft.dct(hat.real, type=1, axis=0) + 1j * fft.dct(hat.imag, type=1, axis=0)
            ) / n
            coeffs[0] *= 0.5
            coeffs[-1] *= 0.5
            return coeffs
        return (fft.dst(hat.real, type=1, axis=0) + 1j * fft.dst(hat.imag, type=1, axis=0)) / n

    def synthesize(self, coeffs: ComplexArray, parity: Parity) -> ComplexArray:
        """Spectral coefficients -> physical values (complex)."""
        self._check(coeffs, parity)
        if parity is Parity.COSINE:
            scaled = coeffs.copy()
            scaled[0] *= 2.0
            scaled[-1] *= 2.0
            hat = 0.5 * (
                fft.dct(scaled.real, type=1, axis=0) + 1j * fft.dct(scaled.imag, type=1, axis=0)
            )
        else:
            hat = 0.5 * (
                fft.dst(coeffs.real, type=1, axis=0) + 1j * fft.dst(coeffs.imag, type=1, axis=0)
            )
        return fft.ifft(hat, axis=1) * self.n_z

    def synthesize_real(self, coeffs: ComplexArray, parity: Parity) -> NDArray[np.float64]:
        return self.synthesize(coeffs, parity).real

    def to_full(self, values: np.ndarray, parity: Parity) -> np.ndarray:
        """Values on all N + 1 y-nodes; sine fields gain their zero walls."""
        if parity is Parity.COSINE:
            return values
        full = np.zeros((self.n_y + 1, self.n_z), dtype=values.dtype)
        full[1:-1] = values
        return full

    def from_full(self, values: np.ndarray, parity: Parity) -> np.ndarray:
        return values if parity is Parity.COSINE else values[1:-1]

    # ------------------------------------------------------------------
    # Array-level operators
    # ------------------------------------------------------------------

    def dy(self, coeffs: ComplexArray, parity: Parity) -> tuple[ComplexArray, Parity]:
        """First y-derivative; the parity flips."""
        n = self.n_y
        if parity is Parity.COSINE:
            # d/dy cos(k_y (y+1)) = -k_y sin(k_y (y+1)), k = 1..N-1
            return -self._ky[Parity.SINE][:, None] * coeffs[1:n], Parity.SINE
        out = np.zeros((n + 1, self.n_z), dtype=np.complex128)
        out[1:n] = self._ky[Parity.SINE][:, None] * coeffs
        return out, Parity.COSINE

    def dyy(self, coeffs: ComplexArray, parity: Parity) -> ComplexArray:
        return -(self._ky[parity] ** 2)[:, None] * coeffs

    def dz(self, coeffs: ComplexArray, order: int = 1) -> ComplexArray:
        if order == 1:
            return 1j * self._kz_odd[None, :] * coeffs
        if order == 2:
            return -(self.kz**2)[None, :] * coeffs
        raise ValueError(f"unsupported z-derivative order {order}")

    def laplacian(self, coeffs: ComplexArray, parity: Parity) -> ComplexArray:
        return self.dyy(coeffs, parity) + self.dz(coeffs, 2)

    def helmholtz(self, coeffs: ComplexArray, parity: Parity, shift: float) -> ComplexArray:
        """(shift - laplacian)^-1 applied diagonally.

        With ``shift = 0`` the cosine mean mode is singular: the right-hand
        side must have zero mean and the output mean is set to zero.
        """
        if shift < 0.0:
            raise ValueError("Helmholtz shift must be non-negative")
        denominator = shift + self._ky[parity][:, None] ** 2 + (self.kz**2)[None, :]
        if parity is Parity.COSINE and shift == 0.0:
            mean = coeffs[0, 0]
            scale = max(1.0, float(np.max(np.abs(coeffs))))
            if abs(mean) > COMPATIBILITY_TOL * scale:
                raise CompatibilityError(
                    "Poisson right-hand side has a non-zero mean",
                    details={"mean": complex(mean)},
                )
            denominator = denominator.copy()
            denominator[0, 0] = 1.0
            out = coeffs / denominator
            out[0, 0] = 0.0
            return out
        return coeffs / denominator

    def shifted_inverse(
        self, coeffs: ComplexArray, parity: Parity, diffusion: float
    ) -> ComplexArray:
        """(I - diffusion * laplacian)^-1, for implicit diffusion steps."""
        denominator = 1.0 + diffusion * (
            self._ky[parity][:, None] ** 2 + (self.kz**2)[None, :]
        )
        return coeffs / denominator

    def dealias_coeffs(self, coeffs: ComplexArray, parity: Parity) -> ComplexArray:
        return np.where(self._mask[parity], coeffs, 0.0)

    def dealias_mask(self, parity: Parity) -> NDArray[np.bool_]:
        return self._mask[parity]

    # ------------------------------------------------------------------
    # Field2D interface
    # ------------------------------------------------------------------

    def forward(self, field: Field2D) -> Field2D:
        if field.representation is not Representation.PHYSICAL:
            raise ValueError("forward transform expects a physical field")
        return Field2D(
            values=self.analyze(np.asarray(field.values), field.parity),
            representation=Representation.SPECTRAL,
            parity=field.parity,
        )

    def inverse(self, field: Field2D) -> Field2D:
        if field.representation is not Representation.SPECTRAL:
            raise ValueError("inverse transform expects a spectral field")
        return Field2D(
            values=self.synthesize(np.asarray(field.values), field.parity),
            representation=Representation.PHYSICAL,
            parity=field.parity,
        )

    def derivative(self, field: Field2D, direction: Axis, order: int = 1) -> Field2D:
        if field.representation is not Representation.SPECTRAL:
            raise ValueError("derivatives act on spectral fields")
        if order not in (1, 2):
            raise ValueError(f"unsupported derivative order {order}")
        coeffs = np.asarray(field.values, dtype=np.complex128)
        parity = field.parity
        if direction == "z":
            values = self.dz(coeffs, order)
        elif order == 2:
            values = self.dyy(coeffs, parity)
        else:
            values, parity = self.dy(coeffs, parity)
        return Field2D(values=values, representation=Representation.SPECTRAL, parity=parity)

    def solve_helmholtz(self, field: Field2D, shift: float) -> Field2D:
        if field.representation is not Representation.SPECTRAL:
            raise ValueError("Helmholtz solves act on spectral fields")
        return Field2D(
            values=self.helmholtz(np.asarray(field.values), field.parity, shift),
            representation=Representation.SPECTRAL,
            parity=field.parity,
        )

    def dealias(self, field: Field2D) -> Field2D:
        if field.representation is not Representation.SPECTRAL:
            raise ValueError("dealiasing acts on spectral fields")
        return Field2D(
            values=self.dealias_coeffs(np.asarray(field.values), field.parity),
            representation=Representation.SPECTRAL,
            parity=field.parity,
        )

    # ------------------------------------------------------------------
    # Quadrature
    # ------------------------------------------------------------------

    def mean_square(self, values: np.ndarray, parity: Parity) -> float:
        """Domain average of |f|^2: trapezoid in y, rectangle rule in z."""
        full = self.to_full(values, parity)
        weights = np.full(self.n_y + 1, 2.0 / self.n_y)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        integral = float(weights @ np.sum(np.abs(full) ** 2, axis=1)) * (self.l_z / self.n_z)
        return integral / (self.l_y * self.l_z)
