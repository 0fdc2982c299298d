"""Fourier-side core for doubly periodic scalar transport.

Fields live on an n-by-n periodic grid. Spectral coefficients follow the
Fourier-series convention ``f(x) = sum_k c_k exp(i k.x)`` so that single
trigonometric modes have coefficients of size 1/2 and Parseval holds with
the domain-normalized measure. All nonlocal operators (fractional
Laplacian, Riesz transforms, the two velocity laws) are diagonal
multipliers in this basis.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

__all__ = [
    "GridSpec",
    "RealField",
    "SpectralField",
    "VectorField",
    "VelocityLaw",
    "validate_alpha",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "fractional_laplacian",
    "riesz_transform",
    "compute_velocity",
    "gradient",
    "divergence",
    "dealias",
    "project_mean_zero",
]

_HERMITIAN_TOL = 1e-10
_MEAN_TOL = 1e-10


class VelocityLaw(enum.Enum):
    """Reconstruction rule for the advecting velocity.

    PERP rotates the gradient of the inverse-fractional-Laplacian
    potential (divergence-free); GRAD takes the plain gradient of the
    same potential (compressible companion model).
    """

    PERP = "perp"
    GRAD = "grad"


def validate_alpha(alpha: float) -> float:
    """Check the interpolation exponent lies in (0, 1/2]."""
    alpha = float(alpha)
    if not 0.0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2], got {alpha}")
    return alpha


@dataclass(frozen=True)
class GridSpec:
    """Uniform n-by-n grid on the periodic square [0, length)^2."""

    n: int
    length: float = 2.0 * np.pi

    def __post_init__(self):
        if self.n < 4 or self.n % 2 != 0:
            raise ValueError(f"grid size must be an even integer >= 4, got {self.n}")
        if not self.length > 0.0:
            raise ValueError(f"domain period must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    def axis(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample points (X1, X2) with axis 0 along x1 and axis 1 along x2."""
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")


@lru_cache(maxsize=None)
def _wavenumbers(grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # integer mode numbers scaled by 2*pi/length; arrays are read-only views
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n) * (2.0 * np.pi / grid.length)
    k1 = np.broadcast_to(k[:, None], (grid.n, grid.n))
    k2 = np.broadcast_to(k[None, :], (grid.n, grid.n))
    kmag = np.hypot(k1, k2)
    kmag.flags.writeable = False
    return k1, k2, kmag


@lru_cache(maxsize=None)
def _dealias_mask(grid: GridSpec) -> np.ndarray:
    # 2/3 rule on integer mode numbers, independent of the domain period
    k = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    keep = np.maximum(np.abs(k[:, None]), np.abs(k[None, :])) <= grid.n / 3.0
    keep.flags.writeable = False
    return keep


@dataclass(frozen=True)
class RealField:
    """Real scalar samples on a grid, values[i, j] = f(x1_i, x2_j)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"field shape {values.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: GridSpec, fn: Callable) -> "RealField":
        x1, x2 = grid.mesh()
        return cls(grid, np.asarray(fn(x1, x2), dtype=np.float64))

    @classmethod
    def zeros(cls, grid: GridSpec) -> "RealField":
        return cls(grid, np.zeros((grid.n, grid.n)))

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients indexed by wavenumber in FFT layout."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "coeffs", coeffs)


@dataclass(frozen=True)
class VectorField:
    """Velocity components on a shared grid."""

    u1: RealField
    u2: RealField

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("velocity components must share a grid")

    @property
    def grid(self) -> GridSpec:
        return self.u1.grid

    def max_speed(self) -> float:
        return float(
            max(np.max(np.abs(self.u1.values)), np.max(np.abs(self.u2.values)))
        )


def forward_transform(f: RealField) -> SpectralField:
    """Fourier-series coefficients of a real field.

    Normalized so that Parseval reads ``mean(f^2) = sum_k |c_k|^2``.
    """
    if not np.all(np.isfinite(f.values)):
        bad = int(np.count_nonzero(~np.isfinite(f.values)))
        raise ValueError(f"field has {bad} non-finite sample(s); refusing to transform")
    n = f.grid.n
    return SpectralField(f.grid, np.fft.fft2(f.values) / (n * n))


def _hermitian_defect(coeffs: np.ndarray) -> float:
    mirrored = np.conj(np.roll(coeffs[::-1, ::-1], 1, axis=(0, 1)))
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(coeffs - mirrored)) / scale)


def inverse_transform(F: SpectralField) -> RealField:
    """Back to physical samples; input must be Hermitian-symmetric."""
    defect = _hermitian_defect(F.coeffs)
    if defect > _HERMITIAN_TOL:
        raise ValueError(
            f"coefficients are not Hermitian-symmetric (relative defect {defect:.3e}); "
            "the field would not be real"
        )
    n = F.grid.n
    return RealField(F.grid, np.real(np.fft.ifft2(F.coeffs * (n * n))))


def apply_multiplier(F: SpectralField, symbol: Callable) -> SpectralField:
    """Multiply coefficients by symbol(k1, k2).

    ``symbol`` is evaluated vectorized on the wavenumber mesh. A symbol
    that is singular at k = 0 is set to zero there, which is only legal
    when the input has (numerically) zero mean.
    """
    k1, k2, _ = _wavenumbers(F.grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.asarray(symbol(k1, k2), dtype=np.complex128)
    if sym.shape != F.coeffs.shape:
        sym = np.broadcast_to(sym, F.coeffs.shape).copy()
    else:
        sym = sym.copy()
    if not np.isfinite(sym[0, 0]):
        scale = np.sqrt(np.sum(np.abs(F.coeffs) ** 2))
        if abs(F.coeffs[0, 0]) > _MEAN_TOL * max(scale, 1e-300):
            raise ValueError(
                "symbol is singular at k = 0 but the input has nonzero mean "
                f"(|c_0| = {abs(F.coeffs[0, 0]):.3e})"
            )
        sym[0, 0] = 0.0
    bad = ~np.isfinite(sym)
    if np.any(bad):
        raise ValueError(f"symbol is non-finite at {int(np.count_nonzero(bad))} wavenumber(s)")
    return SpectralField(F.grid, sym * F.coeffs)


def fractional_laplacian(F: SpectralField, s: float) -> SpectralField:
    """Multiplier |k|^s (zero at k = 0 for negative powers, mean permitting)."""
    return apply_multiplier(F, lambda k1, k2: np.hypot(k1, k2) ** s)


def riesz_transform(F: SpectralField, axis: int) -> SpectralField:
    """Riesz transform along axis 1 or 2, symbol i k_j / |k|."""
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 or 2, got {axis}")

    def symbol(k1, k2):
        kj = k1 if axis == 1 else k2
        return 1j * kj / np.hypot(k1, k2)

    return apply_multiplier(F, symbol)


@lru_cache(maxsize=None)
def _velocity_symbols(
    grid: GridSpec, alpha: float, law: VelocityLaw
) -> tuple[np.ndarray, np.ndarray]:
    """Multiplier pair turning scalar coefficients into (u1, u2) coefficients."""
    k1, k2, kmag = _wavenumbers(grid)
    with np.errstate(divide="ignore", invalid="ignore"):
        potential = kmag ** (-2.0 + 2.0 * alpha)
    potential[0, 0] = 0.0
    if law is VelocityLaw.PERP:
        m1 = 1j * k2 * potential
        m2 = -1j * k1 * potential
    else:
        m1 = 1j * k1 * potential
        m2 = 1j * k2 * potential
    m1.flags.writeable = False
    m2.flags.writeable = False
    return m1, m2


def compute_velocity(theta: RealField, alpha: float, law: VelocityLaw) -> VectorField:
    """Reconstruct the advecting velocity from the scalar.

    PERP gives u = (d2, -d1) |k|^(-2+2a) theta (divergence-free), GRAD
    gives u = (d1, d2) |k|^(-2+2a) theta. The scalar must be mean-zero
    since the potential multiplier is singular at k = 0.
    """
    alpha = validate_alpha(alpha)
    F = forward_transform(theta)
    rms = np.sqrt(np.sum(np.abs(F.coeffs) ** 2))
    if abs(F.coeffs[0, 0]) > _MEAN_TOL * max(rms, 1e-300):
        raise ValueError(
            f"velocity law needs a mean-zero scalar (mean = {theta.mean():.3e})"
        )
    m1, m2 = _velocity_symbols(theta.grid, alpha, law)
    n = theta.grid.n
    c = F.coeffs.copy()
    c[0, 0] = 0.0
    u1 = np.real(np.fft.ifft2(m1 * c * (n * n)))
    u2 = np.real(np.fft.ifft2(m2 * c * (n * n)))
    return VectorField(RealField(theta.grid, u1), RealField(theta.grid, u2))


def gradient(F: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Spectral partial derivatives (i k1 F, i k2 F)."""
    k1, k2, _ = _wavenumbers(F.grid)
    return (
        SpectralField(F.grid, 1j * k1 * F.coeffs),
        SpectralField(F.grid, 1j * k2 * F.coeffs),
    )


def divergence(u: VectorField) -> RealField:
    """Spectral divergence d1 u1 + d2 u2."""
    F1 = forward_transform(u.u1)
    F2 = forward_transform(u.u2)
    k1, k2, _ = _wavenumbers(u.grid)
    n = u.grid.n
    div = np.real(np.fft.ifft2((1j * k1 * F1.coeffs + 1j * k2 * F2.coeffs) * (n * n)))
    return RealField(u.grid, div)


def dealias(F: SpectralField) -> SpectralField:
    """Zero every coefficient with max(|k1|, |k2|) > n/3 (2/3 rule)."""
    return SpectralField(F.grid, F.coeffs * _dealias_mask(F.grid))


def project_mean_zero(f: RealField) -> RealField:
    """Subtract the grid mean."""
    return RealField(f.grid, f.values - np.mean(f.values))
