"""Dyadic frequency decomposition and the norm layer.

The profile pair (chi, phi) is built from a smooth exponential-of-
reciprocal step so the telescoping partition of unity
``chi(r) + sum_j phi(r / 2^j) = 1`` holds exactly on every resolved
wavenumber magnitude. Block norms are computed from physical-space
samples; Besov norms weight block j by 2^(s (j+1)) so the lowest block
carries unit weight and raising s never decreases the norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .spectral import (
    GridSpec,
    RealField,
    _wavenumbers,
    forward_transform,
)

__all__ = [
    "DyadicPartition",
    "BesovParams",
    "build_partition",
    "dyadic_block",
    "lp_norm",
    "besov_norm",
    "sobolev_norm",
]

_CHI_FLAT = 0.75  # chi is 1 below this radius
_CHI_ZERO = 4.0 / 3.0  # and 0 above this one


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def _chi(r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    t = (r - _CHI_FLAT) / (_CHI_ZERO - _CHI_FLAT)
    return 1.0 - _smooth_step(t)


def _phi(r) -> np.ndarray:
    # annulus profile supported on [3/4, 8/3]
    r = np.asarray(r, dtype=np.float64)
    return _chi(r / 2.0) - _chi(r)


@dataclass(frozen=True)
class DyadicPartition:
    """Radial profiles and the largest block index resolved on the grid."""

    chi: Callable
    phi: Callable
    j_max: int


@lru_cache(maxsize=None)
def build_partition(grid: GridSpec) -> DyadicPartition:
    """Standard partition for a grid; blocks above j_max vanish there."""
    j_max = math.ceil(math.log2(grid.n / 2)) + 1
    return DyadicPartition(chi=_chi, phi=_phi, j_max=j_max)


@lru_cache(maxsize=None)
def _block_mask(partition: DyadicPartition, grid: GridSpec, j: int) -> np.ndarray:
    _, _, kmag = _wavenumbers(grid)
    if j == -1:
        mask = np.asarray(partition.chi(kmag), dtype=np.float64)
    else:
        mask = np.asarray(partition.phi(kmag / 2.0**j), dtype=np.float64)
    mask.flags.writeable = False
    return mask


def dyadic_block(f: RealField, j: int, partition: DyadicPartition) -> RealField:
    """Frequency-localize f to block j (j = -1 is the low-frequency ball)."""
    if not -1 <= j <= partition.j_max:
        raise ValueError(f"block index {j} outside [-1, {partition.j_max}]")
    F = forward_transform(f)
    n = f.grid.n
    mask = _block_mask(partition, f.grid, j)
    return RealField(f.grid, np.real(np.fft.ifft2(mask * F.coeffs * (n * n))))


def lp_norm(f: RealField, p: float) -> float:
    """Grid L^p norm under the domain-normalized measure (||1||_p = 1)."""
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    return float(np.mean(np.abs(f.values) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class BesovParams:
    """Regularity s, integrability p, summation exponent q."""

    s: float
    p: float
    q: float

    def __post_init__(self):
        if self.p < 1.0 or self.q < 1.0:
            raise ValueError(f"p and q must be >= 1, got p={self.p}, q={self.q}")


def besov_norm(f: RealField, params: BesovParams, partition: DyadicPartition) -> float:
    """Weighted l^q sum of dyadic block L^p norms.

    Block j carries weight 2^(s (j+1)); q = inf takes the sup over blocks.
    """
    n = f.grid.n
    coeffs = forward_transform(f).coeffs * (n * n)
    terms = []
    for j in range(-1, partition.j_max + 1):
        mask = _block_mask(partition, f.grid, j)
        block = RealField(f.grid, np.real(np.fft.ifft2(mask * coeffs)))
        weight = 2.0 ** (params.s * (j + 1))
        terms.append(weight * lp_norm(block, params.p))
    terms = np.asarray(terms)
    if np.isinf(params.q):
        return float(np.max(terms))
    return float(np.sum(terms**params.q) ** (1.0 / params.q))


def sobolev_norm(f: RealField, s: float) -> float:
    """H^s norm from the Japanese-bracket weight (1 + |k|^2)^s."""
    F = forward_transform(f)
    _, _, kmag = _wavenumbers(f.grid)
    weights = (1.0 + kmag**2) ** s
    return float(np.sqrt(np.sum(weights * np.abs(F.coeffs) ** 2)))
