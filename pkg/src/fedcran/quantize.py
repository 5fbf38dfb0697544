"""Stochastic uniform quantization of weight/update vectors.

A vector is quantized entrywise on a uniform grid spanning the range of entry
magnitudes [min|w|, max|w|]; the entry's sign is reattached afterwards. Each
magnitude is rounded randomly to one of its two bracketing grid points with
probabilities chosen so the quantizer is unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantGrid",
    "QuantizedVector",
    "build_quant_grid",
    "quantize_scalar",
    "quantize_vector",
    "clip_weights",
    "skewness",
    "quantization_error_bound",
]


@dataclass(frozen=True)
class QuantGrid:
    """Uniform magnitude grid with 2^bits knots on [w_min, w_max]."""

    w_min: float  # smallest entry magnitude
    w_max: float  # largest entry magnitude
    precision_bits: int

    def __post_init__(self):
        if not (self.precision_bits >= 1):
            raise ValueError(f"precision_bits must be >= 1, got {self.precision_bits}")
        if not (0.0 <= self.w_min <= self.w_max) or not np.isfinite(self.w_max):
            raise ValueError(f"invalid grid range [{self.w_min}, {self.w_max}]")

    @property
    def intervals(self) -> int:
        # number of grid intervals, 2^bits - 1
        return (1 << self.precision_bits) - 1

    @property
    def step(self) -> float:
        return (self.w_max - self.w_min) / self.intervals

    def knots(self) -> np.ndarray:
        return self.w_min + self.step * np.arange(self.intervals + 1)


@dataclass(frozen=True)
class QuantizedVector:
    values: np.ndarray
    grid: QuantGrid


def _check_vector(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(w)):
        raise ValueError("vector entries must be finite")
    return w


def build_quant_grid(w, precision_bits: int, c_max: int = 32) -> QuantGrid:
    """Grid over the magnitude range of ``w`` with ``2^precision_bits`` knots."""
    w = _check_vector(w)
    if not (1 <= precision_bits <= c_max):
        raise ValueError(f"precision_bits must be in [1, {c_max}], got {precision_bits}")
    mags = np.abs(w)
    return QuantGrid(float(mags.min()), float(mags.max()), int(precision_bits))


def _signs(w: np.ndarray) -> np.ndarray:
    # sign(0) = +1 by convention
    return np.where(w >= 0.0, 1.0, -1.0)


def quantize_scalar(w: float, grid: QuantGrid, rng: np.random.Generator) -> float:
    """Stochastically round one value onto ``grid`` (unbiased)."""
    w = float(w)
    if not np.isfinite(w):
        raise ValueError("value must be finite")
    mag = abs(w)
    tol = 1e-12 * max(1.0, grid.w_max)
    if mag < grid.w_min - tol or mag > grid.w_max + tol:
        raise ValueError(
            f"magnitude {mag} outside grid range [{grid.w_min}, {grid.w_max}]"
        )
    sign = 1.0 if w >= 0.0 else -1.0
    step = grid.step
    if step == 0.0:
        return sign * grid.w_min
    mag = min(max(mag, grid.w_min), grid.w_max)
    idx = min(int((mag - grid.w_min) / step), grid.intervals - 1)
    lo = grid.w_min + idx * step
    hi = lo + step
    p_up = (mag - lo) / step
    q = hi if rng.random() < p_up else lo
    return sign * q


def quantize_vector(
    w, precision_bits: int, rng: np.random.Generator, c_max: int = 32
) -> QuantizedVector:
    """Quantize every entry of ``w`` on the grid built from ``w`` itself."""
    w = _check_vector(w)
    grid = build_quant_grid(w, precision_bits, c_max=c_max)
    step = grid.step
    signs = _signs(w)
    if step == 0.0:
        # degenerate grid: all magnitudes equal, quantization is exact
        return QuantizedVector(signs * grid.w_min, grid)
    mags = np.abs(w)
    idx = np.minimum(
        ((mags - grid.w_min) / step).astype(int), grid.intervals - 1
    )
    lo = grid.w_min + idx * step
    p_up = (mags - lo) / step
    take_up = rng.random(w.shape) < p_up
    q = lo + np.where(take_up, step, 0.0)
    return QuantizedVector(signs * q, grid)


def clip_weights(w, bound: float = 1.0) -> np.ndarray:
    """Clamp entries to [-bound, bound] (weights live in [-1, 1] by assumption)."""
    w = _check_vector(w)
    return np.clip(w, -bound, bound)


def skewness(w) -> float:
    """Magnitude-range skewness eps = (max|w| - min|w|)^2 / ||w||^2, in [0, 1]."""
    w = _check_vector(w)
    nrm2 = float(np.dot(w, w))
    if nrm2 == 0.0:
        raise ValueError("skewness undefined for the zero vector")
    mags = np.abs(w)
    return float((mags.max() - mags.min()) ** 2) / nrm2


def quantization_error_bound(w, precision_bits: int, c_max: int = 32) -> float:
    """Upper bound on E||Q(w) - w||^2 for the unbiased stochastic quantizer.

    Equals d * eps * ||w||^2 / (4 * (2^bits - 1)^2) with eps the magnitude-range
    skewness, which reduces to d * (max|w| - min|w|)^2 / (4 * (2^bits - 1)^2).
    """
    w = _check_vector(w)
    if not (1 <= precision_bits <= c_max):
        raise ValueError(f"precision_bits must be in [1, {c_max}], got {precision_bits}")
    if not np.any(w != 0.0):
        raise ValueError("bound undefined for the zero vector")
    mags = np.abs(w)
    spread = float(mags.max() - mags.min())
    b = (1 << precision_bits) - 1
    return w.size * spread * spread / (4.0 * b * b)
