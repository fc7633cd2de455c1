"""Spatially mollified Wiener increments and their exact second-order structure.

The mollifier is the resolvent kernel ``(I - delta^2 Laplacian)^{-n}``, which
acts on Fourier mode ``m`` as the multiplier ``(1 + delta^2 alpha(m))^{-n}``.
Increments are drawn in physical space as i.i.d. Gaussians of variance
``dt * N^d`` and transformed, which yields per-mode complex coefficients with
``E|dW_m|^2 = dt`` and exact conjugate symmetry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Field, TorusGrid

__all__ = [
    "SpectralMultiplier",
    "NoisePath",
    "build_multiplier",
    "sample_increment",
    "weighted_inner",
    "covariance_kernel",
    "k_reference",
    "convolution_variance",
    "replica_seed",
    "batch_physical_increments",
]


@dataclass(frozen=True)
class SpectralMultiplier:
    grid: TorusGrid
    delta: float
    order: int
    values: np.ndarray = field(repr=False, compare=False)

    @property
    def is_white(self) -> bool:
        return self.delta == 0.0

    def squared(self) -> np.ndarray:
        return self.values**2


def build_multiplier(grid: TorusGrid, delta: float, n_moll: int | None = None) -> SpectralMultiplier:
    if delta < 0 or not math.isfinite(delta):
        raise ValueError(f"correlation length must be finite and >= 0, got {delta}")
    order = 1 if n_moll is None else int(n_moll)
    if order <= max((grid.d - 2) / 4.0, 0.0):
        raise ValueError(
            f"mollification order {order} too small for d={grid.d}; "
            f"need n > max((d-2)/4, 0)"
        )
    values = (1.0 + delta**2 * grid.eigenvalues) ** (-order)
    values.setflags(write=False)
    return SpectralMultiplier(grid, float(delta), order, values)


def replica_seed(master_seed: int, replica: int) -> int:
    """Seed for replica ``r``, reproducible without generating replicas 0..r-1."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(replica)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class NoisePath:
    """Replayable stream of Wiener increments on a grid.

    Step ``s`` draws from a Philox stream whose counter is positioned at
    ``(0, s, 0, 0)``, so any step can be regenerated in isolation and two
    paths with the same seed agree bit for bit.  Vector paths (conservative
    noise) draw all ``arity`` components from the one per-step stream and
    split them by component index.
    """

    grid: TorusGrid
    seed: int
    dt: float
    steps: int
    arity: int = 1
    key: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"time step must be positive, got {self.dt}")
        if self.steps < 0:
            raise ValueError("step count must be nonnegative")
        if self.arity not in (1, self.grid.d):
            raise ValueError(f"arity must be 1 or d={self.grid.d}, got {self.arity}")
        key = np.random.SeedSequence(int(self.seed) & (2**64 - 1)).generate_state(2, np.uint64)
        key.setflags(write=False)
        object.__setattr__(self, "key", key)

    def _check(self, step: int):
        if not 0 <= step < self.steps:
            raise IndexError(f"step {step} outside [0, {self.steps})")

    def white(self, step: int) -> np.ndarray:
        """Unmollified physical increment, shape ``(arity, *grid.shape)``."""
        self._check(step)
        bg = np.random.Philox(key=self.key, counter=[0, step, 0, 0])
        z = np.random.Generator(bg).standard_normal((self.arity,) + self.grid.shape)
        return z * math.sqrt(self.dt * self.grid.size)

    def spectral(self, step: int, multiplier: SpectralMultiplier) -> np.ndarray:
        return self.grid.to_spectral(self.white(step)) * multiplier.values

    def physical(self, step: int, multiplier: SpectralMultiplier) -> np.ndarray:
        return batch_physical_increments([self], step, multiplier)[0]


def batch_physical_increments(
    paths: list[NoisePath], step: int, multiplier: SpectralMultiplier
) -> np.ndarray:
    """Mollified physical increments for several paths, shape ``(B, arity, *shape)``."""
    z = np.stack([p.white(step) for p in paths])
    if multiplier.is_white:
        return z
    g = multiplier.grid
    return g.to_physical(g.to_spectral(z) * multiplier.values)


def sample_increment(path: NoisePath, step: int, multiplier: SpectralMultiplier) -> Field:
    data = path.spectral(step, multiplier)
    if path.arity == 1:
        return Field(path.grid, data[0], spectral=True)
    return Field(path.grid, data, spectral=True, vector=True)


def weighted_inner(f: Field, g: Field, multiplier: SpectralMultiplier) -> float:
    """Covariance-weighted pairing: the L2 product of the two mollified fields."""
    if f.grid != g.grid or f.grid != multiplier.grid:
        raise ValueError("fields and multiplier live on different grids")
    if f.vector or g.vector:
        raise ValueError("weighted_inner takes scalar fields")
    a = f.coefficients().data
    b = g.coefficients().data
    return float(f.grid.mode_sum(multiplier.squared() * np.real(a * np.conj(b))))


def covariance_kernel(multiplier: SpectralMultiplier, z) -> float | np.ndarray:
    """Spatial covariance R(z) of the mollified noise, synthesised spectrally.

    ``z`` is a point of shape ``(d,)`` or a stack of points ``(d, ...)``.
    """
    g = multiplier.grid
    z = np.asarray(z, dtype=float)
    if z.shape[0] != g.d:
        raise ValueError(f"point must have {g.d} components")
    m = g.wavevectors.reshape(g.d, -1).astype(float)
    w = (g.mode_weights * multiplier.squared()).ravel()
    phase = 2.0 * np.pi * np.tensordot(m.T, z, axes=(1, 0))
    out = np.tensordot(w, np.cos(phase), axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def k_reference(case: int, d: int, delta: float) -> float:
    """Blow-up rate K_i(delta, d); case 1 non-conservative, case 2 conservative."""
    if case not in (1, 2):
        raise ValueError(f"case must be 1 or 2, got {case}")
    if d < 1:
        raise ValueError("dimension must be positive")
    if case == 2:
        return float(delta ** (-d))
    if d == 1:
        return 1.0
    if d == 2:
        return float(math.log(1.0 / delta))
    return float(delta ** (-d + 2))


def convolution_variance(grid: TorusGrid, multiplier: SpectralMultiplier, t: float) -> float:
    """Exact pointwise variance of the stochastic heat convolution at time t."""
    if t < 0:
        raise ValueError(f"negative time {t}")
    alpha = grid.eigenvalues
    pos = alpha > 0
    per_mode = np.zeros_like(alpha)
    per_mode[pos] = -np.expm1(-2.0 * alpha[pos] * t) / (2.0 * alpha[pos])
    zero_mode = multiplier.values[~pos] ** 2 * t
    return float(grid.mode_sum(per_mode * multiplier.squared()) + zero_mode.sum())
