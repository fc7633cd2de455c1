"""The one time-stepping rule shared by solutions and expansion coefficients.

Every stochastic field in the package is advanced by the exponential Euler
step

    v(t + dt) = S(dt) [ v(t) + scale * F(c(t), dW) ]

with the noise coefficient ``c`` frozen at the left point (Ito) and
``F(c, dW) = c dW`` (non-conservative) or ``div(c dW)`` (conservative).
Solutions use ``scale = sqrt(eps)`` and ``c = G(u)``; expansion coefficients
use ``scale = 1`` and the Taylor drift.  Because both go through the same
code, the expansion of a linear equation telescopes exactly.
"""
from __future__ import annotations

import numpy as np

from .grid import TorusGrid
from .noise import SpectralMultiplier, build_multiplier

__all__ = ["Scheme", "make_scheme"]


class Scheme:
    def __init__(self, grid: TorusGrid, dt: float, multiplier: SpectralMultiplier,
                 conservative: bool, dealias: bool = False):
        if dt <= 0:
            raise ValueError(f"time step must be positive, got {dt}")
        if multiplier.grid != grid:
            raise ValueError("multiplier built on another grid")
        self.grid = grid
        self.dt = float(dt)
        self.multiplier = multiplier
        self.conservative = bool(conservative)
        self.dealias = bool(dealias)
        self.factor = grid.heat_factor(dt)
        self.arity = grid.d if conservative else 1

    def component(self, dW: np.ndarray, j: int) -> np.ndarray:
        """Component j of increments laid out as ``(..., arity, *grid.shape)``."""
        return dW[(Ellipsis, j) + (slice(None),) * self.grid.d]

    def forcing(self, coeff: np.ndarray, dW: np.ndarray) -> np.ndarray:
        """Spectral noise term F(coeff, dW); arrays broadcast over leading axes."""
        g = self.grid
        if self.conservative:
            out = 0
            for j in range(g.d):
                out = out + g.ik[j] * g.to_spectral(coeff * self.component(dW, j))
        else:
            out = g.to_spectral(coeff * self.component(dW, 0))
        if self.dealias:
            out = out * g.dealias_mask
        return out

    def convolution_variance(self, steps: int) -> float:
        """Exact pointwise variance of the discrete stochastic convolution after ``steps`` steps.

        Per mode the scheme accumulates ``dt * sum_{i=1}^{steps} exp(-2 alpha i dt)``
        times the squared multiplier, instead of the continuum
        ``(1 - exp(-2 alpha t)) / (2 alpha)``.  The noise coefficient is taken
        to be 1; the conservative forcing ``div dW`` adds a factor ``|k|^2 = alpha``.
        """
        g = self.grid
        q = np.exp(-2.0 * g.eigenvalues * self.dt)
        pos = q < 1.0
        geo = np.where(pos, q * -np.expm1(steps * np.log(np.where(pos, q, 0.5))) / np.where(pos, 1.0 - q, 1.0), steps)
        mult = self.multiplier.squared()
        if self.conservative:
            mult = mult * g.eigenvalues
        if self.dealias:
            mult = mult * g.dealias_mask
        return float(g.mode_sum(self.dt * geo * mult))

    def advance(self, v_hat: np.ndarray, forcing_hat: np.ndarray, scale: float) -> np.ndarray:
        return self.factor * (v_hat + scale * forcing_hat)


def make_scheme(grid: TorusGrid, dt: float, delta: float, conservative: bool,
                n_moll: int | None = None, dealias: bool = False) -> Scheme:
    if delta == 0 and (conservative or grid.d != 1):
        raise ValueError(
            "white noise (delta = 0) is only admissible for the non-conservative "
            "equation in d = 1; the other cases are supercritical"
        )
    return Scheme(grid, dt, build_multiplier(grid, delta, n_moll), conservative, dealias)
