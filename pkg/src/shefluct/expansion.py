"""Small-noise expansion coefficients, remainders and remainder noise coefficients.

Coefficient k >= 1 solves the linear equation driven by the same increments
as the solution, with noise coefficient
``c_k = sum_{l<k} G^(l)(u^0) J(k, l) / l!``; the deterministic term u^0 is the
exact heat flow of u0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import DiffusionCoefficient
from .grid import Field, TorusGrid
from .noise import NoisePath
from .partitions import drift_coefficient
from .scheme import Scheme, make_scheme
from .solver import Trajectory, _physical, effective_coefficient

__all__ = [
    "ExpansionStack",
    "Remainder",
    "solve_heat_coefficient",
    "solve_coefficients",
    "assemble_remainder",
    "sigma_diagnostic",
    "replay_step",
    "noise_coefficients",
]


@dataclass
class ExpansionStack:
    """Coefficients u^0..u^n at every step; ``fields[k, s]`` is u^k at step s."""

    grid: TorusGrid
    dt: float
    fields: np.ndarray
    seed: int
    conservative: bool
    delta: float
    coefficient: DiffusionCoefficient
    scheme: Scheme

    @property
    def order(self) -> int:
        return self.fields.shape[0] - 1

    @property
    def steps(self) -> int:
        return self.fields.shape[1] - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.fields.shape[1])

    def j_term(self, k: int, l: int, step: int) -> np.ndarray:
        from .partitions import evaluate_j

        return evaluate_j(k, l, list(self.fields[:, step]))

    def metadata(self) -> dict:
        return {
            "kind": "expansion-stack",
            "grid": {"d": self.grid.d, "N": self.grid.N},
            "order": self.order,
            "seed": int(self.seed),
            "dt": self.dt,
            "delta": self.delta,
            "conservative": self.conservative,
            "coefficient": self.coefficient.spec(),
        }

    def export(self, path) -> None:
        from .io import save_fields

        save_fields(path, {"fields": self.fields, "times": self.times}, self.metadata())


@dataclass
class Remainder:
    order: int
    eps: float
    values: np.ndarray


def solve_heat_coefficient(u0, times, grid: TorusGrid | None = None) -> np.ndarray:
    """Exact heat flow of ``u0`` at each of ``times``; shape ``(len(times), *grid.shape)``."""
    if isinstance(u0, Field):
        grid = u0.grid
    if grid is None:
        raise ValueError("grid required when u0 is a plain array")
    u_hat = grid.to_spectral(_physical(u0, grid))
    return np.stack([grid.to_physical(u_hat * grid.heat_factor(float(t))) for t in times])


def noise_coefficients(n: int, g_derivs, coeffs) -> list[np.ndarray]:
    """Noise coefficients c_1..c_n from G^(l)(u^0) and the current u^0..u^{n-1}."""
    return [drift_coefficient(k, g_derivs, coeffs) for k in range(1, n + 1)]


def solve_coefficients(
    n: int,
    G: DiffusionCoefficient,
    u0,
    path: NoisePath,
    delta: float,
    conservative: bool,
    *,
    gamma: float | None = None,
    gamma_margin: float | None = None,
    n_moll: int = 1,
    dealias: bool = False,
    steps: int | None = None,
) -> ExpansionStack:
    grid = path.grid
    if n < 0:
        raise ValueError("expansion order must be >= 0")
    want = grid.d if conservative else 1
    if path.arity != want:
        raise ValueError(f"path arity {path.arity} does not match equation (needs {want})")
    steps = path.steps if steps is None else steps
    if steps > path.steps:
        raise ValueError("noise path is shorter than the run")
    u0 = _physical(u0, grid)
    G_eff, bounds = effective_coefficient(G, u0, gamma, gamma_margin)
    if n > 0 and n - 1 > G_eff.max_order:
        raise ValueError(f"order {n} needs derivatives up to {n - 1}")
    scheme = make_scheme(grid, path.dt, delta, conservative, n_moll, dealias)

    fields = np.zeros((n + 1, steps + 1) + grid.shape)
    fields[0] = solve_heat_coefficient(u0, path.dt * np.arange(steps + 1), grid)
    if bounds is not None:
        lo, hi = G_eff.window
        if fields[0].min() < lo or fields[0].max() > hi:
            raise ValueError("deterministic term leaves the smoothness window")
    hats = [grid.to_spectral(fields[k, 0]) for k in range(n + 1)]
    for s in range(steps):
        if n == 0:
            break
        g_derivs = G_eff.derivatives(fields[0, s], n - 1)
        coeffs = noise_coefficients(n, g_derivs, list(fields[:, s]))
        dW = path.physical(s, scheme.multiplier)
        for k in range(1, n + 1):
            hats[k] = scheme.advance(hats[k], scheme.forcing(coeffs[k - 1], dW), 1.0)
            fields[k, s + 1] = grid.to_physical(hats[k])
    return ExpansionStack(grid, path.dt, fields, path.seed, conservative, delta, G_eff, scheme)


def _check_coupled(u: Trajectory, stack: ExpansionStack):
    if u.seed != stack.seed:
        raise ValueError(
            f"trajectory seed {u.seed} differs from stack seed {stack.seed}: the "
            "remainder of decoupled paths is meaningless"
        )
    if u.grid != stack.grid or u.dt != stack.dt or u.states.shape[0] != stack.fields.shape[1]:
        raise ValueError("trajectory and stack have different discretisations")


def assemble_remainder(u: Trajectory, stack: ExpansionStack, eps: float, n: int) -> Remainder:
    """w_n = eps^{-n/2} (u - sum_{i<=n} eps^{i/2} u^i) at every stored time."""
    _check_coupled(u, stack)
    if n > stack.order:
        raise ValueError(f"stack holds order {stack.order} < {n}")
    if n > 0 and eps <= 0:
        raise ValueError("scaled remainders of order >= 1 need eps > 0")
    r = u.states.copy()
    for i in range(n + 1):
        r -= eps ** (i / 2) * stack.fields[i]
    return Remainder(n, eps, r * eps ** (-n / 2) if n else r)


def sigma_diagnostic(
    u: Trajectory, stack: ExpansionStack, G: DiffusionCoefficient | None, eps: float, n: int
) -> np.ndarray:
    """Noise coefficient of the linear equation solved by w_n, at every stored time.

    sigma_n = eps^{-(n-1)/2} (G(u) - sum_{m=1}^n eps^{(m-1)/2} c_m)

    Window-smooth ``G`` is always evaluated through the extension the stack
    was built with; ``G=None`` means exactly that.
    """
    _check_coupled(u, stack)
    if n > stack.order:
        raise ValueError(f"stack holds order {stack.order} < {n}")
    if eps <= 0 and n != 1:
        raise ValueError("sigma_n needs eps > 0 unless n = 1")
    used = stack.coefficient
    if G is not None and G.spec() not in (used.spec(), used.base.spec() if used.base else None):
        raise ValueError(f"coefficient {G.name} differs from the stack's {used.name}")
    G = used
    out = np.empty_like(u.states)
    for s in range(u.states.shape[0]):
        val = G(u.states[s])
        if n:
            g_derivs = G.derivatives(stack.fields[0, s], n - 1)
            cs = noise_coefficients(n, g_derivs, list(stack.fields[:, s]))
            for m, c in enumerate(cs, start=1):
                val = val - eps ** ((m - 1) / 2) * c
        out[s] = val * eps ** (-(n - 1) / 2)
    return out


def replay_step(scheme: Scheme, w: np.ndarray, sigma: np.ndarray, dW: np.ndarray) -> np.ndarray:
    """One step of dw = Lap w dt + sigma dW (or div(sigma dW)) from physical ``w``."""
    g = scheme.grid
    return g.to_physical(scheme.advance(g.to_spectral(w), scheme.forcing(sigma, dW), 1.0))
