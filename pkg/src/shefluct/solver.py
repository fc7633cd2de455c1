"""Mild-form solvers for the non-conservative and conservative stochastic heat equations.

    du = Lap u dt + sqrt(eps) G(u) dW^delta          (non-conservative)
    du = Lap u dt + sqrt(eps) div(G(u) dW^delta)     (conservative, d-vector noise)

Irregular (window-smooth) coefficients are replaced by their smooth
extension and the run is monitored: once the grid extrema leave
``[min u0 - gamma, max u0 + gamma]`` the solution is frozen.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .coefficients import DiffusionCoefficient, smooth_extension
from .grid import Field, TorusGrid
from .noise import NoisePath
from .scheme import Scheme, make_scheme

__all__ = [
    "SolverConfig",
    "Trajectory",
    "BlowUpError",
    "effective_coefficient",
    "stopping_monitor",
    "step_nonconservative",
    "step_conservative",
    "simulate",
]

log = logging.getLogger(__name__)


class BlowUpError(RuntimeError):
    """Non-finite values appeared in a solution."""


@dataclass(frozen=True)
class SolverConfig:
    eps: float
    delta: float
    dt: float
    steps: int
    conservative: bool = False
    gamma: float | None = None
    gamma_margin: float | None = None
    seed: int = 0
    n_moll: int = 1
    dealias: bool = False

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("noise intensity must be >= 0")
        if self.dt <= 0:
            raise ValueError("time step must be positive")
        if self.steps < 0:
            raise ValueError("step count must be >= 0")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("stopping margin gamma must be positive")

    @property
    def T(self) -> float:
        return self.dt * self.steps

    def to_dict(self) -> dict:
        return asdict(self)


def _physical(u0, grid: TorusGrid) -> np.ndarray:
    if isinstance(u0, Field):
        if u0.grid != grid:
            raise ValueError("initial datum lives on another grid")
        return np.array(u0.physical().data, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != grid.shape:
        u0 = np.broadcast_to(u0, grid.shape).copy()
    return u0


def effective_coefficient(
    G: DiffusionCoefficient, u0: np.ndarray, gamma: float | None, margin: float | None = None
) -> tuple[DiffusionCoefficient, tuple[float, float] | None]:
    """Coefficient actually used for stepping, and the stopping bounds (K', K) or None.

    Globally smooth G is used as is and never monitored.  Window-smooth G is
    swapped for its smooth extension on ``[min u0 - gamma, max u0 + gamma]``.
    """
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial datum must be bounded")
    if G.smoothness == "global":
        return G, None
    if gamma is None:
        raise ValueError(f"coefficient {G.name} is only window-smooth; a stopping margin gamma is required")
    K, Kp = float(np.max(u0)), float(np.min(u0))
    lo, hi = G.domain
    if not (Kp > lo and K < hi):
        raise ValueError(f"initial datum range [{Kp}, {K}] leaves the smooth domain of {G.name}")
    margin = gamma / 2 if margin is None else margin
    G0 = smooth_extension(G, (Kp - gamma, K + gamma), margin)
    return G0, (Kp, K)


def stopping_monitor(u, K: float, K_prime: float, gamma: float):
    """True iff the grid max exceeds K + gamma or the grid min drops below K' - gamma.

    The inequalities are strict, so touching K + gamma does not stop a run.
    """
    if isinstance(u, Field):
        data = u.physical().data
        return bool(np.max(data) > K + gamma or np.min(data) < K_prime - gamma)
    u = np.asarray(u)
    return bool(np.max(u) > K + gamma or np.min(u) < K_prime - gamma)


def _step_field(u: Field, dW: Field, G, eps: float, dt: float, conservative: bool) -> Field:
    grid = u.grid
    if dW.grid != grid:
        raise ValueError("increment lives on another grid")
    if not dW.spectral:
        raise ValueError("increment must be given in spectral representation")
    if u.vector:
        raise ValueError("solution must be a scalar field")
    if dW.vector != conservative:
        raise ValueError("increment arity does not match the equation type")
    scheme = Scheme(grid, dt, _unit_multiplier(grid), conservative)
    dW_phys = grid.to_physical(dW.data)
    if not conservative:
        dW_phys = dW_phys[np.newaxis]
    u_phys = u.physical().data
    u_hat = u.coefficients().data
    nxt = scheme.advance(u_hat, scheme.forcing(G(u_phys), dW_phys), math.sqrt(eps))
    out = Field(grid, nxt, spectral=True)
    return out if u.spectral else out.physical()


def _unit_multiplier(grid):
    from .noise import build_multiplier

    return build_multiplier(grid, 0.0)


def step_nonconservative(u: Field, dW: Field, G, eps: float, dt: float) -> Field:
    """One exponential Euler step u+ = S(dt)[u + sqrt(eps) G(u) dW].

    ``dW`` is the already-mollified spectral increment, e.g. from
    :func:`shefluct.noise.sample_increment`.
    """
    return _step_field(u, dW, G, eps, dt, conservative=False)


def step_conservative(u: Field, dW: Field, G, eps: float, dt: float) -> Field:
    """One step u+ = S(dt)[u + sqrt(eps) div(G(u) dW)] with d-vector ``dW``."""
    return _step_field(u, dW, G, eps, dt, conservative=True)


@dataclass
class Trajectory:
    grid: TorusGrid
    dt: float
    states: np.ndarray
    stop_index: int | None
    seed: int
    config: SolverConfig
    coefficient: DiffusionCoefficient

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.states.shape[0])

    @property
    def frozen(self) -> bool:
        return self.stop_index is not None and self.stop_index < self.states.shape[0] - 1

    def field(self, step: int) -> Field:
        return Field(self.grid, self.states[step])

    def metadata(self) -> dict:
        return {
            "kind": "trajectory",
            "grid": {"d": self.grid.d, "N": self.grid.N},
            "seed": int(self.seed),
            "dt": self.dt,
            "stop_index": self.stop_index,
            "coefficient": self.coefficient.spec(),
            "config": self.config.to_dict(),
        }

    def export(self, path) -> None:
        from .io import save_fields

        save_fields(path, {"states": self.states, "times": self.times}, self.metadata())


def epsilon_threshold(G: DiffusionCoefficient, delta: float, d: int) -> float:
    """Sufficient smallness bound 2 delta^d / ||G'||^2 for conservative well-posedness."""
    g1 = G.derivative_bound(1)
    return math.inf if g1 == 0 else 2.0 * delta**d / g1**2


def simulate(config: SolverConfig, G: DiffusionCoefficient, u0, path: NoisePath) -> Trajectory:
    grid = path.grid
    if path.dt != config.dt:
        raise ValueError(f"path step {path.dt} differs from config step {config.dt}")
    if path.steps < config.steps:
        raise ValueError("noise path is shorter than the run")
    want_arity = grid.d if config.conservative else 1
    if path.arity != want_arity:
        raise ValueError(f"path arity {path.arity} does not match equation (needs {want_arity})")
    if path.seed != config.seed:
        log.debug("path seed %s overrides config seed %s", path.seed, config.seed)
    scheme = make_scheme(grid, config.dt, config.delta, config.conservative, config.n_moll, config.dealias)
    u = _physical(u0, grid)
    G_eff, bounds = effective_coefficient(G, u, config.gamma, config.gamma_margin)
    if config.conservative and G.smoothness == "window" and config.eps > 0:
        eps0 = epsilon_threshold(G_eff, config.delta, grid.d)
        if config.eps >= eps0:
            warnings.warn(
                f"eps={config.eps} is not below the sufficient threshold {eps0:.3g}",
                RuntimeWarning,
                stacklevel=2,
            )
    sq = math.sqrt(config.eps)
    states = np.empty((config.steps + 1,) + grid.shape)
    states[0] = u
    u_hat = grid.to_spectral(u)
    stop = None
    for s in range(config.steps):
        if stop is not None:
            states[s + 1] = states[s]
            continue
        dW = path.physical(s, scheme.multiplier)
        # non-finite values are detected below, so silence the arithmetic warnings
        with np.errstate(over="ignore", invalid="ignore"):
            u_hat = scheme.advance(u_hat, scheme.forcing(G_eff(u), dW), sq)
            u = grid.to_physical(u_hat)
        if not np.all(np.isfinite(u)):
            raise BlowUpError(f"non-finite solution at step {s + 1} (t={(s + 1) * config.dt:.4g})")
        states[s + 1] = u
        if bounds is not None and stopping_monitor(u, bounds[1], bounds[0], config.gamma):
            stop = s + 1
    return Trajectory(grid, config.dt, states, stop, path.seed, config, G_eff)
