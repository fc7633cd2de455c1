"""Batched Monte Carlo engine: many replicas and many (eps, delta) lanes in lockstep.

A chunk of replicas is advanced together.  Each replica owns one noise path;
every lane (eps, delta) of that replica consumes the same white increments
(common random numbers), mollified once per distinct delta.  Solutions and
expansion coefficients are stepped with the shared :class:`Scheme`, so a
chunk of size one reproduces :func:`shefluct.solver.simulate` and
:func:`shefluct.expansion.solve_coefficients` exactly.

Only running estimator sums are kept; trajectories are never stored.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..expansion import noise_coefficients
from ..noise import NoisePath, replica_seed
from ..scheme import make_scheme
from ..solver import effective_coefficient
from .scenario import Scenario

__all__ = ["BatchJob", "ChunkResult", "LaneResult", "run_job", "lattice_steps", "CHUNK", "default_workers"]

CHUNK = 64
ESTIMATORS = ("pointwise-sup", "space-time-Lp", "terminal-mean")
QUANTITIES = ("remainder", "scaled-remainder", "coefficient", "none")


def default_workers() -> int:
    return max(1, int(os.environ.get("SHEFLUCT_WORKERS", "1")))


def lattice_steps(steps: int, count: int = 8) -> np.ndarray:
    """Evenly spaced stored times (step indices) ending at the final step."""
    count = min(count, steps)
    return np.unique(np.round(np.linspace(steps / count, steps, count)).astype(int))


@dataclass(frozen=True)
class BatchJob:
    """What to run: one scenario template evaluated at several (eps, delta) lanes.

    ``quantity`` selects the observed field: the unscaled remainder
    ``u - sum_{i<=n} eps^{i/2} u^i``, the scaled remainder ``w_n``, the
    coefficient ``u^n`` alone, or nothing (stopping statistics only).
    """

    scenario: Scenario
    lanes: tuple[tuple[float, float], ...]
    quantity: str = "remainder"
    estimator: str = "pointwise-sup"
    p: float = 2.0
    lattice: int = 8

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise ValueError(f"unknown quantity {self.quantity!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if not self.lanes:
            raise ValueError("at least one (eps, delta) lane is required")
        if self.quantity == "scaled-remainder" and self.scenario.n > 0:
            if any(e <= 0 for e, _ in self.lanes):
                raise ValueError("scaled remainders need eps > 0")

    @property
    def needs_solution(self) -> bool:
        return self.quantity != "coefficient"

    def groups(self) -> list[tuple[float, list[int]]]:
        """Lane indices grouped by delta, in order of first appearance."""
        out: dict[float, list[int]] = {}
        for i, (_, dl) in enumerate(self.lanes):
            out.setdefault(float(dl), []).append(i)
        return list(out.items())


@dataclass
class ChunkResult:
    start: int
    per_replica: np.ndarray | None  # (lanes, B) for scalar estimators
    lattice_sum: np.ndarray | None  # (lanes, L, *shape)
    lattice_sq: np.ndarray | None
    valid: np.ndarray  # (lanes, B) finite runs
    stopped: np.ndarray  # (lanes, B) monitor triggered before T


@dataclass
class LaneResult:
    eps: float
    delta: float
    M: int
    blown: int
    stopped: int
    per_replica: np.ndarray | None = None
    lattice_sum: np.ndarray | None = None
    lattice_sq: np.ndarray | None = None


def _chunk(job: BatchJob, master_seed: int, start: int, stop: int) -> ChunkResult:
    sc = job.scenario
    grid = sc.grid()
    steps = sc.steps
    arity = grid.d if sc.conservative else 1
    B = stop - start
    E = len(job.lanes)
    paths = [NoisePath(grid, replica_seed(master_seed, r), sc.dt, steps, arity) for r in range(start, stop)]
    u0 = sc.initial()
    G_eff, bounds = effective_coefficient(sc.G(), u0, sc.gamma, sc.gamma_margin)
    n = sc.n
    want_stack = job.quantity != "none" and n > 0
    if want_stack and n - 1 > G_eff.max_order:
        raise ValueError(f"order {n} needs derivatives up to {n - 1}")
    eps = np.array([e for e, _ in job.lanes], dtype=float)
    bshape = (1,) * grid.d

    u0_hat = grid.to_spectral(u0)
    lattice = set(lattice_steps(steps, job.lattice).tolist()) if job.estimator == "pointwise-sup" else set()
    lat_index = {s: i for i, s in enumerate(sorted(lattice))}

    groups = []
    for delta, idx in job.groups():
        scheme = make_scheme(grid, sc.dt, delta, sc.conservative, sc.n_moll, sc.dealias)
        g = {"scheme": scheme, "idx": np.array(idx)}
        if job.needs_solution:
            g["u"] = np.broadcast_to(u0, (len(idx), B) + grid.shape).copy()
            g["u_hat"] = grid.to_spectral(g["u"])
            g["sq"] = np.sqrt(eps[idx]).reshape((-1, 1) + bshape)
            g["live"] = np.ones((len(idx), B), dtype=bool)
        if want_stack:
            g["coef"] = [np.zeros((B,) + grid.shape) for _ in range(n)]
            g["coef_hat"] = [np.zeros((B,) + grid.spectral_shape, dtype=complex) for _ in range(n)]
        groups.append(g)

    valid = np.ones((E, B), dtype=bool)
    stopped = np.zeros((E, B), dtype=bool)
    per_rep = np.zeros((E, B)) if job.estimator in ("space-time-Lp", "terminal-mean") else None
    lat_vals = np.zeros((E, B, len(lattice)) + grid.shape) if lattice else None

    def observe(g, ubar0, s):
        if job.quantity == "none":
            return
        idx = g["idx"]
        if job.quantity == "coefficient":
            q = (g["coef"][n - 1] if n > 0 else np.broadcast_to(ubar0, (B,) + grid.shape))[np.newaxis]
        else:
            q = g["u"] - ubar0
            for i in range(1, n + 1):
                q = q - (eps[idx] ** (i / 2)).reshape((-1, 1) + bshape) * g["coef"][i - 1]
            if job.quantity == "scaled-remainder" and n > 0:
                q = q * (eps[idx] ** (-n / 2)).reshape((-1, 1) + bshape)
        a = np.abs(q) ** job.p
        if job.estimator == "space-time-Lp" and s > 0:
            per_rep[idx] += sc.dt * np.mean(a, axis=grid.axes)
        elif job.estimator == "terminal-mean" and s == steps:
            per_rep[idx] = np.mean(a, axis=grid.axes)
        elif s in lattice:
            lat_vals[idx, :, lat_index[s]] = a

    ubar0 = u0
    for g in groups:
        observe(g, ubar0, 0)
    for s in range(steps):
        z = np.stack([pth.white(s) for pth in paths])
        z_hat = None
        if want_stack:
            g_derivs = G_eff.derivatives(ubar0, n - 1)
        ubar_next = grid.to_physical(u0_hat * grid.heat_factor((s + 1) * sc.dt))
        for g in groups:
            scheme = g["scheme"]
            if scheme.multiplier.is_white:
                dW = z
            else:
                if z_hat is None:
                    z_hat = grid.to_spectral(z)
                dW = grid.to_physical(z_hat * scheme.multiplier.values)
            if want_stack:
                cs = noise_coefficients(n, g_derivs, [ubar0] + g["coef"])
                for k in range(n):
                    g["coef_hat"][k] = scheme.advance(g["coef_hat"][k], scheme.forcing(cs[k], dW), 1.0)
                    g["coef"][k] = grid.to_physical(g["coef_hat"][k])
            if job.needs_solution:
                live = g["live"]
                with np.errstate(over="ignore", invalid="ignore"):
                    new_hat = scheme.advance(g["u_hat"], scheme.forcing(G_eff(g["u"]), dW[np.newaxis]), g["sq"])
                    new = grid.to_physical(new_hat)
                finite = np.all(np.isfinite(new), axis=grid.axes)
                bad = live & ~finite
                if bad.any():
                    valid[g["idx"]] &= ~bad
                    live &= finite
                keep = live.reshape(live.shape + bshape)
                g["u_hat"] = np.where(keep, new_hat, g["u_hat"])
                g["u"] = np.where(keep, new, g["u"])
                if bounds is not None:
                    ax = grid.axes
                    hit = live & ((g["u"].max(axis=ax) > bounds[1] + sc.gamma) | (g["u"].min(axis=ax) < bounds[0] - sc.gamma))
                    if hit.any():
                        stopped[g["idx"]] |= hit
                        live &= ~hit
        ubar0 = ubar_next
        for g in groups:
            observe(g, ubar0, s + 1)

    lat_sum = lat_sq = None
    if lat_vals is not None:
        w = valid.reshape(valid.shape + (1,) * (lat_vals.ndim - 2))
        masked = np.where(w, lat_vals, 0.0)
        lat_sum = masked.sum(axis=1)
        lat_sq = (masked**2).sum(axis=1)
    if per_rep is not None:
        per_rep = np.where(valid, per_rep, np.nan)
    return ChunkResult(start, per_rep, lat_sum, lat_sq, valid, stopped)


def _chunk_task(args):
    return _chunk(*args)


def _neumaier_add(total, comp, x):
    t = total + x
    big = np.abs(total) >= np.abs(x)
    comp = comp + np.where(big, (total - t) + x, (x - t) + total)
    return t, comp


def run_job(job: BatchJob, M: int, master_seed: int, workers: int | None = None,
            chunk: int = CHUNK) -> list[LaneResult]:
    """Run ``M`` replicas of every lane; chunking is independent of ``workers``."""
    if M < 1:
        raise ValueError("need at least one replica")
    workers = default_workers() if workers is None else max(1, int(workers))
    tasks = [(job, master_seed, a, min(a + chunk, M)) for a in range(0, M, chunk)]
    if workers == 1 or len(tasks) == 1:
        results = [_chunk_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_chunk_task, tasks))
    E = len(job.lanes)
    valid = np.concatenate([r.valid for r in results], axis=1)
    stopped = np.concatenate([r.stopped for r in results], axis=1)
    out = []
    for e, (eps, delta) in enumerate(job.lanes):
        lr = LaneResult(float(eps), float(delta), int(valid[e].sum()), int((~valid[e]).sum()), int(stopped[e].sum()))
        if results[0].per_replica is not None:
            lr.per_replica = np.concatenate([r.per_replica[e] for r in results])
        if results[0].lattice_sum is not None:
            s1 = np.zeros_like(results[0].lattice_sum[e])
            c1 = np.zeros_like(s1)
            s2 = np.zeros_like(s1)
            c2 = np.zeros_like(s1)
            for r in results:
                s1, c1 = _neumaier_add(s1, c1, r.lattice_sum[e])
                s2, c2 = _neumaier_add(s2, c2, r.lattice_sq[e])
            lr.lattice_sum = s1 + c1
            lr.lattice_sq = s2 + c2
        out.append(lr)
    assert len(out) == E
    return out


def replica_sum(values: np.ndarray) -> float:
    """Exactly rounded sum of finite entries; independent of their order."""
    return math.fsum(values[np.isfinite(values)].tolist())
