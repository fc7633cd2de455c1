"""Moment estimates, rate sweeps, divergence sweeps and survival curves."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from ..noise import NoisePath, build_multiplier, k_reference, replica_seed
from ..solver import effective_coefficient, epsilon_threshold
from .engine import BatchJob, LaneResult, replica_sum, run_job
from .regimes import RegimeSchedule, predicted_exponent
from .scenario import Scenario

__all__ = [
    "MomentEstimate",
    "RateReport",
    "SurvivalPoint",
    "BlowUpThresholdError",
    "InsufficientDataError",
    "estimate_from_lane",
    "run_moment_estimate",
    "fit_slope",
    "rate_sweep",
    "divergence_sweep",
    "survival_curve",
    "covariance_check",
]

BLOWUP_FRACTION = 0.01
MAX_REL_STDERR = 0.2
MIN_POINTS = 4


class InsufficientDataError(ValueError):
    """Too few sweep points have a small enough relative standard error to fit."""


class BlowUpThresholdError(RuntimeError):
    """More than 1% of the replicas of some lane produced non-finite values."""


@dataclass
class MomentEstimate:
    mode: str
    p: float
    M: int
    value: float
    stderr: float
    eps: float = math.nan
    delta: float = math.nan
    blown: int = 0
    stopped: int = 0
    location: tuple | None = None

    def row(self) -> dict:
        return {"epsilon": self.eps, "delta": self.delta, "estimate": self.value, "stderr": self.stderr, "M": self.M}


def estimate_from_lane(lane: LaneResult, mode: str, p: float) -> MomentEstimate:
    total = lane.M + lane.blown
    if lane.blown > BLOWUP_FRACTION * total:
        raise BlowUpThresholdError(
            f"{lane.blown} of {total} replicas blew up at eps={lane.eps}, delta={lane.delta}"
        )
    M = lane.M
    loc = None
    if mode == "pointwise-sup":
        mean = lane.lattice_sum / M
        var = np.maximum(lane.lattice_sq - M * mean**2, 0.0) / max(M - 1, 1)
        flat = int(np.argmax(mean))
        loc = tuple(int(i) for i in np.unravel_index(flat, mean.shape))
        value = float(mean.flat[flat])
        se = math.sqrt(var.flat[flat] / M)
    else:
        x = lane.per_replica[np.isfinite(lane.per_replica)]
        value = replica_sum(x) / M
        var = math.fsum(((x - value) ** 2).tolist()) / max(M - 1, 1)
        se = math.sqrt(var / M)
    return MomentEstimate(mode, p, M, max(value, 0.0), se, lane.eps, lane.delta, lane.blown, lane.stopped, loc)


def run_moment_estimate(scenario: Scenario, estimator: str, M: int, master_seed: int, *,
                        p: float = 2.0, quantity: str = "remainder", workers: int | None = None) -> MomentEstimate:
    """Moment of the order-``scenario.n`` remainder at the scenario's (eps, delta)."""
    job = BatchJob(scenario, ((scenario.eps, scenario.delta),), quantity, estimator, p)
    (lane,) = run_job(job, M, master_seed, workers)
    return estimate_from_lane(lane, estimator, p)


@dataclass
class RateReport:
    points: list[MomentEstimate]
    slope: float
    ci: tuple[float, float]
    predicted: float
    tolerance: float
    used: list[bool]
    passed: bool
    extras: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [pt.row() for pt in self.points]

    def summary(self) -> dict:
        return {
            "slope": self.slope,
            "ci": list(self.ci),
            "predicted": self.predicted,
            "tolerance": self.tolerance,
            "used": self.used,
            "passed": self.passed,
            **self.extras,
        }


def fit_slope(x, y, confidence: float = 0.95):
    """OLS slope of log y on log x with a t-based confidence interval."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    res = stats.linregress(lx, ly)
    k = len(lx)
    half = stats.t.ppf(0.5 + confidence / 2, k - 2) * res.stderr if k > 2 else math.inf
    return float(res.slope), (float(res.slope - half), float(res.slope + half)), float(res.intercept)


def _usable(points: list[MomentEstimate]) -> list[bool]:
    return [pt.value > 0 and pt.stderr / pt.value < MAX_REL_STDERR for pt in points]


def rate_sweep(template: Scenario, eps_list, schedule: RegimeSchedule, n: int, p: float, M: int,
               master_seed: int = 0, *, estimator: str | None = None, tolerance: float = 0.1,
               workers: int | None = None) -> RateReport:
    """Slope of E|u - sum_{i<=n} eps^{i/2} u^i|^p against eps, with coupled paths across eps."""
    sc = template.with_(n=n)
    if estimator is None:
        estimator = "space-time-Lp" if sc.conservative else "pointwise-sup"
    irregular = sc.G().smoothness == "window"
    if not schedule.validity(n, sc.case, sc.d, irregular):
        raise ValueError("schedule violates the scaling condition for this order")
    predicted = predicted_exponent(n, p, schedule, sc.case, sc.d)
    lanes = tuple((float(e), schedule.delta(float(e))) for e in eps_list)
    lane_res = run_job(BatchJob(sc, lanes, "remainder", estimator, p), M, master_seed, workers)
    pts = [estimate_from_lane(lr, estimator, p) for lr in lane_res]
    used = _usable(pts)
    if sum(used) < MIN_POINTS:
        raise InsufficientDataError(f"only {sum(used)} usable sweep points; need {MIN_POINTS}")
    xs = [pt.eps for pt, u in zip(pts, used) if u]
    ys = [pt.value for pt, u in zip(pts, used) if u]
    slope, ci, _ = fit_slope(xs, ys)
    passed = abs(slope - predicted) <= tolerance
    return RateReport(pts, slope, ci, predicted, tolerance, used, passed)


def divergence_sweep(template: Scenario, delta_list, n: int, p: float, M: int, case: int | None = None,
                     master_seed: int = 0, *, estimator: str = "terminal-mean", max_spread: float = 10.0,
                     workers: int | None = None) -> RateReport:
    """E|u^n|^p across delta against K_case(delta, d)^{pn/2}.

    The report's slope is the least-squares slope of the estimate against
    K^{pn/2} (not logarithmic), with ``extras`` holding the ratio curve,
    its max/min spread and the R^2 of that affine fit.
    """
    sc = template.with_(n=n)
    case = sc.case if case is None else case
    lanes = tuple((0.0, float(dl)) for dl in delta_list)
    lane_res = run_job(BatchJob(sc, lanes, "coefficient", estimator, p), M, master_seed, workers)
    pts = [estimate_from_lane(lr, estimator, p) for lr in lane_res]
    used = _usable(pts)
    if sum(used) < MIN_POINTS:
        raise InsufficientDataError(f"only {sum(used)} usable sweep points; need {MIN_POINTS}")
    ref = np.array([k_reference(case, sc.d, float(dl)) ** (p * n / 2) for dl in delta_list])
    vals = np.array([pt.value for pt in pts])
    ratio = vals / ref
    spread = float(ratio.max() / ratio.min()) if ratio.min() > 0 else math.inf
    u = np.array(used)
    if np.ptp(ref[u]) > 0:
        fit = stats.linregress(ref[u], vals[u])
        slope, r2 = float(fit.slope), float(fit.rvalue**2)
        half = stats.t.ppf(0.975, u.sum() - 2) * fit.stderr
    else:
        slope, r2, half = 0.0, math.nan, math.inf
    extras = {"reference": ref.tolist(), "ratio": ratio.tolist(), "spread": spread, "r2": r2, "case": case}
    return RateReport(pts, slope, (slope - half, slope + half), math.nan, max_spread, used, spread <= max_spread, extras)


@dataclass
class SurvivalPoint:
    eps: float
    delta: float
    M: int
    survived: int
    fraction: float
    ci: tuple[float, float]
    eps_threshold: float

    def row(self) -> dict:
        return {"epsilon": self.eps, "delta": self.delta, "estimate": self.fraction,
                "stderr": math.sqrt(max(self.fraction * (1 - self.fraction), 0.0) / self.M), "M": self.M}


def survival_curve(template: Scenario, gamma: float, eps_list, schedule: RegimeSchedule, M: int,
                   master_seed: int = 0, *, workers: int | None = None) -> list[SurvivalPoint]:
    """Empirical P(tau > T) with Clopper-Pearson 95% intervals, one point per eps."""
    sc = template.with_(gamma=gamma, n=0)
    if sc.gamma_margin is not None and sc.gamma_margin > gamma:
        sc = sc.with_(gamma_margin=gamma / 2)
    lanes = tuple((float(e), schedule.delta(float(e))) for e in eps_list)
    lane_res = run_job(BatchJob(sc, lanes, "none", "terminal-mean"), M, master_seed, workers)
    G_eff, _ = effective_coefficient(sc.G(), sc.initial(), sc.gamma, sc.gamma_margin)
    out = []
    for lr in lane_res:
        if lr.blown > BLOWUP_FRACTION * (lr.M + lr.blown):
            raise BlowUpThresholdError(f"{lr.blown} replicas blew up at eps={lr.eps}")
        surv = lr.M - lr.stopped
        ci = stats.binomtest(surv, lr.M).proportion_ci(0.95, method="exact")
        thr = epsilon_threshold(G_eff, lr.delta, sc.d) if sc.conservative and lr.delta > 0 else math.inf
        out.append(SurvivalPoint(lr.eps, lr.delta, lr.M, surv, surv / lr.M, (ci.low, ci.high), thr))
    return out


def survival_monotone(points: list[SurvivalPoint]) -> bool:
    """Survival nondecreasing along the list up to overlapping intervals."""
    return all(b.ci[1] >= a.ci[0] and b.fraction >= a.ci[0] for a, b in zip(points, points[1:]))


def covariance_check(scenario: Scenario, samples: int, master_seed: int = 0, sigma: float = 3.0) -> dict:
    """Per-mode test of E|dW_m|^2 = dt m_delta(m)^2 for the mollified increments.

    Pooled: the mean normalised power must be 1 within ``sigma`` standard
    errors.  Per mode: every standardised deviation must stay below the
    Bonferroni-corrected equivalent of ``sigma``.
    """
    grid = scenario.grid()
    mult = build_multiplier(grid, scenario.delta, scenario.n_moll)
    arity = grid.d if scenario.conservative else 1
    acc = np.zeros((arity,) + grid.spectral_shape)
    acc2 = np.zeros_like(acc)
    for r in range(samples):
        path = NoisePath(grid, replica_seed(master_seed, r), scenario.dt, 1, arity)
        pw = np.abs(path.spectral(0, mult)) ** 2
        acc += pw
        acc2 += pw**2
    expected = scenario.dt * mult.squared()
    keep = np.broadcast_to(expected > 0, acc.shape)
    mean = acc / samples
    var = (acc2 / samples - mean**2) * samples / (samples - 1)
    z = np.where(keep, (mean - expected) / np.sqrt(np.maximum(var, 1e-300) / samples), 0.0)
    norm = np.where(keep, mean / np.where(keep, expected, 1.0), 0.0)
    pooled = float(norm[keep].mean())
    # modes are independent, so the pooled normalised power has a simple SE
    pooled_se = float(np.sqrt(np.where(keep, var / np.where(keep, expected, 1.0) ** 2, 0.0)[keep].sum()) / keep.sum() / math.sqrt(samples))
    n_modes = int(keep.sum())
    z_crit = float(stats.norm.isf(stats.norm.sf(sigma) / n_modes))
    passed = abs(pooled - 1.0) <= sigma * pooled_se and float(np.abs(z).max()) <= z_crit
    return {"pooled": pooled, "pooled_stderr": pooled_se, "max_abs_z": float(np.abs(z).max()),
            "z_critical": z_crit, "modes": n_modes, "samples": samples, "passed": bool(passed)}


def estimate_dict(est: MomentEstimate) -> dict:
    d = asdict(est)
    d["location"] = list(est.location) if est.location else None
    return d
