"""Diffusion coefficients G with closed-form derivative stacks.

Presets are looked up by stable string names (used in scenario files).
Irregular coefficients such as sqrt(u) are only smooth on part of the real
line; ``smooth_extension`` turns them into globally smooth coefficients that
agree with G on an admissible window and vanish outside a margin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "MAX_ORDER",
    "DiffusionCoefficient",
    "smooth_preset",
    "irregular_preset",
    "coefficient_from_spec",
    "smooth_extension",
    "taylor_remainder_check",
    "smooth_step",
]

MAX_ORDER = 6

DerivFn = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class DiffusionCoefficient:
    """G together with its derivatives G^(l), 0 <= l <= max_order.

    ``smoothness`` is ``"global"`` (bounded derivatives on the whole line) or
    ``"window"`` (smooth only on the open ``domain``).  A window-smooth
    coefficient must be passed through :func:`smooth_extension` before it
    can drive a solver.
    """

    name: str
    deriv: DerivFn = field(repr=False, compare=False)
    smoothness: str = "global"
    domain: tuple[float, float] = (-math.inf, math.inf)
    max_order: int = MAX_ORDER
    bounds: tuple[float, ...] | None = None
    params: dict = field(default_factory=dict, compare=False)
    window: tuple[float, float] | None = None
    base: "DiffusionCoefficient | None" = field(default=None, repr=False, compare=False)

    def __call__(self, u):
        return self.derivative(u, 0)

    def derivative(self, u, order: int):
        if not 0 <= order <= self.max_order:
            raise ValueError(f"derivative order {order} outside [0, {self.max_order}]")
        u = np.asarray(u, dtype=float)
        return self.deriv(np.atleast_1d(u), order).reshape(u.shape)

    def derivatives(self, u, upto: int) -> list[np.ndarray]:
        return [self.derivative(u, l) for l in range(upto + 1)]

    def derivative_bound(self, order: int) -> float:
        """Sup of |G^(order)| over the line (global) or the domain (window)."""
        if self.bounds is not None and order < len(self.bounds):
            return self.bounds[order]
        lo, hi = self.support()
        xs = np.linspace(lo, hi, 20001)
        return float(np.max(np.abs(self.derivative(xs, order))))

    def support(self) -> tuple[float, float]:
        lo, hi = self.domain
        return (max(lo, -20.0), min(hi, 20.0))

    def spec(self) -> dict:
        return {"name": self.name, **self.params}


def _falling(c: float, l: int) -> float:
    # c (c-1) ... (c-l+1)
    out = 1.0
    for j in range(l):
        out *= c - j
    return out


def _constant(c: float) -> DiffusionCoefficient:
    def deriv(u, l):
        return np.full_like(u, c if l == 0 else 0.0)

    return DiffusionCoefficient(
        "constant", deriv, bounds=(abs(c),) + (0.0,) * MAX_ORDER, params={"value": c}
    )


def _cosine() -> DiffusionCoefficient:
    def deriv(u, l):
        return np.cos(u + l * np.pi / 2)

    return DiffusionCoefficient("cosine", deriv, bounds=(1.0,) * (MAX_ORDER + 1))


def _rational() -> DiffusionCoefficient:
    # 1/(1+u^2) = Im 1/(u - i), so G^(l) = (-1)^l l! Im (u - i)^-(l+1)
    def deriv(u, l):
        return (-1) ** l * math.factorial(l) * np.imag((u - 1j) ** (-(l + 1)))

    bounds = tuple(
        float(np.max(np.abs(deriv(np.linspace(-4, 4, 80001), l)))) for l in range(MAX_ORDER + 1)
    )
    return DiffusionCoefficient("rational", deriv, bounds=bounds)


def _sqrt_derivative(v, l):
    return _falling(0.5, l) * v ** (0.5 - l)


def _sqrt() -> DiffusionCoefficient:
    def deriv(u, l):
        with np.errstate(invalid="ignore", divide="ignore"):
            return _sqrt_derivative(u, l)

    return DiffusionCoefficient("sqrt", deriv, smoothness="window", domain=(0.0, math.inf))


def _logistic_sqrt() -> DiffusionCoefficient:
    # Leibniz on sqrt(u) * sqrt(1 - u)
    def deriv(u, l):
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.zeros_like(u)
            for j in range(l + 1):
                a = _sqrt_derivative(u, j)
                b = (-1) ** (l - j) * _sqrt_derivative(1.0 - u, l - j)
                out = out + math.comb(l, j) * a * b
            return out

    return DiffusionCoefficient("logistic-sqrt", deriv, smoothness="window", domain=(0.0, 1.0))


_SMOOTH = {"constant": _constant, "cosine": _cosine, "rational": _rational}
_IRREGULAR = {"sqrt": _sqrt, "logistic-sqrt": _logistic_sqrt}


def smooth_preset(name: str, **params) -> DiffusionCoefficient:
    """Globally smooth presets: ``constant`` (param ``value``), ``cosine``, ``rational``.

    ``constant(c)`` style names are accepted as well.
    """
    if name.startswith("constant(") and name.endswith(")"):
        params = {"value": float(name[len("constant(") : -1])}
        name = "constant"
    if name not in _SMOOTH:
        raise KeyError(f"unknown smooth coefficient preset {name!r}")
    if name == "constant":
        return _constant(float(params.get("value", 1.0)))
    return _SMOOTH[name]()


def irregular_preset(name: str) -> DiffusionCoefficient:
    if name not in _IRREGULAR:
        raise KeyError(f"unknown irregular coefficient preset {name!r}")
    return _IRREGULAR[name]()


def coefficient_from_spec(spec: dict | str) -> DiffusionCoefficient:
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name")
    if name in _IRREGULAR:
        return irregular_preset(name)
    return smooth_preset(name, **spec)


# -- smooth cutoff ---------------------------------------------------------
#
# The transition uses psi(s) = f(s) / (f(s) + f(1-s)), f(s) = exp(-1/s), which
# is C-infinity, exactly 0 for s <= 0 and exactly 1 for s >= 1.  Derivatives
# come from truncated Taylor (jet) arithmetic, so every order is available.


def _jet_mul(a, b):
    n = a.shape[0]
    out = np.zeros_like(a)
    for k in range(n):
        for j in range(k + 1):
            out[k] += a[j] * b[k - j]
    return out


def _jet_recip(a):
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = 1.0 / a[0]
    for k in range(1, n):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc += a[j] * out[k - j]
        out[k] = -acc / a[0]
    return out


def _jet_exp(a):
    n = a.shape[0]
    out = np.zeros_like(a)
    out[0] = np.exp(a[0])
    for k in range(1, n):
        acc = np.zeros_like(a[0])
        for j in range(1, k + 1):
            acc += j * a[j] * out[k - j]
        out[k] = acc / k
    return out


def _f_jet(s, order):
    """Jet of exp(-1/s) at s > 0 in the variable s."""
    x = np.zeros((order + 1,) + s.shape)
    x[0] = s
    if order >= 1:
        x[1] = 1.0
    return _jet_exp(-_jet_recip(x))


_EDGE = 2e-3


def smooth_step(s, order: int = 0) -> np.ndarray:
    """order-th derivative of the C-infinity step rising from 0 at s=0 to 1 at s=1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    # exp(-1/s) is below 1e-217 within _EDGE of the ends; treat as flat there
    if order == 0:
        out[s >= 1.0 - _EDGE] = 1.0
    inside = (s > _EDGE) & (s < 1.0 - _EDGE)
    if np.any(inside):
        si = s[inside]
        fa = _f_jet(si, order)
        fb = _f_jet(1.0 - si, order)
        # chain rule for s -> 1 - s flips odd coefficients
        fb = fb * ((-1.0) ** np.arange(order + 1)).reshape((-1,) + (1,) * si.ndim)
        q = _jet_mul(fa, _jet_recip(fa + fb))
        out[inside] = q[order] * math.factorial(order)
    return out


def _cutoff(z, order, lo, hi, margin):
    """Derivative of phi = 1 on [lo, hi], 0 outside (lo - margin, hi + margin)."""
    rise = smooth_step((z - (lo - margin)) / margin, order) / margin**order
    fall = smooth_step(((hi + margin) - z) / margin, order) * (-1.0 / margin) ** order
    left = z < lo
    right = z > hi
    out = np.zeros_like(z)
    if order == 0:
        out[:] = 1.0
    out[left] = rise[left]
    out[right] = fall[right]
    return out


def smooth_extension(G: DiffusionCoefficient, window: tuple[float, float], margin: float) -> DiffusionCoefficient:
    """Globally smooth G0 equal to G on ``window`` and 0 beyond ``margin`` of it.

    ``window`` is typically ``[ess inf u0 - gamma, ess sup u0 + gamma]`` and
    ``margin`` is gamma'.  The support ``[lo - margin, hi + margin]`` must lie
    strictly inside G's domain of smoothness.
    """
    lo, hi = map(float, window)
    if not (margin > 0 and lo <= hi):
        raise ValueError("need a nonempty window and a positive margin")
    dlo, dhi = G.domain
    if not (lo - margin > dlo and hi + margin < dhi):
        raise ValueError(
            f"window [{lo}, {hi}] with margin {margin} touches the singular set of "
            f"{G.name} (smooth on ({dlo}, {dhi}))"
        )
    support = (lo - margin, hi + margin)

    def deriv(z, l):
        zc = np.clip(z, *support)
        inside = (z >= lo) & (z <= hi)
        out = np.zeros_like(z)
        for j in range(l + 1):
            out = out + math.comb(l, j) * G.derivative(zc, j) * _cutoff(z, l - j, lo, hi, margin)
        out[z <= support[0]] = 0.0
        out[z >= support[1]] = 0.0
        # exact agreement on the window
        out[inside] = G.derivative(z[inside], l)
        return out

    return DiffusionCoefficient(
        f"{G.name}~",
        deriv,
        smoothness="global",
        domain=support,
        max_order=G.max_order,
        params=G.params,
        window=(lo, hi),
        base=G,
    )


def taylor_remainder_check(G: DiffusionCoefficient, a, b, n: int):
    """|G(a) - sum_{l<n} G^(l)(b) (a-b)^l / l!|, the order-n Taylor residual."""
    if n > G.max_order:
        raise ValueError(f"order {n} exceeds available derivatives ({G.max_order})")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = a - b
    approx = G.derivative(b, 0)
    for l in range(1, n):
        approx = approx + G.derivative(b, l) * h**l / math.factorial(l)
    return np.abs(G.derivative(a, 0) - approx)
