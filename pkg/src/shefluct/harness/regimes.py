"""Joint scaling regimes (eps, delta(eps)) and the exponents they predict."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import sympy as sp

__all__ = ["RegimeSchedule", "k_symbolic", "predicted_exponent", "k_exponent"]

_eps = sp.Symbol("epsilon", positive=True)
_delta = sp.Symbol("delta", positive=True)


def k_symbolic(case: int, d: int, delta=_delta):
    """K_i(delta, d) as a sympy expression."""
    if case == 2:
        return delta ** (-d)
    if case != 1:
        raise ValueError(f"case must be 1 or 2, got {case}")
    if d == 1:
        return sp.Integer(1)
    if d == 2:
        return sp.log(1 / delta)
    return delta ** (2 - d)


@dataclass(frozen=True)
class RegimeSchedule:
    """``fixed``: delta constant; ``power``: delta(eps) = c * eps^a."""

    kind: str = "fixed"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "fixed":
            if float(self.params.get("delta", -1)) < 0:
                raise ValueError("fixed schedule needs delta >= 0")
        elif self.kind == "power":
            if float(self.params.get("c", 1.0)) <= 0 or float(self.params.get("a", -1)) <= 0:
                raise ValueError("power schedule needs c > 0 and a > 0")
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    @classmethod
    def fixed(cls, delta: float) -> "RegimeSchedule":
        return cls("fixed", {"delta": float(delta)})

    @classmethod
    def power(cls, a: float, c: float = 1.0) -> "RegimeSchedule":
        return cls("power", {"a": float(a), "c": float(c)})

    @classmethod
    def from_dict(cls, spec: dict) -> "RegimeSchedule":
        spec = dict(spec)
        return cls(spec.pop("kind"), spec)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    def delta(self, eps: float) -> float:
        if self.kind == "fixed":
            return float(self.params["delta"])
        return float(self.params.get("c", 1.0)) * eps ** float(self.params["a"])

    def _delta_expr(self):
        if self.kind == "fixed":
            return sp.nsimplify(self.params["delta"])
        return sp.nsimplify(self.params.get("c", 1.0)) * _eps ** sp.nsimplify(self.params["a"])

    def validity(self, n: int, case: int, d: int, irregular: bool = False) -> bool:
        """Whether eps K^{n+1} -> 0 along the schedule (plus the localisation term when irregular)."""
        dl = self._delta_expr()
        if self.kind == "fixed" and dl == 0:
            return case == 1 and d == 1
        expr = _eps * k_symbolic(case, d, dl) ** (n + 1)
        if irregular:
            expr = expr + _eps * dl ** (-d - (2 if case == 2 else 0))
        return sp.limit(expr, _eps, 0, "+") == 0


def k_exponent(schedule: RegimeSchedule, case: int, d: int) -> float:
    """kappa = lim log K(delta(eps)) / log eps (0 for fixed delta or logarithmic K)."""
    if schedule.kind == "fixed":
        return 0.0
    K = k_symbolic(case, d, schedule._delta_expr())
    return float(sp.limit(sp.log(K) / sp.log(_eps), _eps, 0, "+"))


def predicted_exponent(n: int, p: float, schedule: RegimeSchedule, case: int, d: int) -> float:
    """Exponent of eps in eps^{np/2} (eps K^{n+1})^{p/2}, the remainder moment bound."""
    e = sp.Symbol("e", positive=True)
    kap = sp.nsimplify(k_exponent(schedule, case, d))
    bound = e ** (sp.Rational(n) * sp.nsimplify(p) / 2) * (e * e ** (kap * (n + 1))) ** (sp.nsimplify(p) / 2)
    val = sp.limit(sp.log(bound) / sp.log(e), e, 0, "+")
    out = float(val)
    if not math.isfinite(out):
        raise ValueError("schedule gives no finite exponent")
    return out
