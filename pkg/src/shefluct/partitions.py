"""Integer-solution sets indexing the Taylor products in the expansion drifts.

``lambda_set(k, l)`` holds tuples ``(q_1, ..., q_{k-l})`` of nonnegative
integers with ``sum q_i = l`` and ``sum i*q_i = k-1``; ``lambda_set_m``
replaces the weighted target ``k-1`` by ``m-1``.  The product term

    J(k, l) = sum_{q in lambda_set(k, l)} l!/(q_1!...q_{k-l}!) prod_i (u^i)^{q_i}

is what multiplies ``G^(l)(u^0)/l!`` in the equation for the k-th coefficient.
"""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

__all__ = ["lambda_set", "lambda_set_m", "weight", "evaluate_j", "drift_coefficient"]

Solution = tuple[int, ...]


def _enumerate(length: int, total: int, weighted: int) -> tuple[Solution, ...]:
    """All q in N^length with sum q = total and sum i*q_i = weighted (1-based i)."""
    out: list[Solution] = []
    q = [0] * length

    # descend from the heaviest index; remaining budget must stay reachable
    def rec(i: int, left: int, wleft: int):
        if i == 0:
            if left == 0 and wleft == 0:
                out.append(tuple(q))
            return
        # indices 1..i-1 can absorb at most (i-1)*left weight and at least left
        for c in range(min(left, wleft // i), -1, -1):
            rl, rw = left - c, wleft - c * i
            if i > 1 and not (rl <= rw <= (i - 1) * rl):
                continue
            if i == 1 and rl != rw:
                continue
            q[i - 1] = c
            rec(i - 1, rl, rw)
        q[i - 1] = 0

    if length == 0:
        return ((),) if total == 0 and weighted == 0 else ()
    rec(length, total, weighted)
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def lambda_set(k: int, l: int) -> tuple[Solution, ...]:
    if k < 0 or l < 0:
        raise ValueError(f"negative index in lambda_set({k}, {l})")
    if k < 1:
        raise ValueError("k must be >= 1")
    if l >= k:
        return ()
    return _enumerate(k - l, l, k - 1)


@lru_cache(maxsize=None)
def lambda_set_m(k: int, l: int, m: int) -> tuple[Solution, ...]:
    if k < 0 or l < 0 or m < 0:
        raise ValueError(f"negative index in lambda_set_m({k}, {l}, {m})")
    if k < 1 or l >= k or m < 1:
        return ()
    if not l + 1 <= m <= (k - l) * l + 1:
        return ()
    return _enumerate(k - l, l, m - 1)


def weight(l: int, q: Sequence[int]) -> int:
    """Multinomial coefficient l! / (q_1! ... q_r!)."""
    if sum(q) != l:
        raise ValueError(f"entries of {tuple(q)} do not sum to {l}")
    out = math.factorial(l)
    for qi in q:
        out //= math.factorial(qi)
    return out


def evaluate_j(k: int, l: int, coefficients: Sequence[np.ndarray]):
    """Pointwise J(k, l) from ``coefficients[i]`` = i-th expansion coefficient.

    ``coefficients[0]`` (the deterministic term) is never read; indices
    1..k-l must be present.  J(1, 0) is the constant 1 and J(k, 0) = 0 for
    k >= 2, both following from the enumeration.
    """
    sols = lambda_set(k, l)
    need = k - l
    # (l-1, 0, ..., 0, 1) is always a solution, so order k-l is always read
    if l >= 1 and sols and len(coefficients) <= need:
        raise ValueError(f"J({k},{l}) needs coefficients up to order {need}")
    shape = np.broadcast_shapes(*(np.shape(c) for c in coefficients[: need + 1]))
    out = np.zeros(shape)
    for q in sols:
        term = float(weight(l, q))
        for i, qi in enumerate(q, start=1):
            if qi:
                term = term * coefficients[i] ** qi
        out = out + term
    return out


def drift_coefficient(k: int, g_derivs: Sequence[np.ndarray], coefficients: Sequence[np.ndarray]):
    """sum_{l<k} G^(l)(u^0)/l! * J(k, l): the noise coefficient of the k-th equation.

    ``g_derivs[l]`` is G^(l) evaluated at the deterministic term.
    """
    if len(g_derivs) < k:
        raise ValueError(f"order-{k} coefficient needs G derivatives up to {k - 1}")
    out = np.zeros(np.shape(g_derivs[0]))
    for l in range(k):
        if lambda_set(k, l):
            out = out + g_derivs[l] / math.factorial(l) * evaluate_j(k, l, coefficients)
    return out
