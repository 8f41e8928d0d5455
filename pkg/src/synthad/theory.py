"""Closed-form sizing, approximation, covering-number, and rate calculators.

All logarithms are natural except the explicit base-2 logs in the depth and
sharpness-step formulas. Unknown multiplicative constants are caller-supplied
parameters defaulting to 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

__all__ = [
    "SizingReport",
    "sizing",
    "class_dimensions",
    "approx_error_bound",
    "covering_bound_general",
    "covering_bound_hypothesis",
    "rate_exponents",
    "rate_bound_value",
]


@dataclass(frozen=True)
class SizingReport:
    n: int
    d: int
    alpha: float
    q: float
    r: float
    s: float
    N: int
    m: int
    tau: float
    L_star: int
    w_star: int
    v_star: int
    K_star: float
    N_clamped: bool
    rate_excess: float
    rate_levelset: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def sizing(n: int, d: int, alpha: float, q: float, r: float, s: float) -> SizingReport:
    """Network-class sizing for a sample budget n and smoothness/noise (alpha, q).

    N is raised to the admissibility floor max{(alpha+1)^d, (r+1)e^d} when the
    raw formula falls below it (flagged via N_clamped).
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    if d < 1:
        raise ValueError("d must be >= 1")
    if alpha <= 0 or r <= 0:
        raise ValueError("alpha and r must be > 0")
    if q < 0:
        raise ValueError("q must be >= 0")
    if not 0.5 <= s < 1.0:
        raise ValueError("s must lie in [1/2, 1)")

    N_raw = math.ceil((n / math.log(n) ** 4) ** (d / (d + alpha * (q + 2))))
    floor = max((alpha + 1) ** d, (r + 1) * math.e**d)
    N = max(N_raw, math.ceil(floor))
    clamped = N > N_raw
    m = math.ceil((1.0 + alpha / d) * math.log(N) / math.log(2.0))
    tau = s / ((1.0 - s) * n)
    L_star, w_star, v_star, _ = class_dimensions(d, alpha, N, m)
    excess, levelset = rate_exponents(alpha, q, d)
    return SizingReport(
        n=n, d=d, alpha=alpha, q=q, r=r, s=s,
        N=N, m=m, tau=tau,
        L_star=L_star, w_star=w_star, v_star=v_star, K_star=1.0,
        N_clamped=clamped, rate_excess=excess, rate_levelset=levelset,
    )


def class_dimensions(d: int, alpha: float, N: int, m: int) -> tuple[int, int, int, float]:
    """(L*, w*, v*, K*) of the constrained class for given sharpness (N, m)."""
    if N < 1 or m < 1 or d < 1 or alpha <= 0:
        raise ValueError("require N, m, d >= 1 and alpha > 0")
    L_star = 8 + (m + 5) * (1 + math.ceil(math.log2(max(d, alpha))))
    w_star = 6 * (d + math.ceil(alpha)) * N
    v_star = math.ceil(141 * (d + alpha + 1) ** (3 + d) * N * (m + 6))
    return L_star, w_star, v_star, 1.0


def approx_error_bound(N: int, m: int, d: int, alpha: float, r: float) -> float:
    """Sup-norm approximation bound for the sized class:
    (2r+1)(1+d^2+alpha^2) 6^d N 2^{-m} + r 3^alpha N^{-alpha/d}."""
    if N < 1 or m < 1:
        raise ValueError("N and m must be >= 1")
    return (2 * r + 1) * (1 + d**2 + alpha**2) * 6**d * N * 2.0 ** (-m) + (
        r * 3.0**alpha * N ** (-alpha / d)
    )


def covering_bound_general(eps: float, L: int, w: int, v: int, K: float) -> float:
    """log covering number of the constrained class:
    2L(v+1) ln(eps^{-1} (L+1)(w+1) max{K,1})."""
    if eps <= 0:
        raise ValueError("eps must be > 0")
    return 2.0 * L * (v + 1) * math.log((L + 1) * (w + 1) * max(K, 1.0) / eps)


def covering_bound_hypothesis(
    eps: float, m: int, N: int, tau: float, c_const: float = 1.0
) -> float:
    """log covering number of the clamped hypothesis space:
    c m^2 N ln((tau eps)^{-1} m N)."""
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if c_const <= 0:
        raise ValueError("c_const must be > 0")
    return c_const * m**2 * N * math.log(m * N / (tau * eps))


def rate_exponents(alpha: float, q: float, d: int) -> tuple[float, float]:
    """(excess-risk, level-set) rate exponents of ((log n)^4 / n)^(.)."""
    if alpha <= 0 or q < 0 or d < 1:
        raise ValueError("require alpha > 0, q >= 0, d >= 1")
    denom = d + alpha * (q + 2)
    return alpha * (q + 1) / denom, alpha * q / denom


def rate_bound_value(n: int, exponent: float, c_const: float = 1.0) -> float:
    """Evaluate c * ((log n)^4 / n)^exponent at a given n."""
    if n < 3:
        raise ValueError("n must be >= 3")
    return c_const * (math.log(n) ** 4 / n) ** exponent
