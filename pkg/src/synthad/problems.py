"""Registry of named synthetic ground-truth problems for experiments."""

from __future__ import annotations

import numpy as np

from .oracle import OracleProblem, SyntheticDensity

__all__ = ["named_problem", "PROBLEM_NAMES"]


def _uniform_1d() -> OracleProblem:
    dens = SyntheticDensity(((0.0, 1.0),), np.array([1.0]))
    return OracleProblem(dens, rho=0.5)


def _halfstep_1d() -> OracleProblem:
    dens = SyntheticDensity(((0.0, 0.5, 1.0),), np.array([2.0, 0.0]))
    return OracleProblem(dens, rho=1.0)


def _halfstep_1d_rho3() -> OracleProblem:
    dens = SyntheticDensity(((0.0, 0.5, 1.0),), np.array([2.0, 0.0]))
    return OracleProblem(dens, rho=3.0)


def _blocks_2d(rho: float) -> OracleProblem:
    # checkerboard: high density on the diagonal blocks
    dens = SyntheticDensity(
        ((0.0, 0.5, 1.0), (0.0, 0.5, 1.0)),
        np.array([[1.8, 0.2], [0.2, 1.8]]),
    )
    return OracleProblem(dens, rho=rho)


def _staircase_1d() -> OracleProblem:
    # eta departs from 1/2 linearly in measure: cell pairs (eta = 1/2 + m,
    # 1/2 - m) with widths proportional to (1/2 - m, 1/2 + m) each carry equal
    # P_X mass and satisfy the unit-mass constraint, so P(|eta - 1/2| <= t)
    # grows linearly in t and the fitted noise exponent is ~1.
    pairs = 10
    margins = np.linspace(0.04, 0.4, pairs)
    widths = []
    values = []
    for m in margins:
        eta_hi, eta_lo = 0.5 + m, 0.5 - m
        widths.extend([(0.5 - m) / pairs, (0.5 + m) / pairs])
        values.extend([eta_hi / (1.0 - eta_hi), eta_lo / (1.0 - eta_lo)])
    bps = tuple(np.concatenate([[0.0], np.cumsum(widths)]))
    bps = bps[:-1] + (1.0,)  # pin the last breakpoint against rounding
    return OracleProblem(SyntheticDensity((bps,), np.array(values)), rho=1.0)


_REGISTRY = {
    "uniform-1d": _uniform_1d,
    "halfstep-1d": _halfstep_1d,
    "halfstep-1d-rho3": _halfstep_1d_rho3,
    "blocks-2d": lambda: _blocks_2d(1.0),
    "blocks-2d-s23": lambda: _blocks_2d(0.5),
    "staircase-1d": _staircase_1d,
}

PROBLEM_NAMES = tuple(sorted(_REGISTRY))


def named_problem(name: str) -> OracleProblem:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(PROBLEM_NAMES)}")
