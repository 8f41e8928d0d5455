"""Synthetic-anomaly samplers for the uniform reference measure, and the
policy that sizes the synthetic sample count n' relative to n."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import CategoricalColumn, NumericColumn, Schema

__all__ = [
    "AnomalyRatioPolicy",
    "anomaly_count",
    "sample_uniform_support",
    "sample_uniform_ambient",
]


@dataclass(frozen=True)
class AnomalyRatioPolicy:
    """n' sizing: 'equal' (n'=n), 'lower_bound' (n'=ceil(((1-s)/s) n)), or
    'multiple' with factor k (n'=ceil(k n))."""

    mode: str = "equal"
    k: float = 1.0

    def __post_init__(self):
        if self.mode not in ("equal", "lower_bound", "multiple"):
            raise ValueError("mode must be equal, lower_bound, or multiple")
        if self.mode == "multiple" and self.k <= 0:
            raise ValueError("multiple mode needs k > 0")


def anomaly_count(n: int, s: float, policy: AnomalyRatioPolicy) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    if policy.mode == "equal":
        return n
    if policy.mode == "lower_bound":
        if not 0.5 <= s < 1.0:
            raise ValueError("lower_bound mode requires s in [1/2, 1)")
        # small backoff so e.g. (1/3)/(2/3)*n does not round 50 up to 51
        n_prime = math.ceil((1.0 - s) / s * n - 1e-9)
        assert n_prime <= n  # guaranteed for s >= 1/2
        return max(1, n_prime)
    return max(1, math.ceil(policy.k * n))


def sample_uniform_support(schema: Schema, n_prime: int, seed) -> np.ndarray:
    """Uniform draws on the encoded support: numerics uniform on [0,1], each
    categorical block a valid one-hot with a uniformly chosen category."""
    if n_prime < 1:
        raise ValueError("n_prime must be >= 1")
    if not schema.columns:
        raise ValueError("schema has no feature columns")
    rng = np.random.default_rng(seed)
    X = np.zeros((n_prime, schema.encoded_dim))
    j = 0
    for c in schema.columns:
        if isinstance(c, NumericColumn):
            X[:, j] = rng.random(n_prime)
            j += 1
        elif isinstance(c, CategoricalColumn):
            k = len(c.categories)
            choice = rng.integers(0, k, size=n_prime)
            X[np.arange(n_prime), j + choice] = 1.0
            j += k
    return X


def sample_uniform_ambient(d: int, n_prime: int, seed) -> np.ndarray:
    """Uniform on the full ambient cube, ignoring one-hot structure."""
    if d < 1 or n_prime < 1:
        raise ValueError("d and n_prime must be >= 1")
    return np.random.default_rng(seed).random((n_prime, d))
