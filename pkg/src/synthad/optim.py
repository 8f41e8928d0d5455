"""Losses, Adam with coupled weight decay, and the weighted-hinge ERM loop.

The training objective is the class-weighted empirical risk
(s/n) * sum phi(f(X_i)) + ((1-s)/n') * sum phi(-f(X'_j)) over real normals
and synthetic anomalies. Training optimizes phi(y * f(x)); the sign-composed
value is also available as a 0-1 surrogate risk.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .net import (
    NetworkConfig,
    Parameters,
    backward,
    forward_batch,
    init_params,
)

__all__ = [
    "TrainConfig",
    "TrainHistory",
    "DivergenceError",
    "hinge",
    "hinge_deriv",
    "logistic",
    "logistic_deriv",
    "empirical_risk",
    "empirical_risk_of",
    "surrogate_01_risk",
    "AdamState",
    "adam_step",
    "train_erm",
    "grad_check",
]


class DivergenceError(RuntimeError):
    """Raised when the training risk becomes NaN or infinite."""


def hinge(t):
    return np.maximum(0.0, 1.0 - np.asarray(t, dtype=float))


def hinge_deriv(t):
    """Subgradient of hinge: -1 for t < 1, 0 for t >= 1 (0 at the kink)."""
    return np.where(np.asarray(t, dtype=float) < 1.0, -1.0, 0.0)


def logistic(t):
    """log(1 + exp(-t)), stable for large |t|."""
    return np.logaddexp(0.0, -np.asarray(t, dtype=float))


def logistic_deriv(t):
    """Derivative of log(1 + exp(-t)): -sigmoid(-t), computed stably."""
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = -_sigmoid(-arr)
    return out if np.ndim(t) else float(out[0])


def _sigmoid(t):
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


_LOSSES = {"hinge": (hinge, hinge_deriv), "logistic": (logistic, logistic_deriv)}


def empirical_risk(f_normal, f_synth, s: float, loss: str = "hinge") -> float:
    """Weighted empirical risk from network outputs on T and T'.

    (s/n) sum phi(f(X_i)) + ((1-s)/n') sum phi(-f(X'_j)).
    """
    f_normal = np.atleast_1d(np.asarray(f_normal, dtype=float))
    f_synth = np.atleast_1d(np.asarray(f_synth, dtype=float))
    if f_normal.size == 0 or f_synth.size == 0:
        raise ValueError("both sample sets must be non-empty")
    phi = _LOSSES[loss][0]
    return float(s * phi(f_normal).mean() + (1.0 - s) * phi(-f_synth).mean())


def empirical_risk_of(f, T, T_prime, s: float, loss: str = "hinge") -> float:
    """Weighted empirical risk of a callable f evaluated on sample matrices."""
    T = np.atleast_2d(np.asarray(T, dtype=float))
    T_prime = np.atleast_2d(np.asarray(T_prime, dtype=float))
    return empirical_risk(f(T), f(T_prime), s, loss)


def surrogate_01_risk(f_normal, f_synth, s: float) -> float:
    """Risk with sign-composed margins; equals twice the weighted error rate."""
    sgn = lambda v: np.where(np.asarray(v, dtype=float) >= 0.0, 1.0, -1.0)
    return empirical_risk(sgn(f_normal), sgn(f_synth), s, loss="hinge")


@dataclass(frozen=True)
class TrainConfig:
    s: float = 0.5
    loss: str = "hinge"
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 1e-4
    max_epochs: int = 200
    patience: int = 10
    batch_size: int | None = None  # None = full batch
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 0.5 <= self.s < 1.0:
            raise ValueError("s must lie in [1/2, 1)")
        if self.loss not in _LOSSES:
            raise ValueError(f"loss must be one of {sorted(_LOSSES)}")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience > self.max_epochs:
            raise ValueError("patience must be <= max_epochs")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate > 0 and weight_decay >= 0 required")

    def to_dict(self) -> dict:
        return {
            "s": self.s, "loss": self.loss, "learning_rate": self.learning_rate,
            "adam_beta1": self.adam_beta1, "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps, "weight_decay": self.weight_decay,
            "max_epochs": self.max_epochs, "patience": self.patience,
            "batch_size": self.batch_size, "val_fraction": self.val_fraction,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class TrainHistory:
    train_risk: list[float] = field(default_factory=list)
    val_risk: list[float] = field(default_factory=list)
    epochs_run: int = 0
    best_epoch: int = 0
    converged: bool = False

    def to_csv(self, path):
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "train_risk", "val_risk"])
            for i, (tr, vr) in enumerate(zip(self.train_risk, self.val_risk)):
                writer.writerow([i, tr, vr])


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Parameters) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in params.arrays()],
            v=[np.zeros_like(a) for a in params.arrays()],
        )


def adam_step(
    params: Parameters,
    state: AdamState,
    grads: Parameters,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> tuple[Parameters, AdamState]:
    """One Adam update. Weight decay is coupled: lambda*theta joins the gradient."""
    p_arrays = params.arrays()
    g_arrays = grads.arrays()
    if len(p_arrays) != len(g_arrays) or any(
        p.shape != g.shape for p, g in zip(p_arrays, g_arrays)
    ):
        raise ValueError("gradient shapes do not match parameters")
    t = state.t + 1
    new_params = params.copy()
    n_arrays = new_params.arrays()
    new_m, new_v = [], []
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, g, m, v, out in zip(p_arrays, g_arrays, state.m, state.v, n_arrays):
        g = g + weight_decay * p
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * g * g
        out -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)


def _risk_from_outputs(out_n, out_s, cfg: TrainConfig) -> float:
    return empirical_risk(out_n, out_s, cfg.s, cfg.loss)


def _holdout(n: int, frac: float, rng: np.random.Generator):
    idx = rng.permutation(n)
    n_val = min(max(1, round(frac * n)), n - 1) if n > 1 else 0
    return idx[n_val:], idx[:n_val]


def train_erm(
    T: np.ndarray,
    T_prime: np.ndarray,
    net_config: NetworkConfig,
    train_config: TrainConfig,
) -> tuple[Parameters, TrainHistory]:
    """Train by weighted hinge (or logistic) ERM with Adam and early stopping.

    Holds out val_fraction of both T and T' for validation; returns the
    parameters that achieved the best validation risk. Deterministic for a
    fixed (net_config.init_seed, train_config.seed).
    """
    T = np.atleast_2d(np.asarray(T, dtype=float))
    T_prime = np.atleast_2d(np.asarray(T_prime, dtype=float))
    if T.size == 0 or T_prime.size == 0:
        raise ValueError("T and T_prime must be non-empty")
    cfg = train_config
    rng = np.random.default_rng(cfg.seed)

    tr_n, va_n = _holdout(len(T), cfg.val_fraction, rng)
    tr_s, va_s = _holdout(len(T_prime), cfg.val_fraction, rng)
    Xn_tr, Xn_va = T[tr_n], T[va_n]
    Xs_tr, Xs_va = T_prime[tr_s], T_prime[va_s]
    has_val = len(Xn_va) > 0 and len(Xs_va) > 0

    params = init_params(net_config)
    state = AdamState.zeros_like(params)
    history = TrainHistory()

    phi_deriv = _LOSSES[cfg.loss][1]
    n_tr, m_tr = len(Xn_tr), len(Xs_tr)
    X_all = np.vstack([Xn_tr, Xs_tr])
    y_all = np.concatenate([np.ones(n_tr), -np.ones(m_tr)])
    w_all = np.concatenate(
        [np.full(n_tr, cfg.s / n_tr), np.full(m_tr, (1.0 - cfg.s) / m_tr)]
    )

    best_params = params.copy()
    best_val = np.inf
    best_epoch = 0
    since_best = 0

    for epoch in range(cfg.max_epochs):
        if cfg.batch_size is None:
            batches = [np.arange(len(X_all))]
        else:
            order = rng.permutation(len(X_all))
            batches = [
                order[i : i + cfg.batch_size]
                for i in range(0, len(order), cfg.batch_size)
            ]
        for idx in batches:
            grads = _weighted_grad(
                params, net_config, X_all[idx], y_all[idx], w_all[idx], phi_deriv
            )
            params, state = adam_step(
                params, state, grads,
                lr=cfg.learning_rate, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2,
                eps=cfg.adam_eps, weight_decay=cfg.weight_decay,
            )

        out_n = forward_batch(params, net_config, Xn_tr)
        out_s = forward_batch(params, net_config, Xs_tr)
        train_risk = _risk_from_outputs(out_n, out_s, cfg)
        if has_val:
            val_risk = _risk_from_outputs(
                forward_batch(params, net_config, Xn_va),
                forward_batch(params, net_config, Xs_va),
                cfg,
            )
        else:
            val_risk = train_risk
        if not np.isfinite(train_risk) or not np.isfinite(val_risk):
            raise DivergenceError(
                f"non-finite risk at epoch {epoch}: train={train_risk}, val={val_risk}"
            )
        history.train_risk.append(train_risk)
        history.val_risk.append(val_risk)
        history.epochs_run = epoch + 1

        if val_risk < best_val:
            best_val = val_risk
            best_params = params.copy()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                history.converged = True
                break

    history.best_epoch = best_epoch
    return best_params, history


def _weighted_grad(params, net_config, X, y, w, phi_deriv) -> Parameters:
    """Gradient of sum w_i * phi(y_i f(x_i)); reuses the hinge backward for
    hinge loss and rescales the per-sample weights for other losses."""
    if phi_deriv is hinge_deriv:
        batch = list(zip(X, y, w))
        return backward(params, net_config, batch)
    return _generic_grad(params, net_config, X, y, w, phi_deriv)


def _generic_grad(params, net_config, X, y, w, phi_deriv) -> Parameters:
    """Backprop for an arbitrary margin loss: dL/df_i = w_i phi'(y_i f_i) y_i."""
    from .net import _act, _act_deriv, _forward_cached, hard_tanh  # internal reuse

    pre_acts, h_last, pre_out = _forward_cached(params, net_config, X)
    if net_config.clamp_tau is None:
        dout = w * phi_deriv(y * pre_out) * y
    else:
        tau = net_config.clamp_tau
        clamp_d = np.where((pre_out >= -tau) & (pre_out < tau), 1.0 / tau, 0.0)
        dout = w * phi_deriv(y * hard_tanh(pre_out, tau)) * y * clamp_d
    grad_outer = h_last.T @ dout
    delta = np.outer(dout, params.outer)
    grad_W = [None] * net_config.depth
    grad_b = [None] * net_config.depth
    acts_below = [X] + [_act(z, net_config) for z in pre_acts[:-1]]
    for i in range(net_config.depth - 1, -1, -1):
        dz = delta * _act_deriv(pre_acts[i], net_config)
        grad_W[i] = dz.T @ acts_below[i]
        grad_b[i] = dz.sum(axis=0)
        if i > 0:
            delta = dz @ params.weights[i]
    return Parameters(grad_W, grad_b, grad_outer)


def grad_check(
    net_config: NetworkConfig,
    batch,
    eps: float = 1e-5,
    params: Parameters | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Coordinates whose +/-eps interval crosses a hinge or ReLU kink are skipped;
    away from kinks the objective is locally linear in each coordinate, which a
    nonzero second difference detects.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if params is None:
        params = init_params(net_config)
    analytic = backward(params, net_config, batch)

    def risk_at(p: Parameters) -> float:
        X = np.asarray([x for x, _, _ in batch], dtype=float)
        y = np.asarray([yy for _, yy, _ in batch], dtype=float)
        w = np.asarray([ww for _, _, ww in batch], dtype=float)
        out = forward_batch(p, net_config, X)
        return float(np.sum(w * hinge(y * out)))

    base = risk_at(params)
    max_rel = 0.0
    work = params.copy()
    w_arrays = work.arrays()
    a_arrays = analytic.arrays()
    grad_scale = max(max(float(np.max(np.abs(a))) for a in a_arrays), 1e-12)
    for arr, g_arr in zip(w_arrays, a_arrays):
        flat = arr.ravel()
        g_flat = g_arr.ravel()
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            r_plus = risk_at(work)
            flat[k] = orig - eps
            r_minus = risk_at(work)
            flat[k] = orig
            second = r_plus + r_minus - 2.0 * base
            if abs(second) > 1e-9 * max(1.0, abs(base)):
                continue  # a kink sits within the difference stencil
            num = (r_plus - r_minus) / (2.0 * eps)
            denom = max(abs(g_flat[k]), grad_scale)
            max_rel = max(max_rel, abs(num - g_flat[k]) / denom)
    return max_rel
