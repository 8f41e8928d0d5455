"""Feed-forward ReLU / leaky-ReLU network with an optional hard-tanh output clamp.

The model is f(x) = a . act(W_L act(... act(W_1 x + b_1) ...) + b_L), optionally
passed through the clamp ramp ``hard_tanh`` so the output lands in [-1, 1].
Parameters are plain numpy arrays; forward/backward are pure functions.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "NetworkConfig",
    "Parameters",
    "ClassSpec",
    "ParamStats",
    "hard_tanh",
    "hard_tanh_four_relu",
    "init_params",
    "forward",
    "forward_batch",
    "backward",
    "param_stats",
    "check_class_membership",
    "save_checkpoint",
    "load_checkpoint",
]

_ACTIVATIONS = ("relu", "leaky_relu")


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture description: input dim, hidden widths, activation, clamp."""

    input_dim: int
    hidden_widths: tuple[int, ...]
    activation: str = "relu"
    leaky_slope: float = 0.01
    clamp_tau: float | None = None
    init_seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ValueError("hidden_widths must be non-empty with entries >= 1")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {_ACTIVATIONS}")
        if self.activation == "leaky_relu" and not 0.0 < self.leaky_slope < 1.0:
            raise ValueError("leaky_slope must lie in (0, 1)")
        if self.clamp_tau is not None and not 0.0 < self.clamp_tau <= 1.0:
            raise ValueError("clamp_tau must lie in (0, 1]")
        if self.init_scale < 0:
            raise ValueError("init_scale must be >= 0")

    @property
    def depth(self) -> int:
        return len(self.hidden_widths)

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = (self.input_dim,) + self.hidden_widths
        return [(dims[i + 1], dims[i]) for i in range(len(self.hidden_widths))]

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_widths": list(self.hidden_widths),
            "activation": self.activation,
            "leaky_slope": self.leaky_slope,
            "clamp_tau": self.clamp_tau,
            "init_seed": self.init_seed,
            "init_scale": self.init_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_widths=tuple(d["hidden_widths"]),
            activation=d.get("activation", "relu"),
            leaky_slope=float(d.get("leaky_slope", 0.01)),
            clamp_tau=d.get("clamp_tau"),
            init_seed=int(d.get("init_seed", 0)),
            init_scale=float(d.get("init_scale", 1.0)),
        )


@dataclass
class Parameters:
    """Weights W_i (p_i x p_{i-1}), biases b_i (p_i,), outer weight a (p_L,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    outer: np.ndarray

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases must have equal length")
        for W, b in zip(self.weights, self.biases):
            if W.ndim != 2 or b.ndim != 1 or W.shape[0] != b.shape[0]:
                raise ValueError("inconsistent layer shapes")
        if self.outer.ndim != 1 or self.outer.shape[0] != self.weights[-1].shape[0]:
            raise ValueError("outer weight does not match last hidden width")
        for arr in self.arrays():
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for W, b in zip(self.weights, self.biases):
            out.extend((W, b))
        out.append(self.outer)
        return out

    def copy(self) -> "Parameters":
        return Parameters(
            [W.copy() for W in self.weights],
            [b.copy() for b in self.biases],
            self.outer.copy(),
        )

    def matches_config(self, config: NetworkConfig) -> bool:
        if len(self.weights) != config.depth:
            return False
        for W, shape in zip(self.weights, config.layer_shapes()):
            if W.shape != shape:
                return False
        return self.outer.shape == (config.hidden_widths[-1],)


@dataclass(frozen=True)
class ClassSpec:
    """Bounds of the constrained network class: depth, width, sparsity, sup-norm."""

    max_depth: int
    max_width: int
    max_nonzero: int
    max_abs: float
    zero_tolerance: float = 0.0

    def __post_init__(self):
        if min(self.max_depth, self.max_width, self.max_nonzero) <= 0 or self.max_abs <= 0:
            raise ValueError("all bounds must be positive")
        if self.zero_tolerance < 0:
            raise ValueError("zero_tolerance must be >= 0")


@dataclass(frozen=True)
class ParamStats:
    nonzero_count: int
    max_abs: float
    max_width: int


def hard_tanh(x, tau: float):
    """Ramp that is -1 below -tau, x/tau on [-tau, tau), and 1 at or above tau."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    x = np.asarray(x, dtype=float)
    out = np.where(x >= tau, 1.0, np.where(x < -tau, -1.0, x / tau))
    return out if out.ndim else float(out)


def hard_tanh_four_relu(x, tau: float):
    """Same ramp built from four scaled ReLU units; agrees with hard_tanh exactly."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    x = np.asarray(x, dtype=float)

    def r(t):
        return np.maximum(0.0, t)

    out = r(x / tau) - r(x / tau - 1.0) - r(-x / tau) + r(-x / tau - 1.0)
    return out if out.ndim else float(out)


def init_params(config: NetworkConfig) -> Parameters:
    """Symmetric uniform init with per-layer scale init_scale / sqrt(fan_in)."""
    rng = np.random.default_rng(config.init_seed)
    weights, biases = [], []
    for rows, cols in config.layer_shapes():
        scale = config.init_scale / np.sqrt(cols)
        weights.append(rng.uniform(-scale, scale, size=(rows, cols)))
        biases.append(rng.uniform(-scale, scale, size=rows))
    p_last = config.hidden_widths[-1]
    outer = rng.uniform(-1.0, 1.0, size=p_last) * (config.init_scale / np.sqrt(p_last))
    return Parameters(weights, biases, outer)


def _act(z: np.ndarray, config: NetworkConfig) -> np.ndarray:
    if config.activation == "relu":
        return np.maximum(0.0, z)
    return np.where(z > 0.0, z, config.leaky_slope * z)


def _act_deriv(z: np.ndarray, config: NetworkConfig) -> np.ndarray:
    # subgradient at z == 0 uses the negative-branch slope (0 for plain ReLU)
    if config.activation == "relu":
        return (z > 0.0).astype(float)
    return np.where(z > 0.0, 1.0, config.leaky_slope)


def forward_batch(params: Parameters, config: NetworkConfig, X: np.ndarray) -> np.ndarray:
    """Vectorized forward pass over rows of X; returns one scalar per row."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != config.input_dim:
        raise ValueError(f"expected {config.input_dim} input features, got {X.shape[1]}")
    if not params.matches_config(config):
        raise ValueError("parameters do not match config shapes")
    h = X
    for W, b in zip(params.weights, params.biases):
        h = _act(h @ W.T + b, config)
    out = h @ params.outer
    if config.clamp_tau is not None:
        out = hard_tanh(out, config.clamp_tau)
    return np.atleast_1d(out)


def forward(params: Parameters, config: NetworkConfig, x) -> float:
    """Scalar network output for a single input vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("forward expects a single input vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    return float(forward_batch(params, config, x[None, :])[0])


def _forward_cached(params: Parameters, config: NetworkConfig, X: np.ndarray):
    """Forward pass keeping pre-activations; used by backward."""
    pre_acts = []
    h = X
    for W, b in zip(params.weights, params.biases):
        z = h @ W.T + b
        pre_acts.append(z)
        h = _act(z, config)
    pre_out = h @ params.outer
    return pre_acts, h, pre_out


def backward(params: Parameters, config: NetworkConfig, batch) -> Parameters:
    """Gradient of sum_i weight_i * hinge(y_i * f(x_i)) w.r.t. all parameters.

    Subgradient 0 is used at the hinge kink (y*f == 1) and at the ReLU kink.
    When the config clamps the output, the ramp derivative (1/tau inside
    [-tau, tau), 0 outside) propagates through.
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    X = np.asarray([np.asarray(x, dtype=float) for x, _, _ in batch])
    y = np.asarray([float(yy) for _, yy, _ in batch])
    w = np.asarray([float(ww) for _, _, ww in batch])
    if X.shape[1] != config.input_dim:
        raise ValueError("dimension mismatch in batch")

    pre_acts, h_last, pre_out = _forward_cached(params, config, X)
    if config.clamp_tau is None:
        margins = y * pre_out
        clamp_d = np.ones_like(pre_out)
    else:
        tau = config.clamp_tau
        margins = y * hard_tanh(pre_out, tau)
        clamp_d = np.where((pre_out >= -tau) & (pre_out < tau), 1.0 / tau, 0.0)

    # d hinge(t)/dt = -1 for t < 1, 0 otherwise (0 at the kink)
    dphi = np.where(margins < 1.0, -1.0, 0.0)
    dout = w * dphi * y * clamp_d  # dL/d(pre_out), per sample

    grad_outer = h_last.T @ dout
    delta = np.outer(dout, params.outer)  # dL/d(act of last hidden layer)

    grad_W = [np.empty(0)] * config.depth
    grad_b = [np.empty(0)] * config.depth
    acts_below = [X] + [_act(z, config) for z in pre_acts[:-1]]
    for i in range(config.depth - 1, -1, -1):
        dz = delta * _act_deriv(pre_acts[i], config)
        grad_W[i] = dz.T @ acts_below[i]
        grad_b[i] = dz.sum(axis=0)
        if i > 0:
            delta = dz @ params.weights[i]
    return Parameters(grad_W, grad_b, grad_outer)


def param_stats(params: Parameters, zero_tolerance: float = 0.0) -> ParamStats:
    arrays = params.arrays()
    nonzero = sum(int(np.count_nonzero(np.abs(a) > zero_tolerance)) for a in arrays)
    max_abs = max(float(np.max(np.abs(a))) for a in arrays)
    max_width = max(W.shape[0] for W in params.weights)
    return ParamStats(nonzero_count=nonzero, max_abs=max_abs, max_width=max_width)


def check_class_membership(
    params: Parameters, config: NetworkConfig, spec: ClassSpec
) -> list[str]:
    """Return the list of violated bounds; empty means the net is a member."""
    stats = param_stats(params, spec.zero_tolerance)
    violations = []
    if config.depth > spec.max_depth:
        violations.append(f"depth {config.depth} > {spec.max_depth}")
    if stats.max_width > spec.max_width:
        violations.append(f"max_width {stats.max_width} > {spec.max_width}")
    if stats.nonzero_count > spec.max_nonzero:
        violations.append(f"nonzero_count {stats.nonzero_count} > {spec.max_nonzero}")
    if stats.max_abs > spec.max_abs:
        violations.append(f"max_abs {stats.max_abs} > {spec.max_abs}")
    return violations


_MAGIC = b"SADCKPT1"


def save_checkpoint(params: Parameters, config: NetworkConfig, path, fmt: str = "binary"):
    """Write a checkpoint: config header + layer-ordered arrays.

    Binary layout: magic, 4-byte little-endian header length, JSON header,
    then the arrays (W1, b1, ..., WL, bL, a) as little-endian float64.
    """
    path = Path(path)
    header = {"config": config.to_dict(), "shapes": [list(a.shape) for a in params.arrays()]}
    if fmt == "json":
        doc = dict(header, arrays=[a.tolist() for a in params.arrays()])
        path.write_text(json.dumps(doc))
        return
    if fmt != "binary":
        raise ValueError("fmt must be 'binary' or 'json'")
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in params.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[Parameters, NetworkConfig]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[: len(_MAGIC)] == _MAGIC:
        (hlen,) = struct.unpack("<I", raw[8:12])
        header = json.loads(raw[12 : 12 + hlen])
        shapes = [tuple(s) for s in header["shapes"]]
        offset = 12 + hlen
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
            arrays.append(arr.astype(float))
            offset += count * 8
    else:
        doc = json.loads(raw.decode())
        header = doc
        arrays = [np.asarray(a, dtype=float) for a in doc["arrays"]]
    config = NetworkConfig.from_dict(header["config"])
    depth = config.depth
    weights = [arrays[2 * i] for i in range(depth)]
    biases = [arrays[2 * i + 1] for i in range(depth)]
    return Parameters(weights, biases, arrays[-1]), config
