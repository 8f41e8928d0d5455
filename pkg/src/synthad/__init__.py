"""Classification-based unsupervised anomaly detection with synthetic
anomalies: hinge-ERM training of small ReLU networks, exact synthetic-density
oracles, and theory calculators for sizing, covering, and rate formulas."""

from . import data, experiment, metrics, net, optim, oracle, problems, synth, theory

__all__ = [
    "data",
    "experiment",
    "metrics",
    "net",
    "optim",
    "oracle",
    "problems",
    "synth",
    "theory",
]

__version__ = "0.1.0"
