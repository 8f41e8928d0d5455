"""Experiment pipeline wiring training, calibration, evaluation and the
ground-truth oracles together; used by the CLI and the acceptance suite."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import data as data_mod
from .metrics import EvalReport, aggregate_runs, calibrate_threshold, evaluate_scores
from .net import NetworkConfig, Parameters, forward_batch
from .optim import TrainConfig, TrainHistory, train_erm
from .oracle import (
    MCEstimate,
    OracleProblem,
    bayes_risk,
    level_set_error,
    misclassification_risk,
    sample_Q,
    sample_mu,
)
from .synth import AnomalyRatioPolicy, anomaly_count, sample_uniform_ambient, sample_uniform_support

__all__ = [
    "RunResult",
    "run_oracle_experiment",
    "run_dataset_experiment",
    "convergence_study",
    "ablation_axes",
]

CALIB_FRACTION = 0.2  # share of T held out for threshold calibration


def _child_seed(seed: int, tag: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(seed), int(tag)))


@dataclass
class RunResult:
    params: Parameters
    net_config: NetworkConfig
    history: TrainHistory
    report: EvalReport
    n: int
    n_prime: int
    seed: int
    excess_risk: float | None = None
    level_set: float | None = None
    level_set_stderr: float | None = None

    def scorer(self) -> Callable[[np.ndarray], np.ndarray]:
        params, cfg = self.params, self.net_config
        return lambda X: forward_batch(params, cfg, X)


def run_oracle_experiment(
    problem: OracleProblem,
    n: int,
    net_config: NetworkConfig,
    train_config: TrainConfig,
    policy: AnomalyRatioPolicy,
    beta: float,
    seed: int,
    n_test: int = 4000,
    exact_risk: bool | None = None,
    level_set_mc: int = 50_000,
) -> RunResult:
    """Train on oracle normals + uniform synthetics; evaluate with ground truth.

    Exact excess risk uses per-cell sign subdivision (on by default for d <= 3);
    the level-set error is a seeded Monte Carlo estimate.
    """
    d = problem.density.dim
    n_prime = anomaly_count(n, train_config.s, policy)
    T = sample_Q(problem, n, _child_seed(seed, 1))
    T_prime = sample_mu(d, n_prime, _child_seed(seed, 2))

    # carve calibration normals off T before training so kappa never sees
    # training or early-stopping data
    n_cal = max(1, round(CALIB_FRACTION * n)) if n > 1 else 0
    rng = np.random.default_rng(_child_seed(seed, 3))
    perm = rng.permutation(n)
    T_cal, T_fit = T[perm[:n_cal]], T[perm[n_cal:]]
    if len(T_fit) == 0:
        T_fit = T

    cfg = _reseed(train_config, seed)
    net_cfg = _reseed_net(net_config, seed)
    params, history = train_erm(T_fit, T_prime, net_cfg, cfg)
    score = lambda X: forward_batch(params, net_cfg, X)

    kappa = calibrate_threshold(score(T_cal), beta) if n_cal else 0.0
    X_norm = sample_Q(problem, n_test, _child_seed(seed, 4))
    X_anom = sample_mu(d, n_test, _child_seed(seed, 5))
    scores = np.concatenate([score(X_norm), score(X_anom)])
    labels = np.concatenate([np.ones(n_test, dtype=int), -np.ones(n_test, dtype=int)])
    report = evaluate_scores(scores, labels, kappa)

    if exact_risk is None:
        exact_risk = d <= 3
    if exact_risk:
        risk = misclassification_risk(score, problem, mode="exact")
    else:
        risk = misclassification_risk(
            score, problem, mode="mc", n_mc=level_set_mc, seed=int(seed) + 7
        ).value
    excess = risk - bayes_risk(problem)
    ls = level_set_error(score, problem, n_mc=level_set_mc, seed=int(seed) + 8)
    return RunResult(
        params=params, net_config=net_cfg, history=history, report=report,
        n=n, n_prime=n_prime, seed=seed,
        excess_risk=float(excess),
        level_set=ls.value, level_set_stderr=ls.stderr,
    )


def run_dataset_experiment(
    train_ds: data_mod.Dataset,
    test_ds: data_mod.Dataset,
    net_config: NetworkConfig,
    train_config: TrainConfig,
    policy: AnomalyRatioPolicy,
    sampling: str,
    beta: float,
    seed: int,
) -> RunResult:
    """Train on real normals + sampled synthetics; evaluate on labeled test data."""
    if sampling not in ("support", "ambient"):
        raise ValueError("sampling must be 'support' or 'ambient'")
    normals = data_mod.filter_unsupervised_train(train_ds)
    T = normals.features
    n = len(T)
    n_prime = anomaly_count(n, train_config.s, policy)
    if sampling == "support":
        if train_ds.schema is None:
            raise ValueError("support sampling requires a schema")
        T_prime = sample_uniform_support(train_ds.schema, n_prime, _child_seed(seed, 2))
    else:
        T_prime = sample_uniform_ambient(T.shape[1], n_prime, _child_seed(seed, 2))

    n_cal = max(1, round(CALIB_FRACTION * n)) if n > 1 else 0
    rng = np.random.default_rng(_child_seed(seed, 3))
    perm = rng.permutation(n)
    T_cal, T_fit = T[perm[:n_cal]], T[perm[n_cal:]]
    if len(T_fit) == 0:
        T_fit = T

    cfg = _reseed(train_config, seed)
    net_cfg = _reseed_net(net_config, seed)
    params, history = train_erm(T_fit, T_prime, net_cfg, cfg)
    score = lambda X: forward_batch(params, net_cfg, X)

    kappa = calibrate_threshold(score(T_cal), beta) if n_cal else 0.0
    report = evaluate_scores(score(test_ds.features), test_ds.labels, kappa)
    return RunResult(
        params=params, net_config=net_cfg, history=history, report=report,
        n=n, n_prime=n_prime, seed=seed,
    )


def _reseed(cfg: TrainConfig, seed: int) -> TrainConfig:
    from dataclasses import replace

    return replace(cfg, seed=int(seed))


def _reseed_net(cfg: NetworkConfig, seed: int) -> NetworkConfig:
    from dataclasses import replace

    # per-run re-initialization: fold the run seed into the init seed
    return replace(cfg, init_seed=int(cfg.init_seed) * 1_000_003 + int(seed))


def convergence_study(
    problem: OracleProblem,
    n_grid: list[int],
    net_config: NetworkConfig,
    train_config: TrainConfig,
    policy: AnomalyRatioPolicy,
    beta: float,
    seeds: list[int],
    jobs: int = 1,
    **kwargs,
) -> list[dict]:
    """One row per n: per-seed runs aggregated (mean/std/median per metric).

    With jobs > 1 the (n, seed) grid is trained in parallel worker processes;
    runs share no mutable state, so the result is identical to sequential.
    """
    if list(n_grid) != sorted(n_grid):
        raise ValueError("n_grid must be ascending")
    tasks = [(n, seed) for n in n_grid for seed in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        from functools import partial

        fn = partial(
            _convergence_run, problem, net_config, train_config, policy, beta, kwargs
        )
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, tasks))
    else:
        results = [
            _convergence_run(
                problem, net_config, train_config, policy, beta, kwargs, t
            )
            for t in tasks
        ]
    by_n: dict[int, list[RunResult]] = {n: [] for n in n_grid}
    for (n, _), res in zip(tasks, results):
        by_n[n].append(res)
    rows = []
    for n in n_grid:
        runs = by_n[n]
        agg = aggregate_runs([r.report for r in runs])
        excess = [r.excess_risk for r in runs]
        svals = [r.level_set for r in runs]
        rows.append(
            {
                "n": n,
                "accuracy_mean": agg["accuracy"]["mean"],
                "accuracy_std": agg["accuracy"]["std"],
                "excess_mean": float(np.mean(excess)),
                "excess_std": float(np.std(excess, ddof=1)) if len(excess) > 1 else 0.0,
                "excess_median": float(statistics.median(excess)),
                "levelset_mean": float(np.mean(svals)),
                "levelset_std": float(np.std(svals, ddof=1)) if len(svals) > 1 else 0.0,
                "levelset_median": float(statistics.median(svals)),
            }
        )
    return rows


def _convergence_run(problem, net_config, train_config, policy, beta, kwargs, task):
    n, seed = task
    return run_oracle_experiment(
        problem, n, net_config, train_config, policy, beta, seed, **kwargs
    )


def ablation_axes() -> tuple[str, ...]:
    return ("width", "depth", "activation", "loss", "weight_decay", "ratio", "sampling")
