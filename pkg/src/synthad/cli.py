"""Command-line front end: train, eval, convergence, ablate, theory, synth.

Exit codes: 0 success, 2 usage/config error, 3 runtime error (divergence,
bad data). Reports embed the resolved config for provenance and contain no
timestamps, so identical configs produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import data as data_mod
from .experiment import (
    ablation_axes,
    convergence_study,
    run_dataset_experiment,
    run_oracle_experiment,
)
from .metrics import aggregate_runs
from .net import NetworkConfig, load_checkpoint, save_checkpoint, forward_batch
from .optim import DivergenceError, TrainConfig
from .oracle import SyntheticDensity, sample_Q, sample_labels
from .problems import PROBLEM_NAMES, named_problem
from .report import ablation_figure, convergence_figure, write_rows_csv
from .synth import AnomalyRatioPolicy
from .theory import sizing

DEFAULT_HIDDEN = (500, 500, 500)  # depth 3, width 500 recipe


class ConfigError(Exception):
    pass


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}")


def _resolve(cfg: dict, out_override, seeds_override):
    """Turn the raw JSON config into typed pieces shared by the commands."""
    source = cfg.get("source")
    if not isinstance(source, dict):
        raise ConfigError("config needs a 'source' object")
    out_dir = Path(out_override or cfg.get("out_dir", "runs"))
    seeds = list(seeds_override) if seeds_override else list(cfg.get("seeds", [0, 1, 2]))
    if not seeds:
        raise ConfigError("seeds must be non-empty")
    beta = float(cfg.get("beta", 0.05))
    sampling = cfg.get("sampling", "support")
    ratio_cfg = cfg.get("ratio", {"mode": "equal"})
    try:
        policy = AnomalyRatioPolicy(
            mode=ratio_cfg.get("mode", "equal"), k=float(ratio_cfg.get("k", 1.0))
        )
        train_cfg = TrainConfig.from_dict(cfg.get("train", {}))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc))

    if "oracle" in source:
        try:
            problem = named_problem(source["oracle"])
        except KeyError as exc:
            raise ConfigError(str(exc))
        input_dim = problem.density.dim
        datasets = None
    elif "train_csv" in source:
        schema_path = source.get("schema")
        if not schema_path or not Path(schema_path).exists():
            raise ConfigError(f"schema file not found: {schema_path}")
        schema = data_mod.Schema.from_json(schema_path)
        train_ds = data_mod.encode(
            data_mod.load_csv(source["train_csv"], schema), provenance=source["train_csv"]
        )
        test_path = source.get("test_csv", source["train_csv"])
        test_ds = data_mod.encode(
            data_mod.load_csv(test_path, schema), provenance=test_path
        )
        problem = None
        datasets = (train_ds, test_ds)
        input_dim = schema.encoded_dim
    else:
        raise ConfigError("source must name an 'oracle' problem or a 'train_csv'")

    net_raw = dict(cfg.get("net", {}))
    net_raw.setdefault("input_dim", input_dim)
    net_raw.setdefault("hidden_widths", list(DEFAULT_HIDDEN))
    net_raw.setdefault("activation", "leaky_relu")
    try:
        net_cfg = NetworkConfig.from_dict(net_raw)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad net config: {exc}")
    if net_cfg.input_dim != input_dim:
        raise ConfigError(
            f"net input_dim {net_cfg.input_dim} != source dimension {input_dim}"
        )
    return {
        "problem": problem,
        "datasets": datasets,
        "net": net_cfg,
        "train": train_cfg,
        "policy": policy,
        "sampling": sampling,
        "beta": beta,
        "seeds": seeds,
        "out_dir": out_dir,
        "raw": cfg,
    }


@click.group()
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory.")
@click.option("--seed-list", "seeds", type=str, default=None,
              help="Comma-separated seeds overriding the config.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel worker processes for multi-run studies.")
@click.pass_context
def main(ctx, out_dir, seeds, jobs):
    """Anomaly-detection toolkit: hinge-ERM training with synthetic anomalies,
    exact oracles, and theory calculators."""
    ctx.ensure_object(dict)
    ctx.obj["out"] = out_dir
    ctx.obj["seeds"] = [int(s) for s in seeds.split(",")] if seeds else None
    ctx.obj["jobs"] = jobs


def _fail_usage(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(2)


def _fail_runtime(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(3)


def _run_all_seeds(res, jobs: int):
    results = []
    for seed in res["seeds"]:
        if res["problem"] is not None:
            n = int(res["raw"].get("n", 2000))
            results.append(
                run_oracle_experiment(
                    res["problem"], n, res["net"], res["train"], res["policy"],
                    res["beta"], seed,
                )
            )
        else:
            train_ds, test_ds = res["datasets"]
            results.append(
                run_dataset_experiment(
                    train_ds, test_ds, res["net"], res["train"], res["policy"],
                    res["sampling"], res["beta"], seed,
                )
            )
    return results


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.pass_context
def train(ctx, config_path):
    """Train per seed, calibrate the threshold, evaluate, write report + checkpoints."""
    try:
        res = _resolve(_load_config(config_path), ctx.obj["out"], ctx.obj["seeds"])
    except (ConfigError, data_mod.SchemaError, FileNotFoundError) as exc:
        _fail_usage(str(exc))
    try:
        runs = _run_all_seeds(res, ctx.obj["jobs"])
    except DivergenceError as exc:
        _fail_runtime(f"training diverged: {exc}")
    except ValueError as exc:
        _fail_runtime(str(exc))

    out = res["out_dir"]
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    per_seed = []
    for run in runs:
        save_checkpoint(run.params, run.net_config, out / "checkpoints" / f"seed{run.seed}.ckpt")
        run.history.to_csv(out / "curves" / f"history_seed{run.seed}.csv")
        entry = dict(run.report.to_dict(), seed=run.seed, n=run.n, n_prime=run.n_prime,
                     epochs=run.history.epochs_run)
        if run.excess_risk is not None:
            entry["excess_risk"] = run.excess_risk
            entry["level_set_error"] = run.level_set
        per_seed.append(entry)
    report = {
        "config": res["raw"],
        "seeds": res["seeds"],
        "aggregate": aggregate_runs([r.report for r in runs]),
        "runs": per_seed,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    click.echo(json.dumps(report["aggregate"], indent=2, sort_keys=True))


@main.command(name="eval")
@click.option("--checkpoint", "ckpt_path", required=True, type=str)
@click.option("--config", "config_path", required=True, type=str)
@click.pass_context
def eval_cmd(ctx, ckpt_path, config_path):
    """Evaluate a saved checkpoint against the config's source."""
    try:
        res = _resolve(_load_config(config_path), ctx.obj["out"], ctx.obj["seeds"])
        if not Path(ckpt_path).exists():
            raise ConfigError(f"checkpoint not found: {ckpt_path}")
    except (ConfigError, data_mod.SchemaError) as exc:
        _fail_usage(str(exc))
    params, net_cfg = load_checkpoint(ckpt_path)
    score = lambda X: forward_batch(params, net_cfg, X)
    from .metrics import evaluate_scores

    beta_kappa = float(res["raw"].get("kappa", 0.0))
    if res["problem"] is not None:
        from .oracle import sample_mu

        problem = res["problem"]
        n_test = int(res["raw"].get("n_test", 4000))
        Xn = sample_Q(problem, n_test, 1)
        Xa = sample_mu(problem.density.dim, n_test, 2)
        scores = np.concatenate([score(Xn), score(Xa)])
        labels = np.concatenate([np.ones(n_test, int), -np.ones(n_test, int)])
    else:
        _, test_ds = res["datasets"]
        scores = score(test_ds.features)
        labels = test_ds.labels
    report = evaluate_scores(scores, labels, beta_kappa)
    click.echo(report.to_json())


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.pass_context
def convergence(ctx, config_path):
    """Train across the config's n-grid; write the curve CSV and figure."""
    try:
        cfg = _load_config(config_path)
        res = _resolve(cfg, ctx.obj["out"], ctx.obj["seeds"])
        if res["problem"] is None and "n_grid" not in cfg:
            raise ConfigError("convergence needs an 'n_grid'")
        n_grid = [int(v) for v in cfg.get("n_grid", [])]
        if not n_grid:
            raise ConfigError("n_grid must be non-empty")
        if res["problem"] is None:
            raise ConfigError("convergence requires an oracle source "
                              "(excess risk needs ground truth)")
    except ConfigError as exc:
        _fail_usage(str(exc))
    try:
        rows = convergence_study(
            res["problem"], n_grid, res["net"], res["train"], res["policy"],
            res["beta"], res["seeds"], jobs=ctx.obj["jobs"],
        )
    except DivergenceError as exc:
        _fail_runtime(f"training diverged: {exc}")
    out = res["out_dir"]
    write_rows_csv(rows, out / "curves" / "convergence.csv")
    convergence_figure(rows, out / "convergence.png")
    (out / "report.json").write_text(
        json.dumps({"config": cfg, "rows": rows}, indent=2, sort_keys=True)
    )
    click.echo(f"wrote {out / 'curves' / 'convergence.csv'} and {out / 'convergence.png'}")


_AXES = ablation_axes()


def _apply_axis(res, axis: str, value):
    """Return (net, train, policy, sampling) with one axis swapped out."""
    net, train_cfg, policy, sampling = (
        res["net"], res["train"], res["policy"], res["sampling"],
    )
    if axis == "width":
        net = replace(net, hidden_widths=tuple([int(value)] * len(net.hidden_widths)))
    elif axis == "depth":
        width = net.hidden_widths[0]
        net = replace(net, hidden_widths=tuple([width] * int(value)))
    elif axis == "activation":
        net = replace(net, activation=str(value))
    elif axis == "loss":
        train_cfg = replace(train_cfg, loss=str(value))
    elif axis == "weight_decay":
        train_cfg = replace(train_cfg, weight_decay=float(value))
    elif axis == "ratio":
        if isinstance(value, dict):
            policy = AnomalyRatioPolicy(mode=value["mode"], k=float(value.get("k", 1.0)))
        elif str(value) in ("equal", "lower_bound"):
            policy = AnomalyRatioPolicy(mode=str(value))
        else:
            policy = AnomalyRatioPolicy(mode="multiple", k=float(value))
    elif axis == "sampling":
        sampling = str(value)
    else:
        raise ConfigError(f"axis must be one of {_AXES}")
    return net, train_cfg, policy, sampling


@main.command()
@click.option("--config", "config_path", required=True, type=str)
@click.option("--axis", required=True, type=click.Choice(_AXES))
@click.pass_context
def ablate(ctx, config_path, axis):
    """Compare the base run against axis values from config['ablate']['values']."""
    try:
        cfg = _load_config(config_path)
        res = _resolve(cfg, ctx.obj["out"], ctx.obj["seeds"])
        values = cfg.get("ablate", {}).get("values")
        if not values:
            raise ConfigError("config['ablate']['values'] must list the axis values")
    except ConfigError as exc:
        _fail_usage(str(exc))

    def run_variant(net, train_cfg, policy, sampling):
        rs = dict(res, net=net, train=train_cfg, policy=policy, sampling=sampling)
        return _run_all_seeds(rs, ctx.obj["jobs"])

    try:
        base_runs = run_variant(res["net"], res["train"], res["policy"], res["sampling"])
        base_agg = aggregate_runs([r.report for r in base_runs])
        rows = [
            {
                "value": "base",
                "aupr_mean": base_agg["aupr"]["mean"],
                "aupr_std": base_agg["aupr"]["std"],
                "accuracy_mean": base_agg["accuracy"]["mean"],
                "accuracy_std": base_agg["accuracy"]["std"],
                "flag": "",
            }
        ]
        for value in values:
            runs = run_variant(*_apply_axis(res, axis, value))
            agg = aggregate_runs([r.report for r in runs])
            delta = agg["aupr"]["mean"] - base_agg["aupr"]["mean"]
            band = max(base_agg["aupr"]["std"], 1e-12)
            flag = "+" if delta > band else "-" if delta < -band else ""
            rows.append(
                {
                    "value": value if not isinstance(value, dict) else json.dumps(value),
                    "aupr_mean": agg["aupr"]["mean"],
                    "aupr_std": agg["aupr"]["std"],
                    "accuracy_mean": agg["accuracy"]["mean"],
                    "accuracy_std": agg["accuracy"]["std"],
                    "flag": flag,
                }
            )
    except DivergenceError as exc:
        _fail_runtime(f"training diverged: {exc}")

    out = res["out_dir"]
    write_rows_csv(rows, out / "curves" / f"ablation_{axis}.csv")
    ablation_figure(rows, out / f"ablation_{axis}.png", title=f"Ablation: {axis}")
    click.echo(json.dumps(rows, indent=2))


@main.command()
@click.argument("n", type=int)
@click.argument("d", type=int)
@click.argument("alpha", type=float)
@click.argument("q", type=float)
@click.argument("r", type=float)
@click.argument("s", type=float)
def theory(n, d, alpha, q, r, s):
    """Print the network-class sizing report as JSON."""
    try:
        report = sizing(n, d, alpha, q, r, s)
    except ValueError as exc:
        _fail_usage(str(exc))
    click.echo(report.to_json())


@main.command()
@click.option("--problem", "problem_name", type=str, default=None,
              help=f"Named problem: {', '.join(PROBLEM_NAMES)}")
@click.option("--density", "density_path", type=str, default=None,
              help="JSON density file (used with --rho).")
@click.option("--rho", type=float, default=1.0, show_default=True)
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=str, required=True)
def synth(problem_name, density_path, rho, n, seed, out_path):
    """Sample labeled oracle data (features + Bernoulli labels) to CSV."""
    if n < 1:
        _fail_usage("n must be >= 1")
    if (problem_name is None) == (density_path is None):
        _fail_usage("give exactly one of --problem or --density")
    try:
        if problem_name is not None:
            problem = named_problem(problem_name)
        else:
            from .oracle import OracleProblem

            problem = OracleProblem(SyntheticDensity.from_json(density_path), rho=rho)
    except (KeyError, ValueError, FileNotFoundError) as exc:
        _fail_usage(str(exc))
    X = sample_Q(problem, n, seed)
    y = sample_labels(problem, X, seed + 1)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(X.shape[1])] + ["label"])
        for row, lab in zip(X, y):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])
    click.echo(f"wrote {n} labeled samples to {out}")


if __name__ == "__main__":
    main()
