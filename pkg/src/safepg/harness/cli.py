# Command-line entry points: train, evaluate, acceptance checks, and exact
# tabular solves.
from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from ..cmdp import SafePolicyIteration, TabularCmdp, lp_optimal_cmdp
from .config import ExperimentConfig
from .run import evaluate_policy, load_checkpoint, run_experiment


@click.group()
def main():
    """Lyapunov-based safe policy optimization toolkit."""


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True), help="Experiment config (YAML).")
@click.option("--seed", type=int, default=None,
              help="Override the config's master seed.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Override the config's output directory.")
def run(config_path, seed, out_dir):
    """Train an agent and write metrics/checkpoint files."""
    config = ExperimentConfig.from_yaml(config_path)
    if seed is not None:
        config = config.with_overrides(seed=seed)
    if out_dir is not None:
        config = config.with_overrides(out_dir=out_dir)
    path = run_experiment(config)
    click.echo(f"metrics written to {path}")


@main.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True,
              type=click.Path(exists=True), help="Checkpoint JSON file.")
@click.option("--episodes", type=int, default=20)
@click.option("--seed", type=int, default=0)
def eval_cmd(checkpoint_path, episodes, seed):
    """Evaluate a checkpointed policy with noise-free mean actions."""
    agent, config = load_checkpoint(checkpoint_path)
    from .run import build_env

    env = build_env(config)
    d0 = env.config.d0 if config.constrained else np.inf
    base = 2 ** 30 + seed
    ret, dret, viol = evaluate_policy(agent, env, episodes, base,
                                      config.algo_config.gamma, d0)
    click.echo(json.dumps({
        "mean_return": ret,
        "mean_constraint_return": dret,
        "violation_fraction": viol,
        "d0": None if not np.isfinite(d0) else d0,
    }))


@main.command()
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for the JSON report and experiment artifacts.")
@click.option("--skip-training", is_flag=True,
              help="Skip the training-comparison check (slowest criterion).")
def accept(out_dir, skip_training):
    """Run the full acceptance suite; nonzero exit on any failure."""
    from .acceptance import acceptance_suite

    report = acceptance_suite(out_dir=out_dir, skip_training=skip_training)
    if not all(r["passed"] for r in report["criteria"]):
        sys.exit(1)


@main.command("solve-cmdp")
@click.option("--cmdp", "cmdp_path", required=True,
              type=click.Path(exists=True), help="Tabular CMDP JSON file.")
def solve_cmdp(cmdp_path):
    """Exact safe policy iteration and LP solve on a tabular instance."""
    cmdp = TabularCmdp.from_json(Path(cmdp_path).read_text())
    lp_value, _ = lp_optimal_cmdp(cmdp)
    spi = SafePolicyIteration().fit(cmdp)
    click.echo(json.dumps({
        "lp_optimal_cost": lp_value,
        "spi_cost": spi.cost_,
        "spi_constraint": spi.constraint_,
        "d0": cmdp.d0,
        "iterations": len(spi.history_),
        "policy": spi.policy_.probs.tolist(),
    }))


if __name__ == "__main__":
    main()
