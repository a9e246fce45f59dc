# Experiment runner: rollout collection, deterministic evaluation, metrics
# CSV emission, and checkpointing. Metrics are byte-reproducible for a given
# (config, seed); real timings go to a sidecar file so they cannot perturb
# the metrics document.
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from ..agents import DdpgAgent, LagrangianPgAgent, PpoAgent
from ..diff.mlp import ParamVector
from ..diff.trajectories import Episode, TrajectoryBatch
from .config import ALGORITHMS, ENVIRONMENTS, ExperimentConfig, substream_seed

CHECKPOINT_FORMAT = "safepg-checkpoint-v1"


@dataclass
class MetricsRow:
    """One evaluation record per training iteration.

    wall_clock is kept at a fixed placeholder in the CSV so that repeated
    runs stay byte-identical; measured timings are written to timing.csv.
    """

    iteration: int
    mean_return: float
    mean_constraint_return: float
    violation_fraction: float
    policy_kl_step: float
    lam: float
    wall_clock: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.violation_fraction <= 1.0):
            raise ValueError("violation_fraction must lie in [0, 1]")

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        vals = [getattr(self, f.name) for f in fields(self)]
        return [str(vals[0])] + [f"{v:.12g}" for v in vals[1:]]


def read_metrics(path: str | Path) -> list[dict]:
    """Read a metrics CSV, tolerating unknown extra columns."""
    with open(path, newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            row = {k: (int(v) if k == "iteration" else float(v))
                   for k, v in rec.items() if k in MetricsRow.header()}
            out.append(row)
        return out


def _act(agent, obs, rng, explore):
    out = agent.act(obs, rng, explore=explore)
    if isinstance(out, tuple):
        return out
    return out, 0.0


def collect_episode(env, agent, ep_seed: int, rng: np.random.Generator,
                    explore: bool = True, record: bool = False) -> Episode:
    """Roll one episode; with record, transitions also go to agent.record."""
    obs = env.reset(ep_seed)
    states, actions, costs, dcosts, logps, terms = [obs], [], [], [], [], []
    done = False
    while not done:
        a, logp = _act(agent, obs, rng, explore)
        res = env.step(a)
        if record:
            agent.record(obs, a, res.cost, res.constraint_cost, res.obs,
                         res.done)
        states.append(res.obs)
        actions.append(np.atleast_1d(a))
        costs.append(res.cost)
        dcosts.append(res.constraint_cost)
        logps.append(logp)
        terms.append(res.done)
        obs, done = res.obs, res.done
    return Episode(np.stack(states), np.stack(actions), np.array(costs),
                   np.array(dcosts), np.array(logps),
                   np.array(terms, dtype=bool))


def collect_batch(env, agent, n_episodes: int, ep_seed_base: int,
                  rng: np.random.Generator) -> TrajectoryBatch:
    return TrajectoryBatch([
        collect_episode(env, agent, ep_seed_base + i, rng)
        for i in range(n_episodes)
    ])


def evaluate_policy(agent, env, n_episodes: int, seed_base: int,
                    gamma: float, d0: float) -> tuple[float, float, float]:
    """Noise-free (mean-action) evaluation on a disjoint seed block.

    Returns (mean return, mean constraint return, violation fraction); the
    return is the negated discounted cost so larger is better.
    """
    rets, drets = np.empty(n_episodes), np.empty(n_episodes)
    for i in range(n_episodes):
        ep = collect_episode(env, agent, seed_base + i, None, explore=False)
        rets[i] = -float(np.polynomial.polynomial.polyval(gamma, ep.costs))
        drets[i] = float(np.polynomial.polynomial.polyval(
            gamma, ep.constraint_costs))
    viol = float(np.mean(drets > d0)) if np.isfinite(d0) else 0.0
    return float(rets.mean()), float(drets.mean()), viol


def build_agent(config: ExperimentConfig, env):
    family, mode = ALGORITHMS[config.algorithm]
    d0 = env.config.d0 if config.constrained else np.inf
    kw = dict(obs_dim=env.obs_dim, action_dim=env.action_dim, d0=d0,
              config=config.algo_config, hidden=config.hidden)
    if family == "ddpg":
        return DdpgAgent(mode=mode, **kw)
    if family == "ppo":
        return PpoAgent(mode=mode, **kw)
    return LagrangianPgAgent(**kw)


def build_env(config: ExperimentConfig):
    cls = ENVIRONMENTS[config.environment]
    return cls(config.env_config) if config.env_config is not None else cls()


def _param_vector(agent) -> ParamVector:
    if isinstance(agent, LagrangianPgAgent):
        return ParamVector(agent.policy_.spec, agent.params_)
    return agent.params_


def save_checkpoint(agent, config: ExperimentConfig, path: str | Path):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "experiment": config.to_dict(),
        "actor": json.loads(_param_vector(agent).to_json()),
    }
    if isinstance(agent, PpoAgent):
        doc["baseline"] = json.loads(agent.baseline_params_.to_json())
        doc["qw"] = json.loads(agent.bundle_.qw.params.to_json())
        doc["d_hat"] = agent.d_hat_
    if isinstance(agent, DdpgAgent):
        doc["target"] = json.loads(agent.target_params_.to_json())
        doc["qw"] = json.loads(agent.bundle_.qw.params.to_json())
        doc["d_hat"] = agent.d_hat_
    Path(path).write_text(json.dumps(doc))


def load_checkpoint(path: str | Path):
    """Rebuild (agent, config) from a checkpoint document."""
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unknown checkpoint format {doc.get('format')!r}")
    config = ExperimentConfig.from_dict(doc["experiment"])
    env = build_env(config)
    agent = build_agent(config, env)
    agent.setup(np.random.default_rng(0))
    actor = ParamVector.from_json(json.dumps(doc["actor"]))
    if isinstance(agent, LagrangianPgAgent):
        agent.params_ = actor.values
    else:
        agent.params_ = actor
    if isinstance(agent, PpoAgent) and "baseline" in doc:
        agent.baseline_params_ = ParamVector.from_json(json.dumps(doc["baseline"]))
        agent.bundle_.qw.params = ParamVector.from_json(json.dumps(doc["qw"]))
        agent.observe_constraint(doc.get("d_hat", 0.0))
    if isinstance(agent, DdpgAgent) and "target" in doc:
        agent.target_params_ = ParamVector.from_json(json.dumps(doc["target"]))
        agent.bundle_.qw.params = ParamVector.from_json(json.dumps(doc["qw"]))
        agent.bundle_.qw.target = agent.bundle_.qw.params.copy()
        agent.observe_constraint(doc.get("d_hat", 0.0))
    return agent, config


def run_experiment(config: ExperimentConfig) -> Path:
    """Train per the config and return the metrics CSV path."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = build_env(config)
    eval_env = build_env(config)
    agent = build_agent(config, env)

    init_rng = np.random.default_rng(substream_seed(config.seed, "init"))
    rollout_rng = np.random.default_rng(substream_seed(config.seed, "rollout"))
    # Training episode seeds live in [0, 2^29) and evaluation seeds in
    # [2^30, 2^30 + 2^29): structurally disjoint whatever the counts.
    env_seed = substream_seed(config.seed, "env") % (2 ** 29)
    eval_seed = 2 ** 30 + substream_seed(config.seed, "eval") % (2 ** 29)
    agent.setup(init_rng)

    gamma = (config.algo_config or agent.config_).gamma
    d0 = env.config.d0 if config.constrained else np.inf

    metrics_path = out / "metrics.csv"
    timing_path = out / "timing.csv"
    config.to_yaml(out / "config.yaml")
    with open(metrics_path, "w", newline="") as mfh, \
            open(timing_path, "w", newline="") as tfh:
        writer = csv.writer(mfh)
        writer.writerow(MetricsRow.header())
        twriter = csv.writer(tfh)
        twriter.writerow(["iteration", "seconds"])
        for it in range(config.iterations):
            tic = time.perf_counter()
            if agent.on_policy:
                batch = collect_batch(env, agent, config.episodes_per_iteration,
                                      env_seed, rollout_rng)
                info = agent.update(batch, rollout_rng)
            else:
                for i in range(config.episodes_per_iteration):
                    collect_episode(env, agent, env_seed + i, rollout_rng,
                                    explore=True, record=True)
                info = agent.update(rollout_rng)
            env_seed += config.episodes_per_iteration
            ret, dret, viol = evaluate_policy(
                agent, eval_env, config.eval_episodes,
                eval_seed + it * config.eval_episodes, gamma, d0)
            agent.observe_constraint(dret)
            row = MetricsRow(it, ret, dret, viol,
                             float(info.get("kl", 0.0)),
                             float(info.get("lam", 0.0)))
            writer.writerow(row.row())
            twriter.writerow([it, f"{time.perf_counter() - tic:.6f}"])
    save_checkpoint(agent, config, out / "checkpoint.json")
    return metrics_path
