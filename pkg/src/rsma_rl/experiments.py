"""Training runs, frozen-policy evaluation, sweeps and plot-ready output.

Every run lives in its own directory:

    <out>/<algorithm>_s<seed>/
        config.resolved     frozen flat config that reproduces the run
        episodes.csv        one row per training episode
        updates.csv         PPO-only per-update diagnostics
        policy.ckpt | qtable.bin | greedy_history.csv
        eval_episodes.csv   written by evaluate()
        eval_summary.csv

Everything is a pure function of (config, seed): the run seed is split
into independent child streams (channel, agent exploration, network
init, warmup, evaluation), so reruns are byte-identical except for the
wall-clock column.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import (
    build_uniform_actions,
    discretize_state,
    epsilon_greedy_select,
    greedy_record,
    greedy_select,
    load_greedy_history,
    load_qtable,
    make_greedy_history,
    make_qtable,
    q_update,
    save_greedy_history,
    save_qtable,
    warmup_thresholds,
)
from .channel import make_rng
from .config import RunConfig, save_config
from .env import RsmaEnv
from .nn import Adam, PolicyValueNet, TrainingDivergenceError, load_checkpoint, save_checkpoint
from .ppo import collect_rollout, estimate_advantages, mean_action, update

EPISODE_HEADER = [
    "episode",
    "mean_reward",
    "mean_sum_rate",
    "qos_violation_fraction",
    "wall_clock_s",
]
EVAL_HEADER = ["episode", "mean_reward", "mean_sum_rate", "qos_violation_fraction"]


def _fmt_float(x) -> str:
    return f"{float(x):.12g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [x if isinstance(x, (int, str)) else _fmt_float(x) for x in row]
            )


def read_csv(path):
    """(header, float matrix) for the numeric CSVs this package writes."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, np.asarray(rows)


@dataclass
class RunRecord:
    algorithm: str
    seed: int
    out_dir: Path
    episode_rows: np.ndarray  # columns per EPISODE_HEADER
    avg_sum_rate_last_10pct: float
    failed: bool = False

    @property
    def mean_rewards(self) -> np.ndarray:
        return self.episode_rows[:, 1]

    @property
    def mean_sum_rates(self) -> np.ndarray:
        return self.episode_rows[:, 2]


@dataclass
class EvalResult:
    mean_reward: float
    mean_sum_rate: float
    qos_violation_fraction: float
    episode_rows: np.ndarray


def _seed_streams(seed: int):
    """Independent child streams for one run."""
    children = np.random.SeedSequence(seed).spawn(5)
    names = ("env", "agent", "init", "warmup", "eval")
    return dict(zip(names, children))


def _episode_stats(rewards, sum_rates, violations, k):
    return (
        float(np.mean(rewards)),
        float(np.mean(sum_rates)),
        float(np.sum(violations)) / (k * len(rewards)),
    )


# -- per-algorithm training loops ---------------------------------------------


def _train_ppo(config: RunConfig, env: RsmaEnv, streams, out_dir: Path, rows: list):
    cfg = config.ppo
    init_rng = make_rng(streams["init"])
    agent_rng = make_rng(streams["agent"])
    net = PolicyValueNet(
        env.obs_dim,
        env.action_dim,
        hidden=cfg.hidden,
        log_std_init=cfg.log_std_init,
        separate_value=cfg.separate_value,
        rng=init_rng,
    )
    opt = Adam(net.parameters(), alpha=cfg.learning_rate)
    ep_len = config.env.episode_len
    per_update = cfg.rollout_steps // ep_len
    n_updates = config.episodes // per_update

    update_rows = []
    t0 = time.perf_counter()
    episode = 0
    k = config.env.k
    try:
        for _ in range(n_updates):
            buffer = collect_rollout(env, net, cfg.rollout_steps, agent_rng)
            estimate_advantages(buffer, cfg.discount, cfg.gae_lambda)
            metrics = update(net, opt, buffer, cfg, agent_rng)
            update_rows.append(
                [
                    len(update_rows),
                    metrics.mean_ratio,
                    metrics.clip_fraction,
                    metrics.policy_loss,
                    metrics.value_loss,
                    metrics.entropy,
                ]
            )
            elapsed = time.perf_counter() - t0
            for e in range(per_update):
                sl = slice(e * ep_len, (e + 1) * ep_len)
                stats = _episode_stats(
                    buffer.rewards[sl], buffer.sum_rates[sl], buffer.violation_counts[sl], k
                )
                rows.append([episode, *stats, elapsed])
                episode += 1
    finally:
        # on divergence this still dumps the state for post-mortems
        write_csv(
            out_dir / "updates.csv",
            ["update", "mean_ratio", "clip_fraction", "policy_loss", "value_loss", "entropy"],
            update_rows,
        )
        save_checkpoint(out_dir / "policy.ckpt", net, opt)


def _train_qlearning(config: RunConfig, env: RsmaEnv, streams, out_dir: Path, rows: list):
    qc = config.qlearning
    k = config.env.k
    actions = build_uniform_actions(qc.n_actions, k)
    warmup_env = RsmaEnv(
        replace(config.env, qos=config.env.qos.copy()), seed=streams["warmup"]
    )
    thresholds = warmup_thresholds(
        warmup_env, actions, qc.warmup_steps, make_rng(streams["warmup"])
    )
    qtable = make_qtable(k, qc.n_actions, thresholds, learning_rate=qc.learning_rate)
    rng = make_rng(streams["agent"])

    total_steps = config.episodes * config.env.episode_len
    anneal_steps = max(1, total_steps // 2)
    t0 = time.perf_counter()
    step_no = 0
    for episode in range(config.episodes):
        obs = env.reset()
        s = discretize_state(obs, thresholds)
        rewards = np.empty(config.env.episode_len)
        rates = np.empty(config.env.episode_len)
        viols = np.empty(config.env.episode_len)
        for t in range(config.env.episode_len):
            frac = min(1.0, step_no / anneal_steps)
            eps = qc.eps_start + frac * (qc.eps_end - qc.eps_start)
            a = epsilon_greedy_select(qtable, s, eps, rng)
            outcome = env.step(actions.raw_action(a))
            s_next = discretize_state(outcome.observation, thresholds)
            # baselines share the PPO discount so returns are comparable
            q_update(qtable, s, a, outcome.reward, s_next, qc.learning_rate, config.ppo.discount)
            s = s_next
            rewards[t], rates[t], viols[t] = (
                outcome.reward,
                outcome.sum_rate,
                outcome.qos_violations,
            )
            step_no += 1
        rows.append(
            [episode, *_episode_stats(rewards, rates, viols, k), time.perf_counter() - t0]
        )
    save_qtable(out_dir / "qtable.bin", qtable)


def _train_greedy(config: RunConfig, env: RsmaEnv, streams, out_dir: Path, rows: list):
    gc = config.greedy
    k = config.env.k
    actions = build_uniform_actions(gc.n_actions, k)
    history = make_greedy_history(gc.n_actions, exploration=gc.exploration)
    rng = make_rng(streams["agent"])

    t0 = time.perf_counter()
    for episode in range(config.episodes):
        obs = env.reset()
        rewards = np.empty(config.env.episode_len)
        rates = np.empty(config.env.episode_len)
        viols = np.empty(config.env.episode_len)
        for t in range(config.env.episode_len):
            a = greedy_select(history, rng)
            outcome = env.step(actions.raw_action(a))
            greedy_record(history, a, outcome.reward)
            rewards[t], rates[t], viols[t] = (
                outcome.reward,
                outcome.sum_rate,
                outcome.qos_violations,
            )
        rows.append(
            [episode, *_episode_stats(rewards, rates, viols, k), time.perf_counter() - t0]
        )
    save_greedy_history(out_dir / "greedy_history.csv", history, actions)


def train_one_seed(config: RunConfig, seed: int, out_root) -> RunRecord:
    """Train one (config, seed) pair into its own directory."""
    config.validate()
    out_dir = Path(out_root) / f"{config.algorithm}_s{seed}"
    out_dir.mkdir(parents=True, exist_ok=True)
    save_config(out_dir / "config.resolved", replace(config, seeds=(seed,)))

    streams = _seed_streams(seed)
    env_seed = (
        np.random.SeedSequence(config.channel_seed)
        if config.channel_seed is not None
        else streams["env"]
    )
    env = RsmaEnv(config.env, seed=env_seed)

    trainers = {"ppo": _train_ppo, "qlearning": _train_qlearning, "greedy": _train_greedy}
    failed = False
    rows: list = []
    try:
        trainers[config.algorithm](config, env, streams, out_dir, rows)
    except TrainingDivergenceError as err:
        (out_dir / "FAILED.txt").write_text(f"training diverged: {err}\n")
        failed = True
    write_csv(out_dir / "episodes.csv", EPISODE_HEADER, rows)

    rows_arr = np.asarray(rows) if rows else np.empty((0, len(EPISODE_HEADER)))
    tail = max(1, len(rows_arr) // 10)
    avg_tail = float(np.mean(rows_arr[-tail:, 2])) if len(rows_arr) else float("nan")
    write_csv(
        out_dir / "summary.csv",
        ["algorithm", "seed", "episodes", "avg_sum_rate_last_10pct"],
        [[config.algorithm, seed, len(rows_arr), avg_tail]],
    )
    return RunRecord(
        algorithm=config.algorithm,
        seed=seed,
        out_dir=out_dir,
        episode_rows=rows_arr,
        avg_sum_rate_last_10pct=avg_tail,
        failed=failed,
    )


def run_training(config: RunConfig, out_root) -> list[RunRecord]:
    """Train every seed in the config; one directory per seed."""
    return [train_one_seed(config, seed, out_root) for seed in config.seeds]


# -- frozen-policy evaluation --------------------------------------------------


def _ppo_policy(run_dir: Path, config: RunConfig):
    net, _ = load_checkpoint(run_dir / "policy.ckpt")
    k, mode = config.env.k, config.env.mode
    return lambda obs: mean_action(net, obs, k, mode)


def _qlearning_policy(run_dir: Path, config: RunConfig):
    qtable = load_qtable(run_dir / "qtable.bin")
    actions = build_uniform_actions(config.qlearning.n_actions, config.env.k)

    def policy(obs):
        s = discretize_state(obs, qtable.thresholds)
        return actions.raw_action(int(np.argmax(qtable.values[s])))

    return policy


def _greedy_policy(run_dir: Path, config: RunConfig):
    history = load_greedy_history(run_dir / "greedy_history.csv")
    actions = build_uniform_actions(config.greedy.n_actions, config.env.k)
    best = int(np.argmax(history.best_reward))
    return lambda obs: actions.raw_action(best)


def load_policy(run_dir, config: RunConfig):
    """Rebuild the frozen, exploration-free policy a run persisted."""
    loaders = {"ppo": _ppo_policy, "qlearning": _qlearning_policy, "greedy": _greedy_policy}
    return loaders[config.algorithm](Path(run_dir), config)


def evaluate_policy(config: RunConfig, policy, seed: int, episodes=None) -> EvalResult:
    """Average a frozen policy over held-out evaluation episodes."""
    episodes = episodes if episodes is not None else config.eval_episodes
    streams = _seed_streams(seed)
    env = RsmaEnv(config.env, seed=streams["eval"])
    k = config.env.k
    rows = []
    for ep in range(episodes):
        obs = env.reset()
        rewards = np.empty(config.env.episode_len)
        rates = np.empty(config.env.episode_len)
        viols = np.empty(config.env.episode_len)
        for t in range(config.env.episode_len):
            outcome = env.step(policy(obs))
            obs = outcome.observation
            rewards[t], rates[t], viols[t] = (
                outcome.reward,
                outcome.sum_rate,
                outcome.qos_violations,
            )
        rows.append([ep, *_episode_stats(rewards, rates, viols, k)])
    rows = np.asarray(rows)
    return EvalResult(
        mean_reward=float(np.mean(rows[:, 1])),
        mean_sum_rate=float(np.mean(rows[:, 2])),
        qos_violation_fraction=float(np.mean(rows[:, 3])),
        episode_rows=rows,
    )


def evaluate_run(record: RunRecord, config: RunConfig, episodes=None, out_dir=None) -> EvalResult:
    """Evaluate a finished run; results land next to it unless redirected."""
    policy = load_policy(record.out_dir, config)
    result = evaluate_policy(config, policy, record.seed, episodes)
    out_dir = Path(out_dir) if out_dir is not None else record.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "eval_episodes.csv", EVAL_HEADER, result.episode_rows)
    write_csv(
        out_dir / "eval_summary.csv",
        ["algorithm", "seed", "mean_reward", "mean_sum_rate", "qos_violation_fraction"],
        [
            [
                config.algorithm,
                record.seed,
                result.mean_reward,
                result.mean_sum_rate,
                result.qos_violation_fraction,
            ]
        ],
    )
    return result


# -- sweeps ---------------------------------------------------------------------

SWEEP_HEADER = [
    "algorithm",
    "csit",
    "x_name",
    "x_value",
    "seed",
    "mean_reward",
    "mean_sum_rate",
    "qos_violation_fraction",
]


def _csit_label(config: RunConfig) -> str:
    return "perfect" if config.env.perfect_csit else "imperfect"


def _sweep(base: RunConfig, x_name: str, values, out_root, configure) -> Path:
    """Train + evaluate the base config at each sweep point; tidy rows out."""
    if len(values) == 0:
        raise ValueError("sweep needs at least one point")
    out_root = Path(out_root)
    rows = []
    for value in values:
        config = configure(base, value)
        config.validate()
        point_dir = out_root / f"{x_name}_{value:g}"
        for record in run_training(config, point_dir):
            result = evaluate_run(record, config)
            rows.append(
                [
                    config.algorithm,
                    _csit_label(config),
                    x_name,
                    float(value),
                    record.seed,
                    result.mean_reward,
                    result.mean_sum_rate,
                    result.qos_violation_fraction,
                ]
            )
    out_root.mkdir(parents=True, exist_ok=True)
    path = out_root / "sweep_rows.csv"
    write_csv(path, SWEEP_HEADER, rows)
    return path


def run_power_sweep(base: RunConfig, p_dbm_list, out_root) -> Path:
    """Train and evaluate at each transmit power; returns the tidy rows CSV."""

    def configure(cfg, p):
        return replace(cfg, env=replace(cfg.env, p_t_dbm=float(p), qos=cfg.env.qos.copy()))

    return _sweep(base, "p_t_dbm", list(p_dbm_list), out_root, configure)


def run_qos_sweep(base: RunConfig, q_list, out_root) -> Path:
    """Evaluate across QoS thresholds; one training per seed at the base Q.

    The requirement only gates the reward, not the dynamics, so the same
    frozen policy is re-scored under each Q_m: per-step penalties are
    monotone in the threshold, which is exactly the effect the sweep
    isolates.  (The power sweep, by contrast, retrains per point since
    the transmit power changes the environment itself.)
    """
    q_list = list(q_list)
    if len(q_list) == 0:
        raise ValueError("sweep needs at least one point")
    out_root = Path(out_root)
    records = run_training(base, out_root / "base_training")
    rows = []
    for q in q_list:
        config = replace(base, env=replace(base.env, qos=np.full(base.env.k, float(q))))
        config.validate()
        for record in records:
            point_dir = out_root / f"qos_{q:g}" / f"{config.algorithm}_s{record.seed}"
            result = evaluate_run(record, config, out_dir=point_dir)
            rows.append(
                [
                    config.algorithm,
                    _csit_label(config),
                    "qos",
                    float(q),
                    record.seed,
                    result.mean_reward,
                    result.mean_sum_rate,
                    result.qos_violation_fraction,
                ]
            )
    out_root.mkdir(parents=True, exist_ok=True)
    path = out_root / "sweep_rows.csv"
    write_csv(path, SWEEP_HEADER, rows)
    return path


# -- plot-ready aggregation ------------------------------------------------------

PLOT_HEADER = [
    "algorithm",
    "csit",
    "x_name",
    "x_value",
    "mean_reward",
    "stderr_reward",
    "mean_sum_rate",
    "stderr_sum_rate",
    "n_seeds",
]


def aggregate_records(records) -> list[list]:
    """Collapse per-seed records into mean/stderr rows.

    ``records`` holds dicts with keys algorithm, csit, x_name, x_value,
    seed, mean_reward, mean_sum_rate.  Output rows follow PLOT_HEADER,
    sorted for stable files.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for rec in records:
        key = (rec["algorithm"], rec["csit"], rec["x_name"], float(rec["x_value"]))
        groups.setdefault(key, []).append(rec)
    rows = []
    for key in sorted(groups):
        bucket = groups[key]
        rewards = np.array([r["mean_reward"] for r in bucket], dtype=float)
        rates = np.array([r["mean_sum_rate"] for r in bucket], dtype=float)

        def stderr(x):
            return float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else 0.0

        rows.append(
            [
                *key,
                float(np.mean(rewards)),
                stderr(rewards),
                float(np.mean(rates)),
                stderr(rates),
                len(bucket),
            ]
        )
    return rows


def emit_plot_data(records, out_path) -> Path:
    """Write the tidy mean/stderr CSV plus a readable text table."""
    rows = aggregate_records(records)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out_path, PLOT_HEADER, rows)

    text_path = out_path.with_suffix(".txt")
    widths = [12, 10, 10, 10, 12, 12, 14, 14, 7]
    with open(text_path, "w", encoding="utf-8") as f:
        f.write("".join(h.ljust(w) for h, w in zip(PLOT_HEADER, widths)) + "\n")
        for row in rows:
            cells = [
                x if isinstance(x, str) else f"{x:.4g}" for x in row
            ]
            f.write("".join(str(c).ljust(w) for c, w in zip(cells, widths)) + "\n")
    return out_path


def sweep_records_from_csv(path) -> list[dict]:
    """Load sweep_rows.csv back into aggregate_records() input dicts."""
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        for row in csv.DictReader(f):
            row["x_value"] = float(row["x_value"])
            row["seed"] = int(row["seed"])
            row["mean_reward"] = float(row["mean_reward"])
            row["mean_sum_rate"] = float(row["mean_sum_rate"])
            row["qos_violation_fraction"] = float(row["qos_violation_fraction"])
            out.append(row)
    return out
