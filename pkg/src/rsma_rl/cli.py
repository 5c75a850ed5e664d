"""Command-line harness: train, evaluate, sweep and report.

    rsma-rl train       --out runs/base --algorithm ppo --seed 0,1,2
    rsma-rl evaluate    runs/base/ppo_s0
    rsma-rl sweep-power --out runs/power --points 20,30,40,50,60
    rsma-rl sweep-qos   --out runs/qos   --points 0,0.1,0.25,0.5,1.0
    rsma-rl report      runs --out runs/report

``report`` walks a results tree, aggregates every run it finds into
tidy mean/stderr CSVs and renders the matching PNG figures next to
them.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, desk_profile, load_config
from .env import sdma_variant
from .experiments import (
    aggregate_records,
    emit_plot_data,
    evaluate_run,
    read_csv,
    run_power_sweep,
    run_qos_sweep,
    run_training,
    sweep_records_from_csv,
    RunRecord,
)

DEFAULT_POWER_POINTS = (20.0, 30.0, 40.0, 50.0, 60.0)
DEFAULT_QOS_POINTS = (0.0, 0.1, 0.25, 0.5, 1.0)


def _parse_seeds(text):
    return tuple(int(s) for s in text.split(",") if s.strip() != "")


def _common_flags(p):
    p.add_argument("--config", type=Path, help="flat key=value config file")
    p.add_argument("--seed", type=_parse_seeds, help="seed or comma list of seeds")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--algorithm", choices=("ppo", "qlearning", "greedy"))
    p.add_argument("--mode", choices=("rsma", "sdma"))
    p.add_argument("--desk", action="store_true", help="small 2x2 CI-scale profile")
    p.add_argument("--episodes", type=int, help="override training episode count")


def _resolve_config(args) -> RunConfig:
    config = RunConfig()
    if args.config:
        config = load_config(args.config, base=config)
    if args.desk:
        config = desk_profile(config)
    if args.algorithm:
        config = replace(config, algorithm=args.algorithm)
    if args.seed:
        config = replace(config, seeds=args.seed)
    if args.episodes:
        config = replace(config, episodes=args.episodes)
    if args.mode and args.mode != config.env.mode:
        if args.mode == "sdma":
            config = replace(config, env=sdma_variant(config.env))
        else:
            config = replace(
                config, env=replace(config.env, mode="rsma", qos=config.env.qos.copy())
            )
    config.validate()
    return config


def cmd_train(args) -> int:
    config = _resolve_config(args)
    records = run_training(config, args.out)
    status = 0
    for rec in records:
        if rec.failed:
            print(f"seed {rec.seed}: FAILED (diverged), see {rec.out_dir}")
            status = 1
        else:
            print(
                f"seed {rec.seed}: {len(rec.episode_rows)} episodes, "
                f"avg sum-rate (last 10%) = {rec.avg_sum_rate_last_10pct:.4f} "
                f"-> {rec.out_dir}"
            )
    return status


def cmd_evaluate(args) -> int:
    run_dir = args.run_dir
    config = load_config(run_dir / "config.resolved")
    record = RunRecord(
        algorithm=config.algorithm,
        seed=config.seeds[0],
        out_dir=run_dir,
        episode_rows=np.empty((0, 5)),
        avg_sum_rate_last_10pct=float("nan"),
    )
    result = evaluate_run(record, config, episodes=args.episodes)
    print(
        f"{config.algorithm} seed {record.seed}: mean reward {result.mean_reward:.4f}, "
        f"mean sum-rate {result.mean_sum_rate:.4f}, "
        f"QoS violation fraction {result.qos_violation_fraction:.4f}"
    )
    return 0


def _parse_points(text):
    return [float(x) for x in text.split(",") if x.strip() != ""]


def cmd_sweep_power(args) -> int:
    config = _resolve_config(args)
    points = args.points if args.points else list(DEFAULT_POWER_POINTS)
    path = run_power_sweep(config, points, args.out)
    emit_plot_data(sweep_records_from_csv(path), Path(args.out) / "plot_data.csv")
    print(f"sweep rows -> {path}")
    return 0


def cmd_sweep_qos(args) -> int:
    config = _resolve_config(args)
    points = args.points if args.points else list(DEFAULT_QOS_POINTS)
    path = run_qos_sweep(config, points, args.out)
    emit_plot_data(sweep_records_from_csv(path), Path(args.out) / "plot_data.csv")
    print(f"sweep rows -> {path}")
    return 0


def _learning_records(root: Path):
    """Per-episode reward records from every episodes.csv under root."""
    records = []
    for cfg_path in sorted(root.rglob("config.resolved")):
        run_dir = cfg_path.parent
        episodes_csv = run_dir / "episodes.csv"
        if not episodes_csv.exists():
            continue
        config = load_config(cfg_path)
        _, rows = read_csv(episodes_csv)
        csit = "perfect" if config.env.perfect_csit else "imperfect"
        label = config.algorithm if config.env.mode == "rsma" else f"{config.algorithm}-sdma"
        for row in rows:
            records.append(
                {
                    "algorithm": label,
                    "csit": csit,
                    "x_name": "episode",
                    "x_value": row[0],
                    "seed": config.seeds[0],
                    "mean_reward": row[1],
                    "mean_sum_rate": row[2],
                }
            )
    return records


def cmd_report(args) -> int:
    from .plots import plot_learning_curves, plot_sweep

    root = args.root
    out = args.out if args.out else root / "report"
    out.mkdir(parents=True, exist_ok=True)
    produced = []

    learning = _learning_records(root)
    if learning:
        emit_plot_data(learning, out / "learning_curves.csv")
        rows = aggregate_records(learning)
        produced.append(plot_learning_curves(rows, out / "learning_curves.png"))
        produced.append(out / "learning_curves.csv")

    for sweep_csv in sorted(root.rglob("sweep_rows.csv")):
        records = sweep_records_from_csv(sweep_csv)
        x_name = records[0]["x_name"]
        stem = "power_sweep" if x_name == "p_t_dbm" else "qos_sweep"
        emit_plot_data(records, out / f"{stem}.csv")
        rows = aggregate_records(records)
        x_label = (
            "transmit power (dBm)" if x_name == "p_t_dbm" else "QoS requirement (bps/Hz)"
        )
        produced.append(plot_sweep(rows, out / f"{stem}.png", x_label))
        produced.append(out / f"{stem}.csv")

    if not produced:
        print(f"no runs found under {root}", file=sys.stderr)
        return 1
    for p in produced:
        print(f"wrote {p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsma-rl",
        description="RSMA downlink power allocation: PPO vs tabular baselines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one algorithm over one or more seeds")
    _common_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("evaluate", help="frozen-policy evaluation of a finished run")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--episodes", type=int, default=None)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("sweep-power", help="train/evaluate across transmit powers")
    _common_flags(p)
    p.add_argument("--points", type=_parse_points, help="comma list of dBm values")
    p.set_defaults(fn=cmd_sweep_power)

    p = sub.add_parser("sweep-qos", help="train/evaluate across QoS thresholds")
    _common_flags(p)
    p.add_argument("--points", type=_parse_points, help="comma list of Q_m values")
    p.set_defaults(fn=cmd_sweep_qos)

    p = sub.add_parser("report", help="aggregate results and render figures")
    p.add_argument("root", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
