"""Command-line experiment runner.

Subcommands: gen-network (build a grid map), train (fit one agent), eval
(score one policy over many episodes), sweep (policy x scenario matrix).
Every run directory gets a manifest recording the resolved configuration,
so reruns reproduce outputs byte for byte.

Exit codes: 0 success, 2 usage error, 3 validation error (bad inputs,
mismatched checkpoint, missing sweep cells), 4 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .backend import backend_name
from .dqn import TrainConfig, load_checkpoint, save_checkpoint
from .env import ChargingEnv, EnvConfig
from .experiments import (DEFAULT_GRID, MetricsRow, evaluate_policy,
                          make_policy, summarize)
from .network import (NetworkParseError, NetworkValidationError, gen_grid,
                      load_network, save_network)
from .policies import POLICY_KINDS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


def _outdir(arg: str | None) -> Path:
    base = arg if arg is not None else os.environ.get("EVDISPATCH_OUTDIR", ".")
    p = Path(base)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_manifest(outdir: Path, command: str, config: dict) -> None:
    doc = {
        "command": command,
        "config": config,
        "version": __version__,
        "backend": backend_name(),
    }
    with open(outdir / "manifest.json", "w", encoding="utf-8") as fp:
        json.dump(doc, fp, indent=2)
        fp.write("\n")


def _write_rows(path: Path, rows: list[MetricsRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fp:
        wr = csv.writer(fp)
        wr.writerow(["scenario", "policy", "seed", "episode", "t_travel_s",
                     "reward", "horizon_expired"])
        for r in rows:
            wr.writerow([r.scenario, r.policy, r.seed, r.episode,
                         f"{r.t_travel_s:.1f}", f"{r.reward:.6f}",
                         int(r.horizon_expired)])


def _write_summary(path: Path, rows: list[MetricsRow]) -> list[dict]:
    summary = summarize(rows)
    with open(path, "w", encoding="utf-8", newline="") as fp:
        wr = csv.writer(fp)
        wr.writerow(["scenario", "policy", "episodes", "seeds",
                     "mean_t_travel_s", "mean_reward", "expired"])
        for s in summary:
            wr.writerow([s["scenario"], s["policy"], s["episodes"], s["seeds"],
                         f"{s['mean_t_travel_s']:.1f}",
                         f"{s['mean_reward']:.6f}", s["expired"]])
    return summary


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _env_config(args) -> EnvConfig:
    cfg = EnvConfig()
    if getattr(args, "conventional", None) is not None:
        cfg.n_conventional = args.conventional
    if getattr(args, "decision_interval", None) is not None:
        cfg.decision_interval = args.decision_interval
    return cfg


# ---------------------------------------------------------------------------
# subcommands


def _cmd_gen_network(args) -> int:
    net = gen_grid(rows=args.rows, cols=args.cols, block_len=args.block_len,
                   n_stations=args.stations,
                   min_station_dist=args.min_station_dist, seed=args.seed,
                   speed=args.speed, capacity=args.capacity, plugs=args.plugs,
                   power_kw=args.power_kw)
    save_network(net, args.output)
    print(f"wrote {args.output}: {net.n_nodes} nodes, {net.n_edges} edges, "
          f"{net.n_stations} stations")
    return EXIT_OK


def _cmd_train(args) -> int:
    net = load_network(args.net)
    cfg = TrainConfig(
        arch=args.arch, episodes=args.episodes, gamma=args.gamma, lr=args.lr,
        batch_size=args.batch_size, buffer_capacity=args.buffer,
        target_sync=args.target_sync, xi_start=args.xi_start,
        xi_final=args.xi_final, xi_anneal_steps=args.xi_anneal_steps,
        grad_clip=args.grad_clip, prioritized=args.prioritized,
        hidden=tuple(args.hidden), seed=args.seed)
    env = ChargingEnv(net, cfg=_env_config(args))
    outdir = _outdir(args.output)

    from .dqn import train

    result = train(env, args.evs, cfg, capture_first_batch=args.dump_target_batch)
    ckpt = outdir / "checkpoint.npz"
    save_checkpoint(ckpt, result.params, cfg)
    with open(outdir / "train_metrics.csv", "w", encoding="utf-8",
              newline="") as fp:
        wr = csv.writer(fp)
        wr.writerow(["episode", "steps", "t_travel_s", "reward", "mean_loss",
                     "xi_end", "horizon_expired"])
        for st in result.stats:
            wr.writerow([st.episode, st.steps, f"{st.t_travel_s:.1f}",
                         f"{st.reward:.6f}", f"{st.mean_loss:.6f}",
                         f"{st.xi_end:.4f}", int(st.horizon_expired)])
    if args.dump_target_batch:
        with open(outdir / "debug_targets.json", "w", encoding="utf-8") as fp:
            json.dump(result.debug_batch, fp, indent=2)
            fp.write("\n")
    _write_manifest(outdir, "train", {
        "net": str(args.net), "evs": args.evs,
        "env": {"n_conventional": env.cfg.n_conventional,
                "decision_interval": env.cfg.decision_interval},
        "train": asdict(cfg),
    })
    rewards = [st.reward for st in result.stats]
    print(f"trained {cfg.arch} for {cfg.episodes} episodes "
          f"(mean reward {np.mean(rewards):.3f}) -> {ckpt}")
    return EXIT_OK


def _load_policy_params(args, net) -> object | None:
    if args.policy in ("dqn", "dueling_ddqn"):
        if args.checkpoint is None:
            raise ValueError(f"--checkpoint is required for policy {args.policy}")
        params, meta = load_checkpoint(args.checkpoint)
        if meta["n_actions"] != net.n_stations:
            raise ValueError(
                f"checkpoint {args.checkpoint} was trained for "
                f"{meta['n_actions']} stations but the network has "
                f"{net.n_stations}")
        if meta["arch"] != args.policy:
            raise ValueError(
                f"checkpoint {args.checkpoint} holds a {meta['arch']} model, "
                f"not {args.policy}")
        return params
    return None


def _cmd_eval(args) -> int:
    net = load_network(args.net)
    params = _load_policy_params(args, net)
    env = ChargingEnv(net, cfg=_env_config(args))
    outdir = _outdir(args.output)
    rows: list[MetricsRow] = []
    for seed in args.seeds:
        policy = make_policy(args.policy, net.n_stations, params)
        rows.extend(evaluate_policy(env, policy, args.policy, args.evs,
                                    args.episodes, seed))
    _write_rows(outdir / "eval_metrics.csv", rows)
    summary = _write_summary(outdir / "summary.csv", rows)
    if args.episode_log is not None:
        with open(args.episode_log, "w", encoding="utf-8") as fp:
            for rec in env.episode_log:
                fp.write(json.dumps(rec) + "\n")
    _write_manifest(outdir, "eval", {
        "net": str(args.net), "policy": args.policy,
        "checkpoint": str(args.checkpoint) if args.checkpoint else None,
        "evs": args.evs, "episodes": args.episodes, "seeds": args.seeds,
        "env": {"n_conventional": env.cfg.n_conventional,
                "decision_interval": env.cfg.decision_interval},
    })
    for s in summary:
        print(f"scenario {s['scenario']} policy {s['policy']}: "
              f"mean T_travel {s['mean_t_travel_s']:.1f} s over "
              f"{s['episodes']} episodes ({s['expired']} expired)")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    net = load_network(args.net)
    env = ChargingEnv(net, cfg=_env_config(args))
    outdir = _outdir(args.output)
    ckpt_dir = Path(args.checkpoint_dir) if args.checkpoint_dir else None
    rows: list[MetricsRow] = []
    blocked: list[str] = []
    for scenario in args.scenarios:
        for kind in args.policies:
            for seed in args.seeds:
                params = None
                if kind in ("dqn", "dueling_ddqn"):
                    if ckpt_dir is None:
                        blocked.append(f"{kind}/evs{scenario}/seed{seed} "
                                       "(no --checkpoint-dir)")
                        continue
                    path = ckpt_dir / f"{kind}_evs{scenario}_seed{seed}.npz"
                    if not path.exists():
                        blocked.append(str(path))
                        continue
                    params, meta = load_checkpoint(path)
                    if meta["n_actions"] != net.n_stations:
                        raise ValueError(
                            f"{path}: trained for {meta['n_actions']} "
                            f"stations, network has {net.n_stations}")
                policy = make_policy(kind, net.n_stations, params)
                rows.extend(evaluate_policy(env, policy, kind, scenario,
                                            args.episodes, seed))
    _write_rows(outdir / "sweep_metrics.csv", rows)
    summary = _write_summary(outdir / "sweep_summary.csv", rows)
    by_cell = {(s["scenario"], s["policy"]): s["mean_t_travel_s"]
               for s in summary}
    with open(outdir / "sweep_matrix.csv", "w", encoding="utf-8",
              newline="") as fp:
        wr = csv.writer(fp)
        wr.writerow(["scenario"] + list(args.policies))
        for scenario in args.scenarios:
            row = [scenario]
            for kind in args.policies:
                v = by_cell.get((scenario, kind))
                row.append("" if v is None else f"{v:.1f}")
            wr.writerow(row)
    _write_manifest(outdir, "sweep", {
        "net": str(args.net), "scenarios": args.scenarios,
        "policies": list(args.policies), "seeds": args.seeds,
        "episodes": args.episodes,
        "checkpoint_dir": str(ckpt_dir) if ckpt_dir else None,
        "env": {"n_conventional": env.cfg.n_conventional,
                "decision_interval": env.cfg.decision_interval},
    })
    header = "scenario".ljust(10) + "".join(k.rjust(14) for k in args.policies)
    print(header)
    for scenario in args.scenarios:
        line = str(scenario).ljust(10)
        for kind in args.policies:
            v = by_cell.get((scenario, kind))
            line += ("-" if v is None else f"{v:.1f}").rjust(14)
        print(line)
    if blocked:
        print("blocked cells (missing checkpoints):", file=sys.stderr)
        for b in blocked:
            print(f"  {b}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--conventional", type=int, default=None,
                   help="conventional vehicles per day (default 400)")
    p.add_argument("--decision-interval", type=float, default=None,
                   help="seconds between agent decisions (default 60)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="evdispatch",
        description="EV charging dispatch experiments on simulated traffic")
    ap.add_argument("--config", type=str, default=None,
                    help="JSON file with default values for any flag")
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen-network", help="generate a grid road network")
    g.add_argument("--rows", type=int, default=DEFAULT_GRID["rows"])
    g.add_argument("--cols", type=int, default=DEFAULT_GRID["cols"])
    g.add_argument("--block-len", type=float, default=DEFAULT_GRID["block_len"])
    g.add_argument("--stations", type=int, default=DEFAULT_GRID["n_stations"])
    g.add_argument("--min-station-dist", type=float,
                   default=DEFAULT_GRID["min_station_dist"])
    g.add_argument("--seed", type=int, default=DEFAULT_GRID["seed"])
    g.add_argument("--speed", type=float, default=DEFAULT_GRID["speed"])
    g.add_argument("--capacity", type=float, default=DEFAULT_GRID["capacity"])
    g.add_argument("--plugs", type=int, default=DEFAULT_GRID["plugs"])
    g.add_argument("--power-kw", type=float, default=DEFAULT_GRID["power_kw"])
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=_cmd_gen_network)

    t = sub.add_parser("train", help="train a Q-learning dispatcher")
    t.add_argument("--net", required=True)
    t.add_argument("--arch", choices=("dqn", "dueling_ddqn"), default="dqn")
    t.add_argument("--evs", type=int, default=300,
                   help="background EVs per day")
    t.add_argument("--episodes", type=int, default=50)
    t.add_argument("--gamma", type=float, default=0.99)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--buffer", type=int, default=10000)
    t.add_argument("--target-sync", type=int, default=8000)
    t.add_argument("--xi-start", type=float, default=1.0)
    t.add_argument("--xi-final", type=float, default=0.1)
    t.add_argument("--xi-anneal-steps", type=int, default=1000)
    t.add_argument("--grad-clip", type=float, default=10.0)
    t.add_argument("--hidden", type=_parse_seeds, default=[512, 256],
                   help="comma-separated hidden layer sizes")
    t.add_argument("--prioritized", action="store_true",
                   help="sample replay by |TD error| instead of uniformly")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--dump-target-batch", action="store_true",
                   help="write the first minibatch's target computation")
    _add_env_flags(t)
    t.add_argument("-o", "--output", default=None)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate one policy")
    e.add_argument("--net", required=True)
    e.add_argument("--policy", choices=POLICY_KINDS, required=True)
    e.add_argument("--checkpoint", default=None)
    e.add_argument("--evs", type=int, default=300)
    e.add_argument("--episodes", type=int, default=50)
    e.add_argument("--seeds", type=_parse_seeds, default=[1],
                   help="comma-separated evaluation seeds")
    e.add_argument("--episode-log", default=None,
                   help="write the last episode's step records here (jsonl)")
    _add_env_flags(e)
    e.add_argument("-o", "--output", default=None)
    e.set_defaults(func=_cmd_eval)

    s = sub.add_parser("sweep", help="policy x scenario matrix")
    s.add_argument("--net", required=True)
    s.add_argument("--scenarios", type=_parse_seeds, default=[200, 300, 400])
    s.add_argument("--policies", type=lambda t: t.split(","),
                   default=list(POLICY_KINDS))
    s.add_argument("--seeds", type=_parse_seeds, default=[1, 2, 3])
    s.add_argument("--episodes", type=int, default=50)
    s.add_argument("--checkpoint-dir", default=None,
                   help="directory holding {arch}_evs{N}_seed{S}.npz files")
    _add_env_flags(s)
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=_cmd_sweep)
    return ap


def _apply_config_file(ap: argparse.ArgumentParser, argv: list[str]
                       ) -> list[str]:
    """Fold --config file values in as defaults (CLI flags still win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    try:
        path = argv[i + 1]
    except IndexError:
        ap.error("--config needs a file argument")
    with open(path, "r", encoding="utf-8") as fp:
        values = json.load(fp)
    if not isinstance(values, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    extra: list[str] = []
    for key, val in values.items():
        flag = "--" + key.replace("_", "-")
        if flag not in argv:
            if isinstance(val, bool):
                if val:
                    extra.append(flag)
            elif isinstance(val, list):
                extra.extend([flag, ",".join(str(v) for v in val)])
            else:
                extra.extend([flag, str(val)])
    head = argv[: i] + argv[i + 2:]
    # insert after the subcommand so subparser flags resolve
    return head[:1] + extra + head[1:] if head else extra


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except (NetworkParseError, NetworkValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
