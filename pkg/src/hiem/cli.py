"""Command-line entry points: train, eval, render, bench.

    hiem train  --config run.ini [--seed N] [--out DIR] [--method NAME]
                [--checkpoint PATH] [--override section.key=value ...]
    hiem eval   --config run.ini --checkpoint PATH [...]
    hiem render --episodes eval_episodes.jsonl --fixture bench15 --out t.svg
                [--index N]
    hiem bench  --config bench.ini [--out DIR] [...]
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .baselines import MethodConfig, build_agent
from .checkpoint import load_checkpoint
from .config import load_config
from .gridworld import ConfigError
from .logs import read_jsonl
from .mapfile import builtin_fixture, load_map
from .render import render_episode_svg
from .training import run_bench, run_eval, train

log = logging.getLogger("hiem")


def _resolve_fixture(name: str) -> Path:
    path = Path(name)
    if path.exists():
        return path
    try:
        return builtin_fixture(name)
    except ConfigError:
        raise ConfigError(
            f"map fixture not found: {name!r} (neither a file nor a builtin)"
        )


def _load_run(args):
    cfg = load_config(args.config, args.override)
    if args.seed is not None:
        cfg.set("run", "seed", str(args.seed))
    if args.method is not None:
        cfg.set("run", "method", args.method)
    if args.out is not None:
        cfg.set("run", "out_dir", args.out)
    world = load_map(_resolve_fixture(cfg.get("run", "fixture")))
    return cfg, world


def _build(cfg, world):
    mcfg = MethodConfig(
        method=cfg.get("run", "method"),
        option_count=cfg.get("params", "option_count"),
    )
    agent = build_agent(world, mcfg, cfg.hiem_params(), cfg.get("run", "seed"))
    return mcfg, agent


def cmd_train(args) -> int:
    cfg, world = _load_run(args)
    mcfg, agent = _build(cfg, world)
    out_dir = Path(cfg.get("run", "out_dir"))
    ckpt = train(
        agent, world, cfg, out_dir, mcfg.method, resume_from=args.checkpoint
    )
    log.info("training done; checkpoint at %s", ckpt)
    return 0


def cmd_eval(args) -> int:
    cfg, world = _load_run(args)
    mcfg, agent = _build(cfg, world)
    if mcfg.trainable:
        if args.checkpoint is None:
            raise ConfigError(f"method {mcfg.method!r} needs --checkpoint")
        agent.set_state(load_checkpoint(args.checkpoint))
    out_dir = Path(cfg.get("run", "out_dir"))
    report = run_eval(agent, world, cfg, out_dir, mcfg.method)
    print(
        f"{mcfg.method}: SR={report.sr:.3f} SPL={report.spl:.3f} "
        f"AR={report.ar:.3f} N={report.n}"
    )
    return 0


def cmd_render(args) -> int:
    world = load_map(_resolve_fixture(args.fixture))
    episodes = read_jsonl(args.episodes)
    if not episodes:
        raise ConfigError(f"no episodes in {args.episodes}")
    if not 0 <= args.index < len(episodes):
        raise ConfigError(f"episode index {args.index} out of range")
    svg = render_episode_svg(world, episodes[args.index])
    Path(args.out).write_text(svg)
    log.info("wrote %s", args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = load_config(args.config, args.override)
    if args.seed is not None:
        cfg.set("run", "seed", str(args.seed))
    out_dir = Path(args.out if args.out else cfg.get("run", "out_dir"))
    world = load_map(_resolve_fixture(cfg.get("run", "fixture")))
    rows = run_bench(cfg, world, out_dir)
    for row in rows:
        rep = row["report"]
        print(
            f"{row['method']} seed={row['seed']}: SR={rep.sr:.3f} "
            f"SPL={rep.spl:.3f} AR={rep.ar:.3f}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hiem")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--method", default=None)
        p.add_argument("--checkpoint", default=None)
        p.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
        )

    p_train = sub.add_parser("train", help="train a method, write checkpoints")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a method, write metrics")
    common(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_render = sub.add_parser("render", help="render an episode to SVG")
    p_render.add_argument("--episodes", required=True, help="episode JSONL file")
    p_render.add_argument("--fixture", required=True)
    p_render.add_argument("--out", required=True, help="output SVG path")
    p_render.add_argument("--index", type=int, default=0)
    p_render.set_defaults(func=cmd_render)

    p_bench = sub.add_parser("bench", help="train+eval a matrix of methods")
    common(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
