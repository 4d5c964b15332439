"""Command line front end.

Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, load_config
from .gridworld import GridWorld, PRESETS, make_spec, optimal_return
from .harness import PretrainRefused, evaluate, pretrain_teacher, run_experiment
from .network import TrainingDivergence, load_network

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


class _GreedyPolicy:
    """Minimal adapter so evaluate() can score a bare checkpoint."""

    def __init__(self, net):
        self.net = net

    def greedy(self, state):
        return int(np.argmax(self.net.forward(state)))


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    report = run_experiment(cfg, seed_offset=args.seed_offset,
                            out_dir=args.out)
    for seed, path in sorted(report.seed_csvs.items()):
        print(f"seed {seed}: {path}")
    print(f"aggregate: {report.aggregate_csv}")
    print(f"report: {report.report_path}")
    return EXIT_OK


def _cmd_pretrain(args) -> int:
    spec = make_spec(args.env)
    teacher = pretrain_teacher(spec, args.mode, args.out, gamma=args.gamma,
                               steps=args.steps, seed=args.seed)
    print(f"teacher ({teacher.mode}) written to {args.out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    spec = make_spec(args.env)
    policy = _GreedyPolicy(load_network(args.checkpoint))
    mean, stderr = evaluate(policy, spec, args.gamma, args.trials, args.seed)
    best = optimal_return(spec, args.gamma)
    print(f"return: {mean:.6f} +/- {stderr:.6f} over {args.trials} trials")
    print(f"optimal return: {best:.6f}")
    return EXIT_OK


def _cmd_list_presets(_args) -> int:
    for name in sorted(PRESETS):
        spec = make_spec(name)
        print(f"{name}: {spec.width}x{spec.height}, start {spec.start}, "
              f"goal {spec.goal}, walls {len(spec.walls)}, "
              f"slip {spec.slip_prob}, cap {spec.max_steps}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="suair",
        description="Uncertainty-driven action-advising experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--seed-offset", type=int, default=0,
                     help="added to every configured seed")
    run.add_argument("--out", default=None, help="override output directory")
    run.add_argument("--workers", type=int, default=None,
                     help="parallel seed workers")
    run.set_defaults(func=_cmd_run)

    pre = sub.add_parser("pretrain-teacher", help="build a teacher checkpoint")
    pre.add_argument("--env", required=True, choices=sorted(PRESETS))
    pre.add_argument("--mode", required=True, choices=["oracle", "dqn"])
    pre.add_argument("--out", required=True, help="checkpoint path")
    pre.add_argument("--gamma", type=float, default=0.99)
    pre.add_argument("--steps", type=int, default=40_000,
                     help="training budget for dqn mode")
    pre.add_argument("--seed", type=int, default=1)
    pre.set_defaults(func=_cmd_pretrain)

    ev = sub.add_parser("evaluate", help="score a checkpoint greedily")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--env", required=True, choices=sorted(PRESETS))
    ev.add_argument("--trials", type=int, default=10)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--gamma", type=float, default=0.99)
    ev.set_defaults(func=_cmd_evaluate)

    lp = sub.add_parser("list-presets", help="show the bundled environments")
    lp.set_defaults(func=_cmd_list_presets)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, PretrainRefused) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergence as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
