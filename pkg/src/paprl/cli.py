"""Command line entry point.

    paprl pretrain --class rotating-wall --interactions 10000 --out rot.json
    paprl run --config run.json [--seed-offset k] [--quiet]
    paprl plot --in runs/a/*/seed_*.csv --out curves.svg
    paprl check

Exit status is 0 on success, 1 on a configuration or usage error and 2 on a
runtime fault.
"""

from __future__ import annotations

import argparse
import math
import sys
from collections import deque

import numpy as np

from . import physics
from .errors import ConfigError, PaprlError
from .harness import RunConfig, run_experiment
from .nn import Mlp, gradient_check
from .plot import emit_plot
from .reward import TrustState, trust_factor
from .transition import PretrainConfig, pretrain_offline

EXIT_OK, EXIT_CONFIG, EXIT_FAULT = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paprl", description="Plug-and-play object RL on a basket-ball platform.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pretrain", help="learn a class transition model without rewards")
    p.add_argument("--class", dest="class_id", required=True)
    p.add_argument("--interactions", type=int, default=10_000)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None)

    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed-offset", type=int, default=0)
    r.add_argument("--quiet", action="store_true")

    pl = sub.add_parser("plot", help="render reward curves from episode CSVs")
    pl.add_argument("--in", dest="inputs", nargs="+", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--window", type=int, default=100)
    pl.add_argument("--title", default="Reward per episode")

    sub.add_parser("check", help="run built-in numerical self checks")
    return parser


def run_checks(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Gradient, physics and formula self checks; ``(name, passed, detail)`` per check."""
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    for _ in range(20):
        sizes = [int(rng.integers(1, 6)) for _ in range(int(rng.integers(2, 5)))]
        net = Mlp.uniform_init(sizes, rng, 0.5)
        X = rng.normal(size=(4, sizes[0]))
        Y = rng.normal(size=(4, sizes[-1]))
        worst = max(worst, gradient_check(net, X, Y))
    results.append(("gradient check", worst < 1e-4, f"max relative error {worst:.2e}"))

    worst = -math.inf
    for _ in range(1000):
        ball = physics.BallState(
            0.0, 10.0, rng.uniform(-500, 500), rng.uniform(-500, 0), rng.uniform(-5, 5),
            rng.uniform(0.4, 0.9), rng.uniform(0.4, 0.9), 10.0,
        )
        wall = physics.WallGeometry("segment", (0.0, 0.0), rng.uniform(0.4, 0.9), rng.uniform(0.4, 0.9), 60.0)
        post = physics.resolve_collision(ball, wall)
        worst = max(worst, post.speed - ball.speed)
    results.append(("collision dissipation", worst <= 1e-9, f"max speed gain {worst:.2e}"))

    ball = physics.BallState(0.0, 10.0, 3.0, -4.0, 0.0, f=0.0, e=1.0)
    wall = physics.WallGeometry("segment", (0.0, 0.0), 0.0, 1.0, 60.0)
    post = physics.resolve_collision(ball, wall)
    err = max(abs(post.vx - 3.0), abs(post.vy - 4.0))
    results.append(("specular reflection", err <= 1e-9, f"error {err:.1e}"))

    rec = physics.EpisodeRecord(outcome=physics.IN_BASKET, min_basket_distance=50.0)
    far = physics.EpisodeRecord(min_basket_distance=4.0)
    ok = physics.compute_reward(rec) == 1.0 and physics.compute_reward(far) == 0.25
    results.append(("reward formula", ok, "basket -> 1.0, distance 4 -> 0.25"))

    vectors = [([0.0] * 20, 1.0), ([1.0], 0.5), ([0.1, 0.2, 0.3, 0.4], 0.5)]
    ok = True
    for residuals, expected in vectors:
        t = TrustState(window=len(residuals))
        t.residuals = deque(residuals, maxlen=len(residuals))
        ok &= abs(trust_factor(t) - expected) < 1e-12
    results.append(("trust factor", ok, "zero window -> 1, K=1 r=1 -> 0.5, K=4 sum 1 -> 0.5"))
    return results


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "pretrain":
            return _pretrain(args)
        if args.command == "run":
            config = RunConfig.load(args.config)
            summary = run_experiment(config, quiet=args.quiet, seed_offset=args.seed_offset)
            if not args.quiet:
                for seed, mean in summary.final_means.items():
                    print(f"seed {seed}: final-window mean reward {mean:.4f}")
                print(f"aggregate: {summary.aggregate_path}")
            return EXIT_OK
        if args.command == "plot":
            out = emit_plot(args.inputs, args.out, args.window, args.title)
            print(out)
            return EXIT_OK
        if args.command == "check":
            results = run_checks()
            for name, ok, detail in results:
                print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_FAULT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PaprlError, OSError, ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_CONFIG


def _pretrain(args) -> int:
    classes = {c.class_id for c in physics.basketball_classes() if c.action_spec.dim}
    if args.class_id not in classes:
        raise ConfigError("--class", f"unknown active class {args.class_id!r}; known: {sorted(classes)}")
    if args.interactions <= 0:
        raise ConfigError("--interactions", "must be positive")
    config = PretrainConfig() if args.epochs is None else PretrainConfig(epochs=args.epochs)
    model = pretrain_offline(args.class_id, args.interactions, config, np.random.default_rng(args.seed))
    model.save(args.out)
    print(f"{args.class_id}: {model.trained_samples} training pairs -> {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
