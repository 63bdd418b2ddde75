"""Command-line entry point: ``gmfg {run,compare,probe,validate}``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .estimation import EstimationError
from .experiment import ExperimentConfig, apply_variant, compare_runs, run_experiment
from .game import GameError, monotonicity_probe
from .graphon import GraphonError, spec_from_config
from .solver import ConfigError

log = logging.getLogger("gmfg")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO,
           "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("GMFG_LOG", "warn").lower()
    logging.basicConfig(
        level=_LEVELS.get(level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmfg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("run", "run replicated PMD and write the convergence trace"),
        ("compare", "run the base config and every variant"),
        ("probe", "numerically probe the weak monotonicity condition"),
        ("validate", "check the config and exit"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--format", choices=("csv", "json"), help="trace format")
        p.add_argument("--seed", type=int, help="overrides base_seed")
        p.add_argument("--replications", type=int, help="overrides replications")
        p.add_argument("--parallel", type=int, default=1, help="worker processes")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cfg = ExperimentConfig.from_file(path)
    overrides = {}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.format is not None:
        overrides["output_format"] = args.format
    if args.seed is not None:
        overrides["base_seed"] = args.seed
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.parallel < 1:
        raise UsageError("--parallel must be at least 1")
    return replace(cfg, **overrides) if overrides else cfg


def _check_solver(cfg: ExperimentConfig, game, label: str) -> None:
    lam = cfg.solver.regularization(game)
    if lam * cfg.solver.step_size >= 1:
        raise ConfigError(f"{label}: need lambda * eta < 1, got {lam * cfg.solver.step_size}")
    if cfg.solver.q_source == "estimated" and cfg.n_agents % cfg.solver.estimation.n_sampled:
        raise ConfigError(f"{label}: estimation.n_sampled must divide n_agents")


def _check_runnable(cfg: ExperimentConfig, command: str) -> None:
    game = cfg.build_game()
    cfg.build_graphon(game.horizon)
    if command == "probe":  # needs only the game and graphon
        return
    _check_solver(cfg, game, "solver")
    if command == "run":
        return
    base = cfg.to_dict()
    for v in cfg.variants:
        merged, model = apply_variant(base, v)
        vcfg = ExperimentConfig.from_dict(merged)
        if model is not None:
            spec_from_config(model)
        _check_solver(vcfg, game, f"variant {v['name']!r}")


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:  # argparse reports usage problems with code 2
        return int(exc.code or 0)

    try:
        cfg = load_config(args)
        _check_runnable(cfg, args.command)
    except (UsageError, ConfigError, GameError, GraphonError, EstimationError,
            KeyError, TypeError, ValueError) as exc:
        print(f"gmfg: invalid configuration: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "validate":
            print(f"config ok: {args.config}")
        elif args.command == "run":
            table = run_experiment(cfg, parallel=args.parallel)
            print(
                f"run: {cfg.replications} replication(s), {cfg.solver.T} iterations, "
                f"final mean exploitability {table.final_mean():.6g}, output in {cfg.output_dir}"
            )
        elif args.command == "compare":
            res = compare_runs(cfg, parallel=args.parallel)
            finals = ", ".join(f"{k}={v:.6g}" for k, v in res.final_means().items())
            print(f"compare: final mean exploitability {finals}; output in {cfg.output_dir}")
        elif args.command == "probe":
            game = cfg.build_game()
            report = monotonicity_probe(game, cfg.build_graphon(game.horizon),
                                        cfg.probe_trials, cfg.probe_seed)
            line = json.dumps(report.to_dict())
            if args.out is not None:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "probe.json").write_text(line + "\n", encoding="utf-8")
            print(line)
    except Exception as exc:  # noqa: BLE001 -- any failure maps to exit code 1
        log.debug("run failed", exc_info=True)
        print(f"gmfg: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
