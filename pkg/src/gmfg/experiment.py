"""Config-driven experiments: replicated PMD runs and variant comparisons."""

from __future__ import annotations

import copy
import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from .game import BeachBarConfig, GameSpec, build_beach_bar, load_game_file
from .graphon import DiscreteGraphon, GraphonSpec, discretize, spec_from_config, spec_to_config
from .solver import ConfigError, PMDConfig, PMDResult, pmd_run

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("replication", "t", "exploit_last", "exploit_avg")
SUMMARY_COLUMNS = ("t", "mean", "min", "max")

DEFAULT_GRAPHON = {"kind": "sbm", "boundaries": [0.7, 1.0], "rates": [[0.9, 0.3], [0.3, 0.9]]}


@dataclass(frozen=True)
class ExperimentConfig:
    game: BeachBarConfig | None = field(default_factory=BeachBarConfig)
    game_file: str | None = None  # used instead of ``game`` when set
    graphon: GraphonSpec = field(default_factory=lambda: spec_from_config(DEFAULT_GRAPHON))
    n_agents: int = 10
    solver: PMDConfig = field(default_factory=PMDConfig)
    replications: int = 5
    base_seed: int = 0
    output_dir: str = "out"
    output_format: str = "csv"
    variants: tuple[dict, ...] = ()
    probe_trials: int = 1000
    probe_seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.n_agents < 1:
            raise ConfigError("n_agents must be positive")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be nonnegative")
        if self.output_format not in ("csv", "json"):
            raise ConfigError(f"output format must be csv or json, got {self.output_format!r}")
        if self.game is None and self.game_file is None:
            raise ConfigError("config needs a game section")
        for v in self.variants:
            if not isinstance(v, dict) or "name" not in v:
                raise ConfigError("each variant needs a name")

    # -- construction ---------------------------------------------------------

    def build_game(self) -> GameSpec:
        if self.game_file is not None:
            return load_game_file(self.game_file)
        return build_beach_bar(self.game)

    def build_graphon(self, horizon: int) -> DiscreteGraphon:
        return discretize(self.graphon, self.n_agents, horizon)

    # -- (de)serialization ----------------------------------------------------

    @classmethod
    def from_dict(cls, d: dict[str, Any], base_dir: str | Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"game", "graphon", "n_agents", "solver", "replications", "base_seed",
                 "output", "variants", "probe"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        game_sec = d.get("game", {"beach_bar": {}})
        game, game_file = None, None
        if "file" in game_sec:
            game_file = str(game_sec["file"])
            if base_dir is not None and not Path(game_file).is_absolute():
                game_file = str(Path(base_dir) / game_file)
        else:
            game = BeachBarConfig.from_dict(game_sec.get("beach_bar", {}))
        out = d.get("output", {})
        probe = d.get("probe", {})
        return cls(
            game=game,
            game_file=game_file,
            graphon=spec_from_config(d.get("graphon", DEFAULT_GRAPHON)),
            n_agents=int(d.get("n_agents", 10)),
            solver=PMDConfig.from_dict(d.get("solver", {})),
            replications=int(d.get("replications", 5)),
            base_seed=int(d.get("base_seed", 0)),
            output_dir=str(out.get("dir", "out")),
            output_format=str(out.get("format", "csv")),
            variants=tuple(copy.deepcopy(v) for v in d.get("variants", [])),
            probe_trials=int(probe.get("n_trials", 1000)),
            probe_seed=int(probe.get("seed", 0)),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict[str, Any]:
        game = {"file": self.game_file} if self.game_file else {"beach_bar": self.game.to_dict()}
        return {
            "game": game,
            "graphon": spec_to_config(self.graphon),
            "n_agents": self.n_agents,
            "solver": self.solver.to_dict(),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "output": {"dir": self.output_dir, "format": self.output_format},
            "variants": [copy.deepcopy(v) for v in self.variants],
            "probe": {"n_trials": self.probe_trials, "seed": self.probe_seed},
        }


def _stable_mean(x: np.ndarray) -> float:
    # exact for identical values, and kept inside [min, max]
    m = x[0] + np.add.reduce(x - x[0]) / x.size
    return float(min(max(m, x.min()), x.max()))


@dataclass
class TraceTable:
    rows: list[tuple[int, int, float, float]]
    summary: list[tuple[int, float, float, float]]

    @classmethod
    def from_results(cls, results: list[PMDResult]) -> "TraceTable":
        rows = [
            (rep, rec.t, rec.exploitability_last, rec.exploitability_avg)
            for rep, res in enumerate(results)
            for rec in res.trace
        ]
        ts = [rec.t for rec in results[0].trace]
        vals = np.array([[rec.exploitability_avg for rec in res.trace] for res in results])
        summary = [
            (t, _stable_mean(vals[:, k]), float(vals[:, k].min()), float(vals[:, k].max()))
            for k, t in enumerate(ts)
        ]
        return cls(rows, summary)

    def final_mean(self) -> float:
        return self.summary[-1][1]

    def write(self, out_dir: str | Path, fmt: str = "csv", prefix: str = "") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path = out / f"{prefix}trace.json"
            payload = {
                "trace": [dict(zip(TRACE_COLUMNS, r)) for r in self.rows],
                "summary": [dict(zip(SUMMARY_COLUMNS, r)) for r in self.summary],
            }
            path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
            return [path]
        paths = [out / f"{prefix}trace.csv", out / f"{prefix}summary.csv"]
        _write_csv(paths[0], TRACE_COLUMNS, self.rows)
        _write_csv(paths[1], SUMMARY_COLUMNS, self.summary)
        return paths


def _fmt(v: Any) -> str:
    # repr gives the shortest round-tripping form and ignores locale
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# -- runs ---------------------------------------------------------------------

def apply_variant(base: dict[str, Any], variant: dict[str, Any]) -> tuple[dict, dict | None]:
    """Merge solver overrides; return (config dict, model graphon section or None)."""
    cfg = copy.deepcopy(base)
    solver = cfg.setdefault("solver", {})
    for key, val in variant.get("solver", {}).items():
        if key == "estimation":
            est = solver.setdefault("estimation", {})
            est.update(copy.deepcopy(val))
        else:
            solver[key] = copy.deepcopy(val)
    return cfg, variant.get("model_graphon")


def _replicate(cfg_dict: dict[str, Any], model_graphon: dict | None, rep: int) -> PMDResult:
    cfg = ExperimentConfig.from_dict(cfg_dict)
    game = cfg.build_game()
    true_graphon = cfg.build_graphon(game.horizon)
    solver_graphon = (
        true_graphon if model_graphon is None
        else discretize(spec_from_config(model_graphon), cfg.n_agents, game.horizon)
    )
    solver = replace(cfg.solver, rng_seed=cfg.base_seed + rep)
    log.info("replication %d: T=%d q_source=%s", rep, solver.T, solver.q_source)
    return pmd_run(game, solver_graphon, solver, eval_graphon=true_graphon)


def _run_all(cfg_dict: dict, model_graphon: dict | None, replications: int,
             parallel: int) -> list[PMDResult]:
    if parallel > 1 and replications > 1:
        with ProcessPoolExecutor(max_workers=min(parallel, replications)) as pool:
            futures = [pool.submit(_replicate, cfg_dict, model_graphon, r) for r in range(replications)]
            return [f.result() for f in futures]
    return [_replicate(cfg_dict, model_graphon, r) for r in range(replications)]


def run_experiment(config: ExperimentConfig, parallel: int = 1, write: bool = True) -> TraceTable:
    """Independent replications with seeds base_seed + r, plus min/mean/max summary."""
    results = _run_all(config.to_dict(), None, config.replications, parallel)
    table = TraceTable.from_results(results)
    if write:
        table.write(config.output_dir, config.output_format)
    return table


@dataclass
class CompareTable:
    tables: dict[str, TraceTable]

    def rows(self) -> list[tuple]:
        return [(name, *r) for name, tab in self.tables.items() for r in tab.rows]

    def summary(self) -> list[tuple]:
        return [(name, *r) for name, tab in self.tables.items() for r in tab.summary]

    def final_means(self) -> dict[str, float]:
        return {name: tab.final_mean() for name, tab in self.tables.items()}

    def write(self, out_dir: str | Path, fmt: str = "csv") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path = out / "compare.json"
            payload = {
                name: {
                    "trace": [dict(zip(TRACE_COLUMNS, r)) for r in tab.rows],
                    "summary": [dict(zip(SUMMARY_COLUMNS, r)) for r in tab.summary],
                }
                for name, tab in self.tables.items()
            }
            path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
            return [path]
        paths = [out / "compare_trace.csv", out / "compare_summary.csv"]
        _write_csv(paths[0], ("variant",) + TRACE_COLUMNS, self.rows())
        _write_csv(paths[1], ("variant",) + SUMMARY_COLUMNS, self.summary())
        return paths


def compare_runs(config: ExperimentConfig, variants: list[dict] | None = None,
                 parallel: int = 1, write: bool = True) -> CompareTable:
    """Run the base config and each variant; all are scored on the base game.

    A variant is ``{"name": ..., "solver": {overrides}, "model_graphon": {...}}``.
    ``model_graphon`` replaces the graphon the solver believes in, while
    exploitability is still measured against the configured graphon.
    """
    variants = list(config.variants if variants is None else variants)
    base = config.to_dict()
    tables = {"base": TraceTable.from_results(_run_all(base, None, config.replications, parallel))}
    for v in variants:
        name = str(v["name"])
        if name in tables:
            raise ConfigError(f"duplicate variant name {name!r}")
        cfg_dict, model = apply_variant(base, v)
        ExperimentConfig.from_dict(cfg_dict)  # validate before running
        tables[name] = TraceTable.from_results(
            _run_all(cfg_dict, model, config.replications, parallel)
        )
    result = CompareTable(tables)
    if write:
        result.write(config.output_dir, config.output_format)
    return result
