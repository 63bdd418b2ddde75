"""Policy mirror descent for regularized graphon mean-field games."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from . import kernels
from .estimation import EstimationParams, estimate_q
from .evaluation import eval_policy_exact, exploitability
from .game import GameSpec
from .graphon import DiscreteGraphon
from .meanfield import population_field, uniform_policy

log = logging.getLogger(__name__)

MAX_DEFAULT_MIXING = 0.5


class ConfigError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class PMDConfig:
    T: int = 200
    eta: float | None = None  # None -> c_eta / sqrt(T)
    beta: float | None = None  # None -> min(c_beta / T, 1/2)
    c_eta: float = 1.0
    c_beta: float = 1.0
    lam: float | None = None  # None -> the game's lambda
    q_source: str = "oracle"
    baseline: str = "regularized"
    estimation: EstimationParams = field(default_factory=EstimationParams)
    rng_seed: int = 0
    log_every: int = 1

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.q_source not in ("oracle", "estimated"):
            raise ConfigError(f"q_source must be 'oracle' or 'estimated', got {self.q_source!r}")
        if self.baseline not in ("regularized", "unregularized"):
            raise ConfigError(f"unknown baseline {self.baseline!r}")
        if self.log_every < 1:
            raise ConfigError("log_every must be positive")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be nonnegative")
        if self.step_size < 0:
            raise ConfigError("eta must be nonnegative")
        if not 0 <= self.mixing < 1:
            raise ConfigError(f"beta must lie in [0, 1), got {self.mixing}")
        if self.lam is not None and self.lam < 0:
            raise ConfigError("lambda must be nonnegative")

    @property
    def step_size(self) -> float:
        return self.c_eta / math.sqrt(self.T) if self.eta is None else float(self.eta)

    @property
    def mixing(self) -> float:
        if self.beta is None:
            # c_beta / T reaches 1 at T = 1, which would discard the update entirely
            return min(self.c_beta / self.T, MAX_DEFAULT_MIXING)
        return float(self.beta)

    def regularization(self, game: GameSpec) -> float:
        return game.lam if self.lam is None else float(self.lam)

    def to_dict(self) -> dict[str, Any]:
        return {
            "T": self.T, "eta": self.eta, "beta": self.beta,
            "c_eta": self.c_eta, "c_beta": self.c_beta, "lambda": self.lam,
            "q_source": self.q_source, "baseline": self.baseline,
            "estimation": self.estimation.to_dict(),
            "rng_seed": self.rng_seed, "log_every": self.log_every,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PMDConfig":
        d = dict(d)
        known = {"T", "eta", "beta", "c_eta", "c_beta", "lambda", "q_source", "baseline",
                 "estimation", "rng_seed", "log_every"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        est = EstimationParams.from_dict(d.pop("estimation", {}) or {})
        lam = d.pop("lambda", None)
        return cls(lam=lam, estimation=est, **d)


@dataclass(frozen=True)
class IterationRecord:
    t: int
    exploitability_last: float
    exploitability_avg: float
    wall_time: float


@dataclass
class PMDResult:
    trace: list[IterationRecord]
    avg_policy: np.ndarray
    last_policy: np.ndarray


def pmd_step(pi_t: np.ndarray, q_hat: np.ndarray, eta: float, beta: float, lam: float,
             discount: bool = True) -> np.ndarray:
    """One mirror-descent update followed by uniform mixing.

    pi_hat ∝ pi_t**(1 - lam*eta) * exp(eta * q_hat); pi = (1-beta) pi_hat + beta/|A|.
    With ``discount=False`` the exponent on pi_t stays 1 (unregularized PMD).
    """
    if lam * eta >= 1:
        raise ConfigError(f"need lambda * eta < 1, got {lam * eta}")
    if not 0 <= beta < 1:
        raise ConfigError(f"beta must lie in [0, 1), got {beta}")
    pi_t = np.ascontiguousarray(pi_t, dtype=float)
    q_hat = np.ascontiguousarray(q_hat, dtype=float)
    if pi_t.shape != q_hat.shape:
        raise SolverError(f"policy {pi_t.shape} and action-values {q_hat.shape} disagree")
    if lam > 0 and np.any(pi_t <= 0):
        raise SolverError("zero policy entry: the regularized step needs pi_t > 0")
    decay = 1.0 - lam * eta if discount else 1.0
    return kernels.get().mirror_step(pi_t, q_hat, float(eta), decay, float(beta))


def average_policies(history: Sequence[np.ndarray]) -> np.ndarray:
    if len(history) == 0:
        raise SolverError("cannot average an empty policy history")
    acc = np.zeros_like(np.asarray(history[0], dtype=float))
    for pi in history:
        if pi.shape != acc.shape:
            raise SolverError("policies in the history have different shapes")
        acc += pi
    return acc / len(history)


def pmd_run(game: GameSpec, graphon: DiscreteGraphon, config: PMDConfig,
            eval_graphon: DiscreteGraphon | None = None,
            on_record: Callable[[IterationRecord], None] | None = None) -> PMDResult:
    """Run T mirror-descent iterations from the uniform policy.

    The solver computes aggregates with ``graphon``; exploitability is always
    measured against ``eval_graphon`` (default: the same graphon), so a run on
    a misspecified model can be scored against the true game.

    Iteration t turns pi_t into pi_{t+1}; the averaged policy after t
    iterations is the pointwise mean of pi_2..pi_{t+1}.
    """
    lam = config.regularization(game)
    if lam != game.lam:
        game = replace(game, lam=lam)
    eta, beta = config.step_size, config.mixing
    if lam * eta >= 1:
        raise ConfigError(f"need lambda * eta < 1, got {lam * eta}")
    eval_graphon = eval_graphon or graphon
    discount = config.baseline == "regularized"

    pi = uniform_policy(graphon.n_agents, game)
    total = np.zeros_like(pi)
    trace: list[IterationRecord] = []
    start = time.perf_counter()
    for t in range(1, config.T + 1):
        _, z = population_field(game, pi, graphon)
        if config.q_source == "oracle":
            q, _ = eval_policy_exact(game, pi, z)
        else:
            q = estimate_q(game, pi, z, config.estimation, config.rng_seed, iteration=t)
        pi = pmd_step(pi, q, eta, beta, lam, discount=discount)
        if not np.all(np.isfinite(pi)):
            finite = np.abs(q[np.isfinite(q)])
            q_max = finite.max() if finite.size else float("nan")
            raise SolverError(
                f"non-finite policy at iteration {t} (eta={eta}, beta={beta}, lambda={lam}, "
                f"max finite |Q|={q_max:.3g})"
            )
        total += pi
        if t % config.log_every == 0 or t == config.T:
            rec = IterationRecord(
                t=t,
                exploitability_last=exploitability(game, eval_graphon, pi),
                exploitability_avg=exploitability(game, eval_graphon, total / t),
                wall_time=time.perf_counter() - start,
            )
            trace.append(rec)
            if on_record is not None:
                on_record(rec)
            log.debug("t=%d last=%.6g avg=%.6g", t, rec.exploitability_last, rec.exploitability_avg)
    return PMDResult(trace, total / config.T, pi)
