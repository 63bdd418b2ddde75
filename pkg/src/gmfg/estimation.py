"""Sampled action-value estimation.

A subset of grid agents (positions i/N_s) run a behavior policy for K
episodes against the population aggregate; their action-values are fit
backward by least squares over a tabular class and then copied to every
agent in the sampled agent's block ((i-1)/N_s, i/N_s].
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from . import kernels
from .game import GameSpec
from .meanfield import DimensionError, check_policy


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class BehaviorPolicySpec:
    mode: str = "uniform"
    epsilon: float = 1.0

    def __post_init__(self):
        if self.mode not in ("uniform", "epsilon_mix"):
            raise EstimationError(f"unknown behavior mode {self.mode!r}")
        if self.mode == "epsilon_mix" and not 0 < self.epsilon <= 1:
            raise EstimationError(f"epsilon must lie in (0, 1], got {self.epsilon}")

    def policy(self, pi: np.ndarray) -> np.ndarray:
        n_actions = pi.shape[-1]
        if self.mode == "uniform":
            return np.full_like(pi, 1.0 / n_actions)
        return (1.0 - self.epsilon) * pi + self.epsilon / n_actions

    @property
    def min_prob_factor(self) -> float:
        """Every action gets probability at least this / |A|."""
        return 1.0 if self.mode == "uniform" else self.epsilon

    def to_dict(self) -> dict:
        if self.mode == "uniform":
            return {"mode": "uniform"}
        return {"mode": self.mode, "epsilon": self.epsilon}

    @classmethod
    def from_dict(cls, d: dict) -> "BehaviorPolicySpec":
        return cls(mode=d.get("mode", "uniform"), epsilon=float(d.get("epsilon", 1.0)))


@dataclass(frozen=True)
class TabularFunctionClass:
    """Tables S x A -> [-bound_h, bound_h]."""

    bounds: np.ndarray  # [H]

    @classmethod
    def for_game(cls, game: GameSpec) -> "TabularFunctionClass":
        return cls(np.array([game.value_bound(h) for h in range(game.horizon)]))

    def __post_init__(self):
        b = np.ascontiguousarray(self.bounds, dtype=float)
        if b.ndim != 1 or b.min() < 0:
            raise EstimationError("bounds must be a nonnegative vector over steps")
        object.__setattr__(self, "bounds", b)


@dataclass(frozen=True)
class EpisodeBatch:
    states: np.ndarray  # [Ns, K, H + 1]
    actions: np.ndarray  # [Ns, K, H]
    rewards: np.ndarray  # [Ns, K, H]
    agents: np.ndarray  # grid index of each sampled agent
    n_total: int
    seed: int
    iteration: int = 0

    @property
    def n_sampled(self) -> int:
        return self.actions.shape[0]

    @property
    def n_episodes(self) -> int:
        return self.actions.shape[1]

    @property
    def horizon(self) -> int:
        return self.actions.shape[2]

    def records(self) -> Iterator[dict]:
        """Transitions as (i, tau, h, s, a, r, s_next), all indices 0-based."""
        for i in range(self.n_sampled):
            for tau in range(self.n_episodes):
                for h in range(self.horizon):
                    yield {
                        "i": i,
                        "tau": tau,
                        "h": h,
                        "s": int(self.states[i, tau, h]),
                        "a": int(self.actions[i, tau, h]),
                        "r": float(self.rewards[i, tau, h]),
                        "s_next": int(self.states[i, tau, h + 1]),
                    }


def sampled_agents(n_sampled: int, n_total: int) -> np.ndarray:
    """Grid indices of the agents at positions i/N_s, i = 1..N_s."""
    if not 1 <= n_sampled <= n_total:
        raise EstimationError(f"need 1 <= n_sampled <= {n_total}, got {n_sampled}")
    if n_total % n_sampled:
        raise EstimationError(f"n_sampled={n_sampled} must divide the grid size {n_total}")
    stride = n_total // n_sampled
    return np.arange(1, n_sampled + 1) * stride - 1


def episode_uniforms(rng_seed: int, iteration: int, agent: int, n_episodes: int,
                     horizon: int) -> np.ndarray:
    """Uniforms for one (iteration, agent) substream, one row per episode.

    Episode tau occupies a fixed block of the counter-based stream, so the
    first K rows do not depend on how many episodes are drawn in total.
    """
    seq = np.random.SeedSequence(rng_seed, spawn_key=(iteration, agent))
    gen = np.random.Generator(np.random.Philox(seq))
    return gen.random((n_episodes, 1 + 2 * horizon))


def _cdf(p: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.cumsum(p, axis=-1))


def sample_episodes(game: GameSpec, pi_t: np.ndarray, behavior: BehaviorPolicySpec,
                    z_t: np.ndarray, n_sampled: int, n_episodes: int, rng_seed: int,
                    iteration: int = 0) -> EpisodeBatch:
    """Roll out K episodes for each sampled agent under its behavior policy.

    The aggregates ``z_t`` come from the population playing ``pi_t``; a
    finite set of deviating agents has measure zero and leaves them unchanged.
    """
    pi_t = check_policy(pi_t, game)
    n_total = pi_t.shape[0]
    if z_t.shape != (n_total, game.horizon, game.n_states):
        raise DimensionError("aggregates do not match the policy profile")
    if n_episodes < 1:
        raise EstimationError("need at least one episode")
    idx = sampled_agents(n_sampled, n_total)
    behav = np.ascontiguousarray(behavior.policy(pi_t[idx]))
    u = np.stack([
        episode_uniforms(rng_seed, iteration, k, n_episodes, game.horizon)
        for k in range(n_sampled)
    ])
    states, actions = kernels.get().walk_episodes(
        _cdf(game.mu1), _cdf(behav), _cdf(game.transition), u
    )
    R = game.reward_table(np.ascontiguousarray(z_t[idx]))  # [Ns, H, S, A]
    agent = np.arange(n_sampled)[:, None, None]
    step = np.arange(game.horizon)[None, None, :]
    rewards = R[agent, step, states[:, :, :-1], actions]
    return EpisodeBatch(states, actions, np.ascontiguousarray(rewards), idx, n_total,
                        rng_seed, iteration)


@dataclass(frozen=True)
class FittedQ:
    q: np.ndarray  # [Ns, H, S, A]
    counts: np.ndarray  # visits per cell

    @property
    def visited(self) -> np.ndarray:
        return self.counts > 0

    @property
    def unvisited(self) -> np.ndarray:
        return self.counts == 0


def fitted_q_evaluation(batch: EpisodeBatch, pi_t: np.ndarray, lam: float,
                        fclass: TabularFunctionClass) -> FittedQ:
    """Backward least squares of r + V(s') over the tabular class.

    The tabular minimizer is the per-cell mean of the targets, clipped to the
    class bounds; unvisited cells stay at 0 and are flagged via ``counts``.
    ``pi_t`` may cover every grid agent or just the sampled ones.
    """
    pi_t = np.asarray(pi_t, dtype=float)
    if pi_t.shape[0] == batch.n_total:
        pi_t = pi_t[batch.agents]
    elif pi_t.shape[0] != batch.n_sampled:
        raise DimensionError("policy profile matches neither the grid nor the sample")
    if pi_t.shape[1] != batch.horizon or fclass.bounds.shape[0] < batch.horizon:
        raise DimensionError("horizon mismatch between batch, policy, and function class")
    q, counts = kernels.get().fit_tabular(
        batch.states, batch.actions, batch.rewards,
        np.ascontiguousarray(pi_t), float(lam), fclass.bounds[: batch.horizon],
    )
    return FittedQ(q, counts)


def assign_estimates(q_sampled: np.ndarray, n_total: int) -> np.ndarray:
    """Give grid agent j (alpha = j/N) the estimate of the sampled agent whose
    block ((i-1)/N_s, i/N_s] contains alpha."""
    n_s = q_sampled.shape[0]
    if not 1 <= n_s <= n_total:
        raise EstimationError(f"cannot spread {n_s} estimates over {n_total} agents")
    j = np.arange(1, n_total + 1)
    block = (j * n_s + n_total - 1) // n_total  # ceil(j N_s / N), 1-based
    return q_sampled[block - 1]


@dataclass(frozen=True)
class EstimationParams:
    n_sampled: int = 10
    n_episodes: int = 300
    behavior: BehaviorPolicySpec = BehaviorPolicySpec()

    def to_dict(self) -> dict:
        return {"n_sampled": self.n_sampled, "K": self.n_episodes,
                "behavior": self.behavior.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationParams":
        return cls(
            n_sampled=int(d.get("n_sampled", 10)),
            n_episodes=int(d.get("K", 300)),
            behavior=BehaviorPolicySpec.from_dict(d.get("behavior", {})),
        )


def estimate_q(game: GameSpec, pi_t: np.ndarray, z_t: np.ndarray, params: EstimationParams,
               rng_seed: int, iteration: int = 0) -> np.ndarray:
    """Sample, fit, and assign: estimated Q for every grid agent."""
    batch = sample_episodes(game, pi_t, params.behavior, z_t, params.n_sampled,
                            params.n_episodes, rng_seed, iteration)
    fit = fitted_q_evaluation(batch, pi_t, game.lam, TabularFunctionClass.for_game(game))
    return assign_estimates(fit.q, pi_t.shape[0])


def write_batch(batch: EpisodeBatch, path: str | Path) -> None:
    """One JSON object per line per transition."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in batch.records():
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_batch(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
