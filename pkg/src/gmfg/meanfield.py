"""Distribution flows induced by policy profiles, and graphon aggregates.

Profiles are plain arrays: a policy profile is ``pi[N, H, S, A]``, a flow is
``mu[N, H, S]``, an aggregate field is ``z[N, H, S]``.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .game import GameSpec
from .graphon import DiscreteGraphon

PROB_TOL = 1e-12


class DimensionError(ValueError):
    pass


def uniform_policy(n_agents: int, game: GameSpec) -> np.ndarray:
    return np.full((n_agents, game.horizon, game.n_states, game.n_actions), 1.0 / game.n_actions)


def check_policy(pi: np.ndarray, game: GameSpec, tol: float = PROB_TOL) -> np.ndarray:
    pi = np.ascontiguousarray(pi, dtype=float)
    expected = (game.horizon, game.n_states, game.n_actions)
    if pi.ndim != 4 or pi.shape[1:] != expected:
        raise DimensionError(f"policy must have shape [N, {expected}], got {pi.shape}")
    if pi.min() < 0 or np.abs(pi.sum(axis=-1) - 1.0).max() > tol:
        raise DimensionError("policy rows must be probability vectors")
    return pi


def induce_flow(game: GameSpec, pi: np.ndarray) -> np.ndarray:
    """State marginals of every agent; agents evolve independently."""
    pi = check_policy(pi, game)
    return kernels.get().forward_flow(game.transition, pi, game.mu1)


def compute_aggregates(mu: np.ndarray, graphon: DiscreteGraphon) -> np.ndarray:
    """z[i, h] = (1/N) sum_j W_h[i, j] mu[j, h]."""
    mu = np.ascontiguousarray(mu, dtype=float)
    if mu.ndim != 3:
        raise DimensionError(f"flow must have shape [N, H, S], got {mu.shape}")
    n, H, _ = mu.shape
    if graphon.n_agents != n:
        raise DimensionError(f"flow has {n} agents, graphon has {graphon.n_agents}")
    if graphon.horizon < H:
        raise DimensionError(f"flow has {H} steps, graphon has {graphon.horizon}")
    return kernels.get().aggregate(graphon.weights[:H], mu)


def population_field(game: GameSpec, pi: np.ndarray, graphon: DiscreteGraphon):
    """Flow and aggregates induced by ``pi``."""
    mu = induce_flow(game, pi)
    return mu, compute_aggregates(mu, graphon)
