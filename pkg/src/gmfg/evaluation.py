"""Exact regularized evaluation, soft best responses, exploitability, and the
weighted KL distance between policy profiles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .game import GameSpec
from .graphon import DiscreteGraphon
from .meanfield import DimensionError, check_policy, induce_flow, population_field


class EvaluationError(ValueError):
    """Entropy term undefined: zero action probability at a reachable state."""


class MetricError(ValueError):
    """KL divergence is infinite (absolute continuity fails)."""


@dataclass(frozen=True)
class Values:
    v: np.ndarray  # [N, H, S]
    cumulative: np.ndarray  # [N], J = E_{mu1}[V_1]


def _check_aggregates(z: np.ndarray, game: GameSpec, n: int) -> np.ndarray:
    z = np.ascontiguousarray(z, dtype=float)
    if z.shape != (n, game.horizon, game.n_states):
        raise DimensionError(f"aggregates must have shape {(n, game.horizon, game.n_states)}, got {z.shape}")
    return z


def eval_policy_exact(game: GameSpec, pi: np.ndarray, z: np.ndarray):
    """Backward recursion for Q and V of each agent's policy against fixed aggregates.

    Returns ``(q[N, H, S, A], Values)``.
    """
    pi = check_policy(pi, game)
    z = _check_aggregates(z, game, pi.shape[0])
    if game.lam > 0:
        mu = kernels.get().forward_flow(game.transition, pi, game.mu1)
        bad = (mu[..., None] > 0) & (pi == 0)
        if bad.any():
            i, h, s, a = np.argwhere(bad)[0]
            raise EvaluationError(
                f"agent {i} puts zero mass on action {a} at reachable state {s}, step {h}; "
                "mix in exploration before evaluating with lambda > 0"
            )
    R = game.reward_table(z)
    q, v = kernels.get().policy_evaluation(game.transition, R, pi, game.lam)
    return q, Values(v[:, :-1], v[:, 0] @ game.mu1)


def soft_best_response(game: GameSpec, z: np.ndarray):
    """Entropy-regularized optimal policy against fixed aggregates.

    For lambda > 0 the policy is the softmax of Q* at temperature lambda and
    V* is the log-sum-exp; for lambda = 0 ties within 1e-12 share mass evenly.
    Returns ``(pi[N, H, S, A], Values)``.
    """
    z = np.ascontiguousarray(z, dtype=float)
    if z.ndim != 3 or z.shape[1:] != (game.horizon, game.n_states):
        raise DimensionError(f"aggregates must have shape [N, H, S], got {z.shape}")
    R = game.reward_table(z)
    pi, v = kernels.get().soft_bellman(game.transition, R, game.lam)
    return pi, Values(v[:, :-1], v[:, 0] @ game.mu1)


def exploitability_against(game: GameSpec, pi: np.ndarray, z: np.ndarray) -> float:
    _, best = soft_best_response(game, z)
    _, own = eval_policy_exact(game, pi, z)
    return float(np.mean(best.cumulative - own.cumulative))


def exploitability(game: GameSpec, graphon: DiscreteGraphon, pi: np.ndarray) -> float:
    """Average best-response gain over agents against the flow ``pi`` induces."""
    _, z = population_field(game, pi, graphon)
    return exploitability_against(game, pi, z)


def kl_metric(pi: np.ndarray, pi_ref: np.ndarray, mu_ref: np.ndarray) -> float:
    """(1/N) sum_i sum_h E_{mu_ref}[KL(pi_ref || pi)]."""
    pi = np.asarray(pi, dtype=float)
    pi_ref = np.asarray(pi_ref, dtype=float)
    mu_ref = np.asarray(mu_ref, dtype=float)
    if pi.shape != pi_ref.shape or mu_ref.shape != pi.shape[:3]:
        raise DimensionError("policy and reference shapes disagree")
    support = pi_ref > 0
    if np.any(support & (pi <= 0)):
        raise MetricError("pi must be positive wherever pi_ref is")
    terms = np.zeros_like(pi_ref)
    terms[support] = pi_ref[support] * (np.log(pi_ref[support]) - np.log(pi[support]))
    kl = np.maximum(terms.sum(axis=-1), 0.0)  # rounding can dip below zero
    return float((mu_ref * kl).sum(axis=(1, 2)).mean())


def reference_kl(game: GameSpec, pi: np.ndarray, pi_ref: np.ndarray) -> float:
    """kl_metric weighted by the flow that ``pi_ref`` induces."""
    return kl_metric(pi, pi_ref, induce_flow(game, pi_ref))
