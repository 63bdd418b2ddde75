"""Finite regularized graphon mean-field games.

States and steps are 0-based internally. The Beach Bar game labels its
locations 1..|S|; location ``s`` lives at index ``s - 1``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import kernels
from .graphon import DiscreteGraphon

ROW_TOL = 1e-12

# (h, z[..., S]) -> reward table [..., S, A]
RewardFn = Callable[[int, np.ndarray], np.ndarray]


class GameError(ValueError):
    """Invalid game definition or configuration."""


@dataclass(frozen=True, eq=False)
class GameSpec:
    transition: np.ndarray  # [H, S, A, S], independent of the aggregate
    reward_fn: RewardFn
    mu1: np.ndarray
    actions: np.ndarray  # numeric action labels
    lam: float
    r_max: float
    name: str = "game"

    def __post_init__(self):
        P = np.ascontiguousarray(self.transition, dtype=float)
        mu1 = np.ascontiguousarray(self.mu1, dtype=float)
        actions = np.asarray(self.actions, dtype=float)
        if P.ndim != 4 or P.shape[1] != P.shape[3]:
            raise GameError(f"transition must have shape [H, S, A, S], got {P.shape}")
        if P.shape[2] != actions.shape[0]:
            raise GameError(f"transition has {P.shape[2]} actions but {actions.shape[0]} labels")
        if P.min() < 0 or np.abs(P.sum(axis=-1) - 1.0).max() > ROW_TOL:
            raise GameError("transition rows must be nonnegative and sum to 1")
        if mu1.shape != (P.shape[1],) or mu1.min() < 0 or abs(mu1.sum() - 1.0) > ROW_TOL:
            raise GameError("mu1 must be a probability vector over states")
        if self.lam < 0:
            raise GameError(f"lambda must be nonnegative, got {self.lam}")
        if not self.r_max > 0:
            raise GameError(f"r_max must be positive, got {self.r_max}")
        for arr in (P, mu1, actions):
            arr.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "lam", float(self.lam))
        self._spot_check_reward()

    def _spot_check_reward(self, n_samples: int = 16) -> None:
        rng = np.random.default_rng(0)
        z = rng.uniform(0.0, 1.0, size=(n_samples, self.n_states))
        z /= np.maximum(z.sum(axis=1, keepdims=True), 1.0)
        for h in range(self.horizon):
            r = np.asarray(self.reward_fn(h, z))
            if r.shape != (n_samples, self.n_states, self.n_actions):
                raise GameError(f"reward_fn returned shape {r.shape} at step {h}")
            if np.abs(r).max() > self.r_max * (1 + 1e-12):
                raise GameError(f"|reward| exceeds r_max={self.r_max} at step {h}")

    @property
    def horizon(self) -> int:
        return self.transition.shape[0]

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[2]

    def reward(self, h: int, s: int, a: int, z: np.ndarray) -> float:
        return float(self.reward_fn(h, np.asarray(z, dtype=float))[s, a])

    def reward_table(self, z: np.ndarray) -> np.ndarray:
        """Rewards ``[N, H, S, A]`` for aggregates ``z[N, H, S]``."""
        out = np.empty(z.shape + (self.n_actions,))
        for h in range(self.horizon):
            out[:, h] = self.reward_fn(h, z[:, h])
        return out

    def value_bound(self, h: int) -> float:
        """Bound on |Q_h| (0-based h): (H - h) (r_max + lam log|A|)."""
        return (self.horizon - h) * (self.r_max + self.lam * np.log(self.n_actions))


# -- Beach Bar ----------------------------------------------------------------

@dataclass(frozen=True)
class BeachBarConfig:
    n_states: int = 10
    bar_position: float | None = None  # None -> n_states / 2
    dist_coeff: float | None = None  # None -> 2 / n_states
    action_coeff: float | None = None  # None -> 2 / n_states
    crowd_coeff: float = 8.0
    horizon: int = 10
    lam: float = 1.0
    noise_prob: float = 0.5  # P(eps = +1); eps = -1 otherwise
    boundary_mode: str = "clamp"
    reward_sign_mode: str = "as-written"

    def __post_init__(self):
        n = self.n_states
        if n < 1 or self.horizon < 1:
            raise GameError("n_states and horizon must be positive")
        if self.bar_position is None:
            object.__setattr__(self, "bar_position", n / 2)
        if self.dist_coeff is None:
            object.__setattr__(self, "dist_coeff", 2 / n)
        if self.action_coeff is None:
            object.__setattr__(self, "action_coeff", 2 / n)
        if not 1 <= self.bar_position <= n:
            raise GameError(f"bar_position must lie in [1, {n}], got {self.bar_position}")
        if self.dist_coeff < 0 or self.action_coeff < 0:
            raise GameError("distance and action coefficients must be nonnegative")
        if self.lam < 0:
            raise GameError("lambda must be nonnegative")
        if not 0 <= self.noise_prob <= 1:
            raise GameError("noise_prob must lie in [0, 1]")
        if self.boundary_mode not in ("clamp", "reflect"):
            raise GameError(f"unknown boundary_mode {self.boundary_mode!r}")
        if self.reward_sign_mode not in ("as-written", "negated-distance"):
            raise GameError(f"unknown reward_sign_mode {self.reward_sign_mode!r}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "BeachBarConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise GameError(f"unknown beach_bar keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def _wall(x: int, n: int, mode: str) -> int:
    if mode == "clamp":
        return min(max(x, 1), n)
    if n == 1:
        return 1
    while not 1 <= x <= n:
        x = 2 - x if x < 1 else 2 * n - x
    return x


def build_beach_bar(config: BeachBarConfig | None = None) -> GameSpec:
    c = config or BeachBarConfig()
    n, H = c.n_states, c.horizon
    actions = np.array([-1.0, 0.0, 1.0])
    P = np.zeros((n, 3, n))
    for s in range(1, n + 1):
        for k, a in enumerate(actions):
            for eps, prob in ((1, c.noise_prob), (-1, 1 - c.noise_prob)):
                nxt = _wall(s + int(a) + eps, n, c.boundary_mode)
                P[s - 1, k, nxt - 1] += prob
    P = np.broadcast_to(P, (H, n, 3, n)).copy()

    labels = np.arange(1, n + 1, dtype=float)
    dist = c.dist_coeff * np.abs(c.bar_position - labels)
    if c.reward_sign_mode == "negated-distance":
        dist = -dist
    base = dist[:, None] + c.action_coeff * np.abs(actions)[None, :]  # [S, A]
    crowd = c.crowd_coeff

    def reward_fn(h: int, z: np.ndarray) -> np.ndarray:
        return base - crowd * np.asarray(z)[..., :, None]

    r_max = c.dist_coeff * (n - 1) + c.action_coeff + abs(crowd)
    return GameSpec(
        transition=P,
        reward_fn=reward_fn,
        mu1=np.full(n, 1.0 / n),
        actions=actions,
        lam=c.lam,
        r_max=max(r_max, np.finfo(float).tiny),
        name="beach_bar",
    )


# -- generic games from a file --------------------------------------------------

def linear_game(
    transition: np.ndarray,
    base: np.ndarray,
    coupling: np.ndarray | None = None,
    mu1: np.ndarray | None = None,
    actions: np.ndarray | None = None,
    lam: float = 1.0,
    name: str = "linear",
) -> GameSpec:
    """Game with reward base[h,s,a] + sum_t coupling[h,s,a,t] z[t]."""
    P = np.asarray(transition, dtype=float)
    H, S, A, _ = P.shape
    base = np.broadcast_to(np.asarray(base, dtype=float), (H, S, A)).copy()
    coupling = (
        np.zeros((H, S, A, S)) if coupling is None
        else np.broadcast_to(np.asarray(coupling, dtype=float), (H, S, A, S)).copy()
    )
    mu1 = np.full(S, 1.0 / S) if mu1 is None else np.asarray(mu1, dtype=float)
    actions = np.arange(A, dtype=float) if actions is None else np.asarray(actions, dtype=float)

    def reward_fn(h: int, z: np.ndarray) -> np.ndarray:
        return base[h] + np.einsum("sat,...t->...sa", coupling[h], z)

    # aggregates have entries in [0, 1]
    r_max = float((np.abs(base) + np.abs(coupling).sum(axis=-1)).max())
    return GameSpec(P, reward_fn, mu1, actions, lam, max(r_max, 1e-300), name=name)


def load_game_file(path: str | Path) -> GameSpec:
    """Read a linear-reward game from JSON.

    Keys: ``transition`` [H][S][A][S], ``reward_base`` [H][S][A] (or [S][A]),
    optional ``reward_coupling`` [H][S][A][S], ``mu1``, ``actions``, ``lambda``.
    """
    d = json.loads(Path(path).read_text())
    try:
        return linear_game(
            transition=np.array(d["transition"], dtype=float),
            base=np.array(d["reward_base"], dtype=float),
            coupling=None if "reward_coupling" not in d else np.array(d["reward_coupling"]),
            mu1=None if "mu1" not in d else np.array(d["mu1"], dtype=float),
            actions=None if "actions" not in d else np.array(d["actions"], dtype=float),
            lam=float(d.get("lambda", 1.0)),
            name=Path(path).stem,
        )
    except KeyError as exc:
        raise GameError(f"game file {path} is missing {exc}") from None


def random_game(
    n_states: int,
    n_actions: int,
    horizon: int,
    lam: float = 1.0,
    coupling_scale: float = 0.0,
    rng: np.random.Generator | int | None = None,
) -> GameSpec:
    """Random linear game; a negative semidefinite coupling keeps it monotone."""
    rng = np.random.default_rng(rng)
    P = rng.dirichlet(np.ones(n_states), size=(horizon, n_states, n_actions))
    base = rng.uniform(0, 1, size=(horizon, n_states, n_actions))
    coupling = np.zeros((horizon, n_states, n_actions, n_states))
    coupling[:, np.arange(n_states), :, np.arange(n_states)] = -coupling_scale
    mu1 = rng.dirichlet(np.ones(n_states))
    return linear_game(P, base, coupling, mu1, lam=lam, name="random")


# -- weak monotonicity ------------------------------------------------------------

@dataclass(frozen=True)
class ProbeReport:
    max_lhs: float
    violations: int
    n_values: int
    tolerance: float = 1e-10
    values: np.ndarray = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "max_lhs": self.max_lhs,
            "violations": self.violations,
            "n_values": self.n_values,
            "tolerance": self.tolerance,
        }


def probe_lhs(game: GameSpec, graphon: DiscreteGraphon, rho: np.ndarray,
              rho_tilde: np.ndarray) -> np.ndarray:
    """Per-step monotonicity form for occupancy profiles ``rho[N, S, A]``.

    (1/N) sum_i sum_{s,a} (rho - rho~)(s,a) [r_h(s,a,z_i(mu)) - r_h(s,a,z_i(mu~))]
    """
    n, H = graphon.n_agents, game.horizon
    mu = np.ascontiguousarray(np.broadcast_to(rho.sum(-1)[:, None], (n, H, game.n_states)))
    mu_t = np.ascontiguousarray(np.broadcast_to(rho_tilde.sum(-1)[:, None], (n, H, game.n_states)))
    agg = kernels.get().aggregate
    z, z_t = agg(graphon.weights[:H], mu), agg(graphon.weights[:H], mu_t)
    dr = game.reward_table(z) - game.reward_table(z_t)  # [N, H, S, A]
    drho = (rho - rho_tilde)[:, None]
    return (drho * dr).sum(axis=(2, 3)).mean(axis=0)


def monotonicity_probe(game: GameSpec, graphon: DiscreteGraphon, n_trials: int,
                       rng_seed: int, tolerance: float = 1e-10) -> ProbeReport:
    if graphon.horizon < game.horizon:
        raise GameError("graphon has fewer steps than the game horizon")
    rng = np.random.default_rng(rng_seed)
    n, cells = graphon.n_agents, game.n_states * game.n_actions
    shape = (n, game.n_states, game.n_actions)
    vals = np.empty((n_trials, game.horizon))
    for k in range(n_trials):
        rho = rng.dirichlet(np.ones(cells), size=n).reshape(shape)
        rho_t = rng.dirichlet(np.ones(cells), size=n).reshape(shape)
        vals[k] = probe_lhs(game, graphon, rho, rho_t)
    return ProbeReport(
        max_lhs=float(vals.max()),
        violations=int((vals > tolerance).sum()),
        n_values=vals.size,
        tolerance=tolerance,
        values=vals,
    )
