"""Graphon specifications and their discretization on the agent grid i/N."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np


class GraphonError(ValueError):
    """Malformed graphon spec or out-of-range query."""


@dataclass(frozen=True)
class Constant:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise GraphonError(f"constant graphon needs p in [0, 1], got {self.p}")

    def __call__(self, alpha: float, beta: float) -> float:
        return float(self.p)


@dataclass(frozen=True)
class SBM:
    """Stochastic block model; ``boundaries`` are cumulative population fractions."""

    boundaries: tuple[float, ...]
    rates: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        b = tuple(float(x) for x in self.boundaries)
        r = tuple(tuple(float(x) for x in row) for row in self.rates)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "rates", r)
        if not b or b[-1] != 1.0:
            raise GraphonError("SBM boundaries must end at 1")
        if any(x <= 0.0 for x in b) or any(b1 <= b0 for b0, b1 in zip(b, b[1:])):
            raise GraphonError("SBM boundaries must be strictly increasing in (0, 1]")
        k = len(b)
        if len(r) != k or any(len(row) != k for row in r):
            raise GraphonError(f"SBM rate matrix must be {k}x{k}")
        mat = np.array(r)
        if not np.array_equal(mat, mat.T):
            raise GraphonError("SBM rate matrix must be symmetric")
        if mat.min() < 0.0 or mat.max() > 1.0:
            raise GraphonError("SBM rates must lie in [0, 1]")

    def community(self, alpha: float) -> int:
        # community k holds (b_{k-1}, b_k]; alpha = 0 falls in the first one
        for k, edge in enumerate(self.boundaries):
            if alpha <= edge:
                return k
        return len(self.boundaries) - 1

    def __call__(self, alpha: float, beta: float) -> float:
        return self.rates[self.community(alpha)][self.community(beta)]


@dataclass(frozen=True)
class Exp:
    """W(a, b) = 2 exp(theta a b) / (1 + exp(theta a b)) - 1."""

    theta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise GraphonError(f"exp-graphon needs theta > 0, got {self.theta}")

    def __call__(self, alpha: float, beta: float) -> float:
        x = self.theta * (alpha * beta)  # product first keeps W(a, b) == W(b, a)
        # identical to the logistic form, and does not overflow for large x
        return math.tanh(x / 2.0)


@dataclass(frozen=True)
class CustomGrid:
    """Explicit step-indexed weight matrices on the grid i/N (right endpoints).

    Off-grid queries use the cell containing the point, i.e. the piecewise
    constant graphon the matrices define.
    """

    matrices: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.array(self.matrices, dtype=float)
        if m.ndim == 2:
            m = m[None]
        if m.ndim != 3 or m.shape[1] != m.shape[2]:
            raise GraphonError("custom graphon needs [H, N, N] or [N, N] matrices")
        if m.min() < 0.0 or m.max() > 1.0:
            raise GraphonError("custom graphon weights must lie in [0, 1]")
        if not np.array_equal(m, m.transpose(0, 2, 1)):
            raise GraphonError("custom graphon matrices must be symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "matrices", m)

    def at(self, h: int, alpha: float, beta: float) -> float:
        mats = self.matrices
        n = mats.shape[1]
        i = max(math.ceil(alpha * n) - 1, 0)
        j = max(math.ceil(beta * n) - 1, 0)
        if mats.shape[0] == 1:
            h = 0
        elif not 0 <= h < mats.shape[0]:
            raise GraphonError(f"step {h} outside the {mats.shape[0]} custom matrices")
        return float(mats[h, i, j])

    def __call__(self, alpha: float, beta: float) -> float:
        return self.at(0, alpha, beta)


Kernel = Union[Constant, SBM, Exp, CustomGrid]


@dataclass(frozen=True)
class GraphonSpec:
    """One kernel for all steps, or one kernel per step."""

    kernels: tuple[Kernel, ...]

    @classmethod
    def of(cls, kernel: Kernel) -> "GraphonSpec":
        return cls((kernel,))

    def kernel(self, h: int) -> Kernel:
        if len(self.kernels) == 1:
            return self.kernels[0]
        if not 0 <= h < len(self.kernels):
            raise GraphonError(f"step {h} outside the {len(self.kernels)} per-step kernels")
        return self.kernels[h]


def evaluate(spec: GraphonSpec | Kernel, h: int, alpha: float, beta: float) -> float:
    """Weight W_h(alpha, beta) between agents alpha and beta at step ``h`` (0-based)."""
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise GraphonError(f"agent positions must lie in [0, 1], got ({alpha}, {beta})")
    if h < 0:
        raise GraphonError(f"step must be nonnegative, got {h}")
    kern = spec.kernel(h) if isinstance(spec, GraphonSpec) else spec
    if isinstance(kern, CustomGrid):
        return kern.at(h, alpha, beta)
    return kern(alpha, beta)


@dataclass(frozen=True)
class DiscreteGraphon:
    """Weights ``[H, N, N]`` between grid agents alpha_i = (i+1)/N."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=float)
        if w.ndim != 3 or w.shape[1] != w.shape[2]:
            raise GraphonError(f"weights must have shape [H, N, N], got {w.shape}")
        if w.min() < 0.0 or w.max() > 1.0:
            raise GraphonError("graphon weights must lie in [0, 1]")
        if not np.array_equal(w, w.transpose(0, 2, 1)):
            raise GraphonError("graphon weights must be symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_agents(self) -> int:
        return self.weights.shape[1]

    @property
    def horizon(self) -> int:
        return self.weights.shape[0]

    @property
    def grid(self) -> np.ndarray:
        return np.arange(1, self.n_agents + 1) / self.n_agents


def discretize(spec: GraphonSpec | Kernel, n_agents: int, horizon: int) -> DiscreteGraphon:
    if n_agents < 1 or horizon < 1:
        raise GraphonError("n_agents and horizon must be positive")
    if isinstance(spec, GraphonSpec):
        if len(spec.kernels) not in (1, horizon):
            raise GraphonError(
                f"per-step graphon spec has {len(spec.kernels)} kernels for horizon {horizon}"
            )
    else:
        spec = GraphonSpec.of(spec)
    grid = np.arange(1, n_agents + 1) / n_agents
    weights = np.empty((horizon, n_agents, n_agents))
    for h in range(horizon):
        if h > 0 and len(spec.kernels) == 1 and not isinstance(spec.kernels[0], CustomGrid):
            weights[h] = weights[0]
            continue
        for i in range(n_agents):
            # fill the upper triangle and mirror it so symmetry is exact
            for j in range(i, n_agents):
                w = evaluate(spec, h, grid[i], grid[j])
                weights[h, i, j] = weights[h, j, i] = w
    return DiscreteGraphon(weights)


# -- config (de)serialization ------------------------------------------------

def kernel_from_dict(d: dict[str, Any]) -> Kernel:
    kind = d.get("kind")
    try:
        if kind == "constant":
            return Constant(float(d["p"]))
        if kind == "sbm":
            return SBM(tuple(d["boundaries"]), tuple(tuple(r) for r in d["rates"]))
        if kind == "exp":
            return Exp(float(d["theta"]))
        if kind == "custom":
            return CustomGrid(np.array(d["matrices"], dtype=float))
    except KeyError as exc:
        raise GraphonError(f"graphon kind {kind!r} is missing field {exc}") from None
    raise GraphonError(f"unknown graphon kind {kind!r}")


def kernel_to_dict(k: Kernel) -> dict[str, Any]:
    if isinstance(k, Constant):
        return {"kind": "constant", "p": k.p}
    if isinstance(k, SBM):
        return {"kind": "sbm", "boundaries": list(k.boundaries), "rates": [list(r) for r in k.rates]}
    if isinstance(k, Exp):
        return {"kind": "exp", "theta": k.theta}
    return {"kind": "custom", "matrices": k.matrices.tolist()}


def spec_from_config(d: dict[str, Any] | Sequence[dict[str, Any]]) -> GraphonSpec:
    """A single tagged kernel, or ``{"per_step": [...]}`` / a list for per-step kernels."""
    if isinstance(d, dict) and "per_step" in d:
        d = d["per_step"]
    if isinstance(d, dict):
        return GraphonSpec.of(kernel_from_dict(d))
    if not d:
        raise GraphonError("empty per-step graphon list")
    return GraphonSpec(tuple(kernel_from_dict(x) for x in d))


def spec_to_config(spec: GraphonSpec) -> dict[str, Any]:
    if len(spec.kernels) == 1:
        return kernel_to_dict(spec.kernels[0])
    return {"per_step": [kernel_to_dict(k) for k in spec.kernels]}
