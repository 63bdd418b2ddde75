"""Time each kernel, and a full oracle PMD run, under both backends.

    python benchmarks/bench_kernels.py [--agents 50] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from gmfg import kernels
from gmfg.game import build_beach_bar
from gmfg.graphon import SBM, discretize
from gmfg.solver import PMDConfig, pmd_run


def inputs(n_agents, rng):
    g = build_beach_bar()
    H, S, A = g.horizon, g.n_states, g.n_actions
    pi = rng.dirichlet(np.ones(A), size=(n_agents, H, S))
    q = rng.normal(size=pi.shape)
    W = discretize(SBM((0.7, 1.0), ((0.9, 0.3), (0.3, 0.9))), n_agents, H)
    K = 300
    u = rng.random((n_agents, K, 1 + 2 * H))
    return g, W, pi, q, u


def cases(mod, g, W, pi, q, u):
    P = np.ascontiguousarray(g.transition)
    mu = mod.forward_flow(P, pi, g.mu1)
    pcdf = np.ascontiguousarray(np.cumsum(pi, -1))
    Pcdf = np.ascontiguousarray(np.cumsum(P, -1))
    states, actions = mod.walk_episodes(np.cumsum(g.mu1), pcdf, Pcdf, u)
    rewards = np.ones(actions.shape)
    bounds = np.arange(g.horizon, 0, -1) * 10.0
    return {
        "forward_flow": lambda: mod.forward_flow(P, pi, g.mu1),
        "aggregate": lambda: mod.aggregate(W.weights, mu),
        "policy_evaluation": lambda: mod.policy_evaluation(P, q, pi, 1.0),
        "soft_bellman": lambda: mod.soft_bellman(P, q, 1.0),
        "mirror_step": lambda: mod.mirror_step(pi, q, 0.1, 0.9, 0.01),
        "walk_episodes": lambda: mod.walk_episodes(np.cumsum(g.mu1), pcdf, Pcdf, u),
        "fit_tabular": lambda: mod.fit_tabular(states, actions, rewards, pi, 1.0, bounds),
    }


def best_of(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    names = sorted(kernels.BACKENDS)
    data = inputs(args.agents, np.random.default_rng(0))
    timings = {name: {k: best_of(f, args.repeat) for k, f in cases(kernels.BACKENDS[name], *data).items()}
               for name in names}

    g = build_beach_bar()
    W = discretize(SBM((0.7, 1.0), ((0.9, 0.3), (0.3, 0.9))), 10, 10)
    previous = kernels.backend_name()
    for name in names:
        kernels.use_backend(name)
        timings[name]["pmd_run T=200 N=10"] = best_of(lambda: pmd_run(g, W, PMDConfig(T=200)), 1)
    kernels.use_backend(previous)

    print(f"{'kernel':<22}" + "".join(f"{n:>14}" for n in names) + ("      speedup" if len(names) > 1 else ""))
    for key in timings[names[0]]:
        row = f"{key:<22}" + "".join(f"{timings[n][key] * 1e3:>11.3f} ms" for n in names)
        if "compiled" in timings:
            row += f"{timings['python'][key] / timings['compiled'][key]:>12.1f}x"
        print(row)


if __name__ == "__main__":
    main()
