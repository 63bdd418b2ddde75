import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmfg.game import BeachBarConfig, build_beach_bar, linear_game, random_game
from gmfg.graphon import Constant, DiscreteGraphon, Exp, discretize
from gmfg.meanfield import DimensionError, compute_aggregates, induce_flow, uniform_policy

from .conftest import SBM_TWO_BLOCK, random_policy
from .oracles import loop_flow


def identity_game(n_states=4, n_actions=2, horizon=5):
    P = np.zeros((horizon, n_states, n_actions, n_states))
    for s in range(n_states):
        P[:, s, :, s] = 1.0
    return linear_game(P, np.zeros((horizon, n_states, n_actions)),
                       mu1=np.arange(1, n_states + 1) / (n_states * (n_states + 1) / 2))


class TestInduceFlow:
    def test_identity_transition(self, backend):
        g = identity_game()
        pi = random_policy(np.random.default_rng(0), 3, 5, 4, 2)
        mu = induce_flow(g, pi)
        assert np.allclose(mu, np.broadcast_to(g.mu1, (3, 5, 4)), rtol=0, atol=1e-15)

    def test_single_step(self, backend):
        g = build_beach_bar(BeachBarConfig(horizon=1))
        mu = induce_flow(g, uniform_policy(2, g))
        assert np.array_equal(mu[:, 0], np.broadcast_to(g.mu1, (2, 10)))

    def test_matches_loop_oracle(self, backend):
        g = random_game(4, 3, 5, rng=1)
        pi = random_policy(np.random.default_rng(2), 3, 5, 4, 3)
        mu = induce_flow(g, pi)
        for i in range(3):
            assert np.allclose(mu[i], loop_flow(g.transition, pi[i], g.mu1), atol=1e-14)

    def test_monte_carlo(self):
        # 10^6 simulated episodes of the uniform policy, one agent, H = 3
        g = build_beach_bar(BeachBarConfig(horizon=3))
        mu = induce_flow(g, uniform_policy(1, g))[0]
        rng = np.random.default_rng(12345)
        n = 10**6
        s = rng.integers(0, 10, size=n)
        counts = [np.bincount(s, minlength=10)]
        for h in range(2):
            a = rng.integers(0, 3, size=n) - 1
            eps = np.where(rng.random(n) < 0.5, 1, -1)
            s = np.clip(s + a + eps, 0, 9)
            counts.append(np.bincount(s, minlength=10))
        freq = np.array(counts) / n
        se = np.sqrt(np.maximum(mu * (1 - mu), 1e-12) / n)
        assert np.all(np.abs(freq - mu) <= 3 * se + 1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_conservation(self, seed):
        g = random_game(5, 3, 6, rng=seed)
        pi = random_policy(np.random.default_rng(seed), 4, 6, 5, 3)
        mu = induce_flow(g, pi)
        assert mu.min() >= 0
        assert np.abs(mu.sum(-1) - 1).max() <= 1e-10

    def test_dimension_mismatch(self, beach_bar):
        with pytest.raises(DimensionError):
            induce_flow(beach_bar, np.full((2, 10, 10, 2), 0.5))
        with pytest.raises(DimensionError):
            induce_flow(beach_bar, np.full((2, 10, 10, 3), 0.5))


class TestAggregates:
    def test_constant_graphon(self, backend):
        mu = np.random.default_rng(0).dirichlet(np.ones(4), size=(6, 3))
        z = compute_aggregates(mu, discretize(Constant(0.5), 6, 3))
        assert np.allclose(z, 0.5 * mu.mean(axis=0)[None], atol=1e-15)

    def test_zero_graphon(self, backend):
        mu = np.random.default_rng(0).dirichlet(np.ones(4), size=(6, 3))
        assert np.all(compute_aggregates(mu, discretize(Constant(0.0), 6, 3)) == 0)

    def test_two_agents(self, backend):
        W = DiscreteGraphon(np.array([[[1.0, 0.5], [0.5, 1.0]]]))
        mu = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
        z = compute_aggregates(mu, W)
        # direct matrix average
        expected = np.einsum("ij,jhs->ihs", W.weights[0], mu) / 2
        assert np.array_equal(expected[:, 0], [[0.5, 0.25], [0.25, 0.5]])
        assert np.array_equal(z, expected)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 20), st.integers(0, 10**6), st.sampled_from([SBM_TWO_BLOCK, Exp(3.0), Constant(0.7)]))
    def test_mass_identity(self, n, seed, kern):
        W = discretize(kern, n, 3)
        mu = np.random.default_rng(seed).dirichlet(np.ones(5), size=(n, 3))
        z = compute_aggregates(mu, W)
        assert z.min() >= 0 and z.max() <= 1
        assert np.abs(z.sum(-1) - W.weights.mean(axis=2).T).max() <= 1e-10

    def test_identical_agents_identical_aggregates(self, backend, beach_bar, sbm10):
        # SBM agents 1..7 share a graphon row; give them one policy
        rng = np.random.default_rng(5)
        pi = random_policy(rng, 10, 10, 10, 3)
        pi[:7] = pi[0]
        z = compute_aggregates(induce_flow(beach_bar, pi), sbm10)
        for i in range(1, 7):
            assert np.array_equal(z[i], z[0])

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 40), st.floats(0, 1), st.integers(0, 10**6))
    def test_constant_refinement_exact(self, n1, n2, p, seed):
        g = build_beach_bar(BeachBarConfig(horizon=4))
        shared = random_policy(np.random.default_rng(seed), 1, 4, 10, 3)
        z1 = compute_aggregates(induce_flow(g, np.repeat(shared, n1, 0)), discretize(Constant(p), n1, 4))
        z2 = compute_aggregates(induce_flow(g, np.repeat(shared, n2, 0)), discretize(Constant(p), n2, 4))
        assert np.array_equal(z1[0], z2[0])
        assert np.array_equal(z1, np.broadcast_to(z1[0], z1.shape))

    def test_dimension_mismatch(self, sbm10):
        with pytest.raises(DimensionError):
            compute_aggregates(np.full((5, 10, 10), 0.1), sbm10)
        with pytest.raises(DimensionError):
            compute_aggregates(np.full((10, 11, 10), 0.1), sbm10)
