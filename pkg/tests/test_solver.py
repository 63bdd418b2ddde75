import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmfg.evaluation import eval_policy_exact, exploitability
from gmfg.game import BeachBarConfig, GameSpec, build_beach_bar
from gmfg.graphon import discretize
from gmfg.meanfield import population_field, uniform_policy
from gmfg.solver import (
    ConfigError,
    PMDConfig,
    SolverError,
    average_policies,
    pmd_run,
    pmd_step,
)

from .conftest import SBM_TWO_BLOCK, random_policy
from .oracles import kl_regularized_argmax


def small_setup(horizon=4, n=5):
    return build_beach_bar(BeachBarConfig(horizon=horizon)), discretize(SBM_TWO_BLOCK, n, horizon)


class TestPMDStep:
    def test_unregularized_is_exponentiated_gradient(self, backend):
        rng = np.random.default_rng(0)
        pi = rng.dirichlet(np.ones(3), size=(2, 2, 4))
        q = rng.normal(size=pi.shape)
        out = pmd_step(pi, q, 0.3, 0.0, 0.0)
        expected = pi * np.exp(0.3 * q)
        expected /= expected.sum(-1, keepdims=True)
        assert np.allclose(out, expected, atol=1e-15)

    def test_discount_square_root(self, backend):
        out = pmd_step(np.array([[[[0.8, 0.2]]]]), np.full((1, 1, 1, 2), 3.0), 0.5, 0.0, 1.0)
        norm = math.sqrt(0.8) + math.sqrt(0.2)
        assert np.allclose(out[0, 0, 0], [math.sqrt(0.8) / norm, math.sqrt(0.2) / norm], atol=1e-15)
        assert np.allclose(out[0, 0, 0], [2 / 3, 1 / 3], atol=1e-6)

    def test_mixing(self, backend):
        # a huge action-value gap drives pi_hat to (1, 0)
        out = pmd_step(np.array([[[[0.5, 0.5]]]]), np.array([[[[1e3, 0.0]]]]), 1.0, 0.1, 0.0)
        assert np.allclose(out[0, 0, 0], [0.95, 0.05], atol=1e-15)

    @pytest.mark.parametrize("seed", range(100))
    def test_argmax_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        A = int(rng.integers(2, 5))
        pi = rng.dirichlet(np.ones(A)) * 0.9 + 0.1 / A
        q = rng.normal(scale=2.0, size=A)
        lam = float(rng.uniform(0, 2))
        eta = float(rng.uniform(0.01, 0.99)) / max(lam, 1.0)
        out = pmd_step(pi[None, None, None], q[None, None, None], eta, 0.0, lam)[0, 0, 0]
        assert np.abs(out - kl_regularized_argmax(q, pi, eta, lam)).max() <= 1e-8

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6), st.floats(0.0, 0.99), st.floats(0.0, 5.0))
    def test_positivity_floor(self, seed, beta, eta):
        rng = np.random.default_rng(seed)
        pi = random_policy(rng, 2, 3, 4, 3, floor=1e-3)
        q = rng.normal(scale=50.0, size=pi.shape)
        out = pmd_step(pi, q, eta, beta, 0.1 if eta < 10 else 0.0)
        assert np.all(out >= beta / 3)
        assert np.abs(out.sum(-1) - 1).max() <= 1e-12

    def test_rejects_large_step(self):
        pi = np.full((1, 1, 1, 2), 0.5)
        with pytest.raises(ConfigError):
            pmd_step(pi, pi, 1.0, 0.0, 1.0)
        with pytest.raises(ConfigError):
            pmd_step(pi, pi, 0.1, 1.0, 1.0)

    def test_rejects_zero_entry(self):
        with pytest.raises(SolverError):
            pmd_step(np.array([[[[1.0, 0.0]]]]), np.zeros((1, 1, 1, 2)), 0.1, 0.0, 1.0)

    def test_zero_entry_allowed_without_regularization(self):
        out = pmd_step(np.array([[[[1.0, 0.0]]]]), np.zeros((1, 1, 1, 2)), 0.1, 0.0, 0.0)
        assert np.array_equal(out[0, 0, 0], [1.0, 0.0])

    def test_undiscounted_flag(self, backend):
        pi = np.array([[[[0.8, 0.2]]]])
        out = pmd_step(pi, np.zeros_like(pi), 0.5, 0.0, 1.0, discount=False)
        assert np.allclose(out, pi, atol=1e-15)


class TestAverage:
    def test_single(self):
        pi = random_policy(np.random.default_rng(0), 2, 2, 3, 2)
        assert np.array_equal(average_policies([pi]), pi)

    def test_two(self):
        a = np.array([[[[1.0, 0.0]]]])
        assert np.array_equal(average_policies([a, a[..., ::-1]]), [[[[0.5, 0.5]]]])

    def test_valid_rows(self):
        rng = np.random.default_rng(1)
        avg = average_policies([random_policy(rng, 3, 4, 5, 3) for _ in range(7)])
        assert avg.min() >= 0 and np.abs(avg.sum(-1) - 1).max() <= 1e-12

    def test_errors(self):
        with pytest.raises(SolverError):
            average_policies([])
        with pytest.raises(SolverError):
            average_policies([np.ones((1, 1, 1, 2)) / 2, np.ones((1, 1, 1, 3)) / 3])


class TestConfig:
    def test_defaults(self):
        assert PMDConfig(T=1).mixing == 0.5
        c = PMDConfig(T=400)
        assert c.step_size == pytest.approx(1 / 20) and c.mixing == pytest.approx(1 / 400)
        assert PMDConfig(T=100, c_eta=0.5, c_beta=2.0).step_size == pytest.approx(0.05)
        assert PMDConfig(T=100, c_beta=2.0).mixing == pytest.approx(0.02)

    @pytest.mark.parametrize("kw", [dict(T=0), dict(beta=1.0), dict(beta=-0.1), dict(eta=-1.0),
                                    dict(q_source="x"), dict(baseline="x"), dict(lam=-1.0)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            PMDConfig(**kw)

    def test_run_rejects_large_step(self):
        g, W = small_setup()
        with pytest.raises(ConfigError):
            pmd_run(g, W, PMDConfig(T=1))  # eta = 1 with lambda = 1

    def test_dict_roundtrip(self):
        c = PMDConfig(T=30, eta=0.1, lam=0.5, q_source="estimated")
        assert c.to_dict()["lambda"] == 0.5
        assert PMDConfig.from_dict(c.to_dict()) == c
        with pytest.raises(ConfigError):
            PMDConfig.from_dict({"T": 3, "bogus": 1})


class TestRun:
    def test_single_iteration(self, backend):
        g, W = small_setup()
        res = pmd_run(g, W, PMDConfig(T=1, eta=0.5))
        pi0 = uniform_policy(5, g)
        _, z = population_field(g, pi0, W)
        q, _ = eval_policy_exact(g, pi0, z)
        # default mixing 1/T is capped at 1/2 when T = 1
        step = pmd_step(pi0, q, 0.5, 0.5, 1.0)
        assert np.array_equal(res.last_policy, step)
        assert np.array_equal(res.avg_policy, step)
        assert len(res.trace) == 1 and res.trace[0].t == 1

    def test_zero_step(self, backend):
        g, W = small_setup()
        res = pmd_run(g, W, PMDConfig(T=5, eta=0.0, beta=0.0))
        assert np.array_equal(res.last_policy, uniform_policy(5, g))
        assert np.array_equal(res.avg_policy, uniform_policy(5, g))

    def test_zero_step_mixing_only(self):
        g, W = small_setup()
        res = pmd_run(g, W, PMDConfig(T=3, eta=0.0, beta=0.5))
        assert np.allclose(res.last_policy, 1 / 3, atol=1e-15)

    def test_average_is_mean_of_iterates(self):
        g, W = small_setup()
        # rebuild iterates step by step
        pi, history = uniform_policy(5, g), []
        for _ in range(3):
            _, z = population_field(g, pi, W)
            pi = pmd_step(pi, eval_policy_exact(g, pi, z)[0], 0.4, 0.1, 1.0)
            history.append(pi)
        res = pmd_run(g, W, PMDConfig(T=3, eta=0.4, beta=0.1))
        assert np.allclose(res.avg_policy, average_policies(history), atol=1e-15)
        assert np.array_equal(res.last_policy, history[-1])

    def test_deterministic(self):
        g, W = small_setup()
        a = pmd_run(g, W, PMDConfig(T=20))
        b = pmd_run(g, W, PMDConfig(T=20))
        key = [(r.t, r.exploitability_last, r.exploitability_avg) for r in a.trace]
        assert key == [(r.t, r.exploitability_last, r.exploitability_avg) for r in b.trace]
        assert np.array_equal(a.avg_policy, b.avg_policy)

    def test_log_every(self):
        g, W = small_setup()
        res = pmd_run(g, W, PMDConfig(T=10, log_every=4))
        assert [r.t for r in res.trace] == [4, 8, 10]
        seen = []
        pmd_run(g, W, PMDConfig(T=3), on_record=seen.append)
        assert [r.t for r in seen] == [1, 2, 3]

    def test_trace_entries_nonnegative(self, backend):
        g, W = small_setup()
        res = pmd_run(g, W, PMDConfig(T=30))
        for r in res.trace:
            assert r.exploitability_last >= -1e-9 and r.exploitability_avg >= -1e-9
            assert r.wall_time >= 0

    def test_monotone_trend(self, beach_bar, sbm10):
        res = pmd_run(beach_bar, sbm10, PMDConfig(T=200))
        avg = [r.exploitability_avg for r in res.trace]
        for prev, cur in zip(avg, avg[1:]):
            assert cur <= prev * 1.05

    def test_lambda_override(self):
        g, W = small_setup()
        res = pmd_run(g, W, PMDConfig(T=5, lam=0.0))
        ref = pmd_run(build_beach_bar(BeachBarConfig(horizon=4, lam=0.0)), W, PMDConfig(T=5))
        assert np.array_equal(res.last_policy, ref.last_policy)

    def test_unregularized_baseline_differs(self):
        g, W = small_setup()
        a = pmd_run(g, W, PMDConfig(T=10))
        b = pmd_run(g, W, PMDConfig(T=10, baseline="unregularized"))
        assert not np.array_equal(a.last_policy, b.last_policy)

    def test_eval_graphon(self):
        g, W = small_setup()
        true = discretize(SBM_TWO_BLOCK, 5, 4)
        from gmfg.graphon import Constant

        model = discretize(Constant(0.5), 5, 4)
        res = pmd_run(g, model, PMDConfig(T=5), eval_graphon=true)
        assert res.trace[-1].exploitability_last == pytest.approx(
            exploitability(g, true, res.last_policy), abs=0)

    def test_nan_aborts(self):
        g, _ = small_setup()
        bad = GameSpec(g.transition, lambda h, z: np.full(z.shape + (3,), np.nan),
                       g.mu1, g.actions, 1.0, g.r_max)
        with pytest.raises(SolverError, match="non-finite"):
            pmd_run(bad, discretize(SBM_TWO_BLOCK, 5, 4), PMDConfig(T=3))
