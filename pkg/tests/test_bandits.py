import math

import pytest

from univbandit.bandits import (Exp3, Exp3IX, Exp3IXLearner, Exp3Learner, ExpInf, ExpInfLearner,
                                cube_sum, expinf_period_of)
from univbandit.core import SeededRng


def play(learner, rewards, rounds):
    for _ in range(rounds):
        arm, _ = learner.select()
        learner.update(arm, rewards[arm])


class TestExp3:
    def test_single_arm(self):
        learner = Exp3(1, SeededRng(3))
        for _ in range(20):
            arm, probs = learner.select()
            assert (arm, probs) == (0, [1.0])
            learner.update(arm, 0.4)

    def test_fresh_is_uniform(self):
        assert Exp3(4).probabilities() == [0.25] * 4

    def test_first_rate(self):
        # sqrt(ln 2 / 2) = 0.5887050..., quoted truncated to five places
        assert Exp3(2).eta(1) == pytest.approx(math.sqrt(math.log(2) / 2), rel=1e-12)
        assert Exp3(2).eta(1) == pytest.approx(0.58870, abs=1e-5)

    def test_update_checks(self):
        learner = Exp3(3)
        with pytest.raises(RuntimeError):
            learner.update(0, 0.5)
        arm, _ = learner.select()
        with pytest.raises(ValueError):
            learner.update((arm + 1) % 3, 0.5)
        with pytest.raises(ValueError):
            learner.update(arm, 1.2)

    def test_log_weights_finite_after_extreme_losses(self):
        learner = Exp3(3, SeededRng(1))
        play(learner, [0.0, 0.0, 1.0], 5000)
        assert all(math.isfinite(w) for w in learner.log_weights)
        assert sum(learner.probabilities()) == pytest.approx(1.0, abs=1e-9)

    def test_replay(self):
        runs = []
        for _ in range(2):
            learner = Exp3(4, SeededRng(77))
            arms = []
            for _ in range(300):
                arm, _ = learner.select()
                arms.append(arm)
                learner.update(arm, 0.1 * arm)
            runs.append(arms)
        assert runs[0] == runs[1]

    def test_estimates_unbiased_exactly(self):
        probs = [0.1, 0.2, 0.3, 0.4]
        rewards = [0.9, 0.1, 0.5, 0.3]
        for i in range(4):
            mean = sum(p * Exp3.reward_estimates(probs, a, rewards[a])[i] for a, p in enumerate(probs))
            assert mean == pytest.approx(rewards[i])


class TestExp3IX:
    def test_fresh_uniform(self):
        assert Exp3IX(2).probabilities() == [0.5, 0.5]

    def test_gamma_positive(self):
        learner = Exp3IX(3)
        for t in (1, 10, 10**6):
            assert learner.gamma(t) > 0
        assert learner.gamma(4) == pytest.approx(0.5 * math.sqrt(2 * math.log(3) / 12))

    def test_learns_deterministic_best(self):
        total = 0.0
        for seed in range(100):
            learner = Exp3IX(2, SeededRng(seed))
            play(learner, [1.0, 0.0], 500)
            total += learner.probabilities()[0]
        assert total / 100 > 0.9


class TestExpInfSchedule:
    @pytest.mark.parametrize("t,period", [(1, 1), (9, 2), (10, 3), (36, 3), (37, 4)])
    def test_period_of(self, t, period):
        assert expinf_period_of(t) == period

    def test_cube_lengths(self):
        assert [cube_sum(i) - cube_sum(i - 1) for i in range(1, 6)] == [1, 8, 27, 64, 125]

    def test_rejects_round_zero(self):
        with pytest.raises(ValueError):
            expinf_period_of(0)

    def test_boundary_resets_inner(self):
        learner = ExpInf(SeededRng(0))
        for t in range(1, 10):
            learner.select_expert()
            learner.update(1.0 if t % 2 else 0.0)
        assert learner.inner.n_arms == 2
        assert learner.n_experts == 3
        assert learner.inner.probabilities() == pytest.approx([1 / 3] * 3)
        assert learner.current_period == 3

    def test_first_period_plays_first_expert(self):
        learner = ExpInf(SeededRng(4))
        assert learner.select([7]) == 7

    def test_wrong_expert_count(self):
        learner = ExpInf()
        with pytest.raises(ValueError):
            learner.select([1, 2])

    def test_capped_family(self):
        learner = ExpInf(max_experts=2)
        for _ in range(40):
            learner.select_expert()
            learner.update(0.5)
        assert learner.inner.n_arms == 2

    def test_regret_shrinks(self):
        means = [0.25, 0.75]

        def per_round(horizon, seed):
            rule = ExpInfLearner(n_actions=2, seed=seed).reset()
            rng = SeededRng(seed).spawn("rewards")
            regret = 0.0
            for t in range(1, horizon + 1):
                a = rule.select(None, t)
                regret += max(means) - means[a]
                rule.feed(1.0 if rng.random() < means[a] else 0.0)
            return regret / horizon

        early = sum(per_round(500, s) for s in range(50)) / 50
        late = sum(per_round(5000, s) for s in range(50)) / 50
        assert late < 0.5 * early


class TestContextFreeLearners:
    @pytest.mark.parametrize("cls", [Exp3Learner, Exp3IXLearner])
    def test_contract(self, cls):
        rule = cls(n_actions=3, seed=1).reset()
        a = rule.select(None, 1)
        assert 0 <= a < 3
        rule.feed(0.3)
        with pytest.raises(RuntimeError):
            rule.feed(0.3)

    def test_expinf_countable(self):
        rule = ExpInfLearner(seed=2).reset()
        seen = set()
        for t in range(1, 200):
            seen.add(rule.select(None, t))
            rule.feed(0.0)
        assert max(seen) >= 4
