"""Adversarial multi-armed bandit primitives: EXP3, EXP3.IX and EXPINF."""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .core import BaseLearner, SeededRng, check_nonnegative_reward


def _softmin_probs(cum_loss: list[float], eta: float) -> list[float]:
    # log-domain weights -eta * L, shifted by their max before exponentiating
    lo = min(cum_loss)
    exp = math.exp
    w = [exp(eta * (lo - x)) for x in cum_loss]
    s = 1.0 / sum(w)
    return [x * s for x in w]


class Exp3:
    """Anytime EXP3 on losses ``1 - reward`` with rate ``sqrt(ln K / (t K))``.

    Probabilities at round t are proportional to ``exp(-eta_t * L_{t-1})`` where
    ``L`` holds the cumulative importance-weighted loss estimates.
    """

    __slots__ = ("n_arms", "rng", "t", "cum_loss", "_weights", "_total", "_pending", "_rate")

    def __init__(self, n_arms: int, rng: Optional[SeededRng] = None):
        if n_arms < 1:
            raise ValueError("EXP3 needs at least one arm")
        self.n_arms = n_arms
        self.rng = rng if rng is not None else SeededRng(0)
        self.t = 0
        self.cum_loss = [0.0] * n_arms
        self._weights = [1.0] * n_arms
        self._total = float(n_arms)
        self._pending = None
        self._rate = math.log(n_arms) / n_arms

    def eta(self, t: Optional[int] = None) -> float:
        t = self.t + 1 if t is None else t
        # _rate is ln K / K here and 2 ln K / K for the implicit-exploration variant
        return math.sqrt(self._rate / t)

    @property
    def log_weights(self) -> list[float]:
        e = self.eta()
        return [-e * x for x in self.cum_loss]

    @property
    def last_probs(self) -> list[float]:
        """Distribution used by the most recent draw (uniform before the first)."""
        s = 1.0 / self._total
        return [w * s for w in self._weights]

    def probabilities(self) -> list[float]:
        if self.n_arms == 1:
            return [1.0]
        return _softmin_probs(self.cum_loss, self.eta())

    def draw(self) -> int:
        """Sample an arm; same as ``select()[0]`` without building the probability vector."""
        if self._pending is not None:
            raise RuntimeError("select called twice without update")
        if self.n_arms == 1:
            self._pending = 0
            return 0
        cum = self.cum_loss
        lo = min(cum)
        eta = math.sqrt(self._rate / (self.t + 1))  # self.eta(), inlined
        exp = math.exp
        w = [exp(eta * (lo - x)) for x in cum]
        total = 0.0
        for x in w:
            total += x
        u = self.rng.random() * total
        acc = 0.0
        arm = len(w) - 1
        for i, x in enumerate(w):
            acc += x
            if u < acc:
                arm = i
                break
        self._weights = w
        self._total = total
        self._pending = arm
        return arm

    def select(self) -> tuple[int, list[float]]:
        arm = self.draw()
        return arm, self.last_probs

    def _loss_estimate(self, loss: float, prob: float) -> float:
        return loss / prob

    def update(self, arm: int, reward) -> None:
        if self._pending is None:
            raise RuntimeError("update without a pending select")
        if arm != self._pending:
            raise ValueError(f"update for arm {arm} but arm {self._pending} was selected")
        r = check_nonnegative_reward(reward)
        self._pending = None
        prob = self._weights[arm] / self._total
        self.cum_loss[arm] += self._loss_estimate(1.0 - r, prob)
        self.t += 1

    @staticmethod
    def reward_estimates(probs: Sequence[float], arm: int, reward: float) -> list[float]:
        """Importance-weighted reward estimates implied by the loss update.

        ``1 - (1 - r) 1[i = arm] / p_i`` has expectation ``r_i`` under ``arm ~ probs``.
        """
        out = [1.0] * len(probs)
        out[arm] = 1.0 - (1.0 - reward) / probs[arm]
        return out


class Exp3IX(Exp3):
    """EXP3 with implicit exploration: loss estimates ``l / (p + gamma_t)``.

    Anytime parameters ``eta_t = sqrt(2 ln K / (K t))`` and ``gamma_t = eta_t / 2``.
    """

    __slots__ = ()

    def __init__(self, n_arms: int, rng: Optional[SeededRng] = None):
        super().__init__(n_arms, rng)
        # eta_t = sqrt(_rate / t), shared with the base class draw
        self._rate = 2.0 * math.log(n_arms) / n_arms

    def gamma(self, t: Optional[int] = None) -> float:
        return 0.5 * self.eta(t)

    def _loss_estimate(self, loss: float, prob: float) -> float:
        # gamma/eta evaluated at the round being updated (t + 1 before increment)
        return loss / (prob + self.gamma())


def cube_sum(i: int) -> int:
    """``sum_{j <= i} j^3``."""
    h = i * (i + 1) // 2
    return h * h


def expinf_period_of(t: int) -> int:
    """Restart period containing round ``t``: period i covers ``(cube_sum(i-1), cube_sum(i)]``."""
    if t < 1:
        raise ValueError("rounds start at t = 1")
    # t <= (i(i+1)/2)^2  <=>  ceil(sqrt t) <= i(i+1)/2; solve for the smallest i exactly
    h = math.isqrt(t - 1) + 1
    i = (math.isqrt(8 * h + 1) - 1) >> 1
    if i * (i + 1) >> 1 < h:
        i += 1
    return i


class ExpInf:
    """EXP3.IX restarted on periods of length 1, 8, 27, ... over growing expert prefixes.

    During period i the inner learner arbitrates between experts ``0..i-1``
    (capped at ``max_experts`` when the expert family is finite).
    """

    __slots__ = ("rng", "max_experts", "t", "current_period", "period_start",
                 "period_end", "inner", "_pending")

    def __init__(self, rng: Optional[SeededRng] = None, max_experts: Optional[int] = None):
        self.rng = rng if rng is not None else SeededRng(0)
        if max_experts is not None and max_experts < 1:
            raise ValueError("max_experts must be >= 1")
        self.max_experts = max_experts
        self.t = 0
        self.current_period = 0
        self.period_start = 1
        self.period_end = 0
        self.inner: Optional[Exp3IX] = None
        self._pending = None

    def _advance(self):
        t = self.t + 1
        if t > self.period_end:
            i = self.current_period + 1
            self.current_period = i
            self.period_start = cube_sum(i - 1) + 1
            self.period_end = cube_sum(i)
            k = i if self.max_experts is None else min(i, self.max_experts)
            self.inner = Exp3IX(k, self.rng.spawn("expinf-period", i))

    @property
    def n_experts(self) -> int:
        """Number of experts consulted at the upcoming round."""
        self._advance()
        return self.inner.n_arms

    def select_expert(self) -> int:
        if self._pending is not None:
            raise RuntimeError("select called twice without update")
        self._advance()
        arm = self.inner.draw()
        self._pending = arm
        return arm

    def select(self, expert_actions: Sequence[int]) -> int:
        k = self.n_experts
        if len(expert_actions) != k:
            raise ValueError(f"expected {k} expert actions, got {len(expert_actions)}")
        return expert_actions[self.select_expert()]

    def update(self, reward) -> None:
        if self._pending is None:
            raise RuntimeError("update without a pending select")
        arm, self._pending = self._pending, None
        self.inner.update(arm, reward)
        self.t += 1


class _ContextFreeLearner(BaseLearner):
    def __init__(self, n_actions: int = 2, seed: int = 0):
        self.n_actions = n_actions
        self.seed = seed

    def _make(self, rng):
        raise NotImplementedError

    def reset(self, seed: Optional[int] = None):
        self.rng_ = SeededRng(self.seed if seed is None else seed)
        self.learner_ = self._make(self.rng_.spawn(self.name))
        self.t_ = 0
        self._pending = False
        self._arm = None
        return self

    def select(self, context=None, t: Optional[int] = None) -> int:
        self._begin_round(t)
        self._arm = self.learner_.draw()
        return self._arm

    def feed(self, reward) -> None:
        self._end_round()
        self.learner_.update(self._arm, reward)


class Exp3Learner(_ContextFreeLearner):
    """EXP3 over the action set, ignoring contexts."""

    name = "exp3"

    def _make(self, rng):
        return Exp3(self.n_actions, rng)


class Exp3IXLearner(_ContextFreeLearner):
    """EXP3.IX over the action set, ignoring contexts."""

    name = "exp3ix"

    def _make(self, rng):
        return Exp3IX(self.n_actions, rng)


class ExpInfLearner(_ContextFreeLearner):
    """EXPINF over constant experts ``E_i = action i-1``, ignoring contexts.

    ``n_actions=None`` means a countable action sequence.
    """

    name = "expinf"

    def __init__(self, n_actions: Optional[int] = None, seed: int = 0):
        super().__init__(n_actions=n_actions, seed=seed)

    def _make(self, rng):
        return ExpInf(rng, max_experts=self.n_actions)

    def select(self, context=None, t: Optional[int] = None) -> int:
        self._begin_round(t)
        self._arm = self.learner_.select_expert()
        return self._arm

    def feed(self, reward) -> None:
        self._end_round()
        self.learner_.update(reward)
