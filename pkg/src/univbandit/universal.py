"""Optimistically universal learning rule for finite action sets.

Rounds are split by *category* (how often the context has been seen, on a
base-4 scale) and, within a category, by *period*. Each period the rule
randomly earmarks contexts for exploring strategy 0 (a separate EXP3 per
context), exploring strategy 1 (one policy from a dense family, picked
uniformly), or exploitation, and uses importance-weighted estimates gathered on
the exploration rounds to commit to a strategy for the following periods.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

from .bandits import Exp3, Exp3IX
from .core import BaseLearner, ContextPoint, SeededRng, check_nonnegative_reward
from .policy_net import PolicyEnumeration, identity_key

EXPLORE0, EXPLORE1, EXPLOIT = 0, 1, 2
REGIMES = ("initial", "explore0", "explore1", "exploit0", "exploit1")
INITIAL_EXPONENT = 32


def category(count: int) -> int:
    """``floor(log_4 count)`` computed exactly on integers."""
    if count < 1:
        raise ValueError("occurrence count must be >= 1")
    return (count.bit_length() - 1) >> 1


def period_start(p: int, q: int) -> int:
    """``T_p^q = 2^k + i 2^k / 2^p`` with ``q = k 2^p + i``."""
    if p < 0 or q < p << p:
        raise ValueError(f"period index q={q} below p*2^p for p={p}")
    k, i = divmod(q, 1 << p)
    return (1 << k) + ((i << k) >> p)


def period_of(p: int, t: int) -> int:
    """The q with ``T_p^q <= t < T_p^{q+1}``."""
    if t < 1:
        raise ValueError("rounds start at t = 1")
    k = t.bit_length() - 1
    if k < p:
        raise ValueError(f"t={t} precedes the first period of category {p}")
    i = ((t - (1 << k)) << p) >> k
    return (k << p) + i


def explore_probability(t: int) -> float:
    """``p_t = 1 / (2 t^{1/4})``."""
    return 0.5 / t ** 0.25


def strategy0_penalty(n_actions: int, p: int) -> float:
    """Per-round penalty ``10 sqrt(|A| ln |A|) / 2^{p/4}`` charged to strategy 0."""
    return 10.0 * math.sqrt(n_actions * math.log(n_actions)) / 2.0 ** (p / 4.0)


def first_plan_period(p: int) -> int:
    return p << (p + 5)


class UniversalFiniteRule(BaseLearner):
    """Universal contextual-bandit rule over ``n_actions`` actions.

    Parameters
    ----------
    n_actions : int
        Size of the finite action set.
    n_policy_contexts : int or None
        Size of the key domain the policy family is enumerated over.
    policy_key : callable or None
        Maps a context to its policy key (defaults to the context id).
    seed : int
        Root seed; every sub-learner draws from its own derived substream.
    """

    name = "universal_finite"

    def __init__(self, n_actions: int = 2, n_policy_contexts: Optional[int] = None,
                 policy_key: Optional[Callable] = None, seed: int = 0):
        self.n_actions = n_actions
        self.n_policy_contexts = n_policy_contexts
        self.policy_key = policy_key
        self.seed = seed

    # -- strategy-0 action set hooks (overridden by the net variant) --------
    def _s0_size(self, p: int) -> int:
        return self.n_actions

    def _s0_action(self, p: int, arm: int) -> int:
        return arm

    def penalty(self, p: int) -> float:
        return strategy0_penalty(self.n_actions, p)

    def _policy_actions(self) -> int:
        return self.n_actions

    # -----------------------------------------------------------------------
    def reset(self, seed: Optional[int] = None):
        if self.n_actions < 2:
            raise ValueError("universal_finite needs at least 2 actions")
        self.rng_ = SeededRng(self.seed if seed is None else seed)
        self._purpose_rng = self.rng_.spawn("purpose")
        self._s0_rng = self.rng_.spawn("s0")
        self._s0_initial_rng = self.rng_.spawn("s0-initial")
        self._s1_rng = self.rng_.spawn("s1")
        self._explore1_rng = self.rng_.spawn("explore1")
        self.t_ = 0
        self._pending = False
        self.counts_: dict[int, int] = {}
        self.memo_: dict[tuple, dict] = {}
        self.s0_: dict[tuple, dict] = {}
        self.s0_initial_: dict[tuple, Exp3] = {}
        self.s1_: dict[tuple, Exp3IX] = {}
        self.est0_: dict[tuple, float] = {}
        self.est1_: dict[tuple, dict] = {}
        self.plan_: dict[tuple, int] = {}
        self.decisions_: list[tuple] = []
        self.regime_counts_ = dict.fromkeys(REGIMES, 0)
        self.policies_ = PolicyEnumeration(self.n_policy_contexts, self._policy_actions(),
                                           self.policy_key or identity_key)
        self._round = None
        self.last_ = None
        self._starts: list[int] = []
        self._next_close: list[int] = []
        return self

    # -- rule internals -------------------------------------------------------
    def plan(self, p: int, q: int) -> Optional[int]:
        got = self.plan_.get((p, q))
        if got is None and q == first_plan_period(p):
            got = self.plan_[(p, q)] = 0
        return got

    def assign_purpose(self, t: int, context_id: int, p: int, q: int) -> tuple:
        """Purpose of ``(p, q, context)`` with its first-occurrence round and ``p_t``."""
        memo = self.memo_.get((p, q))
        if memo is None:
            memo = self.memo_[(p, q)] = {}
        hit = memo.get(context_id)
        if hit is not None:
            return hit
        pt = 0.5 / t ** 0.25
        u = self._purpose_rng.uniform_at(p, q, context_id)
        if u <= pt:
            purpose = EXPLORE0
        elif u <= 2.0 * pt:
            purpose = EXPLORE1
        else:
            purpose = EXPLOIT
        hit = memo[context_id] = (purpose, t, pt)
        return hit

    def _s0_learner(self, p: int, q: int, cid: int) -> Exp3:
        table = self.s0_.get((p, q))
        if table is None:
            table = self.s0_[(p, q)] = {}
        learner = table.get(cid)
        if learner is None:
            learner = table[cid] = Exp3(self._s0_size(p), self._s0_rng.spawn(p, q, cid))
        return learner

    def _s1_learner(self, p: int, q: int) -> Exp3IX:
        learner = self.s1_.get((p, q))
        if learner is None:
            k = max(1, period_start(p, q).bit_length() - 1)
            learner = self.s1_[(p, q)] = Exp3IX(k, self._s1_rng.spawn(p, q))
        return learner

    def explore1_draw(self, t: int) -> tuple[int, int]:
        """``(k, l_t)`` with ``k = floor(log2 t)`` and ``l_t`` uniform on ``1..k``."""
        k = t.bit_length() - 1
        if k < 1:
            raise ValueError("no policies available at t = 1")
        return k, 1 + int(self._explore1_rng.uniform_at(t) * k)

    def select_strategy(self, p: int, q: int) -> None:
        if self.plan(p, q + 1) is not None:
            return
        t0 = period_start(p, q)
        t1 = period_start(p, q + 1)
        k = t0.bit_length() - 1
        est1 = self.est1_.get((p, q), {})
        best1 = max((est1.get(l, 0.0) for l in range(1, k + 1)), default=-math.inf)
        adjusted0 = self.est0_.get((p, q), 0.0) - self.penalty(p) * (t1 - t0)
        if adjusted0 >= best1:
            for qq in range(q + 1, q + 1 + max(1, p << p)):
                self.plan_.setdefault((p, qq), 0)
            choice = 0
        else:
            self.plan_[(p, q + 1)] = 1
            choice = 1
        self.decisions_.append((p, q, adjusted0, best1, choice))
        # the period is over: its learners are never consulted again
        self.s0_.pop((p, q), None)
        self.s1_.pop((p, q), None)
        self.memo_.pop((p, q), None)

    # -- learner contract -----------------------------------------------------
    def select(self, context: ContextPoint, t: Optional[int] = None) -> int:
        t = self._begin_round(t)
        cid = context.id
        count = self.counts_.get(cid, 0) + 1
        self.counts_[cid] = count
        p = (count.bit_length() - 1) >> 1
        k = t.bit_length() - 1
        if k < p:
            raise ValueError(f"t={t} precedes the first period of category {p}")
        q = (k << p) + (((t - (1 << k)) << p) >> k)
        if p and t < 1 << (INITIAL_EXPONENT * p):
            learner = self.s0_initial_.get((p, cid))
            if learner is None:
                learner = self.s0_initial_[(p, cid)] = Exp3(
                    self._s0_size(p), self._s0_initial_rng.spawn(p, cid))
            arm = learner.draw()
            action = self._s0_action(p, arm)
            self._round = (0, learner, arm, None)
            self.last_ = (p, q, None, "initial", 0, action)
            return action

        memo = self.memo_.get((p, q))
        hit = memo.get(cid) if memo is not None else None
        purpose, _, pt = hit if hit is not None else self.assign_purpose(t, cid, p, q)
        if purpose == EXPLORE0:
            learner = self._s0_learner(p, q, cid)
            arm = learner.draw()
            action = self._s0_action(p, arm)
            self._round = (1, learner, arm, (p, q, pt))
            self.last_ = (p, q, purpose, "explore0", 0, action)
        elif purpose == EXPLORE1:
            # t = 1 is the only round with floor(log2 t) = 0; one policy is available
            k, l = self.explore1_draw(t) if t > 1 else (1, 1)
            action = self.policies_[l](context)
            self._round = (2, None, l, (p, q, pt, k))
            self.last_ = (p, q, purpose, "explore1", 1, action)
        else:
            strategy = self.plan(p, q)
            if strategy is None:
                raise RuntimeError(f"no strategy planned for category {p}, period {q}")
            if strategy == 0:
                learner = self._s0_learner(p, q, cid)
                arm = learner.draw()
                action = self._s0_action(p, arm)
                self._round = (3, learner, arm, None)
                self.last_ = (p, q, purpose, "exploit0", 0, action)
            else:
                learner = self._s1_learner(p, q)
                arm = learner.draw()
                action = self.policies_[arm + 1](context)
                self._round = (4, learner, arm, None)
                self.last_ = (p, q, purpose, "exploit1", 1, action)
        return action

    def feed(self, reward) -> None:
        self._end_round()
        r = check_nonnegative_reward(reward)
        kind, learner, arm, extra = self._round
        self._round = None
        if kind == 2:
            p, q, pt, k = extra
            tab = self.est1_.get((p, q))
            if tab is None:
                tab = self.est1_[(p, q)] = {}
            tab[arm] = tab.get(arm, 0.0) + k * r / pt
        else:
            learner.update(arm, r)
            if kind == 1:
                p, q, pt = extra
                self.est0_[(p, q)] = self.est0_.get((p, q), 0.0) + r / pt
        self.regime_counts_[REGIMES[kind]] += 1
        self._end_of_phase(self.t_)

    def _end_of_phase(self, t: int) -> None:
        # t = T_p^{q+1} - 1 closes period q of category p, for every category whose
        # planned phase has begun; _starts/_next_close cache T_p^{qmin} and the next closing time
        nxt = t + 1
        starts, closes = self._starts, self._next_close
        p = 0
        while True:
            if p == len(starts):
                qmin = first_plan_period(p)
                starts.append(period_start(p, qmin))
                closes.append(period_start(p, qmin + 1))
            if nxt <= starts[p]:
                break
            if nxt == closes[p]:
                q1 = period_of(p, nxt)
                self.select_strategy(p, q1 - 1)
                closes[p] = period_start(p, q1 + 1)
            p += 1

    def round_info(self) -> dict:
        if self.last_ is None:
            return {}
        p, q, purpose, regime, strategy, action = self.last_
        return {"category": p, "period": q, "purpose": purpose, "regime": regime,
                "strategy": strategy, "action": action}
