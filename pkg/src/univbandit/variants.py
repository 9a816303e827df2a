"""Learning rules for countable actions, continuous, uniformly-continuous and unbounded rewards."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

from .bandits import ExpInf
from .core import (ActionSpace, BaseLearner, ContextPoint, SeededRng,
                   check_nonnegative_reward, greedy_net)
from .policy_net import PolicyEnumeration, identity_key
from .universal import UniversalFiniteRule


class CountableActionRule(BaseLearner):
    """EXPINF whose i-th expert plays policy ``i`` of the enumerated family.

    ``n_actions=None`` enumerates policies over a countable action sequence.
    """

    name = "countable_rule"

    def __init__(self, n_actions: Optional[int] = None, n_policy_contexts: Optional[int] = None,
                 policy_key: Optional[Callable] = None, seed: int = 0):
        self.n_actions = n_actions
        self.n_policy_contexts = n_policy_contexts
        self.policy_key = policy_key
        self.seed = seed

    def _n_policy_actions(self):
        return self.n_actions

    def reset(self, seed: Optional[int] = None):
        self.rng_ = SeededRng(self.seed if seed is None else seed)
        self.policies_ = PolicyEnumeration(self.n_policy_contexts, self._n_policy_actions(),
                                           self.policy_key or identity_key)
        self.expinf_ = ExpInf(self.rng_.spawn("expinf"), max_experts=self.policies_.size())
        self.t_ = 0
        self._pending = False
        self.last_expert_ = None
        return self

    def select(self, context: ContextPoint, t: Optional[int] = None) -> int:
        self._begin_round(t)
        i = self.expinf_.select_expert()
        self.last_expert_ = i + 1
        return self.policies_[i + 1](context)

    def feed(self, reward) -> None:
        self._end_round()
        self.expinf_.update(check_nonnegative_reward(reward))

    def round_info(self) -> dict:
        return {"strategy": self.last_expert_}


class ContinuousRule(CountableActionRule):
    """The countable rule with policies valued in a metric candidate list."""

    name = "continuous_rule"

    def __init__(self, action_space: Optional[ActionSpace] = None,
                 n_policy_contexts: Optional[int] = None,
                 policy_key: Optional[Callable] = None, seed: int = 0):
        self.action_space = action_space
        self.n_policy_contexts = n_policy_contexts
        self.policy_key = policy_key
        self.seed = seed

    def _n_policy_actions(self):
        if self.action_space is None or self.action_space.kind != "metric":
            raise ValueError("continuous_rule needs a metric candidate action space")
        return self.action_space.size


@dataclass(frozen=True)
class NetParams:
    p: int
    delta: float
    net: tuple
    eta: float
    epsilon: float


def net_penalty(size: int, p: int) -> float:
    return 10.0 * math.sqrt(size * math.log(size)) / 2.0 ** (p / 4.0)


def net_epsilon(size: int, p: int) -> float:
    return 2.0 * math.sqrt(size * math.log(size)) / 2.0 ** (p / 4.0)


def _min_spacing(space: ActionSpace) -> float:
    n = space.size
    if n < 2:
        return math.inf
    return min(space.distance(i, j) for i in range(n) for j in range(i + 1, n))


def _diameter(space: ActionSpace) -> float:
    n = space.size
    return max((space.distance(i, j) for i in range(n) for j in range(i + 1, n)), default=0.0)


def net_scan(space: ActionSpace, p: int) -> NetParams:
    """Finest dyadic radius whose greedy net satisfies ``|N| ln |N| <= 2^{p/4}``.

    The scan starts at the first ``2^{-i}`` covering the whole candidate set
    (a single-point net) and refines until the budget is exceeded or the net
    already holds every candidate.
    """
    if space.kind != "metric":
        raise ValueError("net_scan needs a metric candidate action space")
    budget = 2.0 ** (p / 4.0)
    spacing = _min_spacing(space)
    diam = _diameter(space)
    i = 0 if diam <= 1.0 else -math.ceil(math.log2(diam))
    best = None
    while True:
        delta = 2.0 ** (-i)
        net = greedy_net(space.points, space.distance_fn, delta)
        n = len(net)
        if n * math.log(n) > budget:
            break
        best = (delta, tuple(net))
        if n == space.size and delta < spacing:
            break
        i += 1
    if best is None:
        raise ValueError("empty net: no dyadic radius meets the size budget")
    delta, net = best
    return NetParams(p, delta, net, net_penalty(len(net), p), net_epsilon(len(net), p))


class UcNetRule(UniversalFiniteRule):
    """Universal rule whose strategy-0 EXP3 learners search a per-category net.

    ``delta_fn`` optionally fixes the net radius per category (``p -> delta``)
    instead of the size-budget scan.
    """

    name = "uc_net_rule"

    def __init__(self, action_space: Optional[ActionSpace] = None,
                 n_policy_contexts: Optional[int] = None,
                 policy_key: Optional[Callable] = None, delta_fn: Optional[Callable] = None,
                 seed: int = 0):
        self.action_space = action_space
        self.n_policy_contexts = n_policy_contexts
        self.policy_key = policy_key
        self.delta_fn = delta_fn
        self.seed = seed

    @property
    def n_actions(self) -> int:
        return self.action_space.size

    @n_actions.setter
    def n_actions(self, value):
        # set by the parent constructor signature only; the action space decides
        pass

    def net_params(self, p: int) -> NetParams:
        cache = self.__dict__.setdefault("_nets", {})
        got = cache.get(p)
        if got is None:
            if self.delta_fn is None:
                got = net_scan(self.action_space, p)
            else:
                delta = float(self.delta_fn(p))
                net = tuple(greedy_net(self.action_space.points, self.action_space.distance_fn, delta))
                got = NetParams(p, delta, net, net_penalty(len(net), p) if len(net) > 1 else 0.0,
                                net_epsilon(len(net), p) if len(net) > 1 else 0.0)
            if not got.net:
                raise ValueError("empty net")
            cache[p] = got
        return got

    def reset(self, seed: Optional[int] = None):
        if self.action_space is None or self.action_space.kind != "metric":
            raise ValueError("uc_net_rule needs a metric candidate action space")
        self._nets = {}
        return super().reset(seed)

    def _s0_size(self, p: int) -> int:
        return len(self.net_params(p).net)

    def _s0_action(self, p: int, arm: int) -> int:
        return self.net_params(p).net[arm]

    def penalty(self, p: int) -> float:
        return self.net_params(p).eta

    def net_sizes(self) -> dict:
        return {p: len(v.net) for p, v in sorted(self.__dict__.get("_nets", {}).items())}


class UnboundedRule(BaseLearner):
    """One EXPINF per distinct context over constant-action experts.

    Rewards are divided by ``scale`` and clipped to [0, 1] before reaching the
    inner learners. With ``adaptive=True`` each context's scale is the running
    maximum of its rewards, refreshed only when its EXPINF starts a new period.
    """

    name = "unbounded_rule"

    def __init__(self, n_actions: Optional[int] = None, scale: float = 1.0,
                 adaptive: bool = False, seed: int = 0):
        self.n_actions = n_actions
        self.scale = scale
        self.adaptive = adaptive
        self.seed = seed

    def reset(self, seed: Optional[int] = None):
        if not self.adaptive and not self.scale > 0:
            raise ValueError("scale must be positive")
        self.rng_ = SeededRng(self.seed if seed is None else seed)
        self.learners_: dict[int, ExpInf] = {}
        self.scales_: dict[int, list] = {}
        self.t_ = 0
        self._pending = False
        self._cid = None
        return self

    def select(self, context: ContextPoint, t: Optional[int] = None) -> int:
        self._begin_round(t)
        cid = context.id
        learner = self.learners_.get(cid)
        if learner is None:
            learner = self.learners_[cid] = ExpInf(self.rng_.spawn("unbounded", cid),
                                                   max_experts=self.n_actions)
            self.scales_[cid] = [0.0, 0.0, 0]  # running max, period scale, period index
        self._cid = cid
        arm = learner.select_expert()
        if self.adaptive:
            st = self.scales_[cid]
            if st[2] != learner.current_period:
                st[2] = learner.current_period
                st[1] = st[0]
        return arm

    def feed(self, reward) -> None:
        self._end_round()
        r = check_nonnegative_reward(reward, bounded=False)
        if self.adaptive:
            st = self.scales_[self._cid]
            scale = st[1] if st[1] > 0 else max(r, 1.0)
            st[0] = max(st[0], r)
        else:
            scale = self.scale
        self.learners_[self._cid].update(min(1.0, r / scale))

    @property
    def n_instances(self) -> int:
        return len(self.learners_)
