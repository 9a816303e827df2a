"""Scripted scenarios checked against analytic or brute-force oracles.

Each scenario returns a report ``{"scenario", "passed", "checks": [...]}``
where every check carries the compared values and its margin.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Callable

from .bandits import Exp3, cube_sum, expinf_period_of
from .core import ContextPoint, SeededRng
from .processes import dedup_times, infrequent_mass
from .universal import UniversalFiniteRule, period_of, period_start

# -- Horvitz-Thompson scenario -------------------------------------------------------

HT_FILLERS = (99,) * 7
HT_PERIOD_CONTEXTS = (0, 1, 0, 2, 1, 0, 3, 2)
HT_REWARDS = {0: (0.2, 0.9), 1: (0.7, 0.1), 2: (0.5, 0.5), 3: (0.0, 1.0)}
HT_FILLER_REWARD = (0.3, 0.6)
HT_PERIOD = (0, 3)


def ht_reward(a: int, cid: int) -> float:
    return HT_REWARDS.get(cid, HT_FILLER_REWARD)[a]


def ht_trace() -> list[ContextPoint]:
    """Seven rounds of one filler context, then period (p=0, q=3) = rounds 8..15."""
    return [ContextPoint(c) for c in HT_FILLERS + HT_PERIOD_CONTEXTS]


def ht_draw(seed: int) -> tuple[float, dict]:
    """One independent run of the rule over the scripted trace; returns the period's estimators."""
    rule = UniversalFiniteRule(n_actions=2, seed=seed).reset()
    for t, x in enumerate(ht_trace(), start=1):
        a = rule.select(x, t)
        rule.feed(ht_reward(a, x.id))
    return rule.est0_.get(HT_PERIOD, 0.0), dict(rule.est1_.get(HT_PERIOD, {}))


def _exp_weights_probs(cum_loss, t, k):
    eta = math.sqrt(math.log(k) / (t * k))
    w = [math.exp(-eta * c) for c in cum_loss]
    z = sum(w)
    return [x / z for x in w]


def expected_exp3_rewards(rewards: tuple, plays: int) -> list[float]:
    """Expected reward of each of the first ``plays`` EXP3 rounds under fixed per-arm rewards,
    by enumerating every arm path."""
    k = len(rewards)
    out = [0.0] * plays
    for path in itertools.product(range(k), repeat=plays):
        cum = [0.0] * k
        prob = 1.0
        for j, arm in enumerate(path):
            pr = _exp_weights_probs(cum, j + 1, k)
            prob *= pr[arm]
            cum[arm] += (1.0 - rewards[arm]) / pr[arm]
        for j, arm in enumerate(path):
            out[j] += prob * rewards[arm]
    return out


def ht_strategy0_truth() -> float:
    counts: dict[int, int] = {}
    for c in HT_PERIOD_CONTEXTS:
        counts[c] = counts.get(c, 0) + 1
    return sum(sum(expected_exp3_rewards(HT_REWARDS[c], n)) for c, n in counts.items())


def ht_strategy1_truth(policy: Callable[[int], int]) -> float:
    return sum(ht_reward(policy(c), c) for c in HT_PERIOD_CONTEXTS)


def _mc_check(name, samples, truth, n_se=4.0):
    n = len(samples)
    m = sum(samples) / n
    var = sum((s - m) ** 2 for s in samples) / (n - 1)
    se = math.sqrt(var / n)
    return {"name": name, "estimate": m, "truth": truth, "std_error": se,
            "margin": n_se * se - abs(m - truth), "passed": abs(m - truth) <= n_se * se}


def scenario_ht_strat0(draws: int = 20000, seed: int = 0) -> list[dict]:
    vals = [ht_draw(seed * draws + i)[0] for i in range(draws)]
    return [_mc_check("R0", vals, ht_strategy0_truth())]


def scenario_ht_strat1(draws: int = 20000, seed: int = 0) -> list[dict]:
    rule = UniversalFiniteRule(n_actions=2).reset()
    k = period_start(*HT_PERIOD).bit_length() - 1
    per_l: dict[int, list] = {l: [] for l in range(1, k + 1)}
    for i in range(draws):
        _, est = ht_draw(seed * draws + i)
        for l in per_l:
            per_l[l].append(est.get(l, 0.0))
    checks = []
    for l, vals in per_l.items():
        pol = rule.policies_[l]
        truth = ht_strategy1_truth(lambda c, pol=pol: pol(ContextPoint(c)))
        checks.append(_mc_check(f"R{l}", vals, truth))
    return checks


# -- schedules -------------------------------------------------------------------------

def scenario_period_schedule(max_p: int = 6, max_log_t: int = 20) -> list[dict]:
    bad = 0
    checked = 0
    limit = 1 << max_log_t
    for p in range(max_p + 1):
        q = p << p
        while True:
            k, i = divmod(q, 1 << p)
            direct = Fraction(2) ** k + Fraction(i, 2 ** p) * Fraction(2) ** k
            if direct > limit:
                break
            got = period_start(p, q)
            checked += 1
            if direct.denominator != 1 or got != direct:
                bad += 1
            elif period_of(p, got) != q:
                bad += 1
            q += 1
    return [{"name": "T_p^q direct re-evaluation", "checked": checked, "mismatches": bad,
             "passed": bad == 0 and checked > 0}]


def scenario_expinf_schedule(horizon: int = 100000) -> list[dict]:
    bad = 0
    i = 1
    start = 1
    for t in range(1, horizon + 1):
        if t >= start + i ** 3:
            start += i ** 3
            i += 1
        if expinf_period_of(t) != i:
            bad += 1
    lengths_ok = all(cube_sum(j) - cube_sum(j - 1) == j ** 3 for j in range(1, 200))
    return [{"name": "period index vs cube lengths", "checked": horizon, "mismatches": bad,
             "passed": bad == 0 and lengths_ok}]


# -- diagnostics -----------------------------------------------------------------------

def _random_trace(rng: SeededRng, length: int) -> list[ContextPoint]:
    n = 1 + rng.integers(20)
    return [ContextPoint(rng.integers(n)) for _ in range(length)]


def brute_dedup(ids: list, max_dup: int) -> list[int]:
    return [t + 1 for t in range(len(ids))
            if sum(1 for s in range(t + 1) if ids[s] == ids[t]) <= max_dup]


def brute_infrequent(ids: list, cells: list, need: Callable) -> float:
    hits = 0
    for t in range(len(ids)):
        prior = {ids[s] for s in range(t) if cells[s] == cells[t]}
        hits += len(prior) < need(cells[t])
    return hits / len(ids)


def scenario_dedup_brute(traces: int = 50, length: int = 200, seed: int = 0) -> list[dict]:
    rng = SeededRng(seed).spawn("dedup-brute")
    bad = 0
    for _ in range(traces):
        tr = _random_trace(rng, length)
        ids = [x.id for x in tr]
        for m in (1, 2, 3, 5, 8, length):
            if dedup_times(tr, m) != brute_dedup(ids, m):
                bad += 1
    return [{"name": "dedup_times vs quadratic count", "mismatches": bad, "passed": bad == 0}]


def scenario_infrequent_brute(traces: int = 50, length: int = 200, seed: int = 0) -> list[dict]:
    rng = SeededRng(seed).spawn("infrequent-brute")
    bad = 0
    for _ in range(traces):
        tr = _random_trace(rng, length)
        mod = 1 + rng.integers(5)
        thresholds = {c: rng.integers(4) for c in range(mod)}
        part = lambda x, mod=mod: x.id % mod  # noqa: E731
        got = infrequent_mass(tr, part, thresholds)
        want = brute_infrequent([x.id for x in tr], [part(x) for x in tr], thresholds.__getitem__)
        bad += got != want
    return [{"name": "infrequent_mass vs quadratic count", "mismatches": bad, "passed": bad == 0}]


def scenario_exp3_unbiased(draws: int = 100000, seed: int = 0) -> list[dict]:
    rewards = (0.3, 0.8, 0.55, 0.1)
    learner = Exp3(4, SeededRng(seed).spawn("exp3-unbiased"))
    learner.cum_loss = [0.0, 2.0, 1.0, 3.5]
    learner.t = 3
    probs = learner.probabilities()
    rng = learner.rng
    sums = [[] for _ in rewards]
    for _ in range(draws):
        arm = rng.choice(probs)
        est = Exp3.reward_estimates(probs, arm, rewards[arm])
        for i, e in enumerate(est):
            sums[i].append(e)
    return [_mc_check(f"arm {i}", vals, rewards[i]) for i, vals in enumerate(sums)]


SCENARIOS: dict[str, Callable[[], list]] = {
    "ht-estimator-strat0": scenario_ht_strat0,
    "ht-estimator-strat1": scenario_ht_strat1,
    "period-schedule": scenario_period_schedule,
    "expinf-schedule": scenario_expinf_schedule,
    "dedup-brute": scenario_dedup_brute,
    "infrequent-brute": scenario_infrequent_brute,
    "exp3-unbiased": scenario_exp3_unbiased,
}


def oracle_check(scenario: str) -> dict:
    try:
        fn = SCENARIOS[scenario]
    except KeyError:
        raise KeyError(f"unknown scenario {scenario!r}; known: {sorted(SCENARIOS)}") from None
    checks = fn()
    return {"scenario": scenario, "passed": all(c["passed"] for c in checks), "checks": checks}
