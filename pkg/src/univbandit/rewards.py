"""Reward mechanisms with exact mean oracles, and the optimal-policy table.

Every mechanism depends on the context only through its cell, so callers may
cache per-cell mean vectors (see ``cell_of``).
"""

from __future__ import annotations

import math
import sys
from typing import Optional, Sequence

from .core import ActionSpace, ContextPoint, RewardSample, SeededRng, lex_argmax
from .processes import Partition


class RewardMechanism:
    kind = "base"
    bounded = True
    deterministic = False

    def __init__(self, partition: Optional[Partition] = None):
        self.partition = partition or Partition("identity")

    def cell_of(self, x: ContextPoint) -> int:
        return self.partition(x)

    def _check_action(self, a: int) -> None:
        raise NotImplementedError

    def mean(self, a: int, x: ContextPoint) -> float:
        raise NotImplementedError

    def mean_vector(self, x: ContextPoint, actions: Sequence[int]) -> list[float]:
        return [self.mean(a, x) for a in actions]

    def sample_value(self, a: int, x: ContextPoint, rng: SeededRng) -> float:
        raise NotImplementedError

    def sample_given_mean(self, a: int, x: ContextPoint, mean: float, rng: SeededRng) -> float:
        """Like ``sample_value`` when the caller already knows ``mean(a, x)``."""
        return self.sample_value(a, x, rng)

    def sample(self, a: int, x: ContextPoint, rng: SeededRng) -> RewardSample:
        return RewardSample(self.sample_value(a, x, rng), self.bounded)

    def to_dict(self) -> dict:
        raise NotImplementedError


class BernoulliTable(RewardMechanism):
    """Bernoulli rewards with means ``means[cell][action]``."""

    kind = "bernoulli_table"

    def __init__(self, means: Sequence[Sequence[float]], partition: Optional[Partition] = None):
        super().__init__(partition)
        table = [[float(m) for m in row] for row in means]
        if not table or any(len(row) != len(table[0]) for row in table) or not table[0]:
            raise ValueError("means must be a nonempty rectangular table")
        for row in table:
            for m in row:
                if not 0.0 <= m <= 1.0:
                    raise ValueError(f"Bernoulli mean {m} outside [0, 1]")
        self.means = table
        self.n_actions = len(table[0])

    def _row(self, x):
        cell = self.cell_of(x)
        if not 0 <= cell < len(self.means):
            raise ValueError(f"context {x.id} maps to cell {cell} outside the table")
        return self.means[cell]

    def _check_action(self, a):
        if not 0 <= a < self.n_actions:
            raise ValueError(f"action {a} outside the table")

    def mean(self, a, x):
        self._check_action(a)
        return self._row(x)[a]

    def sample_value(self, a, x, rng):
        return 1.0 if rng.random() < self.mean(a, x) else 0.0

    def sample_given_mean(self, a, x, mean, rng):
        return 1.0 if rng.random() < mean else 0.0

    def to_dict(self):
        return {"kind": self.kind, "means": self.means, "partition": self.partition.to_dict()}


class Needle(RewardMechanism):
    """Deterministic ``1[a = target(cell)]``.

    Targets come from ``targets`` (one per cell) or, when omitted, are drawn per
    cell uniformly from ``choices`` with a seeded substream, so unboundedly many
    cells each get a fresh hidden target.
    """

    kind = "needle"
    deterministic = True

    def __init__(self, n_actions: int, targets: Optional[Sequence[int]] = None,
                 choices: Optional[Sequence[int]] = None, seed: int = 0,
                 partition: Optional[Partition] = None):
        super().__init__(partition)
        if n_actions is not None and n_actions < 1:
            raise ValueError("n_actions must be >= 1")
        self.n_actions = n_actions
        self.targets = None if targets is None else [int(a) for a in targets]
        self.choices = list(range(min(4, n_actions or 4))) if choices is None else [int(a) for a in choices]
        if not self.choices:
            raise ValueError("needle choices must be nonempty")
        self.seed = seed
        self._rng = SeededRng(seed).spawn("needle")
        self._drawn: dict[int, int] = {}
        for a in (self.targets or []) + self.choices:
            self._check_action(a)

    def _check_action(self, a):
        if a < 0 or (self.n_actions is not None and a >= self.n_actions):
            raise ValueError(f"action {a} outside the action space")

    def target(self, cell: int) -> int:
        if self.targets is not None:
            if not 0 <= cell < len(self.targets):
                raise ValueError(f"no needle target for cell {cell}")
            return self.targets[cell]
        got = self._drawn.get(cell)
        if got is None:
            u = self._rng.uniform_at(cell)
            got = self._drawn[cell] = self.choices[int(u * len(self.choices))]
        return got

    def mean(self, a, x):
        self._check_action(a)
        return 1.0 if a == self.target(self.cell_of(x)) else 0.0

    def mean_vector(self, x, actions):
        target = self.target(self.cell_of(x))
        n = self.n_actions
        out = []
        for a in actions:
            if a < 0 or (n is not None and a >= n):
                self._check_action(a)
            out.append(1.0 if a == target else 0.0)
        return out

    def sample_value(self, a, x, rng):
        return self.mean(a, x)

    def to_dict(self):
        out = {"kind": self.kind, "n_actions": self.n_actions, "choices": self.choices,
               "seed": self.seed, "partition": self.partition.to_dict()}
        if self.targets is not None:
            out["targets"] = self.targets
        return out


class _MetricMechanism(RewardMechanism):
    def __init__(self, actions: ActionSpace, partition: Optional[Partition]):
        super().__init__(partition)
        if actions.kind != "metric":
            raise ValueError(f"{self.kind} needs a metric candidate action space")
        self.actions = actions

    def _check_action(self, a):
        if not 0 <= a < self.actions.size:
            raise ValueError(f"action {a} outside the candidate set")


class TentContinuous(_MetricMechanism):
    """Deterministic tent ``max(0, 1 - 2 d(a, target_i) / eps_i)`` per cell.

    ``needle_sets[i]`` lists the candidate indices the cell's target is drawn
    from; ``eps_i`` is their minimum pairwise distance, so tents of distinct
    needles never overlap.
    """

    kind = "tent_continuous"
    deterministic = True

    def __init__(self, actions: ActionSpace, needle_sets: Sequence[Sequence[int]],
                 targets: Optional[Sequence[int]] = None, seed: int = 0,
                 partition: Optional[Partition] = None):
        super().__init__(actions, partition)
        self.needle_sets = [[int(a) for a in s] for s in needle_sets]
        if not self.needle_sets:
            raise ValueError("needle_sets must be nonempty")
        self.epsilons = []
        for s in self.needle_sets:
            if len(s) < 2:
                raise ValueError("each needle set needs at least 2 actions")
            for a in s:
                self._check_action(a)
            eps = min(actions.distance(a, b) for i, a in enumerate(s) for b in s[i + 1:])
            if eps <= 0:
                raise ValueError("needle set contains duplicate actions")
            self.epsilons.append(eps)
        self.seed = seed
        if targets is None:
            rng = SeededRng(seed)
            targets = [s[rng.spawn("tent", i).integers(len(s))] for i, s in enumerate(self.needle_sets)]
        self.targets = [int(a) for a in targets]
        if len(self.targets) != len(self.needle_sets):
            raise ValueError("one target per needle set is required")
        for a, s in zip(self.targets, self.needle_sets):
            if a not in s:
                raise ValueError(f"target {a} is not in its needle set {s}")

    def _cell(self, x):
        cell = self.cell_of(x)
        if not 0 <= cell < len(self.targets):
            raise ValueError(f"context {x.id} maps to cell {cell} without a tent")
        return cell

    def mean(self, a, x):
        self._check_action(a)
        cell = self._cell(x)
        d = self.actions.distance(a, self.targets[cell])
        return max(0.0, 1.0 - 2.0 * d / self.epsilons[cell])

    def sample_value(self, a, x, rng):
        return self.mean(a, x)

    def to_dict(self):
        return {"kind": self.kind, "needle_sets": self.needle_sets, "targets": self.targets,
                "seed": self.seed, "partition": self.partition.to_dict()}


def magnitude_preset(times: Sequence[float]) -> list[float]:
    """``M_1 = 2 T_1``, ``M_{i+1} = 2 T_{i+1} + 4 T_{i+1} sum_{j<=i} M_j``.

    Raises OverflowError once a magnitude leaves the float range.
    """
    out: list[float] = []
    total = 0.0
    for i, t in enumerate(times):
        m = 2.0 * t if i == 0 else 2.0 * t + 4.0 * t * total
        if not math.isfinite(m) or m > sys.float_info.max:
            raise OverflowError(f"magnitude M_{i + 1} exceeds the float range")
        out.append(m)
        total += m
    return out


class ZeroMeanUnbounded(_MetricMechanism):
    """``M_i (1 +/- s(a))`` with probability 1/2 each, ``s(a) = min(d(a, a0), d(a0, a1)) / d(a0, a1)``.

    The mean is ``M_i`` for every action, so no action is better than another,
    while single draws can swing by ``+/- M_i`` away from the anchor ``a0``.
    """

    kind = "zero_mean_unbounded"
    bounded = False

    def __init__(self, actions: ActionSpace, magnitudes: Optional[Sequence[float]] = None,
                 anchors: Sequence[int] = (0, 1), times: Optional[Sequence[float]] = None,
                 partition: Optional[Partition] = None):
        super().__init__(actions, partition)
        if (magnitudes is None) == (times is None):
            raise ValueError("give exactly one of magnitudes or times (for the recursive preset)")
        self.times = None if times is None else [float(t) for t in times]
        self.magnitudes = [float(m) for m in magnitudes] if magnitudes is not None else magnitude_preset(self.times)
        for m in self.magnitudes:
            if not (m >= 0 and math.isfinite(m)):
                raise ValueError(f"magnitude {m} must be finite and nonnegative")
        a0, a1 = (int(a) for a in anchors)
        self._check_action(a0)
        self._check_action(a1)
        self.anchors = (a0, a1)
        self._span = actions.distance(a0, a1)
        if self._span <= 0:
            raise ValueError("anchor actions must be distinct")

    def _magnitude(self, x):
        cell = self.cell_of(x)
        if not 0 <= cell < len(self.magnitudes):
            raise ValueError(f"context {x.id} maps to cell {cell} without a magnitude")
        return self.magnitudes[cell]

    def swing(self, a: int) -> float:
        self._check_action(a)
        return min(self.actions.distance(a, self.anchors[0]), self._span) / self._span

    def mean(self, a, x):
        self._check_action(a)
        return self._magnitude(x)

    def sample_value(self, a, x, rng):
        m = self._magnitude(x)
        s = self.swing(a)
        return m * (1.0 + s) if rng.random() < 0.5 else m * (1.0 - s)

    def to_dict(self):
        out = {"kind": self.kind, "anchors": list(self.anchors), "partition": self.partition.to_dict()}
        if self.times is not None:
            out["times"] = self.times
        else:
            out["magnitudes"] = self.magnitudes
        return out


class LipschitzUC(_MetricMechanism):
    """Bernoulli rewards with mean ``max(0, 1 - slope * d(a, peak_cell))``.

    ``peaks[i]`` is a point in the action metric space; the mean is
    ``slope``-Lipschitz in the action, which is the declared modulus.
    """

    kind = "lipschitz_uc"

    def __init__(self, actions: ActionSpace, peaks: Sequence[Sequence[float]], slope: float = 1.0,
                 partition: Optional[Partition] = None):
        super().__init__(actions, partition)
        if not slope > 0:
            raise ValueError("slope must be positive")
        self.peaks = [tuple(float(c) for c in p) for p in peaks]
        if not self.peaks:
            raise ValueError("peaks must be nonempty")
        self.slope = float(slope)

    def modulus(self, d: float) -> float:
        return self.slope * d

    def mean(self, a, x):
        self._check_action(a)
        cell = self.cell_of(x)
        if not 0 <= cell < len(self.peaks):
            raise ValueError(f"context {x.id} maps to cell {cell} without a peak")
        d = self.actions.distance_fn(self.actions.points[a], self.peaks[cell])
        return max(0.0, 1.0 - self.slope * d)

    def sample_value(self, a, x, rng):
        return 1.0 if rng.random() < self.mean(a, x) else 0.0

    def sample_given_mean(self, a, x, mean, rng):
        return 1.0 if rng.random() < mean else 0.0

    def to_dict(self):
        return {"kind": self.kind, "peaks": [list(p) for p in self.peaks], "slope": self.slope,
                "partition": self.partition.to_dict()}


def make_mechanism(spec: dict, actions: ActionSpace) -> RewardMechanism:
    spec = dict(spec)
    kind = spec.pop("kind")
    part = Partition.from_dict(spec.pop("partition", None))
    if kind == "bernoulli_table":
        mech = BernoulliTable(partition=part, **spec)
        if actions.size is not None and mech.n_actions != actions.size:
            raise ValueError("bernoulli_table width differs from the action count")
        return mech
    if kind == "needle":
        spec.setdefault("n_actions", actions.size)
        return Needle(partition=part, **spec)
    if kind == "tent_continuous":
        return TentContinuous(actions, partition=part, **spec)
    if kind == "zero_mean_unbounded":
        return ZeroMeanUnbounded(actions, partition=part, **spec)
    if kind == "lipschitz_uc":
        return LipschitzUC(actions, partition=part, **spec)
    raise ValueError(f"unknown reward mechanism {kind!r}")


def optimal_policy(mech: RewardMechanism, contexts: Sequence[ContextPoint],
                   actions: Sequence[int]) -> dict[int, int]:
    """Table ``context id -> argmax_a mean(a, x)`` with ties to the smallest action."""
    actions = list(actions)
    return {x.id: lex_argmax([mech.mean(a, x) for a in actions], actions) for x in contexts}
