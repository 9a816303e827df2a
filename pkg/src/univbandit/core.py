"""Shared domain types, the learner contract, seeded randomness and metric helpers."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_INV_2_53 = 1.0 / (1 << 53)
_KEY_MUL = 0xD1B54A32D192ED03


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key_int(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode()) | (1 << 40)
    return int(part) & MASK64


class SeededRng:
    """Counter-based splitmix64 stream.

    Every draw is a pure function of ``(seed, counter)``, so streams are cheap
    to create and ``spawn`` gives independent substreams keyed by an identity
    tuple. Same seed, same calls, same numbers, on every platform.
    """

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & MASK64
        return _mix64(self._state)

    def random(self) -> float:
        """Uniform draw on [0, 1)."""
        z = self._state = (self._state + _GOLDEN) & MASK64
        # _mix64 inlined: this is the hottest call in every simulation
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return ((z ^ (z >> 31)) >> 11) * _INV_2_53

    def integers(self, n: int) -> int:
        """Uniform integer on ``{0, ..., n-1}``."""
        if n < 1:
            raise ValueError("integers() needs n >= 1")
        return int(self.random() * n)

    def choice(self, probs: Sequence[float]) -> int:
        """Index drawn from a probability vector by inverse CDF."""
        u = self.random()
        acc = 0.0
        last = len(probs) - 1
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        # float round-off: fall back to the last arm with positive mass
        while last > 0 and probs[last] <= 0.0:
            last -= 1
        return last

    def spawn(self, *key) -> "SeededRng":
        s = self.seed
        for part in key:
            k = part if part.__class__ is int else _key_int(part)
            s = _mix64(((s ^ (k * _KEY_MUL)) + _GOLDEN) & MASK64)
        return SeededRng(s)

    def uniform_at(self, *key) -> float:
        """First ``random()`` draw of ``spawn(*key)``, without building the stream."""
        s = self.seed
        for part in key:
            k = part if part.__class__ is int else _key_int(part)
            s = _mix64(((s ^ (k * _KEY_MUL)) + _GOLDEN) & MASK64)
        return (_mix64((s + _GOLDEN) & MASK64) >> 11) * _INV_2_53

    def numpy(self) -> np.random.Generator:
        """A numpy generator seeded from this stream (for vectorised sampling)."""
        return np.random.default_rng(self.next_u64())


class ContextPoint(NamedTuple):
    """A context value. Identity is the integer ``id``; ``coords`` are optional."""

    id: int
    coords: Optional[tuple] = None

    def __eq__(self, other):
        if isinstance(other, ContextPoint):
            return self.id == other.id
        return NotImplemented

    def __ne__(self, other):
        if isinstance(other, ContextPoint):
            return self.id != other.id
        return NotImplemented

    def __hash__(self):
        return hash(self.id)


@dataclass(frozen=True)
class RewardSample:
    value: float
    bounded: bool = True

    def __post_init__(self):
        v = self.value
        if not math.isfinite(v):
            raise ValueError(f"reward must be finite, got {v}")
        if v < 0.0:
            raise ValueError(f"reward must be nonnegative, got {v}")
        if self.bounded and v > 1.0:
            raise ValueError(f"bounded reward must lie in [0, 1], got {v}")

    def __float__(self):
        return float(self.value)


def euclidean(a, b) -> float:
    return math.dist(a, b)


class ActionSpace:
    """Finite list, countable enumeration, or finite metric candidate set.

    Actions are always referred to by their integer index.
    """

    def __init__(self, kind: str, n: Optional[int] = None, points=None,
                 distance: Optional[Callable] = None, prefix: Optional[int] = None,
                 labels: Optional[Callable] = None):
        self.kind = kind
        self._labels = labels
        if kind == "finite":
            if n is None or n < 2:
                raise ValueError("finite action space needs at least 2 actions")
            self.size = int(n)
            self.prefix = self.size
            self.points = None
            self.distance_fn = None
        elif kind == "countable":
            self.size = None
            self.prefix = int(prefix) if prefix is not None else 16
            if self.prefix < 1:
                raise ValueError("countable prefix must be >= 1")
            self.points = None
            self.distance_fn = None
        elif kind == "metric":
            pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in points]
            if not pts:
                raise ValueError("metric action space needs candidates")
            self.points = pts
            self.size = len(pts)
            self.prefix = self.size
            self.distance_fn = distance or euclidean
            self._check_metric()
        else:
            raise ValueError(f"unknown action space kind {kind!r}")

    @classmethod
    def finite(cls, n: int) -> "ActionSpace":
        return cls("finite", n=n)

    @classmethod
    def countable(cls, prefix: int = 16, labels: Optional[Callable] = None) -> "ActionSpace":
        return cls("countable", prefix=prefix, labels=labels)

    @classmethod
    def metric(cls, points, distance: Optional[Callable] = None) -> "ActionSpace":
        return cls("metric", points=points, distance=distance)

    def _check_metric(self):
        n = len(self.points)
        for i in range(n):
            for j in range(i, n):
                dij = self.distance_fn(self.points[i], self.points[j])
                dji = self.distance_fn(self.points[j], self.points[i])
                if not math.isfinite(dij) or dij < 0:
                    raise ValueError(f"distance({i},{j}) is not a nonnegative real")
                if abs(dij - dji) > 1e-12 * max(1.0, abs(dij)):
                    raise ValueError(f"distance is not symmetric on ({i},{j})")
                if (dij == 0.0) != (i == j):
                    raise ValueError(f"distance({i},{j}) = {dij} breaks identity of indiscernibles")

    @property
    def is_finite(self) -> bool:
        return self.size is not None

    def distance(self, i: int, j: int) -> float:
        if self.distance_fn is None:
            return 0.0 if i == j else 1.0
        return self.distance_fn(self.points[i], self.points[j])

    def eval_actions(self) -> range:
        """The finite list of actions used to evaluate optimal policies."""
        return range(self.prefix)

    def label(self, i: int):
        if self.points is not None:
            return self.points[i]
        return self._labels(i) if self._labels else i

    def __len__(self):
        if self.size is None:
            raise TypeError("countable action space has no length")
        return self.size

    def __repr__(self):
        return f"ActionSpace(kind={self.kind!r}, size={self.size}, prefix={self.prefix})"


def lex_argmax(values: Sequence[float], keys: Sequence[int]) -> int:
    """Key of the maximal value; ties go to the smallest key."""
    if len(values) == 0:
        raise ValueError("empty argmax")
    if len(values) != len(keys):
        raise ValueError("values and keys differ in length")
    best_v = values[0]
    best_k = keys[0]
    for v, k in zip(values, keys):
        if v > best_v or (v == best_v and k < best_k):
            best_v, best_k = v, k
    return best_k


def greedy_net(candidates: Sequence, distance: Callable, delta: float) -> list[int]:
    """Greedy ``delta``-net, scanning candidates in input order.

    A candidate is kept when it is farther than ``delta`` from every point kept
    so far, so kept points are pairwise > delta apart and every candidate is
    within delta of some kept point.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if len(candidates) == 0:
        raise ValueError("greedy_net needs at least one candidate")
    net: list[int] = []
    for i, c in enumerate(candidates):
        covered = False
        for j in net:
            d = distance(c, candidates[j])
            if not math.isfinite(d):
                raise ValueError(f"non-finite distance between candidates {i} and {j}")
            if d <= delta:
                covered = True
                break
        if not covered:
            net.append(i)
    return net


def check_nonnegative_reward(reward, bounded: bool = True) -> float:
    if reward.__class__ is float and 0.0 <= reward <= 1.0:
        return reward
    if isinstance(reward, RewardSample):
        r = reward.value
        bounded = bounded and reward.bounded
    else:
        r = float(reward)
    if not (r >= 0.0) or not math.isfinite(r):
        raise ValueError(f"reward must be a finite nonnegative number, got {r}")
    if bounded and r > 1.0:
        raise ValueError(f"reward must lie in [0, 1], got {r}")
    return r


class BaseLearner(BaseEstimator):
    """Learner contract shared by every rule.

    Subclasses store constructor arguments verbatim (so ``get_params`` and
    ``sklearn.base.clone`` work) and build their mutable state in ``reset``.
    Each round is ``select(context, t)`` followed by exactly one ``feed``.
    """

    name = "base"

    def reset(self, seed: Optional[int] = None):
        raise NotImplementedError

    def select(self, context: ContextPoint, t: Optional[int] = None) -> int:
        raise NotImplementedError

    def feed(self, reward) -> None:
        raise NotImplementedError

    def _begin_round(self, t: Optional[int]) -> int:
        if not hasattr(self, "t_"):
            self.reset()
        if self._pending:
            raise RuntimeError("select() called twice without feed()")
        expected = self.t_ + 1
        if t is not None and t != expected:
            raise ValueError(f"rounds must be fed in order: expected t={expected}, got t={t}")
        self.t_ = expected
        self._pending = True
        return expected

    def _end_round(self):
        if not getattr(self, "_pending", False):
            raise RuntimeError("feed() called without a pending select()")
        self._pending = False

    def round_info(self) -> dict:
        """Per-round fields for trace records (empty for context-free rules)."""
        return {}
