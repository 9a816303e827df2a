"""A concrete countable family of finite-support policies, enumerated diagonally.

Policy ``l`` assigns actions from the prefix ``A_m = {0..m-1}`` to the first
``s`` context keys and plays action 0 everywhere else. Codes are ordered by
``s + m`` and then lexicographically, and only canonical codes are kept (the
last coded key is not the default action and action ``m-1`` is used), so every
finite-support map appears exactly once.
"""

from __future__ import annotations

import itertools
from typing import Callable, Iterator, Optional, Sequence

from .core import ContextPoint


def identity_key(x: ContextPoint) -> int:
    return x.id


def _canonical_codes(n_contexts: Optional[int], n_actions: Optional[int]) -> Iterator[tuple]:
    yield ()
    if n_actions == 1:
        return
    d = 2
    while True:
        if n_contexts is not None and n_actions is not None and d > n_contexts + n_actions:
            return
        s_max = d - 1 if n_contexts is None else min(d - 1, n_contexts)
        for s in range(1, s_max + 1):
            m = d - s
            if m < 2 or (n_actions is not None and m > n_actions):
                continue
            top = m - 1
            for code in itertools.product(range(m), repeat=s):
                if code[-1] != 0 and top in code:
                    yield code
        d += 1


class _CodeTable:
    __slots__ = ("codes", "_gen", "exhausted")

    def __init__(self, n_contexts, n_actions):
        self.codes: list[tuple] = []
        self._gen = _canonical_codes(n_contexts, n_actions)
        self.exhausted = False

    def get(self, l: int) -> tuple:
        while len(self.codes) < l and not self.exhausted:
            try:
                self.codes.append(next(self._gen))
            except StopIteration:
                self.exhausted = True
        if l <= len(self.codes):
            return self.codes[l - 1]
        # finite family: wrap around so the enumeration stays total
        return self.codes[(l - 1) % len(self.codes)]

    def size(self) -> Optional[int]:
        if not self.exhausted:
            return None
        return len(self.codes)


_TABLES: dict[tuple, _CodeTable] = {}


def _table(n_contexts, n_actions) -> _CodeTable:
    key = (n_contexts, n_actions)
    tab = _TABLES.get(key)
    if tab is None:
        tab = _TABLES[key] = _CodeTable(n_contexts, n_actions)
    return tab


class Policy:
    """Finite-support policy: ``code[key(x)]`` on the support, action 0 elsewhere."""

    __slots__ = ("index", "code", "key")

    def __init__(self, index: int, code: tuple, key: Callable = identity_key):
        self.index = index
        self.code = code
        self.key = key

    def evaluate(self, x: ContextPoint) -> int:
        k = self.key(x)
        if 0 <= k < len(self.code):
            return self.code[k]
        return 0

    __call__ = evaluate

    def __eq__(self, other):
        return isinstance(other, Policy) and self.code == other.code

    def __hash__(self):
        return hash(self.code)

    def __repr__(self):
        return f"Policy(index={self.index}, code={self.code})"


class PolicyEnumeration:
    """Indexed family ``l -> policy``, stable across processes and runs.

    Parameters
    ----------
    n_contexts : int or None
        Size of the context key domain (None for a countable domain).
    n_actions : int or None
        Number of actions (None for a countable action sequence).
    key : callable
        Maps a context to its nonnegative integer key; defaults to the context id.
    """

    def __init__(self, n_contexts: Optional[int] = None, n_actions: Optional[int] = None,
                 key: Callable = identity_key):
        if n_contexts is not None and n_contexts < 1:
            raise ValueError("n_contexts must be positive")
        if n_actions is not None and n_actions < 1:
            raise ValueError("n_actions must be positive")
        self.n_contexts = n_contexts
        self.n_actions = n_actions
        self.key = key
        self._table = _table(n_contexts, n_actions)
        self._cache: dict[int, Policy] = {}

    def __getitem__(self, l: int) -> Policy:
        pol = self._cache.get(l)
        if pol is None:
            if l < 1:
                raise ValueError("policy indices start at 1")
            pol = self._cache[l] = Policy(l, self._table.get(l), self.key)
        return pol

    def size(self) -> Optional[int]:
        """Number of distinct policies when finite, else None."""
        if self.n_contexts is None or self.n_actions is None:
            return None
        # canonical codes are in bijection with all maps from keys to actions
        return self.n_actions ** self.n_contexts


def enumerate_policy(space, l: int) -> Policy:
    """Policy ``l`` of the enumeration for ``space`` (a PolicyEnumeration or a ``(n_contexts, n_actions)`` pair)."""
    if not isinstance(space, PolicyEnumeration):
        space = PolicyEnumeration(*space)
    return space[l]


def density_gap(policies: Sequence[Policy], target, trace: Sequence[ContextPoint]) -> float:
    """Smallest empirical disagreement frequency between ``target`` and any of ``policies``."""
    if len(policies) == 0:
        raise ValueError("need at least one policy")
    n = len(trace)
    if n == 0:
        raise ValueError("trace is empty")
    want = [target(x) for x in trace]
    best = 1.0
    for pol in policies:
        miss = sum(1 for x, a in zip(trace, want) if pol(x) != a)
        best = min(best, miss / n)
        if best == 0.0:
            break
    return best
