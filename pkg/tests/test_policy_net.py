import itertools

import pytest

from univbandit.core import ContextPoint
from univbandit.policy_net import PolicyEnumeration, density_gap, enumerate_policy

CONTEXTS = [ContextPoint(i) for i in range(6)]


def restriction(policy, n):
    return tuple(policy(ContextPoint(i)) for i in range(n))


def test_first_policy_is_constant_first_action():
    pol = enumerate_policy((None, None), 1)
    assert all(pol(x) == 0 for x in CONTEXTS)


def test_two_by_two_maps_within_twelve():
    fam = PolicyEnumeration(2, 2)
    maps = {restriction(fam[l], 2) for l in range(1, 13)}
    assert maps == set(itertools.product(range(2), repeat=2))


def test_finite_family_size_and_exhaustion():
    fam = PolicyEnumeration(3, 2)
    assert fam.size() == 8
    maps = {restriction(fam[l], 3) for l in range(1, 9)}
    assert len(maps) == 8


def test_default_outside_support():
    fam = PolicyEnumeration(None, None)
    for l in range(1, 200):
        pol = fam[l]
        assert pol(ContextPoint(len(pol.code) + 5)) == 0


def test_countable_family_distinct():
    fam = PolicyEnumeration(None, None)
    codes = [fam[l].code for l in range(1, 500)]
    assert len(set(codes)) == len(codes)


def test_stable_across_instances():
    a, b = PolicyEnumeration(None, 4), PolicyEnumeration(None, 4)
    assert [a[l].code for l in range(1, 300)] == [b[l].code for l in range(1, 300)]


def test_index_validation():
    with pytest.raises(ValueError):
        PolicyEnumeration(2, 2)[0]


class TestDensityGap:
    def test_target_first_policy(self):
        fam = PolicyEnumeration(3, 2)
        assert density_gap([fam[1]], fam[1], CONTEXTS[:3]) == 0.0

    def test_exhaustive_small_space(self):
        fam = PolicyEnumeration(3, 2)
        pols = [fam[l] for l in range(1, 25)]
        trace = CONTEXTS[:3] * 4
        for code in itertools.product(range(2), repeat=3):
            target = lambda x, code=code: code[x.id]  # noqa: E731
            assert density_gap(pols, target, trace) == 0.0

    def test_total_disagreement(self):
        fam = PolicyEnumeration(None, 2)
        trace = [ContextPoint(i) for i in range(10)]
        assert density_gap([fam[1]], lambda x: 1, trace) == 1.0

    def test_empty_inputs(self):
        fam = PolicyEnumeration(2, 2)
        with pytest.raises(ValueError):
            density_gap([], fam[1], CONTEXTS)
        with pytest.raises(ValueError):
            density_gap([fam[1]], fam[1], [])
