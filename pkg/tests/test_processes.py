import io

import pytest
from hypothesis import given
from hypothesis import strategies as st

from univbandit.core import ContextPoint, SeededRng
from univbandit.processes import (DeterministicWalk, FiniteSupport, IidFinite, IidFresh,
                                  MarkovChain, Partition, dedup_times, distinct_cell_curve,
                                  empirical_submeasure, geometric_grid, infrequent_mass,
                                  make_process, max_multiplicity, read_trace, trace_to_text,
                                  write_trace)

ABAA = [ContextPoint(i) for i in (0, 1, 0, 0)]
id_lists = st.lists(st.integers(0, 8), min_size=1, max_size=120)


def points(ids):
    return [ContextPoint(i) for i in ids]


class TestGenerators:
    def test_iid_finite_weights_checked(self):
        with pytest.raises(ValueError):
            IidFinite([0.5, 0.6])
        assert IidFinite(n=4).weights.sum() == pytest.approx(1.0)

    def test_markov_rows_checked(self):
        with pytest.raises(ValueError):
            MarkovChain([[0.5, 0.4], [0.5, 0.5]])

    def test_markov_respects_zero_transitions(self):
        chain = MarkovChain([[0.0, 1.0], [1.0, 0.0]], initial=[1.0, 0.0])
        ids = [x.id for x in chain.generate(50, SeededRng(0))]
        assert ids == [0, 1] * 25

    def test_fresh_is_duplicate_free(self):
        trace = IidFresh(dim=2).generate(500, SeededRng(1))
        assert max_multiplicity(trace) == 1
        assert all(len(x.coords) == 2 and 0 <= min(x.coords) for x in trace)

    def test_walk(self):
        assert [x.id for x in DeterministicWalk().generate(4, None)] == [1, 2, 3, 4]

    def test_finite_support_cycle(self):
        gen = FiniteSupport([5, 9], law="cycle")
        assert [x.id for x in gen.generate(5, SeededRng(0))] == [5, 9, 5, 9, 5]

    def test_seeded_and_serializable(self):
        gen = make_process({"kind": "iid_finite", "n": 5})
        a = [x.id for x in gen.generate(100, SeededRng(3))]
        b = [x.id for x in make_process(gen.to_dict()).generate(100, SeededRng(3))]
        assert a == b

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_process({"kind": "brownian"})


class TestPartition:
    def test_kinds(self):
        x = ContextPoint(7, (0.55,))
        assert Partition("identity")(x) == 7
        assert Partition("modulo", n=3)(x) == 1
        assert Partition("grid", n=4)(x) == 2
        assert Partition("single")(x) == 0
        assert Partition("table", table={7: 2})(x) == 2

    def test_table_miss(self):
        with pytest.raises(KeyError):
            Partition("table", table={1: 0})(ContextPoint(2))

    def test_roundtrip(self):
        part = Partition("table", table={1: 0, 4: 2}, default=1)
        assert Partition.from_dict(part.to_dict()).to_dict() == part.to_dict()


class TestDedup:
    def test_examples(self):
        assert dedup_times(ABAA, 1) == [1, 2]
        assert dedup_times(ABAA, 2) == [1, 2, 3]

    def test_duplicate_free(self):
        trace = points(range(30))
        assert dedup_times(trace, 1) == list(range(1, 31))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            dedup_times(ABAA, 0)

    @given(id_lists, st.integers(1, 10))
    def test_nested_and_saturating(self, ids, m):
        small, big = set(dedup_times(ids, m)), set(dedup_times(ids, m + 1))
        assert small <= big
        assert dedup_times(ids, max_multiplicity(ids)) == list(range(1, len(ids) + 1))

    @given(id_lists)
    def test_first_occurrences_are_distinct(self, ids):
        kept = [ids[t - 1] for t in dedup_times(ids, 1)]
        assert len(kept) == len(set(kept)) == len(set(ids))


class TestDistinctCells:
    def test_walk_ratio_one(self):
        trace = DeterministicWalk().generate(1000)
        assert all(r == 1.0 for _, r in distinct_cell_curve(trace, Partition()))

    def test_single_cell(self):
        trace = points([3, 1, 4, 1, 5])
        assert distinct_cell_curve(trace, Partition("single"), [1, 2, 5]) == [(1, 1.0), (2, 0.5), (5, 0.2)]

    def test_iid_finite_vanishes(self):
        trace = IidFinite(n=32).generate(10_000, SeededRng(0))
        (_, ratio), = distinct_cell_curve(trace, Partition(), [10_000])
        assert ratio < 0.01

    def test_iid_five_bound(self):
        trace = IidFinite(n=5).generate(2000, SeededRng(4))
        assert all(r <= 5 / t for t, r in distinct_cell_curve(trace, Partition()))

    def test_grid_bounds(self):
        with pytest.raises(ValueError):
            distinct_cell_curve(ABAA, Partition(), [5])

    def test_geometric_grid(self):
        assert geometric_grid(10) == [1, 2, 4, 8, 10]


class TestSubmeasure:
    def test_everything_and_nothing(self):
        trace = points([1, 2, 3, 1])
        assert empirical_submeasure(trace, lambda x: True, [1, 2, 4]) == 1.0
        assert empirical_submeasure(trace, lambda x: False, [1, 2, 4]) == 0.0

    def test_alternating(self):
        trace = points([0, 1] * 50)
        assert empirical_submeasure(trace, lambda x: x.id == 0, range(2, 101, 2)) == 0.5

    def test_empty_window(self):
        with pytest.raises(ValueError):
            empirical_submeasure(ABAA, lambda x: True, [])


class TestInfrequentMass:
    def test_zero_thresholds(self):
        assert infrequent_mass(ABAA, Partition(), lambda c: 0) == 0.0

    def test_walk_all_first_visits(self):
        trace = DeterministicWalk().generate(500)
        assert infrequent_mass(trace, Partition(), lambda c: 1) == 1.0

    def test_iid_three(self):
        trace = IidFinite(n=3).generate(10_000, SeededRng(8))
        assert infrequent_mass(trace, Partition(), {0: 1, 1: 1, 2: 1}) <= 3 / 10_000

    def test_missing_threshold(self):
        with pytest.raises(ValueError, match="no threshold"):
            infrequent_mass(ABAA, Partition(), {0: 1})

    def test_counts_distinct_contexts_not_visits(self):
        trace = points([0, 0, 2, 2, 4])
        # cell 0 under mod 2; distinct prior contexts before each round: 0, 1, 1, 2, 2
        assert infrequent_mass(trace, Partition("modulo", n=2), {0: 2}) == 3 / 5


class TestTraceIO:
    def test_roundtrip_file(self, tmp_path):
        trace = points([4, 4, 0, 17])
        path = tmp_path / "trace.tsv"
        write_trace(trace, path)
        assert path.read_text().splitlines()[0] == "t\tcontext_id"
        assert [x.id for x in read_trace(path)] == [4, 4, 0, 17]

    @given(id_lists)
    def test_roundtrip_text(self, ids):
        text = trace_to_text(points(ids))
        assert [x.id for x in read_trace(io.StringIO(text))] == ids

    def test_comments_and_blank_lines(self):
        text = "# made by hand\nt\tcontext_id\n1\t3\n\n2\t3\n"
        assert [x.id for x in read_trace(io.StringIO(text))] == [3, 3]

    @pytest.mark.parametrize("text", [
        "time\tid\n1\t0\n",
        "t\tcontext_id\n2\t0\n",
        "t\tcontext_id\n1\tx\n",
        "t\tcontext_id\n1\t0\t5\n",
        "",
    ])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            read_trace(io.StringIO(text))
