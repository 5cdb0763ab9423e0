import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minshap import (
    DataError,
    Dataset,
    PermutationPlan,
    RngStream,
    all_permutations,
    order_statistics,
    read_csv,
    sample_permutations,
)


class TestDataset:
    def test_valid_construction(self):
        d = Dataset([[1.0, 2.0], [3.0, 4.0]], ("a", "b"), [1.0, 2.0])
        assert d.n == 2 and d.p == 2
        assert d.feature_names == ("a", "b")

    def test_rejects_nan(self):
        with pytest.raises(ValueError, match="non-finite"):
            Dataset([[1.0, np.nan], [3.0, 4.0]], ("a", "b"), [1.0, 2.0])
        with pytest.raises(ValueError, match="non-finite"):
            Dataset([[1.0, 2.0], [3.0, 4.0]], ("a", "b"), [np.inf, 2.0])

    def test_rejects_duplicate_names(self):
        with pytest.raises(ValueError, match="unique"):
            Dataset([[1.0, 2.0], [3.0, 4.0]], ("a", "a"), [1.0, 2.0])

    def test_rejects_too_small(self):
        with pytest.raises(ValueError):
            Dataset([[1.0]], ("a",), [1.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset([[1.0], [2.0]], ("a",), [1.0, 2.0, 3.0])

    def test_arrays_are_read_only(self):
        d = Dataset([[1.0], [2.0]], ("a",), [1.0, 2.0])
        with pytest.raises(ValueError):
            d.features[0, 0] = 9.0


class TestRngStream:
    def test_children_are_order_insensitive(self):
        a = RngStream(5).child("perm", 3)
        base = RngStream(5)
        base.child("perm", 0)  # deriving a sibling first changes nothing
        b = base.child("perm", 3)
        assert np.array_equal(a.generator().integers(0, 100, 10),
                              b.generator().integers(0, 100, 10))

    def test_distinct_keys_differ(self):
        r = RngStream(5)
        x = r.child("a", 0).generator().integers(0, 2**32, 8)
        y = r.child("b", 0).generator().integers(0, 2**32, 8)
        z = r.child("a", 1).generator().integers(0, 2**32, 8)
        assert not np.array_equal(x, y)
        assert not np.array_equal(x, z)

    def test_generator_restarts(self):
        r = RngStream(9).child("t")
        assert np.array_equal(r.generator().integers(0, 100, 5),
                              r.generator().integers(0, 100, 5))

    def test_seed_bounds(self):
        with pytest.raises(ValueError):
            RngStream(-1)
        with pytest.raises(ValueError):
            RngStream(2**64)


class TestSamplePermutations:
    def test_p1_gives_identity_rows(self):
        plan = sample_permutations(1, 3, RngStream(0))
        assert plan.perms.tolist() == [[0], [0], [0]]

    def test_rows_are_bijections(self):
        plan = sample_permutations(3, 6, RngStream(7))
        for row in plan.perms:
            assert sorted(row.tolist()) == [0, 1, 2]

    def test_deterministic_in_seed(self):
        a = sample_permutations(5, 10, RngStream(42))
        b = sample_permutations(5, 10, RngStream(42))
        assert np.array_equal(a.perms, b.perms)
        assert a.seed == b.seed == 42

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            sample_permutations(0, 3, RngStream(0))
        with pytest.raises(ValueError):
            sample_permutations(3, 0, RngStream(0))

    @given(p=st.integers(1, 12), k=st.integers(1, 8), seed=st.integers(0, 2**32))
    @settings(max_examples=40, deadline=None)
    def test_bijection_property(self, p, k, seed):
        plan = sample_permutations(p, k, RngStream(seed))
        expected_sum = p * (p - 1) // 2
        for row in plan.perms:
            assert row.sum() == expected_sum
            assert len(set(row.tolist())) == p

    def test_with_replacement_yields_duplicates(self):
        # 40 draws from the 6 orderings of 3 items must collide.
        plan = sample_permutations(3, 40, RngStream(1))
        rows = {tuple(r) for r in plan.perms.tolist()}
        assert len(rows) < 40


class TestPermutationPlan:
    def test_rejects_non_permutation(self):
        with pytest.raises(ValueError, match="not a permutation"):
            PermutationPlan([[0, 0, 1]])

    def test_explicit_plan_has_no_seed(self):
        plan = all_permutations(3)
        assert plan.seed is None
        assert plan.n_perms == 6

    def test_all_permutations_bounds(self):
        with pytest.raises(ValueError):
            all_permutations(9)
        assert all_permutations(1).perms.tolist() == [[0]]


class TestOrderStatistics:
    def test_basic(self):
        sorted_vals, order = order_statistics([3.0, 1.0, 2.0])
        assert sorted_vals.tolist() == [1.0, 2.0, 3.0]
        assert order.tolist() == [1, 2, 0]

    def test_tie_break_lower_index_first(self):
        sorted_vals, order = order_statistics([0.0, 0.0])
        assert sorted_vals.tolist() == [0.0, 0.0]
        assert order.tolist() == [0, 1]

    def test_singleton(self):
        sorted_vals, order = order_statistics([5.5])
        assert sorted_vals.tolist() == [5.5]
        assert order.tolist() == [0]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            order_statistics([])

    @given(st.lists(st.sampled_from([0.0, 1.0, 2.0]), min_size=1, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_stable_on_ties(self, values):
        _, order = order_statistics(values)
        # positions of equal values must appear in increasing original order
        for v in set(values):
            positions = [int(i) for i in order if values[int(i)] == v]
            assert positions == sorted(positions)

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_index_map_recovers_values(self, values):
        sorted_vals, order = order_statistics(values)
        assert [values[int(i)] for i in order] == sorted_vals.tolist()


class TestReadCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,y,b\n1.0,10.0,2.0\n3.0,20.0,4.0\n")
        d = read_csv(path, "y")
        assert d.feature_names == ("a", "b")
        assert d.features.tolist() == [[1.0, 2.0], [3.0, 4.0]]
        assert d.response.tolist() == [10.0, 20.0]

    def test_missing_response_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,4\n")
        with pytest.raises(DataError, match="no column named"):
            read_csv(path, "y")

    def test_bad_cell_reports_row_and_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,y\n1.0,2.0\noops,3.0\n")
        with pytest.raises(DataError, match=r"row 3, column 'a'"):
            read_csv(path, "y")

    def test_ragged_row_rejected(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,y\n1.0,2.0\n3.0\n")
        with pytest.raises(DataError, match="row 3"):
            read_csv(path, "y")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("")
        with pytest.raises(DataError, match="empty"):
            read_csv(path, "y")
