import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialrec.analysis import (
    CLASS_AC_AC,
    CLASS_INAC_AC,
    CLASS_INAC_INAC,
    CLASS_RAND,
    analyze_all,
    degree_distribution,
    jaccard,
    jaccard_delta,
    nonzero_jaccard_rate,
)
from socialrec.data import ActivityLabels, InteractionGraph, SocialGraph
from socialrec.errors import DataError


class TestJaccard:
    def test_identity(self):
        assert jaccard(np.array([1, 2, 3]), np.array([1, 2, 3])) == 1.0

    def test_disjoint(self):
        assert jaccard(np.array([1, 2]), np.array([3, 4])) == 0.0

    def test_half_overlap(self):
        # overlap {2,3} of 2 over union {1,2,3,4} of 4
        assert jaccard(np.array([1, 2, 3]), np.array([2, 3, 4])) == 0.5

    def test_both_empty(self):
        assert jaccard(np.array([]), np.array([])) == 0.0

    @given(
        st.sets(st.integers(0, 50)),
        st.sets(st.integers(0, 50)),
    )
    @settings(max_examples=60, deadline=None)
    def test_bounds_and_symmetry(self, a, b):
        x = jaccard(np.array(sorted(a)), np.array(sorted(b)))
        y = jaccard(np.array(sorted(b)), np.array(sorted(a)))
        assert 0.0 <= x <= 1.0
        assert x == y


def _fixture_eight_users():
    """Two edges per class, exactly one of them overlapping."""
    user_items = [
        np.array([0, 1]),   # u0 inactive
        np.array([1, 2]),   # u1 inactive; (0,1) overlaps at item 1
        np.array([3]),      # u2 inactive
        np.array([8]),      # u3 inactive
        np.array([2, 9]),   # u4 active; (1,4) overlaps at item 2
        np.array([4, 9]),   # u5 active; (4,5) overlaps at item 9
        np.array([6]),      # u6 active
        np.array([7]),      # u7 active
    ]
    graph = InteractionGraph.from_user_items(8, 10, user_items)
    edges = np.array([(0, 1), (0, 2), (1, 4), (2, 5), (4, 5), (6, 7)])
    social = SocialGraph.from_edges(8, edges)
    labels = ActivityLabels(inactive=np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=bool))
    return graph, social, labels


class TestNonzeroJaccardRate:
    def test_hand_fixture_half_rates(self):
        graph, social, labels = _fixture_eight_users()
        report = nonzero_jaccard_rate(social, graph, labels, seed=0)
        for cls in (CLASS_INAC_INAC, CLASS_INAC_AC, CLASS_AC_AC):
            assert report.classes[cls].pair_count == 2
            assert report.classes[cls].value == 0.5
        assert report.classes[CLASS_RAND].pair_count == 6

    def test_all_share_one_item(self):
        user_items = [np.array([0]) for _ in range(4)]
        graph = InteractionGraph.from_user_items(4, 1, user_items)
        social = SocialGraph.from_edges(4, np.array([(0, 1), (1, 2), (2, 3)]))
        labels = ActivityLabels(inactive=np.array([1, 1, 0, 0], dtype=bool))
        report = nonzero_jaccard_rate(social, graph, labels, seed=1)
        for cls in report.classes.values():
            if cls.pair_count:
                assert cls.value == 1.0

    def test_all_disjoint(self):
        user_items = [np.array([u]) for u in range(4)]
        graph = InteractionGraph.from_user_items(4, 4, user_items)
        social = SocialGraph.from_edges(4, np.array([(0, 1), (2, 3)]))
        labels = ActivityLabels(inactive=np.array([1, 0, 1, 0], dtype=bool))
        report = nonzero_jaccard_rate(social, graph, labels, seed=1)
        for cls in report.classes.values():
            if cls.pair_count:
                assert cls.value == 0.0

    def test_edge_order_invariance(self):
        graph, _, labels = _fixture_eight_users()
        edges = np.array([(0, 1), (0, 2), (1, 4), (2, 5), (4, 5), (6, 7)])
        a = nonzero_jaccard_rate(SocialGraph.from_edges(8, edges), graph, labels, seed=3)
        b = nonzero_jaccard_rate(SocialGraph.from_edges(8, edges[::-1]), graph, labels, seed=3)
        assert a.to_dict() == b.to_dict()

    def test_rand_rate_converges_to_enumerated_expectation(self, tiny_dataset):
        ds = tiny_dataset
        m = ds.graph.num_users
        # exact expectation: fraction of ordered pairs (u != v) with overlap
        overlap = 0
        for u in range(m):
            su = set(ds.graph.user_items[u].tolist())
            for v in range(m):
                if v != u and su & set(ds.graph.user_items[v].tolist()):
                    overlap += 1
        expected = overlap / (m * (m - 1))
        rates = [
            nonzero_jaccard_rate(ds.social, ds.graph, ds.labels, seed=s).classes[CLASS_RAND].value
            for s in range(20)
        ]
        rates = np.array(rates)
        se = rates.std(ddof=1) / np.sqrt(len(rates))
        assert abs(rates.mean() - expected) <= 3 * se + 1e-12


class TestDegreeDistribution:
    def test_all_isolated(self):
        social = SocialGraph(num_users=4, neighbors=[np.array([], dtype=np.int64)] * 4)
        labels = ActivityLabels(inactive=np.array([1, 1, 0, 0], dtype=bool))
        out = degree_distribution(social, labels)
        assert out["classes"]["inactive"]["fractions"][0] == 1.0
        assert out["classes"]["active"]["fractions"][0] == 1.0

    def test_one_user_per_bucket(self):
        # degrees 0, 1, 25, 60 against bounds (20, 50]; sizes fabricated
        neighbors = [
            np.array([], dtype=np.int64),
            np.array([0], dtype=np.int64),
            np.zeros(25, dtype=np.int64),
            np.zeros(60, dtype=np.int64),
        ]
        social = SocialGraph(num_users=4, neighbors=neighbors, symmetric=False)
        labels = ActivityLabels(inactive=np.zeros(4, dtype=bool))
        out = degree_distribution(social, labels, bucket_bounds=(20, 50))
        assert out["buckets"] == ["0", "(0, 20]", "(20, 50]", "(50, inf)"]
        assert out["classes"]["active"]["fractions"] == [0.25, 0.25, 0.25, 0.25]

    def test_fractions_sum_to_one(self, tiny_dataset):
        out = degree_distribution(tiny_dataset.social, tiny_dataset.labels)
        for cls in out["classes"].values():
            if cls["user_count"]:
                assert abs(sum(cls["fractions"]) - 1.0) <= 1e-12


class TestJaccardDelta:
    def test_unchanged_interactions_zero_delta(self):
        items = [np.array([0, 1]), np.array([1, 2]), np.array([5]), np.array([6])]
        labels = ActivityLabels(inactive=np.array([1, 0, 1, 0], dtype=bool))
        report = jaccard_delta(np.array([(0, 1), (2, 3)]), items, items, labels)
        for cls in report.classes.values():
            if cls.pair_count:
                assert cls.value == 0.0

    def test_gain_one_third(self):
        t1 = [np.array([1]), np.array([2])]
        t2 = [np.array([1, 3]), np.array([2, 3])]
        labels = ActivityLabels(inactive=np.array([0, 0], dtype=bool))
        report = jaccard_delta(np.array([(0, 1)]), t1, t2, labels)
        assert report.classes[CLASS_AC_AC].value == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_drop_half(self):
        t1 = [np.array([1, 2]), np.array([1, 2, 3, 4])]
        t2 = [np.array([1, 2]), np.array([3, 4, 5, 6])]
        labels = ActivityLabels(inactive=np.array([1, 0], dtype=bool))
        report = jaccard_delta(np.array([(0, 1)]), t1, t2, labels)
        assert report.classes[CLASS_INAC_AC].value == pytest.approx(-0.5, abs=1e-12)

    def test_edge_already_present_rejected(self):
        items = [np.array([0]), np.array([1])]
        labels = ActivityLabels(inactive=np.array([0, 0], dtype=bool))
        t1_graph = SocialGraph.from_edges(2, np.array([(0, 1)]))
        with pytest.raises(DataError, match="already present"):
            jaccard_delta(np.array([(0, 1)]), items, items, labels, edges_t1=t1_graph)


class TestAnalyzeAll:
    def test_bundle_with_snapshot(self, tiny_dataset):
        ds = tiny_dataset
        report = analyze_all(
            ds.graph, ds.social, ds.labels, seed=0,
            snapshot=(ds.interactions_t1, ds.social_t1),
        )
        assert set(report) == {"relation_quality", "degree_distribution", "new_edge_jaccard_delta"}
        delta = report["new_edge_jaccard_delta"]
        total_new = sum(delta["classes"][c]["pair_count"] for c in delta["classes"])
        assert total_new == len(ds.new_edges)
