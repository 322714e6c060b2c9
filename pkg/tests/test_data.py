import os

import numpy as np
import pytest

from socialrec.data import (
    GenConfig,
    InteractionGraph,
    SocialGraph,
    dataset_hash,
    generate_synthetic,
    label_activity,
    load_dataset,
    save_dataset,
    split_train_test,
)
from socialrec.errors import ConfigError, DataError


def _write(path, text):
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)


class TestLoadDataset:
    def test_basic_pairs(self, tmp_path):
        _write(tmp_path / "i.tsv", "0\t0\n0\t1\n1\t1\n")
        _write(tmp_path / "s.tsv", "")
        graph, social = load_dataset(str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"))
        assert graph.num_users == 2 and graph.num_items == 2
        assert graph.user_items[0].tolist() == [0, 1]
        assert graph.user_items[1].tolist() == [1]
        assert graph.item_users[1].tolist() == [0, 1]
        assert all(n.size == 0 for n in social.neighbors)

    def test_duplicate_lines_deduplicated(self, tmp_path):
        # 5-line fixture with one repeated pair; expected graph enumerated by hand
        _write(tmp_path / "i.tsv", "3\t7\n3\t7\n3\t9\n5\t7\n5\t9\n")
        _write(tmp_path / "s.tsv", "3\t5\n")
        graph, social = load_dataset(str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"))
        assert graph.num_users == 2 and graph.num_items == 2
        # original ids 3,5 -> 0,1 and 7,9 -> 0,1
        assert graph.user_ids.tolist() == [3, 5]
        assert graph.item_ids.tolist() == [7, 9]
        assert graph.user_items[0].tolist() == [0, 1]
        assert graph.user_items[1].tolist() == [0, 1]
        assert social.neighbors[0].tolist() == [1]
        assert social.neighbors[1].tolist() == [0]

    def test_comments_and_blanks(self, tmp_path):
        _write(tmp_path / "i.tsv", "# header\n\n0\t0  # trailing\n")
        _write(tmp_path / "s.tsv", "# nothing\n")
        graph, _ = load_dataset(str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"))
        assert graph.num_interactions() == 1

    def test_malformed_line_reports_lineno(self, tmp_path):
        _write(tmp_path / "i.tsv", "0\t0\nnot_an_id\t3\n")
        _write(tmp_path / "s.tsv", "")
        with pytest.raises(DataError, match="i.tsv:2"):
            load_dataset(str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"))

    def test_social_reference_error(self, tmp_path):
        _write(tmp_path / "i.tsv", "0\t0\n1\t0\n")
        _write(tmp_path / "s.tsv", "0\t9\n")
        with pytest.raises(DataError, match="absent from interactions"):
            load_dataset(str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"))

    def test_feature_file_extends_user_universe(self, tmp_path):
        _write(tmp_path / "i.tsv", "0\t0\n1\t0\n")
        _write(tmp_path / "u.tsv", "0\t1.0,0.0\n1\t0.0,1.0\n2\t0.5,0.5\n")
        _write(tmp_path / "s.tsv", "0\t2\n")
        graph, social = load_dataset(
            str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"), str(tmp_path / "u.tsv")
        )
        assert graph.num_users == 3
        assert graph.user_items[2].size == 0  # isolated in the bipartite graph
        assert social.neighbors[2].tolist() == [0]

    def test_one_hot_features_when_missing(self, tmp_path):
        _write(tmp_path / "i.tsv", "0\t0\n1\t1\n")
        _write(tmp_path / "s.tsv", "")
        graph, _ = load_dataset(str(tmp_path / "i.tsv"), str(tmp_path / "s.tsv"))
        assert np.array_equal(graph.user_features, np.eye(2))
        assert np.array_equal(graph.item_features, np.eye(2))


class TestReverseIndex:
    def test_round_trip_on_random_graphs(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            m, n = rng.integers(2, 20, size=2)
            user_items = [
                rng.choice(n, size=rng.integers(0, n), replace=False) for _ in range(m)
            ]
            g = InteractionGraph.from_user_items(m, n, user_items)
            g.validate()  # validate() rebuilds and compares the reverse index
            for i in range(n):
                expect = sorted(u for u in range(m) if i in set(g.user_items[u].tolist()))
                assert g.item_users[i].tolist() == expect


class TestLabelActivity:
    def test_threshold_below_is_inactive(self):
        g = InteractionGraph.from_user_items(2, 4, [np.array([0, 1]), np.array([0, 1, 2, 3])])
        labels = label_activity(g, threshold=3)
        assert labels.inactive.tolist() == [True, False]

    def test_threshold_one_means_everyone_active(self):
        g = InteractionGraph.from_user_items(2, 2, [np.array([0]), np.array([1])])
        labels = label_activity(g, threshold=1)
        assert not labels.inactive.any()

    def test_percentile_marks_smallest_degrees(self):
        # 10 users with distinct counts 1..10 -> p=0.3 marks the 3 smallest
        items = [np.arange(k + 1) for k in range(10)]
        g = InteractionGraph.from_user_items(10, 10, items)
        labels = label_activity(g, percentile=0.3)
        assert labels.inactive_ids().tolist() == [0, 1, 2]

    def test_percentile_out_of_range(self):
        g = InteractionGraph.from_user_items(1, 1, [np.array([0])])
        with pytest.raises(ConfigError):
            label_activity(g, percentile=1.5)

    def test_exactly_one_policy(self):
        g = InteractionGraph.from_user_items(1, 1, [np.array([0])])
        with pytest.raises(ConfigError):
            label_activity(g)
        with pytest.raises(ConfigError):
            label_activity(g, threshold=2, percentile=0.5)


class TestSplit:
    def test_single_interaction_stays_in_train(self):
        g = InteractionGraph.from_user_items(1, 3, [np.array([1])])
        split = split_train_test(g, 0.5, seed=0)
        assert split.train.user_items[0].tolist() == [1]
        assert split.test_items[0].size == 0

    def test_holdout_count_is_floor(self):
        g = InteractionGraph.from_user_items(1, 20, [np.arange(10)])
        split = split_train_test(g, 0.2, seed=0)
        assert split.test_items[0].size == 2
        assert split.train.user_items[0].size == 8

    def test_same_seed_same_split(self, tiny_dataset):
        a = split_train_test(tiny_dataset.graph, 0.2, seed=11)
        b = split_train_test(tiny_dataset.graph, 0.2, seed=11)
        for u in range(tiny_dataset.graph.num_users):
            assert np.array_equal(a.test_items[u], b.test_items[u])

    def test_disjoint_and_covering(self, tiny_dataset):
        split = split_train_test(tiny_dataset.graph, 0.3, seed=3)
        split.validate(original=tiny_dataset.graph)  # raises on violation


class TestGenerator:
    def test_q1_edges_all_within_topic(self):
        cfg = GenConfig(
            num_topics=2, subs_per_topic=1, users_per_topic=10, items_per_topic=10,
            active_range=(5, 8), inactive_range=(1, 2), inactive_threshold=3,
            social_quality=1.0, social_avg_degree=3.0, snapshots=False,
        )
        ds = generate_synthetic(cfg, seed=1)
        for u, v in ds.social.edges():
            assert ds.topics_of_users[u] == ds.topics_of_users[v]

    def test_q0_no_topic_constraint(self):
        cfg = GenConfig(
            num_topics=2, subs_per_topic=1, users_per_topic=30, items_per_topic=10,
            active_range=(5, 8), inactive_range=(1, 2), inactive_threshold=3,
            social_quality=0.0, social_avg_degree=4.0, snapshots=False,
        )
        ds = generate_synthetic(cfg, seed=1)
        cross = sum(
            1 for u, v in ds.social.edges() if ds.topics_of_users[u] != ds.topics_of_users[v]
        )
        assert cross > 0  # uniform pairs cross topics with high probability

    def test_default_config_invariants(self, tiny_dataset, tiny_gen_config):
        ds = tiny_dataset
        ds.graph.validate()
        ds.social.validate()
        m = ds.graph.num_users
        frac = ds.labels.inactive.mean()
        assert abs(frac - tiny_gen_config.inactive_fraction) <= 0.05
        counts = ds.graph.user_degrees()
        thr = tiny_gen_config.inactive_threshold
        assert (counts[ds.labels.inactive] < thr).all()
        assert (counts[~ds.labels.inactive] >= thr).all()

    def test_determinism_byte_identical_files(self, tmp_path, tiny_gen_config):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        save_dataset(str(d1), generate_synthetic(tiny_gen_config, seed=5))
        save_dataset(str(d2), generate_synthetic(tiny_gen_config, seed=5))
        for name in sorted(os.listdir(d1)):
            p1, p2 = d1 / name, d2 / name
            if p1.is_dir():
                for sub in sorted(os.listdir(p1)):
                    assert (p1 / sub).read_bytes() == (p2 / sub).read_bytes()
            else:
                assert p1.read_bytes() == p2.read_bytes()

    def test_roundtrip_through_loader(self, tmp_path, tiny_dataset):
        save_dataset(str(tmp_path), tiny_dataset)
        graph, social = load_dataset(
            str(tmp_path / "interactions.tsv"),
            str(tmp_path / "social.tsv"),
            str(tmp_path / "user_features.tsv"),
            str(tmp_path / "item_features.tsv"),
        )
        assert graph.num_users == tiny_dataset.graph.num_users
        assert graph.num_items == tiny_dataset.graph.num_items
        for u in range(graph.num_users):
            assert np.array_equal(graph.user_items[u], tiny_dataset.graph.user_items[u])
        assert dataset_hash(graph, social) == dataset_hash(tiny_dataset.graph, tiny_dataset.social)
        np.testing.assert_allclose(graph.item_features, tiny_dataset.graph.item_features)

    def test_infeasible_social_request(self):
        cfg = GenConfig(
            num_topics=1, subs_per_topic=1, users_per_topic=3, items_per_topic=10,
            active_range=(5, 8), inactive_range=(1, 2), inactive_threshold=3,
            social_quality=1.0, social_avg_degree=4.0, snapshots=False,
        )
        with pytest.raises(ConfigError, match="within-community"):
            generate_synthetic(cfg, seed=0)

    def test_snapshots_are_subsets(self, tiny_dataset):
        ds = tiny_dataset
        assert ds.interactions_t1 is not None and ds.social_t1 is not None
        for u in range(ds.graph.num_users):
            assert np.isin(ds.interactions_t1[u], ds.graph.user_items[u]).all()
        t2 = {(int(a), int(b)) for a, b in ds.social.edges()}
        for a, b in ds.social_t1.edges():
            assert (int(a), int(b)) in t2
        for a, b in ds.new_edges:
            key = (min(int(a), int(b)), max(int(a), int(b)))
            assert key in t2
