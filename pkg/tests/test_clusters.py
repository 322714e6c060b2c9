import numpy as np
import pytest

from socialrec.clusters import ClusterModel, kmeans, mine_clusters
from socialrec.data import ActivityLabels
from socialrec.errors import ConfigError


class TestKmeans:
    def test_separated_groups(self):
        x = np.array([[0.0], [0.1], [10.0], [10.1], [20.0], [20.2]])
        labels, centroids, inertia = kmeans(x, 3, seed=0)
        assert labels[0] == labels[1]
        assert labels[2] == labels[3]
        assert labels[4] == labels[5]
        assert len({labels[0], labels[2], labels[4]}) == 3
        assert inertia < 0.1

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(40, 3))
        a = kmeans(x, 4, seed=9)
        b = kmeans(x, 4, seed=9)
        assert np.array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    def test_too_many_clusters(self):
        with pytest.raises(ConfigError):
            kmeans(np.zeros((3, 2)), 5, seed=0)

    def test_every_cluster_nonempty(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 2))
        labels, _, _ = kmeans(x, 6, seed=3)
        assert set(labels.tolist()) == set(range(6))


def _two_cluster_fixture():
    """Items 0,1 near zero and 2,3 near ten; three users, one inactive."""
    item_features = np.array([[0.0], [0.1], [10.0], [10.1]])
    user_items = [
        np.array([0, 1]),  # u0 active: fully inside the low cluster
        np.array([0, 2]),  # u1 active: J = 1/3 with both clusters
        np.array([3]),     # u2 inactive
    ]
    labels = ActivityLabels(inactive=np.array([0, 0, 1], dtype=bool))
    return item_features, user_items, labels


class TestMineClusters:
    def test_assignment_and_tie_break(self):
        feats, user_items, labels = _two_cluster_fixture()
        model = mine_clusters(feats, user_items, labels, num_clusters=2, seed=0)
        low = model.item_cluster[0]
        high = model.item_cluster[2]
        assert low != high
        assert model.item_cluster[1] == low and model.item_cluster[3] == high
        # u0 overlaps the low cluster completely
        assert model.user_cluster[0] == low
        # u1 ties at 1/3 for both clusters: the lower index wins
        assert model.user_cluster[1] == min(low, high)
        # inactive users get no assignment
        assert model.user_cluster[2] == -1

    def test_anchor_is_best_overlap(self):
        feats, user_items, labels = _two_cluster_fixture()
        model = mine_clusters(feats, user_items, labels, num_clusters=2, seed=0)
        low = int(model.item_cluster[0])
        if model.user_cluster[1] == low:
            # both users compete for the low cluster; u0 wins with J=1
            assert model.anchor_users[low] == 0
            assert model.anchor_jaccard[low] == 1.0

    def test_fallback_anchor_for_empty_cluster(self):
        # all active users identical -> exactly one cluster gets members
        feats = np.array([[0.0], [0.1], [10.0], [10.1]])
        user_items = [np.array([0, 1]), np.array([0, 1])]
        labels = ActivityLabels(inactive=np.zeros(2, dtype=bool))
        model = mine_clusters(feats, user_items, labels, num_clusters=2, seed=0)
        assert (model.anchor_users >= 0).all()  # every cluster has an anchor
        assert model.anchor_users.size == 2

    def test_requires_active_user(self):
        feats = np.array([[0.0], [1.0]])
        labels = ActivityLabels(inactive=np.ones(1, dtype=bool))
        with pytest.raises(ConfigError, match="active"):
            mine_clusters(feats, [np.array([0])], labels, num_clusters=2, seed=0)

    def test_cluster_count_exceeds_items(self):
        feats = np.array([[0.0], [1.0]])
        labels = ActivityLabels(inactive=np.zeros(1, dtype=bool))
        with pytest.raises(ConfigError):
            mine_clusters(feats, [np.array([0])], labels, num_clusters=3, seed=0)

    def test_deterministic_on_synthetic(self, tiny_dataset):
        ds = tiny_dataset
        a = mine_clusters(ds.graph.item_features, ds.graph.user_items, ds.labels, 6, seed=4)
        b = mine_clusters(ds.graph.item_features, ds.graph.user_items, ds.labels, 6, seed=4)
        assert np.array_equal(a.item_cluster, b.item_cluster)
        assert np.array_equal(a.anchor_users, b.anchor_users)

    def test_anchor_attains_cluster_max(self, tiny_dataset):
        ds = tiny_dataset
        model = mine_clusters(ds.graph.item_features, ds.graph.user_items, ds.labels, 5, seed=2)
        from socialrec.analysis import jaccard

        for c in range(model.num_clusters):
            members = [u for u in ds.labels.active_ids() if model.user_cluster[u] == c]
            items_c = model.cluster_items(c)
            score = jaccard(ds.graph.user_items[int(model.anchor_users[c])], items_c)
            for u in members:
                assert score >= jaccard(ds.graph.user_items[u], items_c) - 1e-15
