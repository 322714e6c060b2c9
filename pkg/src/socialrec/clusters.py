"""Interest-cluster mining: k-means over raw item features, best-cluster
assignment for active users by Jaccard overlap, and one anchor user per
cluster.

Mining depends only on raw features and train interactions, so it runs once
before training and stays frozen afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import ActivityLabels
from .errors import ConfigError
from .utils import rng_from_seed

logger = logging.getLogger(__name__)


def kmeans(
    features: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Plain k-means with k-means++ seeding.

    Stops when the relative inertia improvement drops to `tol` or after
    `max_iter` assignment rounds. Empty clusters are reseeded to the point
    farthest from its current centroid. Returns (labels, centroids, inertia).
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ConfigError(f"cannot form {k} clusters from {n} points")
    rng = rng_from_seed(seed, "kmeans")

    # k-means++ seeding
    centroids = np.empty((k, x.shape[1]), dtype=np.float64)
    first = int(rng.integers(n))
    centroids[0] = x[first]
    closest = np.sum((x - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[c] = x[int(rng.integers(n))]
            continue
        probs = closest / total
        pick = int(rng.choice(n, p=probs))
        centroids[c] = x[pick]
        closest = np.minimum(closest, np.sum((x - centroids[c]) ** 2, axis=1))

    labels = np.zeros(n, dtype=np.int64)
    prev_inertia = np.inf
    inertia = np.inf
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        for c in range(k):
            mask = labels == c
            if mask.any():
                centroids[c] = x[mask].mean(axis=0)
            else:
                # steal the point currently worst-represented by its centroid
                far = int(np.argmax(d2[np.arange(n), labels]))
                centroids[c] = x[far]
                labels[far] = c
        if np.isfinite(prev_inertia) and prev_inertia - inertia <= tol * max(prev_inertia, 1.0):
            break
        prev_inertia = inertia
    return labels, centroids, inertia


@dataclass
class ClusterModel:
    """Item clusters with their per-user assignments and anchor users."""

    item_cluster: np.ndarray  # (n,) cluster index per item
    user_cluster: np.ndarray  # (m,) best cluster per active user, -1 otherwise
    anchor_users: np.ndarray  # (l,) user id representing each cluster
    anchor_jaccard: np.ndarray  # (l,) the anchor's overlap score with its cluster
    num_clusters: int

    def cluster_items(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.item_cluster == c)

    def validate(self) -> None:
        l = self.num_clusters
        if self.anchor_users.shape != (l,) or self.anchor_jaccard.shape != (l,):
            raise ConfigError("anchor arrays must have one entry per cluster")
        if self.item_cluster.min() < 0 or self.item_cluster.max() >= l:
            raise ConfigError("item cluster index out of range")


def _jaccard_counts(user_items: Sequence[np.ndarray], item_cluster: np.ndarray,
                    l: int, users: np.ndarray) -> np.ndarray:
    """Jaccard between each listed user's item set and each cluster; (|users|, l)."""
    cluster_sizes = np.bincount(item_cluster, minlength=l).astype(np.float64)
    out = np.zeros((users.size, l), dtype=np.float64)
    for row, u in enumerate(users):
        items = user_items[int(u)]
        if items.size == 0:
            continue
        inter = np.bincount(item_cluster[items], minlength=l).astype(np.float64)
        union = cluster_sizes + items.size - inter
        with np.errstate(invalid="ignore", divide="ignore"):
            j = np.where(union > 0, inter / union, 0.0)
        out[row] = j
    return out


def mine_clusters(
    item_features: np.ndarray,
    user_items: Sequence[np.ndarray],
    labels: ActivityLabels,
    num_clusters: int,
    seed: int,
) -> ClusterModel:
    """Cluster items, assign each active user its best-overlap cluster, and
    pick the anchor with maximal overlap per cluster.

    A cluster no active user maps to falls back to the globally best-overlap
    active user, so there is always exactly one anchor per cluster. Ties break
    toward lower cluster index / lower user id.
    """
    n = item_features.shape[0]
    if num_clusters < 2:
        raise ConfigError("need at least 2 clusters")
    if num_clusters > n:
        raise ConfigError(f"cannot mine {num_clusters} clusters from {n} items")
    active = labels.active_ids()
    if active.size == 0:
        raise ConfigError("cluster mining needs at least one active user")

    item_cluster, _, _ = kmeans(item_features, num_clusters, seed=seed)

    jac = _jaccard_counts(user_items, item_cluster, num_clusters, active)
    best = np.argmax(jac, axis=1)  # first max wins: ties go to the lower index
    best_scores = jac[np.arange(active.size), best]

    m = len(user_items)
    user_cluster = np.full(m, -1, dtype=np.int64)
    user_cluster[active] = best

    anchor_users = np.full(num_clusters, -1, dtype=np.int64)
    anchor_jaccard = np.zeros(num_clusters, dtype=np.float64)
    for c in range(num_clusters):
        members = np.flatnonzero(best == c)
        if members.size:
            # active ids ascend, so argmax ties resolve to the lowest user id
            pick = members[np.argmax(best_scores[members])]
        else:
            pick = int(np.argmax(jac[:, c]))
            logger.debug("cluster %d has no assigned users; using global fallback anchor", c)
        anchor_users[c] = active[pick]
        anchor_jaccard[c] = jac[pick, c] if members.size == 0 else best_scores[pick]
    model = ClusterModel(
        item_cluster=item_cluster,
        user_cluster=user_cluster,
        anchor_users=anchor_users,
        anchor_jaccard=anchor_jaccard,
        num_clusters=num_clusters,
    )
    model.validate()
    return model
