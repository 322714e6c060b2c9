"""Datasets: bipartite interactions, social graph, activity labels, splits,
TSV loading/saving, and a topic-planted synthetic generator.

File formats
------------
interactions.tsv   user_id<TAB>item_id, one pair per line, '#' comments allowed
social.tsv         user_id<TAB>user_id (undirected; stored once per pair)
*_features.tsv     id<TAB>f1,f2,...    comma-separated reals
id_map.tsv         kind<TAB>original_id<TAB>dense_id
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .utils import atomic_write_text, hash_arrays, rng_from_seed

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Core containers
# ---------------------------------------------------------------------------

def _invert_adjacency(user_items: Sequence[np.ndarray], num_items: int) -> list[np.ndarray]:
    buckets: list[list[int]] = [[] for _ in range(num_items)]
    for u, items in enumerate(user_items):
        for i in items:
            if not 0 <= i < num_items:
                raise DataError(f"user {u} references out-of-range item {int(i)}")
            buckets[int(i)].append(u)
    return [np.array(b, dtype=np.int64) for b in buckets]


@dataclass
class InteractionGraph:
    """Bipartite user-item structure with features and a reverse index."""

    num_users: int
    num_items: int
    user_items: list[np.ndarray]  # sorted item ids per user
    item_users: list[np.ndarray]  # sorted user ids per item
    user_features: np.ndarray  # (m, D_u) float64
    item_features: np.ndarray  # (n, D_i) float64
    user_ids: np.ndarray  # dense index -> original id
    item_ids: np.ndarray

    @classmethod
    def from_user_items(
        cls,
        num_users: int,
        num_items: int,
        user_items: Sequence[np.ndarray],
        user_features: Optional[np.ndarray] = None,
        item_features: Optional[np.ndarray] = None,
        user_ids: Optional[np.ndarray] = None,
        item_ids: Optional[np.ndarray] = None,
    ) -> "InteractionGraph":
        user_items = [np.unique(np.asarray(a, dtype=np.int64)) for a in user_items]
        item_users = _invert_adjacency(user_items, num_items)
        if user_features is None:
            user_features = np.eye(num_users, dtype=np.float64)
        if item_features is None:
            item_features = np.eye(num_items, dtype=np.float64)
        if user_ids is None:
            user_ids = np.arange(num_users, dtype=np.int64)
        if item_ids is None:
            item_ids = np.arange(num_items, dtype=np.int64)
        g = cls(
            num_users=num_users,
            num_items=num_items,
            user_items=user_items,
            item_users=item_users,
            user_features=np.asarray(user_features, dtype=np.float64),
            item_features=np.asarray(item_features, dtype=np.float64),
            user_ids=np.asarray(user_ids, dtype=np.int64),
            item_ids=np.asarray(item_ids, dtype=np.int64),
        )
        g.validate()
        return g

    def validate(self) -> None:
        if len(self.user_items) != self.num_users:
            raise DataError("user_items length disagrees with num_users")
        if len(self.item_users) != self.num_items:
            raise DataError("item_users length disagrees with num_items")
        for u, items in enumerate(self.user_items):
            if items.size and (items.min() < 0 or items.max() >= self.num_items):
                raise DataError(f"user {u} references an out-of-range item id")
            if np.any(np.diff(items) <= 0):
                raise DataError(f"user {u} item set is not strictly sorted")
        rebuilt = _invert_adjacency(self.user_items, self.num_items)
        for i in range(self.num_items):
            if not np.array_equal(rebuilt[i], self.item_users[i]):
                raise DataError(f"reverse index inconsistent for item {i}")
        if self.user_features.shape[0] != self.num_users:
            raise DataError("user_features row count disagrees with num_users")
        if self.item_features.shape[0] != self.num_items:
            raise DataError("item_features row count disagrees with num_items")

    def user_degrees(self) -> np.ndarray:
        return np.array([a.size for a in self.user_items], dtype=np.int64)

    def item_degrees(self) -> np.ndarray:
        return np.array([a.size for a in self.item_users], dtype=np.int64)

    def num_interactions(self) -> int:
        return int(self.user_degrees().sum())

    def interaction_pairs(self) -> np.ndarray:
        """All (user, item) pairs, sorted by (user, item); shape (E, 2)."""
        rows = []
        for u, items in enumerate(self.user_items):
            if items.size:
                rows.append(np.stack([np.full(items.size, u, dtype=np.int64), items], axis=1))
        if not rows:
            return np.zeros((0, 2), dtype=np.int64)
        return np.concatenate(rows, axis=0)

    def has_interaction(self, u: int, i: int) -> bool:
        items = self.user_items[u]
        pos = np.searchsorted(items, i)
        return pos < items.size and items[pos] == i

    def content_hash(self) -> str:
        pairs = self.interaction_pairs()
        return hash_arrays(
            np.array([self.num_users, self.num_items], dtype=np.int64),
            pairs,
            self.user_features,
            self.item_features,
            self.user_ids,
            self.item_ids,
        )


@dataclass
class SocialGraph:
    """Undirected user-user adjacency stored as per-user sorted neighbor lists."""

    num_users: int
    neighbors: list[np.ndarray]
    symmetric: bool = True

    @classmethod
    def from_edges(cls, num_users: int, edges: np.ndarray) -> "SocialGraph":
        """Build from an (E, 2) array; duplicates collapse, self-loops rejected."""
        nbrs: list[set[int]] = [set() for _ in range(num_users)]
        for u, v in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
            if u == v:
                raise DataError(f"self-loop on user {u}")
            if not (0 <= u < num_users and 0 <= v < num_users):
                raise DataError(f"social edge ({u}, {v}) out of range")
            nbrs[u].add(int(v))
            nbrs[v].add(int(u))
        return cls(
            num_users=num_users,
            neighbors=[np.array(sorted(s), dtype=np.int64) for s in nbrs],
        )

    def validate(self) -> None:
        if len(self.neighbors) != self.num_users:
            raise DataError("neighbors length disagrees with num_users")
        for u, ns in enumerate(self.neighbors):
            if ns.size and (ns.min() < 0 or ns.max() >= self.num_users):
                raise DataError(f"user {u} has an out-of-range neighbor")
            if np.any(ns == u):
                raise DataError(f"self-loop on user {u}")
            if self.symmetric:
                for v in ns:
                    back = self.neighbors[int(v)]
                    pos = np.searchsorted(back, u)
                    if pos >= back.size or back[pos] != u:
                        raise DataError(f"edge ({u}, {v}) missing its reverse")

    def degrees(self) -> np.ndarray:
        return np.array([a.size for a in self.neighbors], dtype=np.int64)

    def edges(self) -> np.ndarray:
        """Undirected edge list with u < v, sorted; shape (E, 2)."""
        rows = [
            (u, int(v))
            for u, ns in enumerate(self.neighbors)
            for v in ns
            if u < v
        ]
        return np.array(rows, dtype=np.int64).reshape(-1, 2)

    def num_edges(self) -> int:
        return int(self.degrees().sum()) // 2

    def content_hash(self) -> str:
        return hash_arrays(np.array([self.num_users], dtype=np.int64), self.edges())


@dataclass
class ActivityLabels:
    """Per-user active/inactive split with the policy that produced it."""

    inactive: np.ndarray  # bool per user
    threshold: Optional[int] = None
    percentile: Optional[float] = None

    @property
    def num_users(self) -> int:
        return int(self.inactive.size)

    def inactive_ids(self) -> np.ndarray:
        return np.flatnonzero(self.inactive)

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.inactive)

    def to_strings(self) -> list[str]:
        return ["inactive" if x else "active" for x in self.inactive]


@dataclass
class DatasetSplit:
    """Training graph plus per-user held-out item sets."""

    train: InteractionGraph
    test_items: list[np.ndarray]

    def validate(self, original: Optional[InteractionGraph] = None) -> None:
        for u in range(self.train.num_users):
            tr, te = self.train.user_items[u], self.test_items[u]
            if np.intersect1d(tr, te).size:
                raise DataError(f"user {u} has overlapping train/test items")
            if original is not None:
                merged = np.union1d(tr, te)
                if not np.array_equal(merged, original.user_items[u]):
                    raise DataError(f"user {u} split does not cover the original set")
            if original is not None and original.user_items[u].size >= 1 and tr.size == 0:
                raise DataError(f"user {u} lost all train interactions")


# ---------------------------------------------------------------------------
# TSV parsing and loading
# ---------------------------------------------------------------------------

def _parse_pair_file(path: str) -> list[tuple[int, int]]:
    pairs: list[tuple[int, int]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected two tab-separated ids")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: non-integer id ({e})") from e
            pairs.append((a, b))
    return pairs


def _parse_feature_file(path: str) -> dict[int, np.ndarray]:
    feats: dict[int, np.ndarray] = {}
    width: Optional[int] = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected id<TAB>values")
            try:
                ident = int(parts[0])
                vec = np.array([float(x) for x in parts[1].split(",")], dtype=np.float64)
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: malformed feature row ({e})") from e
            if width is None:
                width = vec.size
            elif vec.size != width:
                raise DataError(f"{path}:{lineno}: feature width {vec.size} != {width}")
            if ident in feats:
                raise DataError(f"{path}:{lineno}: duplicate feature row for id {ident}")
            feats[ident] = vec
    return feats


def load_dataset(
    interactions_path: str,
    social_path: str,
    user_features_path: Optional[str] = None,
    item_features_path: Optional[str] = None,
) -> tuple[InteractionGraph, SocialGraph]:
    """Load TSV files into densified graphs.

    Ids are remapped to 0..m-1 / 0..n-1 by ascending original id; the original
    ids stay available on the returned graph for `write_id_map`. A user may
    appear only in the feature file (zero interactions); a social edge that
    references an id outside the user universe is a reference error.
    """
    raw_pairs = _parse_pair_file(interactions_path)
    seen: set[tuple[int, int]] = set()
    pairs: list[tuple[int, int]] = []
    dup = 0
    for p in raw_pairs:
        if p in seen:
            dup += 1
        else:
            seen.add(p)
            pairs.append(p)
    if dup:
        logger.info("deduplicated %d repeated interaction pair(s) in %s", dup, interactions_path)

    user_feats = _parse_feature_file(user_features_path) if user_features_path else None
    item_feats = _parse_feature_file(item_features_path) if item_features_path else None

    user_universe = {u for u, _ in pairs}
    if user_feats:
        user_universe |= set(user_feats)
    item_universe = {i for _, i in pairs}
    if item_feats:
        item_universe |= set(item_feats)
    if not user_universe or not item_universe:
        raise DataError(f"{interactions_path}: no interactions found")

    user_ids = np.array(sorted(user_universe), dtype=np.int64)
    item_ids = np.array(sorted(item_universe), dtype=np.int64)
    u_index = {int(orig): k for k, orig in enumerate(user_ids)}
    i_index = {int(orig): k for k, orig in enumerate(item_ids)}

    per_user: list[list[int]] = [[] for _ in user_ids]
    for u, i in pairs:
        per_user[u_index[u]].append(i_index[i])

    def _dense_features(feats: Optional[dict[int, np.ndarray]], ids: np.ndarray, what: str) -> Optional[np.ndarray]:
        if feats is None:
            return None
        missing = [int(x) for x in ids if int(x) not in feats]
        if missing:
            raise DataError(f"{what} feature file lacks rows for ids {missing[:5]}")
        return np.stack([feats[int(x)] for x in ids], axis=0)

    graph = InteractionGraph.from_user_items(
        num_users=len(user_ids),
        num_items=len(item_ids),
        user_items=[np.array(v, dtype=np.int64) for v in per_user],
        user_features=_dense_features(user_feats, user_ids, "user"),
        item_features=_dense_features(item_feats, item_ids, "item"),
        user_ids=user_ids,
        item_ids=item_ids,
    )

    social_pairs = _parse_pair_file(social_path)
    edges = []
    for u, v in social_pairs:
        if u not in u_index:
            raise DataError(f"{social_path}: user {u} absent from interactions file")
        if v not in u_index:
            raise DataError(f"{social_path}: user {v} absent from interactions file")
        if u == v:
            raise DataError(f"{social_path}: self-loop on user {u}")
        edges.append((u_index[u], u_index[v]))
    social = SocialGraph.from_edges(len(user_ids), np.array(edges, dtype=np.int64).reshape(-1, 2))
    return graph, social


def write_id_map(path: str, graph: InteractionGraph) -> None:
    lines = ["# kind\toriginal_id\tdense_id"]
    for k, orig in enumerate(graph.user_ids):
        lines.append(f"user\t{int(orig)}\t{k}")
    for k, orig in enumerate(graph.item_ids):
        lines.append(f"item\t{int(orig)}\t{k}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Labeling and splitting
# ---------------------------------------------------------------------------

def label_activity(
    graph: InteractionGraph,
    threshold: Optional[int] = None,
    percentile: Optional[float] = None,
) -> ActivityLabels:
    """Label users inactive either by count < threshold or by bottom percentile.

    Pass the training graph when labels feed the model, so the held-out items
    never influence who counts as inactive.
    """
    if (threshold is None) == (percentile is None):
        raise ConfigError("set exactly one of threshold / percentile")
    counts = graph.user_degrees()
    if threshold is not None:
        if threshold < 1:
            raise ConfigError("threshold must be >= 1")
        inactive = counts < threshold
        return ActivityLabels(inactive=inactive, threshold=int(threshold))
    if not 0.0 < percentile < 1.0:
        raise ConfigError("percentile must lie in (0, 1)")
    k = int(math.floor(percentile * graph.num_users))
    order = np.lexsort((np.arange(graph.num_users), counts))  # by count, ties by id
    inactive = np.zeros(graph.num_users, dtype=bool)
    inactive[order[:k]] = True
    return ActivityLabels(inactive=inactive, percentile=float(percentile))


def split_train_test(graph: InteractionGraph, holdout_fraction: float, seed: int) -> DatasetSplit:
    """Hold out floor(f * |I(u)|) items per user, uniformly at random."""
    if not 0.0 < holdout_fraction < 1.0:
        raise ConfigError("holdout_fraction must lie in (0, 1)")
    rng = rng_from_seed(seed, "split")
    train_items: list[np.ndarray] = []
    test_items: list[np.ndarray] = []
    for u in range(graph.num_users):
        items = graph.user_items[u]
        k = int(math.floor(holdout_fraction * items.size))
        if k == 0:
            train_items.append(items.copy())
            test_items.append(np.zeros(0, dtype=np.int64))
            continue
        held = rng.choice(items, size=k, replace=False)
        held = np.sort(held)
        train_items.append(np.setdiff1d(items, held))
        test_items.append(held)
    train = InteractionGraph.from_user_items(
        num_users=graph.num_users,
        num_items=graph.num_items,
        user_items=train_items,
        user_features=graph.user_features,
        item_features=graph.item_features,
        user_ids=graph.user_ids,
        item_ids=graph.item_ids,
    )
    split = DatasetSplit(train=train, test_items=test_items)
    split.validate(original=graph)
    return split


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

@dataclass
class GenConfig:
    """Planted-community synthetic dataset parameters.

    Each topic splits into finer interest communities; users buy mostly from
    their home community's item pool and the quality mix q controls what
    fraction of social edges is planted within a community versus drawn
    uniformly at random. Within-community edges are the ground-truth "good"
    relations.
    """

    num_topics: int = 4
    subs_per_topic: int = 8  # fine interest communities per topic
    users_per_topic: int = 200
    items_per_topic: int = 400
    inactive_fraction: float = 0.3
    active_range: tuple[int, int] = (14, 30)
    # minimum of 2 so a 0.5 holdout leaves every inactive user evaluable
    inactive_range: tuple[int, int] = (2, 6)
    social_quality: float = 0.6  # q: fraction of within-community edges
    social_avg_degree: float = 8.0
    inactive_social_weight: float = 0.25
    home_topic_prob: float = 0.85  # probability an item comes from the home pool
    feature_dim: int = 16
    feature_noise: float = 0.3
    sub_offset_scale: float = 0.8  # community centroid spread inside a topic
    # "identity" user features carry no community signal, so a user's interests
    # are only learnable from interactions and social structure; "topic" plants
    # the home-community centroid in the features as well
    user_feature_mode: str = "identity"
    inactive_threshold: int = 7
    snapshots: bool = True
    snapshot_growth: float = 0.3

    def validate(self) -> None:
        if self.num_topics < 1 or self.users_per_topic < 2 or self.items_per_topic < 1:
            raise ConfigError("need >= 1 topic, >= 2 users per topic, >= 1 item per topic")
        if self.subs_per_topic < 1 or self.subs_per_topic > self.users_per_topic // 2:
            raise ConfigError("subs_per_topic must leave >= 2 users per community")
        if self.subs_per_topic > self.items_per_topic:
            raise ConfigError("subs_per_topic must leave >= 1 item per community")
        if not 0.0 <= self.inactive_fraction < 1.0:
            raise ConfigError("inactive_fraction must lie in [0, 1)")
        if not 0.0 <= self.social_quality <= 1.0:
            raise ConfigError("social_quality must lie in [0, 1]")
        if self.social_avg_degree < 0:
            raise ConfigError("social_avg_degree must be >= 0")
        if not 0.0 < self.home_topic_prob <= 1.0:
            raise ConfigError("home_topic_prob must lie in (0, 1]")
        if self.user_feature_mode not in ("identity", "topic"):
            raise ConfigError("user_feature_mode must be 'identity' or 'topic'")
        lo_a, hi_a = self.active_range
        lo_i, hi_i = self.inactive_range
        if not (1 <= lo_a <= hi_a and 0 <= lo_i <= hi_i):
            raise ConfigError("interaction ranges must be ordered and non-negative")
        if hi_i >= self.inactive_threshold:
            raise ConfigError("inactive_range must stay below inactive_threshold")
        if lo_a < self.inactive_threshold:
            raise ConfigError("active_range must start at or above inactive_threshold")
        n = self.num_topics * self.items_per_topic
        if hi_a > n:
            raise ConfigError("active_range exceeds the item catalog")
        total_edges = round(self.num_topics * self.users_per_topic * self.social_avg_degree / 2)
        within = round(self.social_quality * total_edges)
        per_sub = self.users_per_topic // self.subs_per_topic
        capacity = self.num_topics * self.subs_per_topic * (per_sub * (per_sub - 1) // 2)
        if within > capacity:
            raise ConfigError(
                f"requested {within} within-community edges but only about "
                f"{capacity} pairs exist"
            )

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["active_range"] = list(self.active_range)
        d["inactive_range"] = list(self.inactive_range)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown generator keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("active_range", "inactive_range"):
            if key in d:
                d[key] = tuple(d[key])
        cfg = cls(**d)
        cfg.validate()
        return cfg


@dataclass
class SyntheticDataset:
    graph: InteractionGraph
    social: SocialGraph
    labels: ActivityLabels
    topics_of_users: np.ndarray
    topics_of_items: np.ndarray
    communities_of_users: np.ndarray
    communities_of_items: np.ndarray
    interactions_t1: Optional[list[np.ndarray]] = None
    social_t1: Optional[SocialGraph] = None
    new_edges: Optional[np.ndarray] = None  # edges present at t2 only


def _sample_distinct_items(rng: np.random.Generator, count: int, home: np.ndarray,
                           all_items: int, p_home: float) -> list[int]:
    chosen: list[int] = []
    have: set[int] = set()
    attempts = 0
    while len(chosen) < count:
        attempts += 1
        if attempts > 200 * count + 200:
            raise ConfigError("could not sample the requested number of distinct items")
        if rng.random() < p_home:
            it = int(home[rng.integers(home.size)])
        else:
            it = int(rng.integers(all_items))
        if it not in have:
            have.add(it)
            chosen.append(it)
    return chosen


def _sample_social_edges(
    rng: np.random.Generator,
    cfg: GenConfig,
    community_users: list[np.ndarray],
    weights: np.ndarray,
    target: int,
    existing: set[tuple[int, int]],
) -> list[tuple[int, int]]:
    m = weights.size
    within_target = round(cfg.social_quality * target)
    cross_target = target - within_target
    edges: list[tuple[int, int]] = []
    p_global = weights / weights.sum()

    def _add(u: int, v: int) -> bool:
        if u == v:
            return False
        key = (min(u, v), max(u, v))
        if key in existing:
            return False
        existing.add(key)
        edges.append(key)
        return True

    attempts = 0
    while len(edges) < within_target:
        attempts += 1
        if attempts > 200 * target + 1000:
            raise ConfigError("within-community edge sampling did not converge; graph too dense")
        c = int(rng.integers(len(community_users)))
        members = community_users[c]
        w = weights[members]
        pair = rng.choice(members, size=2, replace=False, p=w / w.sum())
        _add(int(pair[0]), int(pair[1]))
    n_within = len(edges)
    attempts = 0
    while len(edges) - n_within < cross_target:
        attempts += 1
        if attempts > 200 * target + 1000:
            raise ConfigError("random edge sampling did not converge; graph too dense")
        pair = rng.choice(m, size=2, replace=False, p=p_global)
        _add(int(pair[0]), int(pair[1]))
    return edges


def _split_evenly(ids: np.ndarray, parts: int) -> list[np.ndarray]:
    sizes = [ids.size // parts + (1 if k < ids.size % parts else 0) for k in range(parts)]
    out = []
    start = 0
    for s in sizes:
        out.append(ids[start:start + s])
        start += s
    return out


def generate_synthetic(cfg: GenConfig, seed: int) -> SyntheticDataset:
    """Generate a planted-community dataset; deterministic per (config, seed)."""
    cfg.validate()
    rng = rng_from_seed(seed, "synth")
    m = cfg.num_topics * cfg.users_per_topic
    n = cfg.num_topics * cfg.items_per_topic
    num_communities = cfg.num_topics * cfg.subs_per_topic

    topic_of_user = np.repeat(np.arange(cfg.num_topics), cfg.users_per_topic)
    topic_of_item = np.repeat(np.arange(cfg.num_topics), cfg.items_per_topic)
    community_of_user = np.zeros(m, dtype=np.int64)
    community_of_item = np.zeros(n, dtype=np.int64)
    community_users: list[np.ndarray] = []
    community_items: list[np.ndarray] = []
    for t in range(cfg.num_topics):
        for k, block in enumerate(_split_evenly(np.flatnonzero(topic_of_user == t),
                                                cfg.subs_per_topic)):
            community_of_user[block] = t * cfg.subs_per_topic + k
            community_users.append(block)
        for k, block in enumerate(_split_evenly(np.flatnonzero(topic_of_item == t),
                                                cfg.subs_per_topic)):
            community_of_item[block] = t * cfg.subs_per_topic + k
            community_items.append(block)

    # plant inactive users evenly across communities
    k_inactive = round(cfg.inactive_fraction * m)
    inactive = np.zeros(m, dtype=bool)
    base, extra = divmod(k_inactive, num_communities)
    for c in range(num_communities):
        k_c = min(base + (1 if c < extra else 0), community_users[c].size)
        picks = rng.choice(community_users[c], size=k_c, replace=False)
        inactive[picks] = True

    # interactions: counts by activity role, items mostly from the home pool
    full_items: list[list[int]] = []
    for u in range(m):
        lo, hi = cfg.inactive_range if inactive[u] else cfg.active_range
        count = int(rng.integers(lo, hi + 1))
        home = community_items[community_of_user[u]]
        full_items.append(
            _sample_distinct_items(rng, count, home, n, cfg.home_topic_prob) if count else []
        )

    interactions_t1: Optional[list[np.ndarray]] = None
    if cfg.snapshots:
        interactions_t1 = []
        for u in range(m):
            count = len(full_items[u])
            extra_n = round(cfg.snapshot_growth * count)
            interactions_t1.append(
                np.unique(np.array(full_items[u][: count - extra_n], dtype=np.int64))
            )

    # social edges: endpoint weights make inactive users less connected
    weights = np.where(inactive, cfg.inactive_social_weight, 1.0).astype(np.float64)
    target = round(m * cfg.social_avg_degree / 2)
    existing: set[tuple[int, int]] = set()
    edges_t1 = _sample_social_edges(rng, cfg, community_users, weights, target, existing)

    new_edges: Optional[np.ndarray] = None
    social_t1: Optional[SocialGraph] = None
    all_edges = list(edges_t1)
    if cfg.snapshots:
        social_t1 = SocialGraph.from_edges(m, np.array(edges_t1, dtype=np.int64).reshape(-1, 2))
        growth = round(cfg.snapshot_growth * target)
        fresh = _sample_social_edges(rng, cfg, community_users, weights, growth, existing)
        new_edges = np.array(fresh, dtype=np.int64).reshape(-1, 2)
        all_edges.extend(fresh)

    # item features: community centroid plus isotropic noise (cluster mining input)
    topic_centroids = rng.normal(size=(cfg.num_topics, cfg.feature_dim))
    sub_offsets = cfg.sub_offset_scale * rng.normal(size=(num_communities, cfg.feature_dim))
    community_centroids = topic_centroids[np.arange(num_communities) // cfg.subs_per_topic] + sub_offsets
    item_features = community_centroids[community_of_item] \
        + cfg.feature_noise * rng.normal(size=(n, cfg.feature_dim))
    if cfg.user_feature_mode == "identity":
        user_features = np.eye(m, dtype=np.float64)
    else:
        user_features = community_centroids[community_of_user] \
            + cfg.feature_noise * rng.normal(size=(m, cfg.feature_dim))

    graph = InteractionGraph.from_user_items(
        num_users=m,
        num_items=n,
        user_items=[np.array(v, dtype=np.int64) for v in full_items],
        user_features=user_features,
        item_features=item_features,
    )
    social = SocialGraph.from_edges(m, np.array(all_edges, dtype=np.int64).reshape(-1, 2))
    labels = ActivityLabels(inactive=inactive, threshold=cfg.inactive_threshold)
    return SyntheticDataset(
        graph=graph,
        social=social,
        labels=labels,
        topics_of_users=topic_of_user,
        topics_of_items=topic_of_item,
        communities_of_users=community_of_user,
        communities_of_items=community_of_item,
        interactions_t1=interactions_t1,
        social_t1=social_t1,
        new_edges=new_edges,
    )


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------

def _format_float(x: float) -> str:
    return repr(float(x))


def write_pairs(path: str, pairs: np.ndarray, header: str) -> None:
    lines = [f"# {header}"]
    for a, b in pairs:
        lines.append(f"{int(a)}\t{int(b)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_features(path: str, features: np.ndarray, ids: np.ndarray) -> None:
    lines = ["# id\tfeatures"]
    for ident, row in zip(ids, features):
        lines.append(f"{int(ident)}\t" + ",".join(_format_float(x) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def save_dataset(out_dir: str, ds: SyntheticDataset) -> None:
    """Write a synthetic dataset as the TSV bundle the loader understands."""
    os.makedirs(out_dir, exist_ok=True)
    write_pairs(os.path.join(out_dir, "interactions.tsv"), ds.graph.interaction_pairs(), "user_id\titem_id")
    write_pairs(os.path.join(out_dir, "social.tsv"), ds.social.edges(), "user_id\tuser_id")
    write_features(os.path.join(out_dir, "user_features.tsv"), ds.graph.user_features, ds.graph.user_ids)
    write_features(os.path.join(out_dir, "item_features.tsv"), ds.graph.item_features, ds.graph.item_ids)
    label_lines = ["# user_id\tlabel"]
    for u, s in enumerate(ds.labels.to_strings()):
        label_lines.append(f"{u}\t{s}")
    atomic_write_text(os.path.join(out_dir, "labels.tsv"), "\n".join(label_lines) + "\n")
    if ds.interactions_t1 is not None and ds.social_t1 is not None:
        snap = os.path.join(out_dir, "snapshots")
        os.makedirs(snap, exist_ok=True)
        rows = []
        for u, items in enumerate(ds.interactions_t1):
            for i in items:
                rows.append((u, int(i)))
        write_pairs(os.path.join(snap, "interactions_t1.tsv"),
                    np.array(rows, dtype=np.int64).reshape(-1, 2), "user_id\titem_id")
        write_pairs(os.path.join(snap, "social_t1.tsv"), ds.social_t1.edges(), "user_id\tuser_id")


def dataset_hash(graph: InteractionGraph, social: SocialGraph) -> str:
    return hash_arrays(
        np.frombuffer(graph.content_hash().encode(), dtype=np.uint8),
        np.frombuffer(social.content_hash().encode(), dtype=np.uint8),
    )
