"""Relation-quality analyses over the social graph.

Three read-only measurements, each broken down by the activity class of the
edge endpoints (inac_inac / inac_ac / ac_ac, plus a seeded random-pair
baseline where applicable):

* rate of edges whose endpoint item sets overlap (non-zero Jaccard),
* social degree histograms per activity class,
* change in endpoint Jaccard between two interaction snapshots for edges
  that appear only in the second snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import ActivityLabels, InteractionGraph, SocialGraph
from .errors import ConfigError, DataError
from .utils import rng_from_seed

CLASS_INAC_INAC = "inac_inac"
CLASS_INAC_AC = "inac_ac"
CLASS_AC_AC = "ac_ac"
CLASS_RAND = "rand"
REAL_CLASSES = (CLASS_INAC_INAC, CLASS_INAC_AC, CLASS_AC_AC)


def jaccard(a: np.ndarray, b: np.ndarray) -> float:
    """|a & b| / |a | b|, with two empty sets mapping to 0."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    inter = np.intersect1d(a, b, assume_unique=False).size
    union = np.union1d(a, b).size
    if union == 0:
        return 0.0
    return inter / union


def edge_class(labels: ActivityLabels, u: int, v: int) -> str:
    iu, iv = bool(labels.inactive[u]), bool(labels.inactive[v])
    if iu and iv:
        return CLASS_INAC_INAC
    if iu or iv:
        return CLASS_INAC_AC
    return CLASS_AC_AC


@dataclass
class RelationClassStat:
    pair_count: int
    value: Optional[float]
    quartiles: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {"pair_count": self.pair_count, "value": self.value}
        if self.quartiles is not None:
            d.update(self.quartiles)
        return d


@dataclass
class RelationClassReport:
    statistic: str
    classes: dict[str, RelationClassStat] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "classes": {k: v.to_dict() for k, v in self.classes.items()},
        }


def nonzero_jaccard_rate(
    social: SocialGraph,
    interactions: InteractionGraph,
    labels: ActivityLabels,
    seed: int = 0,
) -> RelationClassReport:
    """Fraction of edges whose endpoints share at least one item, per class.

    The rand baseline draws as many user pairs (uniformly, with replacement
    across draws, self-pairs rejected) as there are real edges.
    """
    if labels.num_users != interactions.num_users:
        raise DataError("labels do not cover every user")
    edges = social.edges()
    report = RelationClassReport(statistic="nonzero_jaccard_rate")
    buckets: dict[str, list[float]] = {c: [] for c in REAL_CLASSES}
    for u, v in edges:
        j = jaccard(interactions.user_items[int(u)], interactions.user_items[int(v)])
        buckets[edge_class(labels, int(u), int(v))].append(j)
    for cls in REAL_CLASSES:
        vals = buckets[cls]
        rate = float(np.mean([v > 0 for v in vals])) if vals else 0.0
        report.classes[cls] = RelationClassStat(pair_count=len(vals), value=rate)

    rng = rng_from_seed(seed, "rand-pairs")
    m = interactions.num_users
    total = len(edges)
    hits = 0
    for _ in range(total):
        u = int(rng.integers(m))
        v = int(rng.integers(m))
        while v == u:
            v = int(rng.integers(m))
        if jaccard(interactions.user_items[u], interactions.user_items[v]) > 0:
            hits += 1
    report.classes[CLASS_RAND] = RelationClassStat(
        pair_count=total, value=(hits / total) if total else 0.0
    )
    return report


def degree_distribution(
    social: SocialGraph,
    labels: ActivityLabels,
    bucket_bounds: Sequence[int] = (20, 50),
) -> dict:
    """Per activity class, the fraction of users in each social-degree bucket.

    Buckets are {0}, (0, b1], (b1, b2], ..., (b_last, inf); a degree-0 bucket
    always exists. Fractions sum to 1 within each class.
    """
    bounds = [int(b) for b in bucket_bounds]
    if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])) or (bounds and bounds[0] <= 0):
        raise ConfigError("bucket_bounds must be strictly increasing and positive")
    labels_names = ["0"]
    edges_lo = [0]
    prev = 0
    for b in bounds:
        labels_names.append(f"({prev}, {b}]")
        edges_lo.append(prev)
        prev = b
    labels_names.append(f"({prev}, inf)")
    edges_lo.append(prev)

    degrees = social.degrees()

    def _bucket(d: int) -> int:
        if d == 0:
            return 0
        for k, b in enumerate(bounds):
            if d <= b:
                return k + 1
        return len(bounds) + 1

    out: dict = {"buckets": labels_names, "classes": {}}
    for name, mask in (("inactive", labels.inactive), ("active", ~labels.inactive)):
        degs = degrees[mask]
        counts = np.zeros(len(labels_names), dtype=np.int64)
        for d in degs:
            counts[_bucket(int(d))] += 1
        fractions = (counts / degs.size) if degs.size else np.zeros(len(labels_names))
        out["classes"][name] = {
            "user_count": int(degs.size),
            "fractions": [float(x) for x in fractions],
        }
    return out


def jaccard_delta(
    new_edges: np.ndarray,
    interactions_t1: Sequence[np.ndarray],
    interactions_t2: Sequence[np.ndarray],
    labels: ActivityLabels,
    edges_t1: Optional[SocialGraph] = None,
) -> RelationClassReport:
    """Distribution of J(t2) - J(t1) over newly created edges, per class.

    `new_edges` must be absent from the first snapshot; pass `edges_t1` to
    have that precondition checked.
    """
    new_edges = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
    if edges_t1 is not None:
        for u, v in new_edges:
            ns = edges_t1.neighbors[int(u)]
            pos = np.searchsorted(ns, int(v))
            if pos < ns.size and ns[pos] == int(v):
                raise DataError(f"edge ({u}, {v}) already present in the first snapshot")
    deltas: dict[str, list[float]] = {c: [] for c in REAL_CLASSES}
    for u, v in new_edges:
        u, v = int(u), int(v)
        j1 = jaccard(interactions_t1[u], interactions_t1[v])
        j2 = jaccard(interactions_t2[u], interactions_t2[v])
        deltas[edge_class(labels, u, v)].append(j2 - j1)
    report = RelationClassReport(statistic="jaccard_delta")
    for cls in REAL_CLASSES:
        vals = np.array(deltas[cls], dtype=np.float64)
        if vals.size:
            q25, med, q75 = np.percentile(vals, [25, 50, 75])
            stat = RelationClassStat(
                pair_count=int(vals.size),
                value=float(vals.mean()),
                quartiles={"q25": float(q25), "median": float(med), "q75": float(q75)},
            )
        else:
            stat = RelationClassStat(pair_count=0, value=None)
        report.classes[cls] = stat
    return report


def analyze_all(
    graph: InteractionGraph,
    social: SocialGraph,
    labels: ActivityLabels,
    seed: int = 0,
    bucket_bounds: Sequence[int] = (20, 50),
    snapshot: Optional[tuple[Sequence[np.ndarray], SocialGraph]] = None,
) -> dict:
    """Bundle of the three observation tables; snapshot enables the delta table."""
    report = {
        "relation_quality": nonzero_jaccard_rate(social, graph, labels, seed=seed).to_dict(),
        "degree_distribution": degree_distribution(social, labels, bucket_bounds),
        "new_edge_jaccard_delta": None,
    }
    if snapshot is not None:
        interactions_t1, social_t1 = snapshot
        t1_keys = {(int(u), int(v)) for u, v in social_t1.edges()}
        new = np.array(
            [(int(u), int(v)) for u, v in social.edges() if (int(u), int(v)) not in t1_keys],
            dtype=np.int64,
        ).reshape(-1, 2)
        report["new_edge_jaccard_delta"] = jaccard_delta(
            new, interactions_t1, graph.user_items, labels, edges_t1=social_t1
        ).to_dict()
    return report
