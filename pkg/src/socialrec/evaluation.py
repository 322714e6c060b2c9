"""Top-K ranking evaluation against sampled negatives.

Each user with held-out items is scored on those items plus up to 1000
sampled negatives (items the user touched in neither train nor test);
NDCG / HR / Precision at each cutoff are averaged within the inactive,
active, and overall cohorts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import ActivityLabels, DatasetSplit
from .errors import ConfigError, DataError
from .utils import rng_from_seed

logger = logging.getLogger(__name__)

DEFAULT_NUM_NEGATIVES = 1000
COHORTS = ("inactive", "active", "overall")


def build_candidates(
    test_items: np.ndarray,
    train_items: np.ndarray,
    num_items: int,
    rng: np.random.Generator,
    num_negatives: int = DEFAULT_NUM_NEGATIVES,
) -> np.ndarray:
    """Held-out items plus sampled unrelated negatives.

    Negatives are drawn without replacement from items outside both the train
    and test sets of the user; if fewer than requested exist, all of them are
    used (logged once per call site at debug level).
    """
    if test_items.size == 0:
        raise ConfigError("candidate construction expects at least one test item")
    touched = np.union1d(train_items, test_items)
    pool = np.setdiff1d(np.arange(num_items, dtype=np.int64), touched)
    if pool.size <= num_negatives:
        negatives = pool
        logger.debug(
            "only %d negatives available (requested %d); using all", pool.size, num_negatives
        )
    else:
        negatives = rng.choice(pool, size=num_negatives, replace=False)
    return np.concatenate([np.asarray(test_items, dtype=np.int64), negatives])


def rank_topk(scores: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    """Top-k candidate items by descending score; ties resolve to lower item id."""
    order = np.lexsort((candidates, -scores))
    return candidates[order[:k]]


def metrics_at_k(topk: np.ndarray, test_items: np.ndarray, k: int) -> tuple[float, float, float]:
    """(ndcg, hr, pr) with binary relevance.

    NDCG discounts hits by 1/log2(rank+1) against the ideal placement of
    min(|test|, k) items; HR is hits / |test| and PR is hits / k.
    """
    if test_items.size == 0:
        raise ConfigError("metrics need a non-empty test set")
    test_set = set(int(x) for x in test_items)
    gains = [1.0 / math.log2(rank + 2) for rank in range(k)]
    dcg = sum(g for rank, g in enumerate(gains[: len(topk)]) if int(topk[rank]) in test_set)
    idcg = sum(gains[: min(len(test_set), k)])
    hits = sum(1 for item in topk if int(item) in test_set)
    return dcg / idcg, hits / len(test_set), hits / k


@dataclass
class MetricsReport:
    k_values: list[int]
    seed: int
    cohorts: dict[str, dict] = field(default_factory=dict)

    def value(self, cohort: str, metric: str, k: int) -> float:
        return self.cohorts[cohort][f"{metric}@{k}"]

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "seed": self.seed,
            "cohorts": self.cohorts,
        }


def evaluate_embeddings(
    user_emb: np.ndarray,
    item_emb: np.ndarray,
    split: DatasetSplit,
    labels: ActivityLabels,
    k_values: Sequence[int] = (10, 20),
    seed: int = 0,
    num_negatives: int = DEFAULT_NUM_NEGATIVES,
) -> MetricsReport:
    """Score, rank, and average the metrics per cohort.

    Users without test items are excluded. Deterministic per seed: candidate
    sets are drawn from one generator in ascending user order.
    """
    if labels.num_users != split.train.num_users:
        raise DataError("labels do not cover every user")
    k_values = sorted(int(k) for k in k_values)
    if not k_values or k_values[0] < 1:
        raise ConfigError("need at least one positive cutoff")
    rng = rng_from_seed(seed, "eval-negatives")
    num_items = split.train.num_items
    per_user: dict[str, list] = {c: [] for c in COHORTS}
    max_k = max(k_values)
    for u in range(split.train.num_users):
        test_items = split.test_items[u]
        if test_items.size == 0:
            continue
        candidates = build_candidates(
            test_items, split.train.user_items[u], num_items, rng,
            num_negatives=num_negatives,
        )
        scores = item_emb[candidates] @ user_emb[u]
        top = rank_topk(scores, candidates, max_k)
        row = {}
        for k in k_values:
            ndcg, hr, pr = metrics_at_k(top[:k], test_items, k)
            row[f"ndcg@{k}"] = ndcg
            row[f"hr@{k}"] = hr
            row[f"pr@{k}"] = pr
        cohort = "inactive" if labels.inactive[u] else "active"
        per_user[cohort].append(row)
        per_user["overall"].append(row)

    report = MetricsReport(k_values=list(k_values), seed=seed)
    for cohort in COHORTS:
        rows = per_user[cohort]
        agg = {"user_count": len(rows)}
        for k in k_values:
            for metric in ("ndcg", "hr", "pr"):
                key = f"{metric}@{k}"
                agg[key] = float(np.mean([r[key] for r in rows])) if rows else 0.0
        report.cohorts[cohort] = agg
    return report


def evaluate_model(
    model,
    bundle,
    anchor_ids: np.ndarray,
    split: DatasetSplit,
    labels: ActivityLabels,
    k_values: Sequence[int] = (10, 20),
    seed: int = 0,
    num_negatives: int = DEFAULT_NUM_NEGATIVES,
) -> MetricsReport:
    """Forward pass then embedding evaluation; scores are E_u . e_i."""
    import torch

    with torch.no_grad():
        out = model.forward(bundle, anchor_ids)
        user_emb = out.refined_users.numpy()
        item_emb = out.readout_items.numpy()
    return evaluate_embeddings(
        user_emb, item_emb, split, labels,
        k_values=k_values, seed=seed, num_negatives=num_negatives,
    )
