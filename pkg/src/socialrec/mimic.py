"""Mimic learning: pseudo-inactive embeddings built from active users, and the
contrastive cluster-matching loss pulling them toward their true anchor.

Three pseudo generators exist. Inactive mixture (the default) blends an active
embedding with a sampled inactive one and is the only variant that uses the
per-active sample count; random mask zeroes dimensions independently; the
distribution shift restandardizes active embeddings onto the inactive
statistics of the current step.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
import torch
from torch import Tensor

from .errors import ConfigError

VARIANT_RANDOM_MASK = "random_mask"
VARIANT_DISTRIBUTION_SHIFT = "distribution_shift"
VARIANT_INACTIVE_MIXTURE = "inactive_mixture"


def random_mask(e: Tensor, keep_prob: float, rng: np.random.Generator,
                mask: Optional[Tensor] = None) -> Tensor:
    """Elementwise product with a Bernoulli(keep_prob) mask.

    Pass `mask` to reuse a pre-drawn mask; otherwise one is drawn from `rng`
    with an independent entry per element.
    """
    if not 0.0 <= keep_prob <= 1.0:
        raise ConfigError("keep_prob must lie in [0, 1]")
    if mask is None:
        drawn = rng.random(size=tuple(e.shape)) < keep_prob
        mask = torch.from_numpy(drawn.astype(np.float64))
    return e * mask


def embedding_stats(emb: Tensor) -> tuple[Tensor, Tensor]:
    """Per-dimension mean and population standard deviation."""
    mu = emb.mean(dim=0)
    phi = torch.sqrt(((emb - mu) ** 2).mean(dim=0))
    return mu, phi


def distribution_shift(e: Tensor, stats_active: tuple[Tensor, Tensor],
                       stats_inactive: tuple[Tensor, Tensor]) -> Tensor:
    """Map rows from the active distribution onto the inactive one per dim.

    Dimensions whose active std is zero pass through unshifted.
    """
    mu_a, phi_a = stats_active
    mu_i, phi_i = stats_inactive
    degenerate = phi_a == 0
    safe_phi = torch.where(degenerate, torch.ones_like(phi_a), phi_a)
    shifted = phi_i * (e - mu_a) / safe_phi + mu_i
    return torch.where(degenerate, e, shifted)


def inactive_mixture(e_plus: Tensor, e_minus: Tensor, beta: float) -> Tensor:
    """Convex combination beta * active + (1 - beta) * inactive."""
    return beta * e_plus + (1.0 - beta) * e_minus


def mimic_loss(pseudo: Tensor, cluster_idx: Tensor, anchors: Tensor, tau: float,
               full_denominator: bool = False) -> Tensor:
    """Contrastive cluster-matching loss over pseudo-inactive embeddings.

    Cosine similarities to the anchor embeddings are scaled by 1/tau; each
    pseudo user contrasts its true anchor against the others. By default the
    denominator excludes the positive term (so the loss can go negative);
    `full_denominator` switches to the conventional softmax form. Summed over
    rows.
    """
    if tau <= 0:
        raise ConfigError("temperature must be > 0")
    l = anchors.shape[0]
    if l < 2:
        raise ConfigError("need at least 2 clusters for the contrastive denominator")

    def _norm(x: Tensor) -> Tensor:
        sq = (x * x).sum(dim=-1, keepdim=True)
        return x / torch.sqrt(torch.where(sq == 0, torch.ones_like(sq), sq))

    logits = (_norm(pseudo) @ _norm(anchors).T) / tau  # (B, l)
    pos = logits.gather(1, cluster_idx.view(-1, 1)).squeeze(1)
    if full_denominator:
        denom = torch.logsumexp(logits, dim=1)
    else:
        negatives = logits.scatter(
            1, cluster_idx.view(-1, 1), torch.full_like(pos, -torch.inf).view(-1, 1)
        )
        denom = torch.logsumexp(negatives, dim=1)
    return -(pos - denom).sum()


def build_pseudo_users(
    variant: str,
    embeddings: Tensor,
    active_ids: np.ndarray,
    inactive_ids: np.ndarray,
    user_cluster: np.ndarray,
    rng: np.random.Generator,
    beta: float = 0.5,
    keep_prob: float = 0.5,
    samples_per_user: int = 1,
) -> tuple[Tensor, Tensor]:
    """Assemble the pseudo batch and each row's true cluster index.

    Active users without a cluster assignment are skipped. The mixture variant
    draws `samples_per_user` inactive partners per active user; the other two
    emit one pseudo row per active user.
    """
    keep = np.array([u for u in active_ids if user_cluster[u] >= 0], dtype=np.int64)
    if keep.size == 0:
        return torch.zeros((0, embeddings.shape[1]), dtype=embeddings.dtype), torch.zeros(0, dtype=torch.int64)

    if variant == VARIANT_INACTIVE_MIXTURE:
        if inactive_ids.size == 0:
            return (torch.zeros((0, embeddings.shape[1]), dtype=embeddings.dtype),
                    torch.zeros(0, dtype=torch.int64))
        actives = np.repeat(keep, samples_per_user)
        partners = inactive_ids[rng.integers(inactive_ids.size, size=actives.size)]
        pseudo = inactive_mixture(
            embeddings[torch.from_numpy(actives)],
            embeddings[torch.from_numpy(partners)],
            beta,
        )
        clusters = user_cluster[actives]
    elif variant == VARIANT_RANDOM_MASK:
        pseudo = random_mask(embeddings[torch.from_numpy(keep)], keep_prob, rng)
        clusters = user_cluster[keep]
    elif variant == VARIANT_DISTRIBUTION_SHIFT:
        active_rows = embeddings[torch.from_numpy(np.asarray(active_ids, dtype=np.int64))]
        if inactive_ids.size == 0:
            return (torch.zeros((0, embeddings.shape[1]), dtype=embeddings.dtype),
                    torch.zeros(0, dtype=torch.int64))
        inactive_rows = embeddings[torch.from_numpy(np.asarray(inactive_ids, dtype=np.int64))]
        pseudo = distribution_shift(
            embeddings[torch.from_numpy(keep)],
            embedding_stats(active_rows),
            embedding_stats(inactive_rows),
        )
        clusters = user_cluster[keep]
    else:
        raise ConfigError(f"unknown mimic variant {variant!r}")
    return pseudo, torch.from_numpy(np.asarray(clusters, dtype=np.int64))
