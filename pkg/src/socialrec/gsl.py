"""Graph structure learning on the social graph.

Each refinement iteration scores a user's raw neighbors and the cluster
anchor users with multi-head projected cosine similarity, keeps the top
slice of each (sized by the user's interaction count through the deletion
and addition ratios), aggregates the survivors with their raw similarity
weights, and fuses the result with the projected and propagated embeddings
through a learned skip connection. The top-count selections are hard masks:
gradients flow through the similarity weights of selected edges only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import Tensor, nn

from .data import SocialGraph
from .encoder import DTYPE, glorot_
from .errors import ConfigError

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Adaptive ratios
# ---------------------------------------------------------------------------

def deletion_ratio(interaction_count, smoothness: float):
    """tanh(count / r): grows with activity, so busy users lose more neighbors."""
    if smoothness <= 0:
        raise ConfigError("deletion smoothness must be > 0")
    return np.tanh(np.asarray(interaction_count, dtype=np.float64) / smoothness)


def addition_ratio(interaction_count, smoothness: float):
    """1 / (1 + exp(count / r)): shrinks with activity, peaking at 0.5."""
    if smoothness <= 0:
        raise ConfigError("addition smoothness must be > 0")
    c = np.asarray(interaction_count, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(c / smoothness))


def retained_counts(social_degrees: np.ndarray, interaction_counts: np.ndarray,
                    smoothness: float) -> np.ndarray:
    """Neighbors kept per user: ceil((1 - p_del) * deg), at least 1, at most deg."""
    deg = np.asarray(social_degrees, dtype=np.int64)
    p = deletion_ratio(interaction_counts, smoothness)
    keep = np.ceil((1.0 - p) * deg).astype(np.int64)
    keep = np.minimum(deg, np.maximum(1, keep))
    return np.where(deg > 0, keep, 0)


def anchor_counts(interaction_counts: np.ndarray, smoothness: float,
                  num_clusters: int) -> np.ndarray:
    """Anchors selected per user: ceil(p_add * l), capped at l."""
    p = addition_ratio(interaction_counts, smoothness)
    k = np.ceil(p * num_clusters).astype(np.int64)
    return np.minimum(num_clusters, k)


# ---------------------------------------------------------------------------
# Multi-head projected cosine similarity
# ---------------------------------------------------------------------------

class SimilarityHeads(nn.Module):
    """Q projection matrices for the neighbor side and Q for the anchor side."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        if num_heads < 1:
            raise ConfigError("need at least one similarity head")
        self.num_heads = num_heads
        self.w_neighbor = nn.Parameter(torch.zeros(num_heads, dim, dim, dtype=DTYPE))
        self.w_anchor = nn.Parameter(torch.zeros(num_heads, dim, dim, dtype=DTYPE))

    def init_params(self, rng: np.random.Generator) -> None:
        for q in range(self.num_heads):
            glorot_(self.w_neighbor[q], rng)
            glorot_(self.w_anchor[q], rng)


def _normalize_rows(p: Tensor) -> Tensor:
    """Row-normalize with a zero-norm guard; zero rows stay zero (cos = 0)."""
    sq = (p * p).sum(dim=-1)
    zero = sq == 0
    if bool(zero.any()):
        logger.debug("%d zero-norm projected vector(s); their similarity is 0", int(zero.sum()))
    denom = torch.sqrt(torch.where(zero, torch.ones_like(sq), sq))
    return p / denom.unsqueeze(-1)


def projected_rows(emb: Tensor, heads: Tensor) -> Tensor:
    """Normalized per-head projections of all rows; (Q, N, d)."""
    return _normalize_rows(torch.einsum("qde,ne->qnd", heads, emb))


def multihead_cosine(a: Tensor, b: Tensor, proj_a: Tensor, proj_b: Tensor) -> Tensor:
    """Mean over heads of cos(W_a^(q) a, W_b^(q) b); scalar in [-1, 1]."""
    pa = projected_rows(a.reshape(1, -1), proj_a)
    pb = projected_rows(b.reshape(1, -1), proj_b)
    return (pa[:, 0, :] * pb[:, 0, :]).sum(dim=-1).mean()


def edge_similarities(emb: Tensor, src: Tensor, dst: Tensor, heads: Tensor) -> Tensor:
    """Per-edge neighbor similarity; symmetric because both ends share heads."""
    p = projected_rows(emb, heads)
    return (p[:, src, :] * p[:, dst, :]).sum(dim=-1).mean(dim=0)


def anchor_similarities(emb: Tensor, anchor_ids: Tensor, w_neighbor: Tensor,
                        w_anchor: Tensor) -> Tensor:
    """Similarity of every user to every anchor user; (m, l)."""
    pu = projected_rows(emb, w_neighbor)
    pa = projected_rows(emb[anchor_ids], w_anchor)
    return torch.einsum("qmd,qld->ml", pu, pa) / w_neighbor.shape[0]


# ---------------------------------------------------------------------------
# Raw social graph in CSR form
# ---------------------------------------------------------------------------

@dataclass
class SocialStructure:
    """Directed-edge view of the undirected social graph (each edge twice)."""

    num_users: int
    indptr: np.ndarray  # (m+1,)
    indices: np.ndarray  # (E,) neighbor ids grouped by source user
    src: np.ndarray  # (E,) source user per edge
    degrees: np.ndarray  # (m,)

    @classmethod
    def build(cls, social: SocialGraph) -> "SocialStructure":
        degrees = social.degrees()
        indptr = np.zeros(social.num_users + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        indices = (
            np.concatenate(social.neighbors)
            if social.num_users and indptr[-1] > 0
            else np.zeros(0, dtype=np.int64)
        )
        src = np.repeat(np.arange(social.num_users, dtype=np.int64), degrees)
        return cls(
            num_users=social.num_users,
            indptr=indptr,
            indices=indices.astype(np.int64),
            src=src,
            degrees=degrees,
        )

    @property
    def num_directed_edges(self) -> int:
        return int(self.indices.size)


def select_retained_edges(structure: SocialStructure, sims: np.ndarray,
                          keep: np.ndarray) -> np.ndarray:
    """Boolean mask over directed edges keeping each user's top-`keep` neighbors.

    Sort is by descending similarity, ties by lower neighbor id; the mask is a
    pure function of the detached similarity values.
    """
    e = structure.num_directed_edges
    if e == 0:
        return np.zeros(0, dtype=bool)
    order = np.lexsort((structure.indices, -sims, structure.src))
    starts = np.repeat(structure.indptr[:-1], structure.degrees)
    rank = np.arange(e, dtype=np.int64) - starts  # position within the user block
    mask_sorted = rank < keep[structure.src[order]]
    mask = np.zeros(e, dtype=bool)
    mask[order] = mask_sorted
    return mask


def select_anchor_mask(scores: np.ndarray, k_per_user: np.ndarray,
                       self_slots: np.ndarray) -> np.ndarray:
    """Boolean (m, l) mask of each user's top-k anchors.

    Ties break toward the lower cluster index; slots whose anchor is the user
    itself are never selected, capping the count at the eligible slots.
    """
    ranked = np.where(self_slots, np.inf, -scores)
    order = np.argsort(ranked, axis=1, kind="stable")
    ranks = np.empty_like(order)
    rows = np.arange(scores.shape[0])[:, None]
    ranks[rows, order] = np.arange(scores.shape[1])[None, :]
    return (ranks < k_per_user[:, None]) & ~self_slots


def prune_neighbors(
    u: int,
    structure: SocialStructure,
    embeddings: Tensor,
    heads: "SimilarityHeads",
    interaction_counts: np.ndarray,
    del_smoothness: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Retained neighbor ids and their similarity weights for one user."""
    lo, hi = structure.indptr[u], structure.indptr[u + 1]
    if hi == lo:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64)
    src = torch.from_numpy(structure.src[lo:hi])
    dst = torch.from_numpy(structure.indices[lo:hi])
    sims = edge_similarities(embeddings, src, dst, heads.w_neighbor).detach().numpy()
    keep = retained_counts(structure.degrees, interaction_counts, del_smoothness)
    order = np.lexsort((structure.indices[lo:hi], -sims))
    chosen = np.sort(order[: keep[u]])
    return structure.indices[lo:hi][chosen], sims[chosen]


def select_anchors(
    u: int,
    anchor_ids: np.ndarray,
    embeddings: Tensor,
    heads: "SimilarityHeads",
    interaction_counts: np.ndarray,
    add_smoothness: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Selected anchor slots, their user ids, and weights for one user."""
    anchor_t = torch.from_numpy(np.asarray(anchor_ids, dtype=np.int64))
    sims = anchor_similarities(embeddings, anchor_t, heads.w_neighbor, heads.w_anchor)
    scores = sims[u].detach().numpy()[None, :]
    k = anchor_counts(interaction_counts, add_smoothness, anchor_ids.size)
    self_slots = (np.asarray(anchor_ids) == u)[None, :]
    mask = select_anchor_mask(scores, np.array([k[u]]), self_slots)[0]
    slots = np.flatnonzero(mask)
    return slots, np.asarray(anchor_ids)[slots], scores[0][slots]


# ---------------------------------------------------------------------------
# Fusion and iterated refinement
# ---------------------------------------------------------------------------

def fuse_social(e_self: Tensor, neighbor_sum: Tensor, anchor_sum: Tensor,
                alpha: float) -> Tensor:
    """alpha-weighted mix of the aggregated social signal with the user itself."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError("alpha must lie in [0, 1]")
    return alpha * (neighbor_sum + anchor_sum) + (1.0 - alpha) * e_self


@dataclass
class RefinedIteration:
    """Selections made by one refinement iteration, for export and checks."""

    retained_src: np.ndarray
    retained_dst: np.ndarray
    retained_weight: np.ndarray
    anchor_src: np.ndarray
    anchor_slot: np.ndarray
    anchor_user: np.ndarray
    anchor_weight: np.ndarray

    def retained_count_per_user(self, num_users: int) -> np.ndarray:
        return np.bincount(self.retained_src, minlength=num_users)

    def anchor_count_per_user(self, num_users: int) -> np.ndarray:
        return np.bincount(self.anchor_src, minlength=num_users)


def refine(
    h_users: Tensor,
    e0_users: Tensor,
    structure: SocialStructure,
    interaction_counts: np.ndarray,
    anchor_ids: np.ndarray,
    heads: SimilarityHeads,
    w_fuse: Tensor,
    b_fuse: Tensor,
    alpha: float,
    del_smoothness: float,
    add_smoothness: float,
    iterations: int,
    ablation: str = "full",
    collect_graphs: bool = False,
) -> tuple[Tensor, list[RefinedIteration]]:
    """Iterate U2U deletion + U2C addition + skip-connection fusion T times.

    The embedding fed to each iteration is the previous iteration's output
    (the propagation readout at t=1); anchors are re-embedded from it each
    time. Parameters are shared across iterations.
    """
    if iterations < 1:
        raise ConfigError("refine needs at least one iteration")
    m = structure.num_users
    # no_mimic only removes a loss term; its forward pass matches "full"
    prune = ablation in ("full", "no_mimic", "no_u2c")
    use_anchors = ablation in ("full", "no_mimic", "no_u2u")

    keep = retained_counts(structure.degrees, interaction_counts, del_smoothness)
    if not prune:
        keep = structure.degrees.copy()
    k_anchor = anchor_counts(interaction_counts, add_smoothness, anchor_ids.size)

    src_t = torch.from_numpy(structure.src)
    dst_t = torch.from_numpy(structure.indices)
    anchor_t = torch.from_numpy(anchor_ids)
    self_slots = np.asarray(anchor_ids)[None, :] == np.arange(m)[:, None]

    e_cur = e0_users
    collected: list[RefinedIteration] = []
    for _ in range(iterations):
        neighbor_sum = torch.zeros_like(e_cur)
        retained_mask = np.zeros(0, dtype=bool)
        edge_sims = torch.zeros(0, dtype=DTYPE)
        if structure.num_directed_edges:
            edge_sims = edge_similarities(e_cur, src_t, dst_t, heads.w_neighbor)
            retained_mask = select_retained_edges(
                structure, edge_sims.detach().numpy(), keep
            )
            sel = torch.from_numpy(np.flatnonzero(retained_mask))
            contrib = edge_sims[sel].unsqueeze(1) * e_cur[dst_t[sel]]
            neighbor_sum = neighbor_sum.index_add(0, src_t[sel], contrib)

        anchor_sum = torch.zeros_like(e_cur)
        anchor_mask = np.zeros((m, 0), dtype=bool)
        anchor_sims = torch.zeros((m, 0), dtype=DTYPE)
        if use_anchors and anchor_ids.size:
            anchor_sims = anchor_similarities(
                e_cur, anchor_t, heads.w_neighbor, heads.w_anchor
            )
            anchor_mask = select_anchor_mask(
                anchor_sims.detach().numpy(), k_anchor, self_slots
            )
            weighted = anchor_sims * torch.from_numpy(anchor_mask.astype(np.float64))
            anchor_sum = weighted @ e_cur[anchor_t]

        z = fuse_social(e_cur, neighbor_sum, anchor_sum, alpha)
        e_next = torch.cat([h_users, e_cur, z], dim=1) @ w_fuse.T + b_fuse

        if collect_graphs:
            sel_idx = np.flatnonzero(retained_mask)
            a_src, a_slot = np.nonzero(anchor_mask)
            collected.append(RefinedIteration(
                retained_src=structure.src[sel_idx],
                retained_dst=structure.indices[sel_idx],
                retained_weight=edge_sims.detach().numpy()[sel_idx]
                if sel_idx.size else np.zeros(0),
                anchor_src=a_src,
                anchor_slot=a_slot,
                anchor_user=np.asarray(anchor_ids)[a_slot]
                if a_slot.size else np.zeros(0, dtype=np.int64),
                anchor_weight=anchor_sims.detach().numpy()[a_src, a_slot]
                if a_src.size else np.zeros(0),
            ))
        e_cur = e_next
    return e_cur, collected
