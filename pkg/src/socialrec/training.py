"""Joint training: pairwise ranking loss plus the weighted mimic loss,
optimized with Adam over exact reverse-mode gradients.

Hard selections inside the refinement (top-count masks, cluster assignments)
are constants of each step; gradients flow through every similarity weight,
projection, and fusion parameter.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor

from .checkpoint import save_checkpoint
from .clusters import ClusterModel, mine_clusters
from .config import TrainConfig
from .data import ActivityLabels, InteractionGraph, SocialGraph
from .errors import ConfigError, NumericalError
from .mimic import build_pseudo_users, mimic_loss
from .model import GraphBundle, SocialRecModel, build_model
from .utils import rng_from_seed

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Triple sampling
# ---------------------------------------------------------------------------

@dataclass
class TripleBatch:
    users: np.ndarray
    pos_items: np.ndarray
    neg_items: np.ndarray

    def __len__(self) -> int:
        return int(self.users.size)


class TripleSampler:
    """Per-epoch stream of (user, positive, negative) triples.

    Every observed train interaction appears exactly once per epoch, in a
    shuffled order, so users are sampled proportionally to their interaction
    counts. Negatives are rejection-sampled uniformly outside the user's
    train set. Users who interacted with the whole catalog are skipped.
    """

    def __init__(self, train: InteractionGraph, seed: int):
        self.num_items = train.num_items
        pairs = train.interaction_pairs()
        degrees = train.user_degrees()
        saturated = np.flatnonzero(degrees >= train.num_items)
        if saturated.size:
            logger.warning(
                "%d user(s) interacted with every item; they yield no triples",
                saturated.size,
            )
            keep = ~np.isin(pairs[:, 0], saturated)
            pairs = pairs[keep]
        self.pairs = pairs
        # sorted composite keys make membership tests a vectorized bisect
        self._keys = np.sort(pairs[:, 0].astype(np.int64) * train.num_items + pairs[:, 1])
        all_pairs = train.interaction_pairs()
        self._all_keys = np.sort(
            all_pairs[:, 0].astype(np.int64) * train.num_items + all_pairs[:, 1]
        )
        self._rng = rng_from_seed(seed, "triples")

    def _is_interaction(self, users: np.ndarray, items: np.ndarray) -> np.ndarray:
        keys = users.astype(np.int64) * self.num_items + items
        idx = np.searchsorted(self._all_keys, keys)
        idx_c = np.minimum(idx, self._all_keys.size - 1)
        return (idx < self._all_keys.size) & (self._all_keys[idx_c] == keys)

    def _negatives(self, users: np.ndarray) -> np.ndarray:
        neg = self._rng.integers(self.num_items, size=users.size)
        bad = self._is_interaction(users, neg)
        while bad.any():
            neg[bad] = self._rng.integers(self.num_items, size=int(bad.sum()))
            bad = self._is_interaction(users, neg)
        return neg

    def epoch_batches(self, batch_size: int) -> Iterator[TripleBatch]:
        if batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        order = self._rng.permutation(self.pairs.shape[0])
        for start in range(0, order.size, batch_size):
            chunk = self.pairs[order[start:start + batch_size]]
            yield TripleBatch(
                users=chunk[:, 0].copy(),
                pos_items=chunk[:, 1].copy(),
                neg_items=self._negatives(chunk[:, 0]),
            )


def sample_triples(train: InteractionGraph, batch_size: int, seed: int) -> TripleBatch:
    """One batch of exactly `batch_size` triples, cycling epochs as needed."""
    sampler = TripleSampler(train, seed)
    users, pos, neg = [], [], []
    need = batch_size
    while need > 0:
        for batch in sampler.epoch_batches(batch_size=need):
            users.append(batch.users)
            pos.append(batch.pos_items)
            neg.append(batch.neg_items)
            need -= len(batch)
            if need <= 0:
                break
        if sampler.pairs.shape[0] == 0:
            raise ConfigError("no triples available: every user is saturated or empty")
    return TripleBatch(
        users=np.concatenate(users)[:batch_size],
        pos_items=np.concatenate(pos)[:batch_size],
        neg_items=np.concatenate(neg)[:batch_size],
    )


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def l2_penalty(params: Iterable[Tensor]) -> Tensor:
    total = torch.zeros((), dtype=torch.float64)
    for p in params:
        total = total + (p * p).sum()
    return total


def bpr_loss(user_emb: Tensor, item_emb: Tensor, batch: TripleBatch,
             reg_lambda: float, params: Iterable[Tensor]) -> Tensor:
    """Sum of -log sigmoid(score_pos - score_neg) plus the L2 penalty."""
    u = torch.from_numpy(batch.users)
    pos = torch.from_numpy(batch.pos_items)
    neg = torch.from_numpy(batch.neg_items)
    score_pos = (user_emb[u] * item_emb[pos]).sum(dim=1)
    score_neg = (user_emb[u] * item_emb[neg]).sum(dim=1)
    rank = F.softplus(-(score_pos - score_neg)).sum()
    return rank + reg_lambda * l2_penalty(params)


def total_loss(bpr: Tensor, mimic: Tensor, xi: float) -> Tensor:
    if xi < 0:
        raise ConfigError("loss combination weight must be >= 0")
    return bpr + xi * mimic


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def adam_step(value: Tensor, grad: Tensor, m: Tensor, v: Tensor, t: int,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One in-place Adam update with bias correction; t is the new step index."""
    m.mul_(beta1).add_(grad, alpha=1 - beta1)
    v.mul_(beta2).addcmul_(grad, grad, value=1 - beta2)
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    value.addcdiv_(m_hat, v_hat.sqrt().add_(eps), value=-lr)


class Adam:
    """Minimal Adam over a named parameter dict; state starts at zero."""

    def __init__(self, params: dict[str, torch.nn.Parameter], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: torch.zeros_like(p) for k, p in self.params.items()}
        self.v = {k: torch.zeros_like(p) for k, p in self.params.items()}

    @torch.no_grad()
    def step(self) -> None:
        self.t += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            adam_step(p.data, p.grad, self.m[name], self.v[name], self.t,
                      self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {"t": np.array([self.t], dtype=np.int64)}
        for k in self.params:
            out[f"m/{k}"] = self.m[k].numpy().copy()
            out[f"v/{k}"] = self.v[k].numpy().copy()
        return out


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    model: SocialRecModel
    clusters: ClusterModel
    bundle: GraphBundle
    config: TrainConfig
    loss_history: list[dict] = field(default_factory=list)
    checkpoint_path: Optional[str] = None
    dataset_hash: str = ""


def _check_finite_gradients(model: SocialRecModel) -> None:
    for name, p in model.named_parameters():
        if p.grad is not None and not bool(torch.isfinite(p.grad).all()):
            raise NumericalError(f"gradient for parameter {name!r} is not finite")


def train(
    train_graph: InteractionGraph,
    social: SocialGraph,
    labels: ActivityLabels,
    config: TrainConfig,
    out_dir: Optional[str] = None,
    dataset_hash_value: str = "",
) -> TrainResult:
    """Run the full optimization and optionally write a checkpoint.

    Clusters are mined once, before the first epoch, from raw item features
    and train interactions; they stay frozen. On divergence the last finite
    epoch's parameters are checkpointed before the error propagates.
    """
    config.validate()
    bundle = GraphBundle.build(train_graph, social)
    clusters = mine_clusters(
        train_graph.item_features,
        train_graph.user_items,
        labels,
        num_clusters=config.num_clusters,
        seed=config.seed,
    )
    rng_init = rng_from_seed(config.seed, "init")
    model = build_model(
        config, train_graph.user_features.shape[1], train_graph.item_features.shape[1],
        rng=rng_init,
    )
    params = dict(model.named_parameters())
    optimizer = Adam(params, learning_rate=config.learning_rate)
    sampler = TripleSampler(train_graph, seed=config.seed)
    rng_mimic = rng_from_seed(config.seed, "mimic")
    anchor_ids = clusters.anchor_users

    active_ids = labels.active_ids()
    inactive_ids = labels.inactive_ids()
    mimic_on = config.mimic_enabled and active_ids.size > 0

    def _save(path_dir: str) -> str:
        import os

        path = os.path.join(path_dir, "checkpoint.npz")
        save_checkpoint(
            path,
            model_state=model.state_arrays(),
            adam_state=optimizer.state_arrays(),
            config=config,
            clusters=clusters,
            dataset_hash=dataset_hash_value,
        )
        return path

    history: list[dict] = []
    last_good: dict[str, np.ndarray] = model.state_arrays()
    for epoch in range(config.epochs):
        epoch_bpr = 0.0
        epoch_mimic = 0.0
        for batch in sampler.epoch_batches(config.batch_size):
            out = model.forward(bundle, anchor_ids)
            loss_bpr = bpr_loss(
                out.refined_users, out.readout_items, batch,
                config.reg_lambda, params.values(),
            )
            loss_mimic = torch.zeros((), dtype=torch.float64)
            if mimic_on:
                batch_active = np.unique(batch.users)
                batch_active = batch_active[~labels.inactive[batch_active]]
                pseudo, cluster_idx = build_pseudo_users(
                    config.mimic_variant,
                    out.readout_users,
                    batch_active,
                    inactive_ids,
                    clusters.user_cluster,
                    rng_mimic,
                    beta=config.mix_beta,
                    keep_prob=config.mask_keep_prob,
                    samples_per_user=config.mimic_samples,
                )
                if len(pseudo):
                    anchor_source = (
                        out.refined_users if config.mimic_refined_anchors
                        else out.readout_users
                    )
                    anchors_emb = anchor_source[torch.from_numpy(anchor_ids)]
                    loss_mimic = mimic_loss(
                        pseudo, cluster_idx, anchors_emb, config.temperature,
                        full_denominator=config.infonce_full_denominator,
                    )
            loss = total_loss(loss_bpr, loss_mimic, config.mimic_weight if mimic_on else 0.0)
            if not bool(torch.isfinite(loss)):
                if out_dir:
                    model.load_state_arrays(last_good)
                    _save(out_dir)
                raise NumericalError(
                    f"loss diverged at epoch {epoch}; last finite checkpoint saved"
                )
            optimizer.zero_grad()
            if config.mimic_learning_rate is not None and mimic_on:
                # separate rate for the mimic contribution, folded into one step
                scale = config.mimic_learning_rate / max(config.learning_rate, 1e-30)
                g_bpr = torch.autograd.grad(
                    loss_bpr, list(params.values()), retain_graph=True, allow_unused=True
                )
                g_mimic = torch.autograd.grad(
                    loss_mimic * config.mimic_weight, list(params.values()), allow_unused=True
                )
                for p, gb, gm in zip(params.values(), g_bpr, g_mimic):
                    total = torch.zeros_like(p)
                    if gb is not None:
                        total += gb
                    if gm is not None:
                        total += scale * gm
                    p.grad = total
            else:
                loss.backward()
            _check_finite_gradients(model)
            optimizer.step()
            epoch_bpr += float(loss_bpr.detach())
            epoch_mimic += float(loss_mimic.detach())
        history.append({
            "epoch": epoch,
            "bpr": epoch_bpr,
            "mimic": epoch_mimic,
            "total": epoch_bpr + (config.mimic_weight if mimic_on else 0.0) * epoch_mimic,
        })
        last_good = model.state_arrays()

    checkpoint_path = _save(out_dir) if out_dir else None
    return TrainResult(
        model=model,
        clusters=clusters,
        bundle=bundle,
        config=config,
        loss_history=history,
        checkpoint_path=checkpoint_path,
        dataset_hash=dataset_hash_value,
    )
