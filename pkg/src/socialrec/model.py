"""Full model: collaborative encoder feeding the social-graph refinement."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from torch import Tensor, nn

from .config import TrainConfig
from .data import InteractionGraph, SocialGraph
from .encoder import DTYPE, FeatureProjector, build_adjacency, glorot_, propagate, readout
from .gsl import RefinedIteration, SimilarityHeads, SocialStructure, refine


@dataclass
class GraphBundle:
    """Precomputed tensors for one dataset; immutable during training."""

    num_users: int
    num_items: int
    user_features: Tensor
    item_features: Tensor
    adj_ui: Tensor
    adj_iu: Tensor
    structure: SocialStructure
    interaction_counts: np.ndarray

    @classmethod
    def build(cls, train: InteractionGraph, social: SocialGraph) -> "GraphBundle":
        adj_ui, adj_iu = build_adjacency(train)
        return cls(
            num_users=train.num_users,
            num_items=train.num_items,
            user_features=torch.from_numpy(np.ascontiguousarray(train.user_features)).to(DTYPE),
            item_features=torch.from_numpy(np.ascontiguousarray(train.item_features)).to(DTYPE),
            adj_ui=adj_ui,
            adj_iu=adj_iu,
            structure=SocialStructure.build(social),
            interaction_counts=train.user_degrees(),
        )


@dataclass
class ForwardOutput:
    projected_users: Tensor  # h
    readout_users: Tensor  # e_u
    readout_items: Tensor  # e_i
    refined_users: Tensor  # E_u
    iterations: list[RefinedIteration] = field(default_factory=list)


class SocialRecModel(nn.Module):
    """Projection MLPs, propagation, similarity heads, and fusion parameters."""

    def __init__(self, user_dim: int, item_dim: int, cfg: TrainConfig):
        super().__init__()
        d = cfg.embedding_dim
        hidden = cfg.resolved_hidden_dim
        self.cfg = cfg
        self.user_proj = FeatureProjector(user_dim, hidden, d)
        self.item_proj = FeatureProjector(item_dim, hidden, d)
        self.heads = SimilarityHeads(d, cfg.num_heads)
        self.w_fuse = nn.Parameter(torch.zeros(d, 3 * d, dtype=DTYPE))
        self.b_fuse = nn.Parameter(torch.zeros(d, dtype=DTYPE))

    def init_params(self, rng: np.random.Generator) -> None:
        """Glorot matrices, zero biases; one generator fixes the whole state."""
        self.user_proj.init_params(rng)
        self.item_proj.init_params(rng)
        self.heads.init_params(rng)
        glorot_(self.w_fuse, rng)
        with torch.no_grad():
            self.b_fuse.zero_()

    def forward(self, bundle: GraphBundle, anchor_ids: np.ndarray,
                collect_graphs: bool = False) -> ForwardOutput:
        cfg = self.cfg
        h_u = self.user_proj(bundle.user_features)
        h_i = self.item_proj(bundle.item_features)
        stack = propagate(h_u, h_i, bundle.adj_ui, bundle.adj_iu, cfg.num_layers)
        e_u, e_i = readout(stack, divisor=cfg.readout_divisor)
        refined, iterations = refine(
            h_users=h_u,
            e0_users=e_u,
            structure=bundle.structure,
            interaction_counts=bundle.interaction_counts,
            anchor_ids=anchor_ids,
            heads=self.heads,
            w_fuse=self.w_fuse,
            b_fuse=self.b_fuse,
            alpha=cfg.fuse_alpha,
            del_smoothness=cfg.del_smoothness,
            add_smoothness=cfg.add_smoothness,
            iterations=cfg.refine_iters,
            ablation=cfg.ablation,
            collect_graphs=collect_graphs,
        )
        return ForwardOutput(
            projected_users=h_u,
            readout_users=e_u,
            readout_items=e_i,
            refined_users=refined,
            iterations=iterations,
        )

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.detach().numpy().copy() for k, v in self.state_dict().items()}

    def load_state_arrays(self, state: dict[str, np.ndarray]) -> None:
        tensors = {k: torch.from_numpy(np.asarray(v)).to(DTYPE) for k, v in state.items()}
        self.load_state_dict(tensors)


def build_model(cfg: TrainConfig, user_dim: int, item_dim: int,
                rng: Optional[np.random.Generator] = None) -> SocialRecModel:
    model = SocialRecModel(user_dim, item_dim, cfg)
    if rng is not None:
        model.init_params(rng)
    return model
