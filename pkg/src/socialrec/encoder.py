"""Collaborative encoder: feature projection into a shared latent space and
degree-normalized bipartite propagation with a layer-mean readout.

Propagation uses sparse adjacency only; the dense-matrix path lives in the
test suite as an oracle, not here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .data import InteractionGraph
from .errors import ShapeError

DTYPE = torch.float64


def project(features: Tensor, w0: Tensor, b0: Tensor, w1: Tensor, b1: Tensor,
            slope: Tensor) -> Tensor:
    """Two-layer projection h = W1 . prelu(W0 . x + b0) + b1, rows = samples."""
    if features.shape[1] != w0.shape[1]:
        raise ShapeError(
            f"feature width {features.shape[1]} does not match projection input {w0.shape[1]}"
        )
    hidden = F.prelu(features @ w0.T + b0, slope)
    return hidden @ w1.T + b1


class FeatureProjector(nn.Module):
    """Learnable projection MLP with a single hidden layer and PReLU."""

    def __init__(self, in_dim: int, hidden_dim: int, out_dim: int):
        super().__init__()
        self.w0 = nn.Parameter(torch.zeros(hidden_dim, in_dim, dtype=DTYPE))
        self.b0 = nn.Parameter(torch.zeros(hidden_dim, dtype=DTYPE))
        self.w1 = nn.Parameter(torch.zeros(out_dim, hidden_dim, dtype=DTYPE))
        self.b1 = nn.Parameter(torch.zeros(out_dim, dtype=DTYPE))
        self.slope = nn.Parameter(torch.full((1,), 0.25, dtype=DTYPE))

    def init_params(self, rng: np.random.Generator) -> None:
        glorot_(self.w0, rng)
        glorot_(self.w1, rng)
        with torch.no_grad():
            self.b0.zero_()
            self.b1.zero_()
            self.slope.fill_(0.25)

    def forward(self, features: Tensor) -> Tensor:
        return project(features, self.w0, self.b0, self.w1, self.b1, self.slope)


def glorot_(param: nn.Parameter, rng: np.random.Generator) -> None:
    """Glorot-uniform fill driven by the shared numpy generator."""
    fan_out, fan_in = param.shape[0], int(np.prod(param.shape[1:]))
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    with torch.no_grad():
        values = rng.uniform(-limit, limit, size=tuple(param.shape))
        param.copy_(torch.from_numpy(values).to(DTYPE))


def build_adjacency(graph: InteractionGraph) -> tuple[Tensor, Tensor]:
    """Sparse degree-normalized bipartite adjacency and its transpose.

    Entry (u, i) is 1 / (sqrt(|I(u)|) sqrt(|U(i)|)); rows of isolated nodes
    stay empty so propagation yields zero vectors for them.
    """
    pairs = graph.interaction_pairs()
    m, n = graph.num_users, graph.num_items
    if pairs.size == 0:
        empty = torch.sparse_coo_tensor(torch.zeros(2, 0, dtype=torch.int64),
                                        torch.zeros(0, dtype=DTYPE), (m, n),
                                        check_invariants=False).coalesce()
        return empty, empty.transpose(0, 1).coalesce()
    du = graph.user_degrees().astype(np.float64)
    di = graph.item_degrees().astype(np.float64)
    vals = 1.0 / (np.sqrt(du[pairs[:, 0]]) * np.sqrt(di[pairs[:, 1]]))
    idx = torch.from_numpy(pairs.T.copy())
    adj_ui = torch.sparse_coo_tensor(idx, torch.from_numpy(vals), (m, n),
                                     check_invariants=False).coalesce()
    adj_iu = torch.sparse_coo_tensor(idx.flip(0), torch.from_numpy(vals), (n, m),
                                     check_invariants=False).coalesce()
    return adj_ui, adj_iu


@dataclass
class LayerStack:
    """Per-layer embeddings; index 0 holds the projected inputs."""

    users: list[Tensor]  # K+1 tensors of shape (m, d)
    items: list[Tensor]  # K+1 tensors of shape (n, d)

    @property
    def depth(self) -> int:
        return len(self.users) - 1


def propagate(h_users: Tensor, h_items: Tensor, adj_ui: Tensor, adj_iu: Tensor,
              depth: int) -> LayerStack:
    """Alternating weighted-sum aggregation across the bipartite graph."""
    if depth < 1:
        raise ShapeError("propagation depth must be >= 1")
    users = [h_users]
    items = [h_items]
    for k in range(1, depth + 1):
        users.append(torch.sparse.mm(adj_ui, items[k - 1]))
        items.append(torch.sparse.mm(adj_iu, users[k - 1]))
    return LayerStack(users=users, items=items)


def readout(stack: LayerStack, divisor: str = "layers") -> tuple[Tensor, Tensor]:
    """Combine the stored layers into final embeddings.

    "layers" divides the layer sum by K+1 (uniform mean); "hops" divides the
    same sum by K.
    """
    k = stack.depth
    denom = float(k + 1) if divisor == "layers" else float(k)
    e_u = torch.stack(stack.users, dim=0).sum(dim=0) / denom
    e_i = torch.stack(stack.items, dim=0).sum(dim=0) / denom
    return e_u, e_i
