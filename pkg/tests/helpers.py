"""Shared test oracles: dense reference math and finite-difference gradients."""

import numpy as np
import torch

from socialrec.data import InteractionGraph


def dense_normalized_adjacency(graph: InteractionGraph) -> np.ndarray:
    """Dense (m+n)x(m+n) block adjacency with symmetric degree normalization."""
    m, n = graph.num_users, graph.num_items
    a = np.zeros((m + n, m + n), dtype=np.float64)
    du = graph.user_degrees().astype(np.float64)
    di = graph.item_degrees().astype(np.float64)
    for u in range(m):
        for i in graph.user_items[u]:
            w = 1.0 / (np.sqrt(du[u]) * np.sqrt(di[int(i)]))
            a[u, m + int(i)] = w
            a[m + int(i), u] = w
    return a


def dense_propagate(graph: InteractionGraph, h_users: np.ndarray, h_items: np.ndarray,
                    depth: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Reference propagation: repeated dense matrix products."""
    m = graph.num_users
    a = dense_normalized_adjacency(graph)
    e = np.concatenate([h_users, h_items], axis=0)
    users, items = [h_users.copy()], [h_items.copy()]
    for _ in range(depth):
        e = a @ e
        users.append(e[:m].copy())
        items.append(e[m:].copy())
    return users, items


def reference_project(x: np.ndarray, w0: np.ndarray, b0: np.ndarray,
                      w1: np.ndarray, b1: np.ndarray, slope: float) -> np.ndarray:
    """Plain elementwise evaluation of the projection MLP."""
    pre = x @ w0.T + b0
    act = np.where(pre >= 0, pre, slope * pre)
    return act @ w1.T + b1


def finite_difference_gradients(loss_fn, params: dict[str, torch.nn.Parameter],
                                h: float = 1e-5) -> dict[str, np.ndarray]:
    """Central differences of a scalar loss w.r.t. every parameter entry."""
    grads: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = np.zeros(p.numel(), dtype=np.float64)
        flat = p.data.view(-1)
        for k in range(p.numel()):
            orig = flat[k].item()
            flat[k] = orig + h
            up = float(loss_fn())
            flat[k] = orig - h
            down = float(loss_fn())
            flat[k] = orig
            g[k] = (up - down) / (2.0 * h)
        grads[name] = g.reshape(tuple(p.shape))
    return grads


def group_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max-abs relative error between gradient groups."""
    diff = np.max(np.abs(analytic - numeric))
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)), 1e-8)
    return float(diff / scale)


def _ref_normalized_heads(emb: np.ndarray, heads: np.ndarray) -> np.ndarray:
    """(Q, N, d) row-normalized head projections; zero rows stay zero."""
    out = []
    for w in heads:
        p = emb @ w.T
        norms = np.sqrt((p * p).sum(axis=1))
        safe = np.where(norms == 0, 1.0, norms)
        out.append(p / safe[:, None])
    return np.stack(out, axis=0)


def reference_refine(
    h_users: np.ndarray,
    e0_users: np.ndarray,
    neighbors: list,
    interaction_counts: np.ndarray,
    anchor_ids: np.ndarray,
    w_neighbor: np.ndarray,
    w_anchor: np.ndarray,
    w_fuse: np.ndarray,
    b_fuse: np.ndarray,
    alpha: float,
    r1: float,
    r2: float,
    iterations: int,
) -> np.ndarray:
    """Slow per-user re-derivation of the full-variant refinement loop."""
    m, d = e0_users.shape
    l = len(anchor_ids)
    e = e0_users.copy()
    for _ in range(iterations):
        pn = _ref_normalized_heads(e, w_neighbor)
        pa = _ref_normalized_heads(e[anchor_ids], w_anchor)
        z = np.zeros_like(e)
        for u in range(m):
            nbrs = list(neighbors[u])
            if nbrs:
                sims = [float(np.mean([pn[q, u] @ pn[q, v] for q in range(len(w_neighbor))]))
                        for v in nbrs]
                p_del = np.tanh(interaction_counts[u] / r1)
                keep = min(len(nbrs), max(1, int(np.ceil((1 - p_del) * len(nbrs)))))
                ranked = sorted(zip(sims, nbrs), key=lambda t: (-t[0], t[1]))[:keep]
                nbr_sum = sum(s * e[v] for s, v in ranked)
            else:
                nbr_sum = np.zeros(d)
            scores = [float(np.mean([pn[q, u] @ pa[q, k] for q in range(len(w_neighbor))]))
                      for k in range(l)]
            p_add = 1.0 / (1.0 + np.exp(interaction_counts[u] / r2))
            k_cnt = min(l, int(np.ceil(p_add * l)))
            eligible = [(s, k) for k, s in enumerate(scores) if anchor_ids[k] != u]
            chosen = sorted(eligible, key=lambda t: (-t[0], t[1]))[:k_cnt]
            anc_sum = sum(s * e[anchor_ids[k]] for s, k in chosen) if chosen else np.zeros(d)
            z[u] = alpha * (nbr_sum + anc_sum) + (1 - alpha) * e[u]
        e = np.concatenate([h_users, e, z], axis=1) @ w_fuse.T + b_fuse
    return e


def check_gradients(loss_fn, named_params, h: float = 1e-5, tol: float = 1e-4) -> dict[str, float]:
    """Compare autograd gradients of loss_fn() against central differences.

    Returns the per-group relative errors; raises AssertionError on violation.
    """
    params = dict(named_params)
    for p in params.values():
        if p.grad is not None:
            p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (p.grad.detach().numpy().copy() if p.grad is not None else np.zeros(tuple(p.shape)))
        for name, p in params.items()
    }
    with torch.no_grad():
        numeric = finite_difference_gradients(lambda: loss_fn().item(), params, h=h)
    errors = {}
    for name in params:
        err = group_relative_error(analytic[name], numeric[name])
        errors[name] = err
        assert err <= tol, f"gradient mismatch for {name}: rel err {err:.3e} > {tol}"
    return errors
