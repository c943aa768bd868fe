"""Dense message-passing denoiser over subgraph edge (and label) states.

The network predicts, for every unordered node pair, a distribution over the
clean edge state given the noisy state at step t, conditioned on the fixed
global-context rows and the local context of the noisy state. Everything runs
in float64 on CPU; subgraphs are small enough that the dense quadratic pair
representation is cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .subgraphs import LOCAL_CONTEXT_DIM

NUM_EDGE_STATES = 2  # absent, present


def sinusoidal_embedding(tau: float, dim: int) -> np.ndarray:
    """Sin/cos features of a scalar time fraction tau in [0, 1]."""
    half = dim // 2
    freqs = np.exp(np.linspace(math.log(1.0), math.log(1000.0), half))
    ang = tau * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


@dataclass(frozen=True)
class DenoiserConfig:
    layers: int = 4
    hidden: int = 64
    num_label_classes: int = 0  # 0 means the graph carries no node labels
    context_dim: int = 0        # 0 means no global-context conditioning
    local_dim: int = LOCAL_CONTEXT_DIM
    time_dim: int = 8

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1:
            raise ValueError("layers and hidden must be positive")
        if self.time_dim % 2:
            raise ValueError("time_dim must be even")

    @property
    def node_in_dim(self) -> int:
        return max(self.num_label_classes, 1) + self.local_dim + self.time_dim


class EdgeNodeDenoiser(nn.Module):
    """L rounds of dense message passing with per-layer context injection.

    Node states start from [label one-hot (or a constant), local context row,
    sinusoidal time embedding]; pair states start from the edge one-hot. Each
    round adds the projected global context to every node state, aggregates
    messages over all pairs gated by the pair-state embedding, then updates
    pair states from the (symmetrized) endpoint states. Edge logits are
    explicitly symmetrized by averaging both orientations.
    """

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        h = config.hidden
        self.node_in = nn.Linear(config.node_in_dim, h)
        self.edge_in = nn.Linear(NUM_EDGE_STATES, h)
        self.c_proj = nn.Linear(config.context_dim, h) if config.context_dim else None
        self.gates = nn.ModuleList(nn.Linear(h, h) for _ in range(config.layers))
        self.msgs = nn.ModuleList(nn.Linear(h, h) for _ in range(config.layers))
        self.node_upds = nn.ModuleList(
            nn.Sequential(nn.Linear(2 * h, h), nn.SiLU(), nn.Linear(h, h))
            for _ in range(config.layers)
        )
        self.edge_upds = nn.ModuleList(
            nn.Sequential(nn.Linear(2 * h, h), nn.SiLU(), nn.Linear(h, h))
            for _ in range(config.layers)
        )
        self.edge_head = nn.Sequential(nn.Linear(h, h), nn.SiLU(), nn.Linear(h, NUM_EDGE_STATES))
        self.node_head = (
            nn.Sequential(nn.Linear(h, h), nn.SiLU(), nn.Linear(h, config.num_label_classes))
            if config.num_label_classes
            else None
        )
        self.double()

    def forward(
        self,
        edge_onehot: torch.Tensor,   # (n, n, 2), symmetric, diagonal ignored
        node_feat: torch.Tensor,     # (n, node_in_dim)
        context: torch.Tensor | None,  # (n, context_dim) or None
    ) -> tuple[torch.Tensor, torch.Tensor | None]:
        n = node_feat.shape[0]
        offdiag = (1.0 - torch.eye(n, dtype=node_feat.dtype)).unsqueeze(-1)
        h = self.node_in(node_feat)
        e = self.edge_in(edge_onehot)
        c = self.c_proj(context) if self.c_proj is not None else None
        denom = max(n - 1, 1)
        for layer in range(self.config.layers):
            if c is not None:
                h = h + c
            gate = torch.sigmoid(self.gates[layer](e)) * offdiag
            msg = (gate * self.msgs[layer](h).unsqueeze(0)).sum(dim=1) / denom
            h = h + self.node_upds[layer](torch.cat([h, msg], dim=-1))
            pair = h.unsqueeze(0) + h.unsqueeze(1)  # symmetric endpoint mix
            e = e + self.edge_upds[layer](torch.cat([e, pair], dim=-1))
        edge_logits = self.edge_head(e)
        edge_logits = 0.5 * (edge_logits + edge_logits.transpose(0, 1))
        node_logits = self.node_head(h) if self.node_head is not None else None
        return edge_logits, node_logits


def build_node_features(
    config: DenoiserConfig,
    q: np.ndarray,
    labels_onehot: np.ndarray | None,
    tau: float,
) -> torch.Tensor:
    n = q.shape[0]
    if config.num_label_classes:
        if labels_onehot is None:
            raise ValueError("model expects node labels but state has none")
        lab = labels_onehot
    else:
        lab = np.ones((n, 1))
    temb = np.tile(sinusoidal_embedding(tau, config.time_dim), (n, 1))
    return torch.from_numpy(np.hstack([lab, q, temb]).astype(np.float64))


def edge_state_onehot(a: np.ndarray) -> torch.Tensor:
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros((*a.shape, NUM_EDGE_STATES))
    out[..., 0] = a == 0
    out[..., 1] = a == 1
    return torch.from_numpy(out)


def label_onehot(x: np.ndarray, num_classes: int) -> np.ndarray:
    out = np.zeros((x.shape[0], num_classes))
    out[np.arange(x.shape[0]), np.asarray(x, dtype=np.int64)] = 1.0
    return out
