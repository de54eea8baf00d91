"""HAN and HGT node classifiers over registration graphs.

Both models take a :class:`GraphTensors` bundle: node features of the single
registration node type and one ``(2, E)`` edge index per relation (metapath).
Attention is normalised over each destination node's incoming edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .ops import glorot_, segment_softmax, segment_sum


@dataclass
class GraphTensors:
    x: torch.Tensor
    edges: dict[str, torch.Tensor]
    y: torch.Tensor

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_graph(cls, g, dtype: torch.dtype = torch.float32) -> "GraphTensors":
        rel = "__".join(g.relations[0])
        return cls(
            x=torch.as_tensor(np.asarray(g.x), dtype=dtype),
            edges={rel: torch.as_tensor(np.asarray(g.edge_index), dtype=torch.long)},
            y=torch.as_tensor(np.asarray(g.y), dtype=torch.long),
        )


def _linear(n_in: int, n_out: int, gen: torch.Generator, bias: bool = True) -> nn.Linear:
    lin = nn.Linear(n_in, n_out, bias=bias)
    glorot_(lin.weight, gen, n_in, n_out)
    if bias:
        nn.init.zeros_(lin.bias)
    return lin


def _param(shape, gen: torch.Generator, fan_in: int, fan_out: int) -> nn.Parameter:
    return nn.Parameter(glorot_(torch.empty(shape), gen, fan_in, fan_out))


class HAN(nn.Module):
    """Node-level GAT attention per metapath followed by semantic attention.

    Per metapath the features are projected into ``heads`` subspaces of width
    ``hidden``; edge scores are ``LeakyReLU(a_src . z_src + a_dst . z_dst)``
    (the concatenated-endpoint form), softmaxed over each node's in-edges, and
    the aggregated heads are averaged and passed through ELU.  Semantic
    attention scores each metapath by the node-mean of ``q . tanh(W z + b)``.
    """

    def __init__(self, in_dim: int, metapaths: tuple[str, ...], hidden: int = 64, heads: int = 8,
                 n_classes: int = 2, dropout: float = 0.0, negative_slope: float = 0.2,
                 semantic_hidden: int | None = None, seed: int = 0):
        super().__init__()
        if heads < 1:
            raise ValueError("heads must be >= 1")
        gen = torch.Generator().manual_seed(seed)
        self.in_dim, self.hidden, self.heads = in_dim, hidden, heads
        self.metapaths = tuple(metapaths)
        self.dropout, self.negative_slope = dropout, negative_slope
        self.proj = nn.ModuleDict({m: _linear(in_dim, heads * hidden, gen, bias=False) for m in self.metapaths})
        self.attn_src = nn.ParameterDict({m: _param((heads, hidden), gen, hidden, 1) for m in self.metapaths})
        self.attn_dst = nn.ParameterDict({m: _param((heads, hidden), gen, hidden, 1) for m in self.metapaths})
        sh = semantic_hidden or hidden
        self.sem_lin = _linear(hidden, sh, gen)
        self.sem_q = _param((sh,), gen, sh, 1)
        self.head = _linear(hidden, n_classes, gen)
        self.last_attention: dict[str, torch.Tensor] = {}
        self.last_semantic: torch.Tensor | None = None

    def _node_level(self, x: torch.Tensor, edge_index: torch.Tensor, m: str) -> torch.Tensor:
        n = x.shape[0]
        src, dst = edge_index
        z = self.proj[m](x).view(n, self.heads, self.hidden)
        s_src = (z * self.attn_src[m]).sum(-1)
        s_dst = (z * self.attn_dst[m]).sum(-1)
        e = F.leaky_relu(s_src[src] + s_dst[dst], self.negative_slope)
        alpha = segment_softmax(e, dst, n)
        self.last_attention[m] = alpha.detach()
        alpha = F.dropout(alpha, self.dropout, self.training)
        out = segment_sum(alpha.unsqueeze(-1) * z[src], dst, n)
        return F.elu(out.mean(dim=1))

    def embed(self, g: GraphTensors) -> torch.Tensor:
        x = F.dropout(g.x, self.dropout, self.training)
        zs = torch.stack([self._node_level(x, g.edges[m], m) for m in self.metapaths])  # (P, N, hidden)
        w = (torch.tanh(self.sem_lin(zs)) @ self.sem_q).mean(dim=1)
        beta = torch.softmax(w, dim=0)
        self.last_semantic = beta.detach()
        return (beta[:, None, None] * zs).sum(0)

    def forward(self, g: GraphTensors) -> torch.Tensor:
        return self.head(F.dropout(self.embed(g), self.dropout, self.training))


class HGTLayer(nn.Module):
    """One heterogeneous-transformer layer for the registration node type.

    Keys, queries and values are node-type projections; each relation owns a
    per-head attention matrix, message matrix and prior.  Scores
    ``(k_src W_att) . q_dst * prior / sqrt(d)`` are softmaxed over all incoming
    edges of a node; aggregated messages pass through GELU and an output
    projection, mixed with the input by a learned sigmoid gate.
    """

    def __init__(self, dim: int, heads: int, relations: tuple[str, ...], dropout: float = 0.0,
                 gen: torch.Generator | None = None):
        super().__init__()
        if dim % heads:
            raise ValueError(f"hidden width {dim} not divisible by {heads} heads")
        gen = gen or torch.Generator().manual_seed(0)
        self.dim, self.heads, self.d = dim, heads, dim // heads
        self.relations = tuple(relations)
        self.dropout = dropout
        self.k_lin = _linear(dim, dim, gen)
        self.q_lin = _linear(dim, dim, gen)
        self.v_lin = _linear(dim, dim, gen)
        self.a_lin = _linear(dim, dim, gen)
        self.skip = nn.Parameter(torch.ones(()))
        r = len(self.relations)
        self.rel_att = _param((r, heads, self.d, self.d), gen, self.d, self.d)
        self.rel_msg = _param((r, heads, self.d, self.d), gen, self.d, self.d)
        self.rel_pri = nn.Parameter(torch.ones(r, heads))
        self.last_attention: torch.Tensor | None = None

    def attend(self, h: torch.Tensor, edges: dict[str, torch.Tensor]) -> torch.Tensor:
        """Aggregated multi-head messages, shape (N, heads, d), before the output projection."""
        n = h.shape[0]
        k = self.k_lin(h).view(n, self.heads, self.d)
        q = self.q_lin(h).view(n, self.heads, self.d)
        v = self.v_lin(h).view(n, self.heads, self.d)
        scores, msgs, dsts = [], [], []
        for r, name in enumerate(self.relations):
            src, dst = edges[name]
            k_r = torch.einsum("nhd,hde->nhe", k, self.rel_att[r])
            v_r = torch.einsum("nhd,hde->nhe", v, self.rel_msg[r])
            scores.append((k_r[src] * q[dst]).sum(-1) * self.rel_pri[r] / math.sqrt(self.d))
            msgs.append(v_r[src])
            dsts.append(dst)
        score, msg, dst = torch.cat(scores), torch.cat(msgs), torch.cat(dsts)
        alpha = segment_softmax(score, dst, n)
        self.last_attention = alpha.detach()
        alpha = F.dropout(alpha, self.dropout, self.training)
        return segment_sum(alpha.unsqueeze(-1) * msg, dst, n)

    def forward(self, h: torch.Tensor, edges: dict[str, torch.Tensor]) -> torch.Tensor:
        agg = self.attend(h, edges).reshape(h.shape[0], self.dim)
        out = F.dropout(self.a_lin(F.gelu(agg)), self.dropout, self.training)
        gate = torch.sigmoid(self.skip)
        return gate * out + (1 - gate) * h


class HGT(nn.Module):
    """Input projection, ``layers`` HGT layers and a linear classification head."""

    def __init__(self, in_dim: int, relations: tuple[str, ...], hidden: int = 64, heads: int = 8,
                 layers: int = 2, n_classes: int = 2, dropout: float = 0.0, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.in_dim, self.hidden, self.heads = in_dim, hidden, heads
        self.relations = tuple(relations)
        self.dropout = dropout
        self.inp = _linear(in_dim, hidden, gen)
        self.layers = nn.ModuleList(HGTLayer(hidden, heads, self.relations, dropout, gen) for _ in range(layers))
        self.head = _linear(hidden, n_classes, gen)

    def embed(self, g: GraphTensors) -> torch.Tensor:
        h = F.elu(self.inp(F.dropout(g.x, self.dropout, self.training)))
        for layer in self.layers:
            h = layer(h, g.edges)
        return h

    def forward(self, g: GraphTensors) -> torch.Tensor:
        return self.head(self.embed(g))


def _check_width(model: nn.Module, g: GraphTensors):
    if g.x.shape[1] != model.in_dim:
        raise ValueError(f"feature width {g.x.shape[1]} does not match model input width {model.in_dim}")


def han_forward(g: GraphTensors, model: HAN) -> torch.Tensor:
    _check_width(model, g)
    return model(g)


def hgt_forward(g: GraphTensors, model: HGT) -> torch.Tensor:
    _check_width(model, g)
    return model(g)


def build_model(kind: str, in_dim: int, relations: tuple[str, ...], hidden: int = 64, heads: int = 8,
                layers: int | None = None, dropout: float = 0.0, seed: int = 0) -> nn.Module:
    kind = kind.lower()
    if kind == "han":
        return HAN(in_dim, relations, hidden, heads, dropout=dropout, seed=seed)
    if kind == "hgt":
        return HGT(in_dim, relations, hidden, heads, layers or 2, dropout=dropout, seed=seed)
    raise ValueError(f"unknown graph model {kind!r}")


def loss_and_grad(logits: torch.Tensor, labels: torch.Tensor, mask, params) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """Mean cross-entropy over masked nodes and its gradient for each named parameter."""
    mask = torch.as_tensor(np.asarray(mask), dtype=torch.bool) if not torch.is_tensor(mask) else mask
    if not bool(mask.any()):
        raise ValueError("empty mask")
    if not torch.isfinite(logits).all():
        raise ValueError("non-finite logits")
    loss = F.cross_entropy(logits[mask], labels[mask])
    names, tensors = zip(*params)
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)
    return loss.detach(), {n: (g if g is not None else torch.zeros_like(t)) for n, t, g in zip(names, tensors, grads)}
