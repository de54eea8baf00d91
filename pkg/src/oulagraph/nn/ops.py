"""Graph primitives on torch tensors: per-destination softmax and aggregation."""
from __future__ import annotations

import math

import torch


def segment_softmax(scores: torch.Tensor, index: torch.Tensor, num_segments: int) -> torch.Tensor:
    """Softmax of ``scores`` (E, ...) within groups sharing ``index`` (E,).

    The per-group maximum is subtracted first; it is treated as a constant,
    which leaves both value and gradient unchanged.
    """
    shape = (num_segments,) + tuple(scores.shape[1:])
    idx = index.view(-1, *([1] * (scores.dim() - 1))).expand_as(scores)
    mx = torch.full(shape, -math.inf, dtype=scores.dtype).scatter_reduce(0, idx, scores.detach(), "amax")
    ex = torch.exp(scores - mx[index])
    denom = torch.zeros(shape, dtype=scores.dtype).index_add(0, index, ex)
    return ex / denom[index]


def segment_sum(values: torch.Tensor, index: torch.Tensor, num_segments: int) -> torch.Tensor:
    out = torch.zeros((num_segments,) + tuple(values.shape[1:]), dtype=values.dtype)
    return out.index_add(0, index, values)


def glorot_(t: torch.Tensor, generator: torch.Generator, fan_in: int | None = None, fan_out: int | None = None) -> torch.Tensor:
    """In-place uniform Glorot initialisation driven by ``generator``."""
    if fan_in is None or fan_out is None:
        fan_in, fan_out = t.shape[-2] if t.dim() > 1 else t.shape[0], t.shape[-1]
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        t.copy_(torch.rand(t.shape, generator=generator, dtype=t.dtype) * 2 * bound - bound)
    return t
