"""Small tensor helpers shared by the attention and pooling layers."""
import math

import torch


def scatter_softmax(logits: torch.Tensor, index: torch.Tensor, size: int) -> torch.Tensor:
    """Softmax of `logits` over groups along the last axis.

    index[p] names the group of entry p; every group in range(size) that owns
    at least one entry gets weights summing to 1.
    """
    shape = (*logits.shape[:-1], size)
    expanded = index.expand_as(logits)
    peak = torch.zeros(shape, dtype=logits.dtype, device=logits.device)
    peak = peak.scatter_reduce(-1, expanded, logits.detach(), reduce="amax", include_self=False)
    weights = torch.exp(logits - peak.gather(-1, expanded))
    total = torch.zeros(shape, dtype=logits.dtype, device=logits.device).index_add(-1, index, weights)
    return weights / total.gather(-1, expanded)


def scatter_sum(values: torch.Tensor, index: torch.Tensor, size: int, dim: int) -> torch.Tensor:
    shape = list(values.shape)
    shape[dim] = size
    return torch.zeros(shape, dtype=values.dtype, device=values.device).index_add(dim, index, values)


def glorot_(tensor: torch.Tensor, fan_in: int, fan_out: int, generator: torch.Generator) -> torch.Tensor:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    with torch.no_grad():
        return tensor.uniform_(-bound, bound, generator=generator)
