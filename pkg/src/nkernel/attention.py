"""Masked scaled dot-product attention"""

import math

import torch
import torch.nn.functional as F

from ..utils.errors import ContractViolation


def causal_attention(queries, keys, values, mask):
    """Softmax attention restricted by a boolean mask.

    Args:
        queries: (..., Tq, dh)
        keys: (..., Tk, dh)
        values: (..., Tk, dv)
        mask: bool (Tq, Tk) or broadcastable; mask[i][j] = True means i may attend to j

    Returns:
        torch.Tensor: (..., Tq, dv); masked slots get exactly zero weight
    """
    if queries.shape[-1] != keys.shape[-1]:
        raise ContractViolation(f"Query dim {queries.shape[-1]} != key dim {keys.shape[-1]}")
    if keys.shape[-2] != values.shape[-2]:
        raise ContractViolation(f"{keys.shape[-2]} keys but {values.shape[-2]} values")
    mask = torch.as_tensor(mask, dtype=torch.bool)
    if mask.shape[-2:] != (queries.shape[-2], keys.shape[-2]):
        raise ContractViolation(f"Mask shape {list(mask.shape)} does not match {queries.shape[-2]}x{keys.shape[-2]} logits")
    if not bool(mask.any(dim=-1).all()):
        raise ContractViolation("Attention mask has a row with every entry masked")

    logits = (queries @ keys.transpose(-2, -1)) * (1.0 / math.sqrt(keys.shape[-1]))
    logits = logits.masked_fill(~mask, float("-inf"))
    weights = F.softmax(logits, dim=-1)
    return weights @ values
