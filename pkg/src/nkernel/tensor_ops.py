"""Tensor value helpers: every real-valued quantity is a float32 torch tensor"""

import math

import torch

from ..utils.errors import ContractViolation, NumericalError

TensorVal = torch.Tensor
DTYPE = torch.float32


def tensor_val(shape, data):
    """Build a float32 tensor from a shape and row-major values

    Args:
        shape: Sequence of dimension sizes
        data: Flat sequence of values, len == prod(shape)

    Returns:
        torch.Tensor: float32 tensor of the given shape
    """
    shape = tuple(int(s) for s in shape)
    values = list(data) if not isinstance(data, torch.Tensor) else data.reshape(-1)
    if math.prod(shape) != len(values):
        raise ContractViolation(f"Shape {list(shape)} holds {math.prod(shape)} values, got {len(values)}")
    return torch.as_tensor(values, dtype=DTYPE).reshape(shape)


def check_finite(tensor, what="tensor"):
    """Raise NumericalError when a tensor holds NaN or Inf; returns the tensor unchanged."""
    if not bool(torch.isfinite(tensor).all()):
        raise NumericalError(f"Non-finite values in {what}")
    return tensor


def require_last_dim(tensor, size, what):
    """Raise ContractViolation unless tensor.shape[-1] == size."""
    if tensor.dim() == 0 or tensor.shape[-1] != size:
        raise ContractViolation(f"{what} must have last dimension {size}, got shape {list(tensor.shape)}")
    return tensor
