"""Central-difference verification of autograd gradients"""

import numpy as np
import torch
from torch import nn
from torch.func import functional_call

from .rng import make_stream
from ..utils.errors import ContractViolation, NumericalError


def _evaluate(fn, x):
    value = fn(x)
    if not isinstance(value, torch.Tensor):
        value = torch.as_tensor(value, dtype=torch.float32)
    if value.numel() != 1:
        raise ContractViolation(f"grad_check needs a scalar function, got shape {list(value.shape)}")
    if not bool(torch.isfinite(value).all()):
        raise NumericalError(f"Function value is not finite: {value.item()}")
    return value.reshape(())


def grad_check(fn, point, eps=1e-3, coords=None, seed=0):
    """Max relative error between autograd and central differences.

    error_i = |analytic_i - numeric_i| / max(1, |analytic_i|, |numeric_i|)
    numeric_i = (f(x + eps e_i) - f(x - eps e_i)) / (actual float step)

    Args:
        fn: Callable taking a tensor shaped like point and returning a scalar tensor
        point: float32 tensor where the gradient is checked
        eps: Perturbation size (> 0)
        coords: Check only this many seeded-random coordinates (None = all)
        seed: Seed for the coordinate sample

    Returns:
        float: Maximum relative error over the checked coordinates
    """
    if eps <= 0:
        raise ContractViolation(f"eps must be positive, got {eps}")
    base = point.detach().clone().to(torch.float32)
    x = base.clone().requires_grad_(True)
    value = _evaluate(fn, x)
    if value.requires_grad:
        (analytic,) = torch.autograd.grad(value, x, allow_unused=True)
    else:
        analytic = None
    if analytic is None:
        analytic = torch.zeros_like(base)
    analytic = analytic.reshape(-1)

    n = base.numel()
    if coords is None or coords >= n:
        indices = np.arange(n)
    else:
        indices = np.sort(make_stream(seed, "grad_check").choice(n, size=coords, replace=False))

    worst = 0.0
    with torch.no_grad():
        for i in indices:
            plus = base.clone().reshape(-1)
            minus = base.clone().reshape(-1)
            plus[i] += eps
            minus[i] -= eps
            # float32 x +- eps is rarely exactly 2 eps apart; divide by the representable step
            step = float(plus[i]) - float(minus[i])
            f_plus = float(_evaluate(fn, plus.reshape(base.shape)))
            f_minus = float(_evaluate(fn, minus.reshape(base.shape)))
            numeric = (f_plus - f_minus) / step
            a = float(analytic[i])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst


class _LossModule(nn.Module):
    """Wraps module + loss closure so functional_call can swap one parameter at a time."""

    def __init__(self, module, loss_fn):
        super().__init__()
        self.inner = module
        self.loss_fn = loss_fn

    def forward(self):
        return self.loss_fn(self.inner)


def grad_check_parameters(module, loss_fn, eps=1e-3, coords_per_tensor=4, seed=0, names=None):
    """Run grad_check for each trainable parameter tensor of a module.

    Args:
        module: torch module whose parameters are checked
        loss_fn: Callable(module) -> scalar loss; must be deterministic
        eps: Perturbation size
        coords_per_tensor: Sampled coordinates per tensor (None = all)
        seed: Seed for coordinate sampling
        names: Restrict to these parameter names (None = all trainable)

    Returns:
        dict: parameter name -> max relative error
    """
    wrapper = _LossModule(module, loss_fn)
    results = {}
    for index, (name, param) in enumerate(module.named_parameters()):
        if not param.requires_grad or (names is not None and name not in names):
            continue

        def fn(x, _name=name):
            return functional_call(wrapper, {f"inner.{_name}": x}, ())

        results[name] = grad_check(fn, param.detach(), eps=eps, coords=coords_per_tensor, seed=seed + index)
    return results
