"""Named parameter store with bias-corrected Adam state"""

from dataclasses import dataclass, field
from typing import Dict

import torch

from ..config.config import ADAM_BETAS, ADAM_EPS
from ..utils.errors import ContractViolation


@dataclass
class ParamStore:
    """Named parameters plus per-parameter Adam moments and the shared step count."""

    params: Dict[str, torch.Tensor]
    first_moment: Dict[str, torch.Tensor] = field(default_factory=dict)
    second_moment: Dict[str, torch.Tensor] = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        if self.step < 0:
            raise ContractViolation(f"Step count must be non-negative, got {self.step}")
        for name, p in self.params.items():
            self.first_moment.setdefault(name, torch.zeros_like(p, dtype=torch.float32))
            self.second_moment.setdefault(name, torch.zeros_like(p, dtype=torch.float32))
            for moments in (self.first_moment, self.second_moment):
                if moments[name].shape != p.shape:
                    raise ContractViolation(f"Optimizer state for '{name}' has shape {list(moments[name].shape)}, "
                                            f"parameter has {list(p.shape)}")

    @classmethod
    def from_module(cls, module):
        """Store that aliases the trainable parameters of a torch module (updates land in the module)."""
        return cls({name: p for name, p in module.named_parameters() if p.requires_grad})

    def names(self):
        return list(self.params)

    def state_tensors(self):
        """Optimizer state as flat named tensors for checkpoint sections."""
        out = {}
        for name in self.params:
            out[f"m.{name}"] = self.first_moment[name]
            out[f"v.{name}"] = self.second_moment[name]
        return out

    def load_state_tensors(self, tensors, step):
        for name in self.params:
            self.first_moment[name].copy_(tensors[f"m.{name}"])
            self.second_moment[name].copy_(tensors[f"v.{name}"])
        self.step = int(step)


def adam_step(params, grads, lr, beta1=ADAM_BETAS[0], beta2=ADAM_BETAS[1], eps=ADAM_EPS, inplace=False):
    """Apply one bias-corrected Adam update.

    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
    p <- p - lr * m_hat / (sqrt(v_hat) + eps), with m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t)

    Args:
        params: ParamStore to update
        grads: Mapping name -> gradient tensor (missing or None means zero gradient)
        lr: Learning rate
        beta1, beta2: Moment decay rates in [0, 1)
        eps: Denominator floor
        inplace: Update the store's tensors in place (training loop) instead of returning copies

    Returns:
        ParamStore: Updated store with step incremented by 1
    """
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ContractViolation(f"Adam betas must lie in [0, 1), got ({beta1}, {beta2})")
    unknown = set(grads) - set(params.params)
    if unknown:
        raise ContractViolation(f"Gradients for unknown parameters: {sorted(unknown)}")

    step = params.step + 1
    correction1 = 1.0 - beta1 ** step
    correction2 = 1.0 - beta2 ** step
    new_params, new_m, new_v = {}, {}, {}
    with torch.no_grad():
        for name, p in params.params.items():
            g = grads.get(name)
            if g is None:
                g = torch.zeros_like(p)
            elif g.shape != p.shape:
                raise ContractViolation(f"Gradient for '{name}' has shape {list(g.shape)}, parameter has {list(p.shape)}")
            m, v = params.first_moment[name], params.second_moment[name]
            if not inplace:
                m, v, p = m.clone(), v.clone(), p.detach().clone()
            m.mul_(beta1).add_(g, alpha=1.0 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            denom = (v / correction2).sqrt_().add_(eps)
            p.sub_(lr * (m / correction1) / denom)
            new_params[name], new_m[name], new_v[name] = p, m, v

    if inplace:
        params.step = step
        return params
    return ParamStore(new_params, new_m, new_v, step)
