"""Loss assembly over the history window"""

from ..utils.errors import ContractViolation


def multi_step_loss(trunk_out, targets, valid, head, last_step_only=False, generator=None):
    """Mean head loss over the valid window steps covered by the trunk output

    Args:
        trunk_out: TrunkOutput with features (B, n_out, d) for window steps step_index
        targets: (B, h, H*A) chunk targets for every window step
        valid: (B, h) bool mask of real (non-padded) window steps
        head: ActionHead
        last_step_only: Only supervise the final window step
        generator: torch.Generator for stochastic heads

    Returns:
        torch.Tensor: scalar loss
    """
    features = trunk_out.features
    index = list(trunk_out.step_index)
    if features.shape[1] != len(index):
        raise ContractViolation(f"{features.shape[1]} features for {len(index)} window steps")
    if max(index) >= targets.shape[1]:
        raise ContractViolation(f"Trunk covers window step {max(index)} but targets have {targets.shape[1]} steps")
    if last_step_only:
        features, index = features[:, -1:], index[-1:]
    step_targets = targets[:, index]
    step_valid = valid[:, index]
    if not bool(step_valid.any()):
        raise ContractViolation("Every window step in the batch is masked invalid")
    per_item = head.loss(features[step_valid], step_targets[step_valid], reduction="none", generator=generator)
    return per_item.mean()