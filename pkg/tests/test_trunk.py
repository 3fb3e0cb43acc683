import pytest
import torch

from src.encoders.modality import EncodedToken
from src.nkernel.gradcheck import grad_check, grad_check_parameters
from src.nkernel.rng import seeded_init, torch_generator
from src.trunk.mlp_trunk import MLPTrunk
from src.trunk.tokens import TokenSequence, build_mask
from src.trunk.transformer_trunk import TransformerTrunk
from src.utils.errors import ContractViolation

DIM = 16


def _tokens(B, h, n, seed=0):
    return torch.randn(B, h, n, DIM, generator=torch_generator(seed, "tokens"))


def _trunk(h, n, layers=2, trunk_input="separate"):
    with seeded_init(0, "trunk"):
        return TransformerTrunk(DIM, layers=layers, heads=2, max_history=h, tokens_per_step=n, trunk_input=trunk_input)


def test_mask_rules():
    mask = build_mask(history=2, tokens_per_step=2)
    # positions: t0 obs0, t0 obs1, t0 act, t1 obs0, t1 obs1, t1 act
    assert mask.shape == (6, 6)
    assert mask[4, 0] and mask[4, 3] and mask[4, 4]
    assert not mask[0, 3]
    assert not mask[3, 2]         # earlier action token is not a key
    assert not mask[5, 2]
    assert mask[2, 2] and mask[5, 5]
    assert mask[5, 0] and mask[5, 4]
    assert mask.diagonal().all()
    with pytest.raises(ContractViolation):
        build_mask(0, 2)


def test_token_sequence_from_encoded():
    vectors = [EncodedToken(torch.zeros(2, 3, DIM), tag) for tag in ("scene", "proprio")]
    seq = TokenSequence.from_encoded(vectors)
    assert seq.tokens.shape == (2, 3, 2, DIM)
    assert seq.tags == ("scene", "proprio")
    assert seq.timestep_of().tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2]
    with pytest.raises(ContractViolation):
        TokenSequence.from_encoded([])
    with pytest.raises(ContractViolation):
        TokenSequence.from_encoded([EncodedToken(torch.zeros(2, 3, DIM), "a"), EncodedToken(torch.zeros(2, 2, DIM), "b")])


def test_trunk_output_shape():
    out = _trunk(3, 2)(TokenSequence(_tokens(4, 3, 2), ("scene", "proprio")))
    assert out.features.shape == (4, 3, DIM)
    assert out.step_index == (0, 1, 2)


def test_features_ignore_future_timesteps():
    for h in range(1, 5):
        trunk = _trunk(h, 3)
        base = _tokens(2, h, 3)
        ref = trunk(TokenSequence(base, ("a", "b", "c"))).features
        for t in range(h):
            changed = base.clone()
            changed[:, t + 1:] += 5.0
            out = trunk(TokenSequence(changed, ("a", "b", "c"))).features
            assert (out[:, :t + 1] - ref[:, :t + 1]).abs().max() <= 1e-6


def test_action_tokens_only_feed_their_own_feature():
    h, n = 4, 2
    trunk = _trunk(h, n)
    seq = TokenSequence(_tokens(1, h, n), ("a", "b"))
    base_actions = trunk.action_token.detach().expand(1, h, DIM).clone()
    ref, ref_hidden = trunk(seq, action_tokens=base_actions, return_hidden=True)
    for t in range(h):
        perturbed = base_actions.clone()
        perturbed[:, t] += 3.0
        out, hidden = trunk(seq, action_tokens=perturbed, return_hidden=True)
        others = [s for s in range(h) if s != t]
        assert (out.features[:, others] - ref.features[:, others]).abs().max() <= 1e-6
        assert not torch.allclose(out.features[:, t], ref.features[:, t])
        assert (hidden[:, :, :n] - ref_hidden[:, :, :n]).abs().max() <= 1e-6


def test_action_token_parameter_leaves_observation_states_unchanged():
    trunk = _trunk(3, 2)
    seq = TokenSequence(_tokens(2, 3, 2), ("a", "b"))
    _, before = trunk(seq, return_hidden=True)
    with torch.no_grad():
        trunk.action_token.add_(1.0)
    _, after = trunk(seq, return_hidden=True)
    assert (after[:, :, :2] - before[:, :, :2]).abs().max() <= 1e-6
    assert not torch.allclose(after[:, :, 2], before[:, :, 2])


def test_concatenated_input_fuses_each_timestep():
    trunk = _trunk(2, 3, trunk_input="concatenated")
    out, hidden = trunk(TokenSequence(_tokens(2, 2, 3), ("a", "b", "c")), return_hidden=True)
    assert out.features.shape == (2, 2, DIM)
    assert hidden.shape == (2, 2, 2, DIM)


def test_trunk_shape_errors():
    trunk = _trunk(2, 2)
    with pytest.raises(ContractViolation):
        trunk(TokenSequence(_tokens(1, 3, 2), ("a", "b")))
    with pytest.raises(ContractViolation):
        trunk(TokenSequence(_tokens(1, 2, 3), ("a", "b", "c")))
    with pytest.raises(ContractViolation):
        trunk(TokenSequence(torch.zeros(1, 0, 2, DIM), ("a", "b")))


@pytest.mark.parametrize("seed", range(5))
def test_transformer_trunk_gradients(seed):
    trunk = _trunk(2, 2, layers=1)
    tokens = _tokens(1, 2, 2, seed=seed)
    target = torch.linspace(-1.0, 1.0, DIM)

    def loss(m):
        return ((m(TokenSequence(tokens, ("a", "b"))).features - target) ** 2).mean()

    errors = grad_check_parameters(trunk, loss, coords_per_tensor=3, seed=seed)
    assert max(errors.values()) <= 1e-3
    assert grad_check(
        lambda x: ((trunk(TokenSequence(x, ("a", "b"))).features - target) ** 2).mean(), tokens, coords=12, seed=seed
    ) <= 1e-3


def test_mlp_trunk_input_width():
    assert MLPTrunk(256, history=1, tokens_per_step=3, hidden=512).in_features == 768
    assert MLPTrunk(256, history=2, tokens_per_step=3, hidden=512).in_features == 1536


def test_mlp_trunk_output_and_errors():
    with seeded_init(0, "mlp"):
        trunk = MLPTrunk(DIM, history=2, tokens_per_step=3, hidden=24)
    out = trunk(TokenSequence(_tokens(5, 2, 3), ("a", "b", "c")))
    assert out.features.shape == (5, 1, DIM)
    assert out.step_index == (1,)
    with pytest.raises(ContractViolation):
        trunk(TokenSequence(_tokens(5, 1, 3), ("a", "b", "c")))


@pytest.mark.parametrize("seed", range(5))
def test_mlp_trunk_gradients(seed):
    with seeded_init(seed, "mlp"):
        trunk = MLPTrunk(DIM, history=2, tokens_per_step=1, hidden=8)
    tokens = _tokens(3, 2, 1, seed=seed)
    errors = grad_check_parameters(trunk, lambda m: (m(TokenSequence(tokens, ("a",))).features ** 2).mean(), seed=seed)
    assert max(errors.values()) <= 1e-3
