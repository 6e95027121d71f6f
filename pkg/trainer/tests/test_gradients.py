"""GreedyHash gradient contract: d(loss)/dh must equal d(loss)/d(codes)
passed straight through the sign, plus the cubic quantization penalty
gradient 3*eta*sign(h - b)*(h - b)^2 / B, checked against finite
differences on a tiny double-precision model."""

import torch
import torch.nn.functional as F

from sketchtrain.model import greedyhash_loss, sign_ste

ETA = 0.1


def _tiny_setup():
    torch.manual_seed(3)
    bits = 6
    head = torch.nn.Linear(bits, 3).double()
    # pre-activations away from zero so the sign target is stable under
    # the finite-difference step
    h = (torch.rand(1, bits, dtype=torch.float64) - 0.5) * 2
    h = torch.where(h.abs() < 0.2, h.sign() * 0.3, h)
    h.requires_grad_(True)
    y = torch.tensor([1])
    return head, h, y, bits


def test_penalty_zero_on_binary_preactivations():
    h = torch.tensor([[1.0, -1.0, 1.0, 1.0, -1.0, -1.0]], requires_grad=True)
    head = torch.nn.Linear(6, 2)
    logits = head(sign_ste(h))
    loss = greedyhash_loss(logits, h, torch.tensor([0]), eta=ETA)
    plain = F.cross_entropy(logits, torch.tensor([0]))
    assert torch.isclose(loss, plain)


def test_ste_gradient_decomposition():
    head, h, y, bits = _tiny_setup()
    codes = sign_ste(h)
    loss = greedyhash_loss(head(codes), h, y, eta=ETA)
    loss.backward()
    got = h.grad.clone()

    # head-path gradient with the codes as an explicit leaf
    b_leaf = torch.sign(h.detach())
    b_leaf = torch.where(b_leaf == 0, torch.ones_like(b_leaf), b_leaf)
    b_leaf.requires_grad_(True)
    F.cross_entropy(head(b_leaf), y).backward()
    target = b_leaf.detach()
    penalty_grad = 3 * ETA * torch.sign(h.detach() - target) \
        * (h.detach() - target) ** 2 / bits
    want = b_leaf.grad + penalty_grad
    assert torch.allclose(got, want, rtol=1e-9, atol=1e-12)


def test_gradient_matches_finite_differences():
    head, h, y, bits = _tiny_setup()
    codes = sign_ste(h)
    loss = greedyhash_loss(head(codes), h, y, eta=ETA)
    loss.backward()
    got = h.grad.clone()

    # finite differences of the two continuous surrogates: the head loss
    # as a function of the codes, and the penalty with a frozen target
    target = torch.sign(h.detach())
    target = torch.where(target == 0, torch.ones_like(target), target)
    step = 1e-6
    fd = torch.zeros_like(h)
    with torch.no_grad():
        for i in range(bits):
            for sgn in (1.0, -1.0):
                hp = h.detach().clone()
                hp[0, i] += sgn * step
                head_in = target.clone()
                head_in[0, i] = hp[0, i] - h.detach()[0, i] + target[0, i]
                ce = F.cross_entropy(head(head_in), y)
                pen = ETA * torch.mean((hp - target).abs() ** 3)
                fd[0, i] += sgn * (ce + pen)
        fd /= 2 * step
    rel = (got - fd).abs() / fd.abs().clamp_min(1e-8)
    assert rel.max().item() < 1e-4
