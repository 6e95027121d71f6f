"""Torch model definitions: the cluster-classification network and the
hash network it transfers into.

The trunk is three 1D conv blocks (kernel 8, asymmetric same-padding
3/4, batch-norm, ReLU, max-pool 4) over the scaled byte stream, then a
dense layer with ReLU and dropout.  The classifier puts a softmax head
directly on the trunk; the hash network inserts a hash layer whose
sign-binarized activations feed the class head, with gradients passed
straight through the sign.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn

INPUT_LEN = 4096
CONV_CHANNELS = (16, 32, 64)
CONV_KERNEL = 8
POOL = 4
DENSE_UNITS = 1024
DROPOUT = 0.1

_PAD = ((CONV_KERNEL - 1) // 2, CONV_KERNEL - 1 - (CONV_KERNEL - 1) // 2)


class SignSTE(torch.autograd.Function):
    """sign with sign(0) = +1 forward and identity backward."""

    @staticmethod
    def forward(ctx, h):
        return torch.where(h >= 0, torch.ones_like(h), -torch.ones_like(h))

    @staticmethod
    def backward(ctx, grad):
        return grad


def sign_ste(h: torch.Tensor) -> torch.Tensor:
    return SignSTE.apply(h)


class Trunk(nn.Module):
    def __init__(self):
        super().__init__()
        chans = (1,) + CONV_CHANNELS
        self.convs = nn.ModuleList(
            nn.Conv1d(chans[i], chans[i + 1], CONV_KERNEL)
            for i in range(len(CONV_CHANNELS)))
        self.bns = nn.ModuleList(nn.BatchNorm1d(c) for c in CONV_CHANNELS)
        flat = (INPUT_LEN // POOL ** len(CONV_CHANNELS)) * CONV_CHANNELS[-1]
        self.dense = nn.Linear(flat, DENSE_UNITS)
        self.dropout = nn.Dropout(DROPOUT)

    def forward(self, x):
        for conv, bn in zip(self.convs, self.bns):
            x = F.pad(x, _PAD)
            x = F.max_pool1d(F.relu(bn(conv(x))), POOL)
        x = x.flatten(1)
        return self.dropout(F.relu(self.dense(x)))


class Classifier(nn.Module):
    def __init__(self, class_count: int):
        super().__init__()
        self.trunk = Trunk()
        self.head = nn.Linear(DENSE_UNITS, class_count)

    def forward(self, x):
        return self.head(self.trunk(x))


class HashNetwork(nn.Module):
    def __init__(self, class_count: int, hash_bits: int = 128):
        super().__init__()
        self.trunk = Trunk()
        self.hash = nn.Linear(DENSE_UNITS, hash_bits)
        self.head = nn.Linear(hash_bits, class_count)
        self.hash_bits = hash_bits

    def init_from_classifier(self, classifier: Classifier) -> None:
        """Transfer all shared-layer tensors bit-for-bit."""
        self.trunk.load_state_dict(classifier.trunk.state_dict())

    def forward(self, x):
        h = self.hash(self.trunk(x))
        codes = sign_ste(h)
        return self.head(codes), h, codes


def greedyhash_loss(logits: torch.Tensor, h: torch.Tensor,
                    labels: torch.Tensor, eta: float) -> torch.Tensor:
    """Cross-entropy on binarized codes plus the cubic quantization
    penalty eta * mean(|h - sign(h)|^3); the sign target is constant
    with respect to h."""
    target = torch.sign(h).detach()
    target = torch.where(target == 0, torch.ones_like(target), target)
    penalty = torch.mean(torch.abs(h - target) ** 3)
    return F.cross_entropy(logits, labels) + eta * penalty


def scale_blocks(blocks) -> torch.Tensor:
    """uint8 (N, 4096) -> float32 (N, 1, 4096) in [-1, 1]."""
    x = torch.as_tensor(blocks, dtype=torch.float32) / 255.0
    x = x * 2.0 - 1.0
    return x.unsqueeze(1)
