"""Two-stage training: cluster classification, then GreedyHash transfer
into the hash network, plus the DSKW export glue."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from . import dskw
from .dsds import load_dsds, stratified_split
from .model import Classifier, HashNetwork, greedyhash_loss, scale_blocks


@dataclass
class TrainConfig:
    learning_rate: float = 0.005       # classifier stage
    hash_learning_rate: float = 0.002  # hash stage
    epochs: int = 50
    hash_epochs: int = 50
    batch_size: int = 64
    greedyhash_penalty: float = 0.1    # eta
    train_fraction: float = 0.10
    hash_bits: int = 128
    seed: int = 0
    eval_cap: int = 512  # held-out subsample for per-epoch accuracy;
    #                      the final report always evaluates the full set

    def __post_init__(self):
        if self.learning_rate <= 0 or self.hash_learning_rate <= 0:
            raise ValueError("learning rates must be positive")
        if self.epochs < 1 or self.hash_epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainReport:
    epochs: list[dict] = field(default_factory=list)  # epoch/loss/top1/top5
    final: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "final": self.final}


def _accuracy(model, x, y, batch: int, mode: str) -> tuple[float, float]:
    model.eval()
    top1 = top5 = 0
    with torch.no_grad():
        for i in range(0, len(y), batch):
            xb = x[i:i + batch]
            logits = model(xb)[0] if mode == "hash" else model(xb)
            k = min(5, logits.shape[1])
            top = logits.topk(k, dim=1).indices
            yb = y[i:i + batch].unsqueeze(1)
            top1 += (top[:, :1] == yb).any(dim=1).sum().item()
            top5 += (top == yb).any(dim=1).sum().item()
    model.train()
    return top1 / len(y), top5 / len(y)


class _Batcher:
    def __init__(self, n: int, batch: int, seed: int):
        self.n = n
        self.batch = batch
        self.gen = torch.Generator().manual_seed(seed)

    def __iter__(self):
        order = torch.randperm(self.n, generator=self.gen)
        for i in range(0, self.n, self.batch):
            yield order[i:i + self.batch]


@dataclass
class SplitData:
    x_train: torch.Tensor
    y_train: torch.Tensor
    x_held: torch.Tensor
    y_held: torch.Tensor
    class_count: int

    def eval_subset(self, cap: int, seed: int):
        if len(self.y_held) <= cap:
            return self.x_held, self.y_held
        idx = torch.randperm(len(self.y_held),
                             generator=torch.Generator().manual_seed(seed))
        idx = idx[:cap]
        return self.x_held[idx], self.y_held[idx]


def load_split(dataset_path: str, cfg: TrainConfig) -> SplitData:
    blocks, labels, class_count = load_dsds(dataset_path)
    tr, ho = stratified_split(labels, cfg.train_fraction, cfg.seed)
    return SplitData(scale_blocks(blocks[tr]),
                     torch.as_tensor(labels[tr]),
                     scale_blocks(blocks[ho]),
                     torch.as_tensor(labels[ho]), class_count)


def train_classifier(data: SplitData,
                     cfg: TrainConfig) -> tuple[Classifier, TrainReport]:
    """Stage one: softmax classification over the cluster labels."""
    torch.manual_seed(cfg.seed)
    model = Classifier(data.class_count)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    report = TrainReport()
    batcher = _Batcher(len(data.y_train), cfg.batch_size, cfg.seed + 1)
    x_eval, y_eval = data.eval_subset(cfg.eval_cap, cfg.seed + 2)
    for epoch in range(cfg.epochs):
        total = 0.0
        for idx in batcher:
            opt.zero_grad()
            loss = F.cross_entropy(model(data.x_train[idx]),
                                   data.y_train[idx])
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        top1, top5 = _accuracy(model, x_eval, y_eval, cfg.batch_size, "clf")
        report.epochs.append({"epoch": epoch, "stage": "classifier",
                              "loss": total / len(data.y_train),
                              "top1": top1, "top5": top5})
    top1, top5 = _accuracy(model, data.x_held, data.y_held,
                           cfg.batch_size, "clf")
    report.final = {**report.epochs[-1], "top1": top1, "top5": top5}
    return model, report


def train_hash(classifier: Classifier, data: SplitData,
               cfg: TrainConfig) -> tuple[HashNetwork, TrainReport]:
    """Stage two: GreedyHash transfer -- trunk weights come from the
    classifier, the head is re-learned over sign-binarized hash codes,
    gradients pass straight through the sign."""
    torch.manual_seed(cfg.seed + 7)
    model = HashNetwork(data.class_count, cfg.hash_bits)
    model.init_from_classifier(classifier)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.hash_learning_rate)
    report = TrainReport()
    batcher = _Batcher(len(data.y_train), cfg.batch_size, cfg.seed + 8)
    x_eval, y_eval = data.eval_subset(cfg.eval_cap, cfg.seed + 9)
    for epoch in range(cfg.hash_epochs):
        total = 0.0
        for idx in batcher:
            opt.zero_grad()
            logits, h, _ = model(data.x_train[idx])
            loss = greedyhash_loss(logits, h, data.y_train[idx],
                                   cfg.greedyhash_penalty)
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
        top1, top5 = _accuracy(model, x_eval, y_eval, cfg.batch_size, "hash")
        report.epochs.append({"epoch": epoch, "stage": "hash",
                              "loss": total / len(data.y_train),
                              "top1": top1, "top5": top5})
    top1, top5 = _accuracy(model, data.x_held, data.y_held,
                           cfg.batch_size, "hash")
    report.final = {**report.epochs[-1], "top1": top1, "top5": top5}
    return model, report


def export_weights(model: HashNetwork, path: str) -> None:
    """Write the hash network as a DSKW file (float32, eval-mode batch
    statistics)."""
    model.eval()
    sd = {k: v.detach().cpu().numpy().astype(np.float32)
          for k, v in model.state_dict().items()}
    weights = {}
    for i in range(1, 4):
        weights[f"conv{i}.weight"] = sd[f"trunk.convs.{i - 1}.weight"]
        weights[f"conv{i}.bias"] = sd[f"trunk.convs.{i - 1}.bias"]
        weights[f"bn{i}.gamma"] = sd[f"trunk.bns.{i - 1}.weight"]
        weights[f"bn{i}.beta"] = sd[f"trunk.bns.{i - 1}.bias"]
        weights[f"bn{i}.mean"] = sd[f"trunk.bns.{i - 1}.running_mean"]
        weights[f"bn{i}.var"] = sd[f"trunk.bns.{i - 1}.running_var"]
    weights["dense.weight"] = sd["trunk.dense.weight"]
    weights["dense.bias"] = sd["trunk.dense.bias"]
    weights["hash.weight"] = sd["hash.weight"]
    weights["hash.bias"] = sd["hash.bias"]
    weights["head.weight"] = sd["head.weight"]
    weights["head.bias"] = sd["head.bias"]
    dskw.write_dskw(path, model.head.out_features, weights,
                    hash_bits=model.hash_bits)


def save_report(report_clf: TrainReport, report_hash: TrainReport,
                path: str) -> None:
    payload = {"classifier": report_clf.to_dict(),
               "hash": report_hash.to_dict()}
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
