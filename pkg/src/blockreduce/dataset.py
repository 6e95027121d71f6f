"""Balanced, labeled training datasets built from a clustering, plus the
binary dataset file crossing the component boundary to the trainer.

Balancing resizes every cluster to exactly n_blk records: oversized
clusters are down-sampled uniformly, undersized ones are padded with
slightly perturbed variants of the cluster medoid, so no class can
dominate training.

Dataset file ("DSDS"): magic, u32 LE version=1, u32 record count,
u32 class count, then per record a u32 LE label followed by the 4096
raw block bytes.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass

from .corpus import BLOCK_SIZE, BlockCorpus, perturb_block
from .dkcluster import Clustering
from .errors import DatasetFormatError

DATASET_MAGIC = b"DSDS"
DATASET_VERSION = 1


@dataclass(frozen=True)
class DatasetConfig:
    n_blk: int = 64
    train_fraction: float = 0.10
    seed: int = 0
    perturb_bytes_max: int = 64  # padding-variant bounds
    perturb_runs_max: int = 4

    def __post_init__(self):
        if self.n_blk < 1:
            raise ValueError("n_blk must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class LabeledDataset:
    blocks: list[bytes]
    labels: list[int]
    class_count: int

    def __post_init__(self):
        if len(self.blocks) != len(self.labels):
            raise ValueError("blocks and labels must have equal length")

    def __len__(self) -> int:
        return len(self.blocks)

    def records(self):
        return zip(self.blocks, self.labels)


def balance_clusters(clustering: Clustering, corpus: BlockCorpus,
                     cfg: DatasetConfig = DatasetConfig()) -> LabeledDataset:
    """Resize every cluster to exactly cfg.n_blk labeled records.

    Down-sampling is a uniform seeded choice of members; padding appends
    perturbed variants of the cluster medoid (each within the configured
    perturbation bounds of it).  Labels are the dense cluster indices.
    """
    if not clustering.clusters:
        raise ValueError("clustering has no clusters to balance")
    blocks: list[bytes] = []
    labels: list[int] = []
    for ci, cluster in enumerate(clustering.clusters):
        members = sorted(cluster.members)
        rng = random.Random(f"{cfg.seed}:balance:{ci}")
        if len(members) > cfg.n_blk:
            chosen = sorted(rng.sample(members, cfg.n_blk))
            picked = [corpus[b] for b in chosen]
        else:
            picked = [corpus[b] for b in members]
            medoid = corpus[cluster.medoid]
            while len(picked) < cfg.n_blk:
                picked.append(perturb_block(medoid, cfg.perturb_bytes_max,
                                            cfg.perturb_runs_max, rng))
        blocks.extend(picked)
        labels.extend([ci] * cfg.n_blk)
    return LabeledDataset(blocks, labels, len(clustering.clusters))


def split(dataset: LabeledDataset,
          cfg: DatasetConfig = DatasetConfig()) -> tuple[LabeledDataset, LabeledDataset]:
    """Stratified per-class split at train_fraction (seeded).

    Every class contributes at least one training record; a class with a
    single record puts it in the training side.
    """
    by_class: dict[int, list[int]] = {}
    for i, label in enumerate(dataset.labels):
        by_class.setdefault(label, []).append(i)
    train_idx: list[int] = []
    for label in sorted(by_class):
        idx = by_class[label]
        rng = random.Random(f"{cfg.seed}:split:{label}")
        n_train = max(1, int(cfg.train_fraction * len(idx)))
        train_idx.extend(rng.sample(idx, n_train))
    train_set = set(train_idx)
    tr = sorted(train_set)
    ho = [i for i in range(len(dataset)) if i not in train_set]
    return (
        LabeledDataset([dataset.blocks[i] for i in tr],
                       [dataset.labels[i] for i in tr], dataset.class_count),
        LabeledDataset([dataset.blocks[i] for i in ho],
                       [dataset.labels[i] for i in ho], dataset.class_count),
    )


def export_dataset(dataset: LabeledDataset, path: str) -> None:
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<III", DATASET_VERSION, len(dataset),
                            dataset.class_count))
        for block, label in dataset.records():
            f.write(struct.pack("<I", label))
            f.write(block)


def import_dataset(path: str) -> LabeledDataset:
    """Bit-exact inverse of export_dataset; format damage raises
    DatasetFormatError."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DatasetFormatError(f"cannot read dataset {path!r}: {e}") from e
    if len(data) < 16 or data[:4] != DATASET_MAGIC:
        raise DatasetFormatError("bad magic: not a DSDS dataset file")
    version, count, class_count = struct.unpack_from("<III", data, 4)
    if version != DATASET_VERSION:
        raise DatasetFormatError(f"unsupported DSDS version {version}")
    record = 4 + BLOCK_SIZE
    if len(data) != 16 + count * record:
        raise DatasetFormatError(
            f"file length {len(data)} does not match {count} records")
    blocks = []
    labels = []
    pos = 16
    for _ in range(count):
        label = struct.unpack_from("<I", data, pos)[0]
        if label >= class_count:
            raise DatasetFormatError(
                f"label {label} outside class count {class_count}")
        labels.append(label)
        blocks.append(data[pos + 4:pos + 4 + BLOCK_SIZE])
        pos += record
    return LabeledDataset(blocks, labels, class_count)
