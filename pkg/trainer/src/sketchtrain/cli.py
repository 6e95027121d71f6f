"""Trainer command line: train both stages from a DSDS dataset and
export DSKW weights, or compute verification sketches for a raw corpus.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import dskw
from .train import (TrainConfig, export_weights, load_split, save_report,
                    train_classifier, train_hash)


def cmd_train(args) -> int:
    cfg = TrainConfig(learning_rate=args.lr,
                      hash_learning_rate=args.hash_lr,
                      epochs=args.epochs,
                      hash_epochs=args.hash_epochs,
                      batch_size=args.batch,
                      greedyhash_penalty=args.eta,
                      train_fraction=args.train_frac,
                      hash_bits=args.hash_bits,
                      seed=args.seed)
    data = load_split(args.dataset, cfg)
    classifier, rep_clf = train_classifier(data, cfg)
    hash_model, rep_hash = train_hash(classifier, data, cfg)
    export_weights(hash_model, args.weights_out)
    if args.report:
        save_report(rep_clf, rep_hash, args.report)
    print(json.dumps({
        "classes": data.class_count,
        "train_records": int(len(data.y_train)),
        "held_out_records": int(len(data.y_held)),
        "classifier_top1": rep_clf.final["top1"],
        "hash_top1": rep_hash.final["top1"],
        "weights": args.weights_out,
    }))
    return 0


def cmd_probe(args) -> int:
    """Sketches of a raw block corpus via the format's verification
    forward pass (for cross-implementation comparison)."""
    _, _, weights = dskw.read_dskw(args.weights)
    with open(args.corpus, "rb") as f:
        data = f.read()
    n = (len(data) + dskw.INPUT_LEN - 1) // dskw.INPUT_LEN
    blocks = np.zeros((n, dskw.INPUT_LEN), dtype=np.uint8)
    flat = np.frombuffer(data, dtype=np.uint8)
    blocks.reshape(-1)[:len(flat)] = flat
    packed = dskw.sketches(blocks, weights)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "sketch_hex"])
        for i in range(packed.shape[0]):
            w.writerow([i, packed[i].tobytes().hex()])
    print(json.dumps({"blocks": n, "out": args.out}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchtrain",
        description="train 128-bit learned-sketch models from DSDS datasets")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="two-stage training + DSKW export")
    t.add_argument("--dataset", required=True)
    t.add_argument("--weights-out", required=True)
    t.add_argument("--report")
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--hash-epochs", type=int, default=50)
    t.add_argument("--batch", type=int, default=64)
    t.add_argument("--lr", type=float, default=0.005)
    t.add_argument("--hash-lr", type=float, default=0.002)
    t.add_argument("--eta", type=float, default=0.1)
    t.add_argument("--train-frac", type=float, default=0.10)
    t.add_argument("--hash-bits", type=int, default=128)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("probe", help="verification sketches for a corpus")
    p.add_argument("--weights", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_probe)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
