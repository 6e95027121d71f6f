#!/usr/bin/env python3
"""Regenerate the committed desk-model weight fixture.

Pipeline: take the shared desk corpus recipe's 10% training slice,
cluster it, balance the clusters into a DSDS dataset, train both stages
with the sketchtrain package, and write the DSKW file into
tests/fixtures/.  Every stage is seeded, so the output is reproducible
bit-for-bit on one platform; see tests/fixtures/README.md.

Usage: python scripts/make_fixture.py [--out PATH]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))

from acceptance_support import DESK_SPEC, FIXTURE_NAME, desk_split  # noqa: E402

from blockreduce import dataset as dataset_mod  # noqa: E402
from blockreduce import dkcluster  # noqa: E402

TRAIN_SEED = 5
N_BLK = 64
EPOCHS = 30


def main() -> int:
    parser = argparse.ArgumentParser()
    default_out = os.path.join(os.path.dirname(__file__), "..",
                               "tests", "fixtures", FIXTURE_NAME)
    parser.add_argument("--out", default=default_out)
    args = parser.parse_args()

    train_corpus, _, _ = desk_split()
    print(f"training slice: {len(train_corpus)} blocks "
          f"(spec seed {DESK_SPEC.seed})")

    clustering = dkcluster.dk_cluster(train_corpus, dkcluster.ClusterConfig())
    print(f"clusters: {len(clustering.clusters)}, "
          f"discarded: {len(clustering.discarded)}")

    ds = dataset_mod.balance_clusters(
        clustering, train_corpus,
        dataset_mod.DatasetConfig(n_blk=N_BLK, seed=TRAIN_SEED))
    print(f"balanced dataset: {len(ds)} records, {ds.class_count} classes")

    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        ds_path = os.path.join(tmp, "train.dsds")
        dataset_mod.export_dataset(ds, ds_path)
        report_path = os.path.join(tmp, "report.json")
        cmd = [sys.executable, "-m", "sketchtrain.cli", "train",
               "--dataset", ds_path,
               "--weights-out", args.out,
               "--report", report_path,
               "--epochs", str(EPOCHS), "--hash-epochs", str(EPOCHS),
               "--seed", str(TRAIN_SEED)]
        print("+", " ".join(cmd))
        proc = subprocess.run(cmd, text=True, capture_output=True)
        sys.stdout.write(proc.stdout)
        sys.stderr.write(proc.stderr)
        if proc.returncode != 0:
            return proc.returncode
        summary = json.loads(proc.stdout.strip().splitlines()[-1])
    print(f"fixture written: {args.out} "
          f"({os.path.getsize(args.out)} bytes, "
          f"hash top1 {summary['hash_top1']:.4f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
