#!/usr/bin/env python3
"""Independent FNR/FPR recomputation from raw artifacts.

Reads a JSON-lines run log and an oracle report with nothing but the
standard library and re-derives the reference-search accuracy metrics
from first principles.  Exists so the engine's `eval metrics` output can
be cross-checked by a disjoint code path; prints one JSON object.

Usage: recompute_metrics.py RUN_LOG ORACLE_JSON
"""

import json
import sys


def main(argv) -> int:
    if len(argv) != 3:
        print("usage: recompute_metrics.py RUN_LOG ORACLE_JSON",
              file=sys.stderr)
        return 2
    run_path, oracle_path = argv[1], argv[2]

    header = None
    blocks = {}
    with open(run_path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("type") == "header":
                header = rec
            elif rec.get("type") == "block":
                blocks[rec["i"]] = rec
    with open(oracle_path) as f:
        oracle = json.load(f)

    if header is None or header["corpus_md5"] != oracle["corpus_md5"]:
        print(json.dumps({"error": "corpus mismatch"}), file=sys.stderr)
        return 1

    useful = 0
    tech_delta = 0
    fn = fp = 0
    fn_ratios = []
    fp_ratios = []
    non_dup = 0
    for entry in oracle["entries"]:
        rec = blocks[entry["i"]]
        if entry["dup"]:
            continue
        non_dup += 1
        if entry["useful"]:
            useful += 1
        if rec["outcome"] == "delta":
            tech_delta += 1
            if rec.get("ref") != entry["ref"]:
                fp += 1
                fp_ratios.append(entry["dsize"] / rec["size"])
        elif entry["useful"]:
            fn += 1
            fn_ratios.append(entry["dsize"] / rec["size"])

    print(json.dumps({
        "corpus_md5": oracle["corpus_md5"],
        "blocks": len(oracle["entries"]),
        "non_duplicate_blocks": non_dup,
        "oracle_useful_count": useful,
        "technique_delta_count": tech_delta,
        "fn_count": fn,
        "fp_count": fp,
        "fnr": fn / useful if useful else 0.0,
        "fpr": fp / tech_delta if tech_delta else 0.0,
        "drr_fn_mean": sum(fn_ratios) / len(fn_ratios) if fn_ratios else None,
        "drr_fp_mean": sum(fp_ratios) / len(fp_ratios) if fp_ratios else None,
    }))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
