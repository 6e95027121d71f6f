"""Command-line surface: corpus generation, ingestion, verification,
clustering, dataset building, sketch dumps, and the evaluation commands.

Reports are JSON and embed the corpus content hash so downstream
commands can detect artifact mismatches; tabular outputs are CSV.
Exit codes: 0 success, 1 engine error (one machine-readable JSON error
line on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import dataset as dataset_mod
from . import dkcluster, evaluation, nnmodel, pipeline
from .corpus import SynthSpec, generate_corpus, load_corpus, save_corpus
from .errors import BlockReduceError


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


# -- corpus -------------------------------------------------------------------

def cmd_corpus_gen(args) -> int:
    spec = SynthSpec(families=args.families,
                     blocks_per_family=args.per_family,
                     duplicate_rate=args.dup_rate,
                     perturb_bytes_max=args.perturb_bytes,
                     perturb_runs_max=args.perturb_runs,
                     seed=args.seed)
    corpus = generate_corpus(spec)
    save_corpus(corpus, args.out)
    print(json.dumps({"blocks": len(corpus),
                      "corpus_md5": corpus.content_hash(),
                      "out": args.out}))
    return 0


# -- ingest / verify ----------------------------------------------------------

def cmd_ingest(args, parser) -> int:
    if args.sketcher in ("deepsketch", "combined") and not args.weights:
        parser.error(f"--sketcher {args.sketcher} requires --weights")
    corpus = load_corpus(args.corpus)
    cfg = pipeline.PipelineConfig(
        sketcher=args.sketcher,
        weights_path=args.weights,
        candidates=args.candidates,
        delta_accept=args.delta_accept,
        verify_read_back=not args.no_verify)
    p = pipeline.Pipeline(args.store, cfg)
    try:
        if args.log:
            with open(args.log, "w") as log_f:
                stats = p.run_corpus(corpus, log_sink=log_f)
        else:
            stats = p.run_corpus(corpus)
    finally:
        p.close()
    report = {"corpus": args.corpus,
              "corpus_md5": corpus.content_hash(),
              "store": args.store,
              **stats.to_dict()}
    _write_json(args.report, report)
    print(json.dumps({"blocks": stats.blocks, "drr": stats.drr,
                      "report": args.report}))
    return 0


def cmd_verify(args) -> int:
    corpus = load_corpus(args.corpus)
    store = pipeline.ContainerStore(args.store, create=False)
    try:
        mismatched = [i for i in range(len(corpus))
                      if pipeline.resolve_block(store, i) != corpus[i]]
    finally:
        store.close()
    result = {"blocks": len(corpus), "mismatched": len(mismatched)}
    print(json.dumps(result))
    return 0 if not mismatched else 1


# -- clustering / dataset -------------------------------------------------------

def cmd_cluster(args) -> int:
    corpus = load_corpus(args.corpus)
    cfg = dkcluster.ClusterConfig(delta0=args.delta0, alpha=args.alpha,
                                  max_iterations=args.max_iter,
                                  seed=args.seed)
    clustering = dkcluster.dk_cluster(corpus, cfg)
    dkcluster.save_assignments(clustering, len(corpus), args.out)
    print(json.dumps({
        "blocks": len(corpus),
        "clusters": len(clustering.clusters),
        "discarded": len(clustering.discarded),
        "iterations": clustering.stats.iterations,
        "out": args.out,
    }))
    return 0


def cmd_dataset_build(args) -> int:
    corpus = load_corpus(args.corpus)
    rows = dkcluster.load_assignments(args.clusters)
    clustering = dkcluster.clustering_from_assignments(rows, corpus)
    cfg = dataset_mod.DatasetConfig(n_blk=args.nblk,
                                    train_fraction=args.train_frac,
                                    seed=args.seed)
    ds = dataset_mod.balance_clusters(clustering, corpus, cfg)
    dataset_mod.export_dataset(ds, args.out)
    print(json.dumps({
        "records": len(ds),
        "classes": ds.class_count,
        "n_blk": cfg.n_blk,
        "train_fraction": cfg.train_fraction,
        "out": args.out,
    }))
    return 0


# -- evaluation ----------------------------------------------------------------

def cmd_eval_oracle(args) -> int:
    corpus = load_corpus(args.corpus)
    result = evaluation.brute_force_oracle(
        corpus, override_guard=args.override_guard,
        delta_accept=args.delta_accept)
    evaluation.save_oracle(result, args.report)
    useful = sum(1 for e in result.entries if e.useful)
    print(json.dumps({"blocks": len(result.entries), "useful": useful,
                      "report": args.report}))
    return 0


def cmd_eval_metrics(args) -> int:
    header, records = evaluation.read_run_log(args.run)
    oracle = evaluation.load_oracle(args.oracle)
    metrics = evaluation.compute_fnr_fpr(header, records, oracle)
    _write_json(args.report, metrics)
    print(json.dumps({"fnr": metrics["fnr"], "fpr": metrics["fpr"],
                      "report": args.report}))
    return 0


def cmd_eval_scatter(args) -> int:
    header_a, records_a = evaluation.read_run_log(args.run_a)
    header_b, records_b = evaluation.read_run_log(args.run_b)
    rows = evaluation.saved_bytes_scatter(header_a, records_a,
                                          header_b, records_b)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "saved_a", "saved_b"])
        w.writerows(rows)
    print(json.dumps({"points": len(rows), "out": args.out}))
    return 0


def cmd_eval_hamming(args) -> int:
    _, records = evaluation.read_run_log(args.run)
    curve = evaluation.hamming_saving_curve(records)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["bucket", "count", "mean_saving"])
        for row in curve:
            w.writerow([row["bucket"], row["count"],
                        f"{row['mean_saving']:.6f}"])
    print(json.dumps({"buckets": len(curve), "out": args.out}))
    return 0


# -- sketch dump -----------------------------------------------------------------

def cmd_sketch_dump(args) -> int:
    cfg, weights = nnmodel.load_weights(args.weights)
    corpus = load_corpus(args.corpus)
    packed = nnmodel.forward_sketch_batch(corpus.blocks, cfg, weights)
    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["index", "sketch_hex"])
        for i in range(packed.shape[0]):
            w.writerow([i, packed[i].tobytes().hex()])
    print(json.dumps({"blocks": packed.shape[0], "out": args.out}))
    return 0


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockreduce",
        description="post-deduplication delta-compression engine")
    sub = parser.add_subparsers(dest="command", required=True)

    p_corpus = sub.add_parser("corpus", help="corpus tools")
    corpus_sub = p_corpus.add_subparsers(dest="corpus_command", required=True)
    g = corpus_sub.add_parser("gen", help="generate a synthetic family corpus")
    g.add_argument("--families", type=int, required=True)
    g.add_argument("--per-family", type=int, required=True)
    g.add_argument("--dup-rate", type=float, default=0.0)
    g.add_argument("--perturb-bytes", type=int, default=64)
    g.add_argument("--perturb-runs", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_corpus_gen)

    p_ingest = sub.add_parser("ingest", help="run the write path over a corpus")
    p_ingest.add_argument("--corpus", required=True)
    p_ingest.add_argument("--sketcher", choices=pipeline.SKETCHER_MODES,
                          default="none")
    p_ingest.add_argument("--weights")
    p_ingest.add_argument("--store", required=True)
    p_ingest.add_argument("--report", required=True)
    p_ingest.add_argument("--log", help="per-block JSON-lines run log")
    p_ingest.add_argument("--candidates", type=int, default=1)
    p_ingest.add_argument("--delta-accept", choices=("record", "frame"),
                          default="record")
    p_ingest.add_argument("--no-verify", action="store_true",
                          help="skip the read-back verification pass")
    p_ingest.set_defaults(func=lambda a: cmd_ingest(a, p_ingest))

    p_verify = sub.add_parser("verify", help="byte-exact store verification")
    p_verify.add_argument("--store", required=True)
    p_verify.add_argument("--corpus", required=True)
    p_verify.set_defaults(func=cmd_verify)

    p_cluster = sub.add_parser("cluster", help="dynamic k-means clustering")
    p_cluster.add_argument("--corpus", required=True)
    p_cluster.add_argument("--delta0", type=float, default=2.0)
    p_cluster.add_argument("--alpha", type=float, default=0.5)
    p_cluster.add_argument("--max-iter", type=int, default=8)
    p_cluster.add_argument("--seed", type=int, default=0)
    p_cluster.add_argument("--out", required=True)
    p_cluster.set_defaults(func=cmd_cluster)

    p_dataset = sub.add_parser("dataset", help="dataset tools")
    dataset_sub = p_dataset.add_subparsers(dest="dataset_command", required=True)
    b = dataset_sub.add_parser("build", help="balance a clustering into a dataset")
    b.add_argument("--corpus", required=True)
    b.add_argument("--clusters", required=True)
    b.add_argument("--nblk", type=int, default=64)
    b.add_argument("--train-frac", type=float, default=0.10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_dataset_build)

    p_eval = sub.add_parser("eval", help="oracle and metrics")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)
    o = eval_sub.add_parser("oracle", help="brute-force best-reference search")
    o.add_argument("--corpus", required=True)
    o.add_argument("--report", required=True)
    o.add_argument("--override-guard", action="store_true")
    o.add_argument("--delta-accept", choices=("record", "frame"),
                   default="record")
    o.set_defaults(func=cmd_eval_oracle)
    m = eval_sub.add_parser("metrics", help="FNR/FPR vs the oracle")
    m.add_argument("--run", required=True)
    m.add_argument("--oracle", required=True)
    m.add_argument("--report", required=True)
    m.set_defaults(func=cmd_eval_metrics)
    s = eval_sub.add_parser("scatter", help="per-block saved-bytes table")
    s.add_argument("--run-a", required=True)
    s.add_argument("--run-b", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eval_scatter)
    h = eval_sub.add_parser("hamming", help="Hamming-distance vs saving curve")
    h.add_argument("--run", required=True)
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_eval_hamming)

    p_sketch = sub.add_parser("sketch", help="sketch tools")
    sketch_sub = p_sketch.add_subparsers(dest="sketch_command", required=True)
    d = sketch_sub.add_parser("dump", help="learned sketches of a corpus")
    d.add_argument("--weights", required=True)
    d.add_argument("--corpus", required=True)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_sketch_dump)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BlockReduceError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
