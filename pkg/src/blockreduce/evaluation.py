"""Brute-force reference oracle and the accuracy/saving metrics built on
top of run logs.

The oracle replays a corpus in write order and, for every non-duplicate
block, delta-encodes it against *every* previously retained non-duplicate
block, keeping the reference with the smallest frame (ties to the lowest
candidate id, so the result is invariant under candidate enumeration
order).  "No useful reference" means even the best delta loses to the
block's own lossless frame under the same acceptance rule the pipeline
uses.  False negatives and false positives of a technique are judged
against this ground truth; per-block DRRs are normalized to the oracle's.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from . import codec
from .corpus import BLOCK_SIZE, BlockCorpus
from .errors import ArtifactMismatchError, OracleGuardError
from .fingerprint import fingerprint
from .pipeline import delta_accepted

ORACLE_GUARD_DEFAULT = 4096


@dataclass(frozen=True)
class OracleEntry:
    index: int
    duplicate: bool
    best_ref: int | None = None
    best_delta_size: int | None = None
    lossless_size: int | None = None
    useful: bool = False


@dataclass
class OracleResult:
    corpus_md5: str
    delta_accept: str
    entries: list[OracleEntry]

    def entry(self, index: int) -> OracleEntry:
        return self.entries[index]

    def to_dict(self) -> dict:
        return {
            "type": "oracle",
            "corpus_md5": self.corpus_md5,
            "delta_accept": self.delta_accept,
            "entries": [
                {"i": e.index, "dup": e.duplicate, "ref": e.best_ref,
                 "dsize": e.best_delta_size, "lsize": e.lossless_size,
                 "useful": e.useful}
                for e in self.entries],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleResult":
        entries = [OracleEntry(e["i"], e["dup"], e["ref"], e["dsize"],
                               e["lsize"], e["useful"])
                   for e in d["entries"]]
        return cls(d["corpus_md5"], d["delta_accept"], entries)


def save_oracle(result: OracleResult, path: str) -> None:
    with open(path, "w") as f:
        json.dump(result.to_dict(), f)


def load_oracle(path: str) -> OracleResult:
    with open(path) as f:
        return OracleResult.from_dict(json.load(f))


def brute_force_oracle(corpus: BlockCorpus, *,
                       guard: int = ORACLE_GUARD_DEFAULT,
                       override_guard: bool = False,
                       delta_accept: str = "record",
                       candidate_order=None) -> OracleResult:
    """Exhaustive per-block best-reference search.

    candidate_order, when given, receives the candidate id list and
    returns the iteration order; the result must not change (ties break
    by lowest candidate id regardless of enumeration order).
    """
    n = len(corpus)
    if n > guard and not override_guard:
        est = n * (n - 1) // 2
        raise OracleGuardError(
            f"corpus of {n} blocks exceeds the oracle guard ({guard}); "
            f"~{est} delta encodings would be required -- pass the "
            f"override to proceed")

    entries: list[OracleEntry] = []
    seen_fps: set[bytes] = set()
    retained: list[int] = []
    for i, block in enumerate(corpus):
        fp = fingerprint(block)
        if fp in seen_fps:
            entries.append(OracleEntry(i, duplicate=True))
            continue
        seen_fps.add(fp)
        lossless_size = len(codec.lossless_compress(block))
        best_ref = None
        best_size = None
        order = candidate_order(list(retained)) if candidate_order else retained
        for cand in order:
            size = len(codec.delta_encode(block, corpus[cand]))
            if best_size is None or (size, cand) < (best_size, best_ref):
                best_size, best_ref = size, cand
        useful = (best_size is not None
                  and delta_accepted(best_size, lossless_size, delta_accept))
        entries.append(OracleEntry(i, False, best_ref, best_size,
                                   lossless_size, useful))
        retained.append(i)
    return OracleResult(corpus.content_hash(), delta_accept, entries)


# -- run-log access ---------------------------------------------------------

def read_run_log(path: str) -> tuple[dict, list[dict]]:
    """Parse a JSON-lines run log into (header, per-block records)."""
    header = None
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("type") == "header":
                header = rec
            elif rec.get("type") == "block":
                records.append(rec)
    if header is None:
        raise ArtifactMismatchError(f"run log {path!r} has no header record")
    records.sort(key=lambda r: r["i"])
    return header, records


def _check_same_corpus(md5_a: str, md5_b: str, what: str) -> None:
    if md5_a != md5_b:
        raise ArtifactMismatchError(
            f"corpus hash mismatch between {what}: {md5_a} != {md5_b}")


# -- FNR / FPR --------------------------------------------------------------

def compute_fnr_fpr(header: dict, records: list[dict],
                    oracle: OracleResult) -> dict:
    """Reference-search accuracy of a technique run against the oracle.

    FN: the oracle found a useful reference, the technique stored the
    block lossless.  FP: the technique delta-compressed against a
    different reference than the oracle's best.  Per-block DRRs are
    normalized to the oracle's (ratio of stored payload sizes).
    """
    _check_same_corpus(header["corpus_md5"], oracle.corpus_md5,
                       "run log and oracle")
    if len(records) != len(oracle.entries):
        raise ArtifactMismatchError(
            f"run log has {len(records)} blocks, oracle "
            f"{len(oracle.entries)}")
    if header.get("delta_accept", "record") != oracle.delta_accept:
        raise ArtifactMismatchError(
            "run log and oracle used different delta-acceptance rules")

    useful_count = 0
    tech_delta_count = 0
    fn = 0
    fp = 0
    fn_ratios: list[float] = []
    fp_ratios: list[float] = []
    for rec, oe in zip(records, oracle.entries):
        tech_dedup = rec["outcome"] == "dedup"
        if tech_dedup != oe.duplicate:
            raise ArtifactMismatchError(
                f"block {oe.index}: dedup disagreement between run and oracle")
        if oe.duplicate:
            continue
        if oe.useful:
            useful_count += 1
        if rec["outcome"] == "delta":
            tech_delta_count += 1
            if rec["ref"] != oe.best_ref:
                fp += 1
                fp_ratios.append(oe.best_delta_size / rec["size"])
        elif oe.useful:
            fn += 1
            fn_ratios.append(oe.best_delta_size / rec["size"])

    non_dup = sum(1 for e in oracle.entries if not e.duplicate)
    return {
        "corpus_md5": oracle.corpus_md5,
        "blocks": len(oracle.entries),
        "non_duplicate_blocks": non_dup,
        "oracle_useful_count": useful_count,
        "technique_delta_count": tech_delta_count,
        "fn_count": fn,
        "fp_count": fp,
        "fnr": fn / useful_count if useful_count else 0.0,
        "fpr": fp / tech_delta_count if tech_delta_count else 0.0,
        "drr_fn_mean": sum(fn_ratios) / len(fn_ratios) if fn_ratios else None,
        "drr_fp_mean": sum(fp_ratios) / len(fp_ratios) if fp_ratios else None,
    }


# -- saved-bytes comparison ---------------------------------------------------

def saved_bytes_scatter(header_a: dict, records_a: list[dict],
                        header_b: dict, records_b: list[dict]) -> list[tuple]:
    """Per-block saved bytes (block size minus stored payload) under two
    techniques, for blocks that were not deduplicated.  Rows are
    (index, saved_a, saved_b)."""
    _check_same_corpus(header_a["corpus_md5"], header_b["corpus_md5"],
                       "the two run logs")
    if len(records_a) != len(records_b):
        raise ArtifactMismatchError("run logs cover different block counts")
    rows = []
    for ra, rb in zip(records_a, records_b):
        da, db = ra["outcome"] == "dedup", rb["outcome"] == "dedup"
        if da != db:
            raise ArtifactMismatchError(
                f"block {ra['i']}: dedup disagreement between runs")
        if da:
            continue
        rows.append((ra["i"], BLOCK_SIZE - ra["size"], BLOCK_SIZE - rb["size"]))
    return rows


# -- Hamming-distance vs data-saving curve ------------------------------------

HAMMING_BUCKET_MAX = 32


def hamming_saving_curve(records: list[dict]) -> list[dict]:
    """Mean data-saving ratio of delta-compressed blocks bucketed by the
    sketch Hamming distance to the chosen reference.  Buckets 0..32 plus
    '>32'; empty buckets are absent from the output."""
    sums: dict = {}
    counts: dict = {}
    for rec in records:
        if rec["outcome"] != "delta" or rec.get("dist") is None:
            continue
        d = rec["dist"]
        bucket = d if d <= HAMMING_BUCKET_MAX else f">{HAMMING_BUCKET_MAX}"
        saving = 1.0 - rec["size"] / BLOCK_SIZE
        sums[bucket] = sums.get(bucket, 0.0) + saving
        counts[bucket] = counts.get(bucket, 0) + 1

    def _key(b):
        return (0, b) if isinstance(b, int) else (1, 0)

    return [{"bucket": str(b), "count": counts[b],
             "mean_saving": sums[b] / counts[b]}
            for b in sorted(sums, key=_key)]
