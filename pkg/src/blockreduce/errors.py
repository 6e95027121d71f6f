"""Exception hierarchy for the blockreduce engine."""


class BlockReduceError(Exception):
    """Base class for all engine errors."""


class CorpusLoadError(BlockReduceError):
    """Corpus file could not be read."""


class FrameDecodeError(BlockReduceError):
    """Malformed lossless or delta frame; decoding refused rather than
    risking silent corruption."""


class UnsupportedVersionError(FrameDecodeError):
    """Frame or file declares a version this build does not speak."""


class DatasetFormatError(BlockReduceError):
    """Labeled-dataset file is corrupt or has an unknown layout."""


class WeightFormatError(BlockReduceError):
    """Weight file is corrupt, truncated, or shape-inconsistent."""


class StoreError(BlockReduceError):
    """Container store I/O or format failure."""


class BlockNotFoundError(StoreError):
    """Read of a logical block id that was never written."""


class OracleGuardError(BlockReduceError):
    """Brute-force oracle refused a corpus larger than its guard."""


class ArtifactMismatchError(BlockReduceError):
    """Two evaluation artifacts were produced from different corpora."""
