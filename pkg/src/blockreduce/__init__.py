"""blockreduce: a post-deduplication delta-compression engine with
pluggable reference-search sketchers and an oracle-based evaluation
harness."""

from .backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
