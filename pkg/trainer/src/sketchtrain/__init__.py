"""sketchtrain: two-stage training (cluster classification, then a
sign-binarized hash network) for 128-bit block sketches, exporting
weights in the DSKW interchange format."""

__version__ = "0.1.0"
