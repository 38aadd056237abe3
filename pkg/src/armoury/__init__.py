"""Code armouring with a keyed LFSR decoder, key-preimage search and a split oracle."""

__version__ = "0.1.0"
