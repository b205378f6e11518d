"""Pool-based active learning for small-resolution fingerspelling corpora."""

__version__ = "0.1.0"
