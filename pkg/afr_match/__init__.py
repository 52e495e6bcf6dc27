"""afr-match: altered fingerprint recognition by CNN embeddings and cosine similarity."""

__version__ = "0.1.0"
