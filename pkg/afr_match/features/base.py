"""Abstract base class for embedding extractors."""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from afr_match.dataset.socofing import FingerprintRecord
from afr_match.errors import DegenerateEmbedding, DimMismatch


@dataclass
class EmbeddingVector:
    """Feature vector for one record, tagged with the extractor that made it."""
    record_ref: str
    values: np.ndarray
    extractor_id: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def make_embedding(record_ref: str, values, extractor_id: str, expected_dim: int = 0) -> EmbeddingVector:
    """
    Wrap raw extractor output, rejecting zero vectors and wrong sizes.

    Raises:
        DegenerateEmbedding: If every element is zero
        DimMismatch: If expected_dim is set and the size differs
    """
    vector = EmbeddingVector(record_ref=record_ref, values=values, extractor_id=extractor_id)
    if expected_dim and vector.dim != expected_dim:
        raise DimMismatch(f"{record_ref}: expected dim {expected_dim}, got {vector.dim}")
    if not np.any(vector.values):
        raise DegenerateEmbedding(f"{record_ref}: extractor {extractor_id} produced an all-zero vector")
    return vector


class EmbeddingExtractor(ABC):
    """Turns fingerprint records into fixed-dimension embeddings."""

    extractor_id: str = ''

    @property
    @abstractmethod
    def dim(self) -> int:
        """Embedding dimension; fixed for a given extractor_id."""

    @abstractmethod
    def extract_record(self, record: FingerprintRecord) -> EmbeddingVector:
        """
        Extract the embedding of one record.

        Args:
            record: Fingerprint record with pixel data

        Returns:
            EmbeddingVector of length ``dim``
        """

    def extract_batch(self, records: Sequence[FingerprintRecord]) -> List[EmbeddingVector]:
        """Extract a batch. Subclasses override when the runtime can batch natively."""
        return [self.extract_record(record) for record in records]

    def worker_copy(self) -> 'EmbeddingExtractor':
        """Instance safe to use from another thread. Stateless extractors return self."""
        return self
