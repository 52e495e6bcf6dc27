"""Batched, optionally parallel embedding extraction."""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence

from afr_match.dataset.socofing import FingerprintRecord
from afr_match.errors import BadParameter, ExtractionError
from afr_match.features.base import EmbeddingExtractor, EmbeddingVector

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 32


def batch_count(n_records: int, batch_size: int = DEFAULT_BATCH_SIZE) -> int:
    """Number of batches needed, e.g. 301 records at 32 -> 10."""
    return math.ceil(n_records / batch_size) if n_records else 0


def _extract_one_batch(
    extractor: EmbeddingExtractor,
    batch: Sequence[FingerprintRecord]
) -> List[EmbeddingVector]:
    try:
        return extractor.extract_batch(batch)
    except ExtractionError:
        raise
    except Exception as batch_error:
        # Redo record by record to name the one that failed
        for record in batch:
            try:
                extractor.extract_record(record)
            except Exception as e:
                raise ExtractionError(record.record_ref, e) from e
        # Every record passes alone; blame the batch's first record
        logger.warning("Batch starting at %s failed but each record extracts alone", batch[0].record_ref)
        raise ExtractionError(batch[0].record_ref, batch_error) from batch_error


def batch_extract(
    records: Sequence[FingerprintRecord],
    extractor: EmbeddingExtractor,
    batch_size: int = DEFAULT_BATCH_SIZE,
    jobs: int = 1
) -> List[EmbeddingVector]:
    """
    Extract embeddings for many records in fixed-size batches.

    Output order always matches input order. Batch size and job count only
    affect throughput, never the vectors.

    Args:
        records: Records to embed
        extractor: Baseline or backbone extractor
        batch_size: Records per batch (default: 32)
        jobs: Worker threads; each gets its own extractor session

    Returns:
        One EmbeddingVector per record, in input order

    Raises:
        BadParameter: If batch_size < 1
        ExtractionError: Wrapping the first failure, with its record_ref
    """
    if batch_size < 1:
        raise BadParameter(f"batch_size must be >= 1, got {batch_size}")
    if not records:
        return []

    batches = [records[i:i + batch_size] for i in range(0, len(records), batch_size)]
    logger.info(
        "Extracting %d records with %s in %d batches of up to %d",
        len(records), extractor.extractor_id, len(batches), batch_size
    )

    if jobs <= 1 or len(batches) == 1:
        results = []
        for index, batch in enumerate(batches, start=1):
            results.append(_extract_one_batch(extractor, batch))
            logger.debug("Batch %d/%d done", index, len(batches))
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(
                lambda batch: _extract_one_batch(extractor.worker_copy(), batch),
                batches,
            ))

    return [vector for batch_result in results for vector in batch_result]
