"""Weight-free gradient-orientation histogram extractor.

Lets the whole pipeline run (and be tested) without downloading model weights.
"""
import numpy as np
from PIL import Image

from afr_match.dataset.imaging import as_grayscale
from afr_match.dataset.socofing import FingerprintRecord
from afr_match.features.base import EmbeddingExtractor, EmbeddingVector, make_embedding

BASELINE_EXTRACTOR_ID = 'baseline-ghist-v1'
BASELINE_SIZE = 128
BASELINE_GRID = 16
BASELINE_BINS = 9
BASELINE_DIM = BASELINE_GRID * BASELINE_GRID * BASELINE_BINS  # 2304


def resize_bilinear(pixels: np.ndarray, size: int) -> np.ndarray:
    """
    Bilinear resize to ``size`` x ``size`` as float32. A matrix already at the
    target size is returned unchanged (as float32).
    """
    matrix = np.asarray(pixels)
    if matrix.shape == (size, size):
        return matrix.astype(np.float32)
    image = Image.fromarray(matrix.astype(np.float32))
    resized = image.resize((size, size), resample=Image.Resampling.BILINEAR)
    return np.asarray(resized, dtype=np.float32)


def gradient_histogram(pixels) -> np.ndarray:
    """
    Compute the unnormalized 2304-d histogram of a grayscale image.

    Steps: resize to 128x128; central-difference gradients (one-sided at the
    border); signed orientation in [0, 360) split into 9 bins of 40 degrees;
    magnitude-weighted histogram per 8x8-pixel cell of a 16x16 grid.
    Layout is cell-row major, then cell column, then bin.
    """
    matrix = as_grayscale(pixels)
    image = resize_bilinear(matrix, BASELINE_SIZE).astype(np.float64)

    # np.gradient is central inside and one-sided at the border
    grad_y, grad_x = np.gradient(image)
    magnitude = np.hypot(grad_x, grad_y)
    angle = np.degrees(np.arctan2(grad_y, grad_x)) % 360.0
    bins = np.floor(angle / (360.0 / BASELINE_BINS)).astype(np.int64) % BASELINE_BINS

    # Map every pixel to its (cell, bin) slot and accumulate magnitudes
    cell = BASELINE_SIZE // BASELINE_GRID
    rows = np.arange(BASELINE_SIZE) // cell
    cell_index = rows[:, None] * BASELINE_GRID + rows[None, :]
    flat_index = (cell_index * BASELINE_BINS + bins).ravel()

    return np.bincount(flat_index, weights=magnitude.ravel(), minlength=BASELINE_DIM)


class GradientHistogramExtractor(EmbeddingExtractor):
    """Deterministic L2-normalized gradient-orientation histogram (dim 2304)."""

    extractor_id = BASELINE_EXTRACTOR_ID

    @property
    def dim(self) -> int:
        return BASELINE_DIM

    def extract_record(self, record: FingerprintRecord) -> EmbeddingVector:
        return extract_baseline(record)


def extract_baseline(record: FingerprintRecord) -> EmbeddingVector:
    """
    Baseline embedding of one record.

    Raises:
        EmptyImage: On a zero-sized image
        DegenerateEmbedding: On a perfectly flat image (no gradients at all)
    """
    histogram = gradient_histogram(record.pixels)
    norm = np.sqrt(np.sum(histogram * histogram))
    # A flat image stays all-zero and is rejected by make_embedding
    values = histogram / norm if norm > 0 else histogram
    return make_embedding(record.record_ref, values, BASELINE_EXTRACTOR_ID, BASELINE_DIM)
