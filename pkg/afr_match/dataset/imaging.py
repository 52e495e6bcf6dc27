"""Grayscale image I/O, lossless PNG conversion and augmentation."""
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from afr_match.errors import BadParameter, EmptyImage, EncodeFailure

logger = logging.getLogger(__name__)

BACKGROUND = 255
SUPPORTED_TARGETS = ('PNG',)


def as_grayscale(pixels) -> np.ndarray:
    """
    Coerce input into a 2-D uint8 matrix.

    Raises:
        EmptyImage: If either dimension is zero
        ValueError: If the input is not 2-D or values fall outside [0, 255]
    """
    matrix = np.asarray(pixels)
    if matrix.ndim != 2:
        raise ValueError(f"Expected a 2-D grayscale matrix, got shape {matrix.shape}")
    if matrix.size == 0:
        raise EmptyImage(f"Image has no pixels (shape {matrix.shape})")
    if matrix.dtype != np.uint8:
        if matrix.min() < 0 or matrix.max() > 255:
            raise ValueError("Pixel intensities must lie in [0, 255]")
        matrix = matrix.astype(np.uint8)
    return matrix


def load_image(filepath: Union[str, Path]) -> np.ndarray:
    """Read a BMP/PNG file as an 8-bit grayscale matrix."""
    with Image.open(filepath) as img:
        return np.asarray(img.convert('L'), dtype=np.uint8).copy()


def convert_format(pixels, target: str = 'PNG') -> bytes:
    """
    Encode a grayscale matrix losslessly.

    Args:
        pixels: 2-D matrix with intensities in [0, 255]
        target: Output format; only 'PNG' is supported

    Returns:
        Encoded byte stream

    Raises:
        EncodeFailure: On zero-dimension input or an unsupported target
    """
    if str(target).upper() not in SUPPORTED_TARGETS:
        raise EncodeFailure(f"Unsupported target format: {target}")
    try:
        matrix = as_grayscale(pixels)
    except EmptyImage as e:
        raise EncodeFailure(str(e)) from e

    buffer = io.BytesIO()
    # Fixed compression settings keep the bytes reproducible across runs
    Image.fromarray(matrix).save(buffer, format='PNG', optimize=False, compress_level=6)
    return buffer.getvalue()


def decode_png(payload: bytes) -> np.ndarray:
    """Decode PNG bytes back to a uint8 matrix."""
    with Image.open(io.BytesIO(payload)) as img:
        return np.asarray(img.convert('L'), dtype=np.uint8).copy()


@dataclass(frozen=True)
class AugmentOp:
    """One augmentation step. Build with the classmethods or ``parse``."""
    kind: str
    param: Optional[float] = None

    KINDS = (
        'rotate', 'scale', 'flip_horizontal', 'flip_vertical',
        'add_gaussian_noise', 'adjust_contrast', 'adjust_brightness',
    )

    @classmethod
    def rotate(cls, degrees: float) -> 'AugmentOp':
        return cls('rotate', float(degrees))

    @classmethod
    def scale(cls, factor: float) -> 'AugmentOp':
        return cls('scale', float(factor))

    @classmethod
    def flip_horizontal(cls) -> 'AugmentOp':
        return cls('flip_horizontal')

    @classmethod
    def flip_vertical(cls) -> 'AugmentOp':
        return cls('flip_vertical')

    @classmethod
    def add_gaussian_noise(cls, sigma: float) -> 'AugmentOp':
        return cls('add_gaussian_noise', float(sigma))

    @classmethod
    def adjust_contrast(cls, factor: float) -> 'AugmentOp':
        return cls('adjust_contrast', float(factor))

    @classmethod
    def adjust_brightness(cls, delta: float) -> 'AugmentOp':
        return cls('adjust_brightness', float(delta))

    @classmethod
    def parse(cls, text: str) -> 'AugmentOp':
        """
        Parse "kind" or "kind:param", e.g. "rotate:15", "flip_horizontal".

        Raises:
            BadParameter: For unknown kinds or missing parameters
        """
        kind, _, raw = text.strip().partition(':')
        if kind not in cls.KINDS:
            raise BadParameter(f"Unknown augmentation: {kind!r}")
        if kind.startswith('flip_'):
            return cls(kind)
        if not raw:
            raise BadParameter(f"Augmentation {kind!r} needs a parameter, e.g. {kind}:1.0")
        try:
            return cls(kind, float(raw))
        except ValueError as e:
            raise BadParameter(f"Bad parameter for {kind!r}: {raw!r}") from e

    @property
    def tag(self) -> str:
        """Short name used in augmented filenames."""
        if self.param is None:
            return self.kind
        return f"{self.kind}{self.param:g}"

    def validate(self) -> None:
        if self.kind not in self.KINDS:
            raise BadParameter(f"Unknown augmentation: {self.kind!r}")
        if self.kind == 'scale' and not self.param > 0:
            raise BadParameter(f"scale factor must be > 0, got {self.param}")
        if self.kind == 'add_gaussian_noise' and not self.param >= 0:
            raise BadParameter(f"noise sigma must be >= 0, got {self.param}")
        if self.kind == 'adjust_contrast' and not self.param > 0:
            raise BadParameter(f"contrast factor must be > 0, got {self.param}")
        if self.kind in ('rotate', 'adjust_brightness') and not math.isfinite(self.param):
            raise BadParameter(f"{self.kind} parameter must be finite")


def _to_uint8(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), 0, 255).astype(np.uint8)


def _rotate(matrix: np.ndarray, degrees: float) -> np.ndarray:
    # Whole turns are exact copies
    if degrees % 360 == 0:
        return matrix.copy()
    rotated = ndimage.rotate(
        matrix.astype(np.float64), degrees, reshape=False,
        order=1, mode='constant', cval=BACKGROUND, prefilter=False,
    )
    return _to_uint8(rotated)


def _scale(matrix: np.ndarray, factor: float) -> np.ndarray:
    # Zoom about the centre on the same grid; uncovered cells become background
    if factor == 1.0:
        return matrix.copy()
    center = (np.array(matrix.shape, dtype=np.float64) - 1.0) / 2.0
    inverse = 1.0 / factor
    offset = center - inverse * center
    scaled = ndimage.affine_transform(
        matrix.astype(np.float64), np.array([inverse, inverse]), offset=offset,
        order=1, mode='constant', cval=BACKGROUND, prefilter=False,
    )
    return _to_uint8(scaled)


def _apply(matrix: np.ndarray, op: AugmentOp, rng: np.random.Generator) -> np.ndarray:
    if op.kind == 'rotate':
        return _rotate(matrix, op.param)
    if op.kind == 'scale':
        return _scale(matrix, op.param)
    if op.kind == 'flip_horizontal':
        return np.fliplr(matrix).copy()
    if op.kind == 'flip_vertical':
        return np.flipud(matrix).copy()
    if op.kind == 'add_gaussian_noise':
        noise = rng.normal(0.0, op.param, size=matrix.shape)
        return _to_uint8(matrix.astype(np.float64) + noise)
    if op.kind == 'adjust_contrast':
        if op.param == 1.0:
            return matrix.copy()
        # Stretch around mid-gray
        return _to_uint8((matrix.astype(np.float64) - 128.0) * op.param + 128.0)
    if op.kind == 'adjust_brightness':
        return _to_uint8(matrix.astype(np.float64) + op.param)
    raise BadParameter(f"Unknown augmentation: {op.kind!r}")


def augment(pixels, ops: Sequence[AugmentOp], seed: int = 42) -> List[np.ndarray]:
    """
    Produce one augmented copy of ``pixels`` per op.

    Each op is applied to the original image, not chained. Rotation and
    scaling resample bilinearly and fill exposed area with white (255). All
    random draws come from one generator seeded with ``seed`` and consumed in
    op order.

    Args:
        pixels: 2-D grayscale matrix
        ops: Augmentations to apply
        seed: Seed for the noise generator

    Returns:
        List of uint8 matrices, same order as ``ops``

    Raises:
        BadParameter: scale <= 0, sigma < 0, contrast <= 0, unknown op
    """
    matrix = as_grayscale(pixels)
    for op in ops:
        op.validate()

    # One generator for the whole call, consumed in op order
    rng = np.random.default_rng(seed)
    return [_apply(matrix, op, rng) for op in ops]
