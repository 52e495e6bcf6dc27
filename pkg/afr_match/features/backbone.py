"""VGG16 backbone extractor running an ONNX model file through onnxruntime."""
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from afr_match.dataset.imaging import as_grayscale
from afr_match.dataset.socofing import FingerprintRecord
from afr_match.errors import EmptyImage, ModelLoadFailure, ShapeMismatch
from afr_match.features.base import EmbeddingExtractor, EmbeddingVector, make_embedding
from afr_match.features.baseline import resize_bilinear
from afr_match.utils.model_download import verify_checksum

try:
    import onnxruntime
except ImportError:
    # Handle case where onnxruntime is not installed
    onnxruntime = None

logger = logging.getLogger(__name__)

BACKBONE_EXTRACTOR_ID = 'vgg16-fc2'
BACKBONE_INPUT_SIZE = 224
BACKBONE_DIM = 4096
DEFAULT_TAP_LAYER = 'fc2'
# ImageNet training means of the 16-layer VGG release, in the model's BGR channel order
VGG16_CHANNEL_MEANS_BGR = (103.939, 116.779, 123.68)
MODEL_PATH_ENV = 'AFRNET_MODEL_PATH'


@dataclass
class PreprocessedImage:
    """224x224x3 float32 tensor (HWC) ready for the backbone."""
    tensor: np.ndarray
    provenance: str


def preprocess(
    record: FingerprintRecord,
    channel_means: Tuple[float, float, float] = VGG16_CHANNEL_MEANS_BGR
) -> PreprocessedImage:
    """
    Condition a grayscale print for the backbone.

    Bilinear resize to 224x224 (skipped when already that size), replicate
    the gray channel three times, subtract the per-channel means.

    Raises:
        EmptyImage: On a zero-sized image
    """
    pixels = np.asarray(record.pixels)
    if pixels.size == 0:
        raise EmptyImage(f"{record.record_ref}: image has no pixels")
    gray = resize_bilinear(as_grayscale(pixels), BACKBONE_INPUT_SIZE)
    # Same gray plane in all three channels, then per-channel mean subtraction
    tensor = np.repeat(gray[:, :, None], 3, axis=2)
    tensor = tensor - np.asarray(channel_means, dtype=np.float32)
    return PreprocessedImage(tensor=tensor.astype(np.float32), provenance=record.record_ref)


def resolve_model_path(model_path: Optional[Union[str, Path]] = None) -> Path:
    """
    Pick the model file: explicit argument first, then AFRNET_MODEL_PATH.

    Raises:
        ModelLoadFailure: If neither is set or the file doesn't exist
    """
    candidate = model_path or os.getenv(MODEL_PATH_ENV)
    if not candidate:
        raise ModelLoadFailure(f"No backbone model given; pass --model-path or set {MODEL_PATH_ENV}")
    path = Path(candidate)
    if not path.is_file():
        raise ModelLoadFailure(f"Backbone model not found: {path}")
    return path


def _output_width(shape) -> Optional[int]:
    """Static size of one sample's output, or None when any axis is dynamic."""
    dims = list(shape or [])[1:]
    if not dims or not all(isinstance(d, int) for d in dims):
        return None
    return int(np.prod(dims))


def select_output(outputs, requested: Optional[str], model_path: Path) -> str:
    """
    Pick the graph output to use as the embedding.

    Order: the requested name, an output called fc2, the only output whose
    name contains fc2, the only output that is BACKBONE_DIM wide.

    Raises:
        ShapeMismatch: If the requested name is missing or no fc2 output can be identified
    """
    names = [o.name for o in outputs]
    if requested is not None:
        if requested not in names:
            raise ShapeMismatch(f"{model_path}: no output named {requested!r} (available: {names})")
        return requested
    if DEFAULT_TAP_LAYER in names:
        return DEFAULT_TAP_LAYER

    # Converter-mangled names, e.g. "vgg16/fc2/Relu:0"
    tagged = [name for name in names if DEFAULT_TAP_LAYER in name]
    if len(tagged) == 1:
        return tagged[0]
    sized = [o.name for o in outputs if _output_width(getattr(o, 'shape', None)) == BACKBONE_DIM]
    if len(sized) == 1:
        return sized[0]
    raise ShapeMismatch(
        f"{model_path}: cannot tell which output is {DEFAULT_TAP_LAYER} (available: {names}); "
        "pass --embedding-output or truncate the model with scripts/download_model.py"
    )


class OnnxBackboneExtractor(EmbeddingExtractor):
    """
    Embeddings from the penultimate fully-connected layer of VGG16.

    The model file must take one 224x224x3 image tensor, laid out either
    NHWC (Keras export) or NCHW. Each thread gets its own inference session.
    A full classifier graph works as long as its fc2 activation is a graph
    output; the 1000-way predictions are never used.
    """

    def __init__(
        self,
        model_path: Optional[Union[str, Path]] = None,
        output_name: Optional[str] = None,
        extractor_id: str = BACKBONE_EXTRACTOR_ID,
        channel_means: Tuple[float, float, float] = VGG16_CHANNEL_MEANS_BGR,
        expected_dim: int = BACKBONE_DIM
    ):
        if onnxruntime is None:
            raise ModelLoadFailure("onnxruntime is not installed. Install it with: pip install onnxruntime")
        self.model_path = resolve_model_path(model_path)
        verify_checksum(self.model_path)
        self.extractor_id = extractor_id
        self.channel_means = channel_means
        self.expected_dim = expected_dim
        self._local = threading.local()

        session = self._session()
        inputs = session.get_inputs()
        if len(inputs) != 1:
            raise ShapeMismatch(f"{self.model_path}: expected one input, found {len(inputs)}")
        self.input_name = inputs[0].name
        self.channels_last, self.fixed_batch = _check_input_shape(inputs[0].shape, self.model_path)

        self.output_name = select_output(session.get_outputs(), output_name, self.model_path)
        logger.info(
            "Loaded backbone %s (input %s, %s, output %s)",
            self.model_path, self.input_name, 'NHWC' if self.channels_last else 'NCHW', self.output_name
        )

    def _session(self):
        session = getattr(self._local, 'session', None)
        if session is None:
            try:
                session = onnxruntime.InferenceSession(
                    str(self.model_path), providers=['CPUExecutionProvider']
                )
            except Exception as e:
                raise ModelLoadFailure(f"Cannot load backbone model {self.model_path}: {e}") from e
            self._local.session = session
        return session

    @property
    def dim(self) -> int:
        return self.expected_dim

    def _run(self, tensors: List[np.ndarray]) -> np.ndarray:
        batch = np.stack(tensors).astype(np.float32)
        if not self.channels_last:
            batch = batch.transpose(0, 3, 1, 2)
        session = self._session()
        if self.fixed_batch == 1 and len(tensors) > 1:
            # Static batch axis: one image per run
            outputs = [
                session.run([self.output_name], {self.input_name: batch[i:i + 1]})[0]
                for i in range(len(tensors))
            ]
            result = np.concatenate(outputs, axis=0)
        else:
            result = session.run([self.output_name], {self.input_name: batch})[0]
        return result.reshape(len(tensors), -1)

    def extract(self, image: PreprocessedImage) -> EmbeddingVector:
        """
        Run one preprocessed image through the backbone.

        Raises:
            ShapeMismatch: If the tensor is not 224x224x3 or the output is not expected_dim wide
            DegenerateEmbedding: If the activation is all zeros
        """
        return self._extract_images([image])[0]

    def _extract_images(self, images: Sequence[PreprocessedImage]) -> List[EmbeddingVector]:
        expected = (BACKBONE_INPUT_SIZE, BACKBONE_INPUT_SIZE, 3)
        for image in images:
            if image.tensor.shape != expected:
                raise ShapeMismatch(f"{image.provenance}: tensor shape {image.tensor.shape}, expected {expected}")
        activations = self._run([image.tensor for image in images])
        if activations.shape[1] != self.expected_dim:
            raise ShapeMismatch(
                f"{self.model_path}: output {self.output_name!r} has {activations.shape[1]} values, "
                f"expected {self.expected_dim}"
            )
        return [
            make_embedding(image.provenance, row, self.extractor_id, self.expected_dim)
            for image, row in zip(images, activations)
        ]

    def extract_record(self, record: FingerprintRecord) -> EmbeddingVector:
        return self.extract(preprocess(record, self.channel_means))

    def extract_batch(self, records: Sequence[FingerprintRecord]) -> List[EmbeddingVector]:
        if not records:
            return []
        return self._extract_images([preprocess(record, self.channel_means) for record in records])

    def worker_copy(self) -> 'OnnxBackboneExtractor':
        # Sessions are thread-local, so the same object can be shared
        return self


def _check_input_shape(shape, model_path: Path) -> Tuple[bool, Optional[int]]:
    """
    Validate the model input signature.

    Returns:
        (channels_last, fixed_batch) where fixed_batch is the static batch size
        or None when the batch axis is dynamic
    """
    dims = list(shape)
    if len(dims) != 4:
        raise ShapeMismatch(f"{model_path}: expected a 4-D image input, got {dims}")
    size = BACKBONE_INPUT_SIZE
    static = [d if isinstance(d, int) else None for d in dims]
    fixed_batch = static[0]
    if static[1:] == [size, size, 3]:
        return True, fixed_batch
    if static[1:] == [3, size, size]:
        return False, fixed_batch
    raise ShapeMismatch(f"{model_path}: input shape {dims} is not 224x224x3")


def extract(image: PreprocessedImage, backbone: OnnxBackboneExtractor) -> EmbeddingVector:
    """Embedding of one preprocessed image from a loaded backbone."""
    return backbone.extract(image)
