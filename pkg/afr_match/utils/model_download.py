"""Fetch, verify and truncate the ONNX backbone file."""
import hashlib
import logging
from pathlib import Path
from typing import Optional, Union

import requests

from afr_match.errors import ModelLoadFailure, ShapeMismatch

try:
    import onnx
    import onnx.utils
except ImportError:
    # Only needed to truncate a full classifier graph
    onnx = None

logger = logging.getLogger(__name__)

CHUNK_SIZE = 1 << 20
CHECKSUM_SUFFIX = '.sha256'
DEFAULT_TAP = 'fc2'


def sha256_file(filepath: Union[str, Path], chunk_size: int = CHUNK_SIZE) -> str:
    """Hex SHA-256 of a file, read in chunks."""
    digest = hashlib.sha256()
    with open(filepath, 'rb') as f:
        for chunk in iter(lambda: f.read(chunk_size), b''):
            digest.update(chunk)
    return digest.hexdigest()


def download_model(
    url: str,
    destination: Union[str, Path],
    expected_sha256: Optional[str] = None,
    timeout: float = 60.0
) -> Path:
    """
    Stream a model file to disk and check its checksum.

    The file is written to ``<destination>.part`` and renamed only after the
    checksum matches, so a failed download never leaves a usable-looking model.

    Args:
        url: HTTP(S) location of the .onnx file
        destination: Where to store it
        expected_sha256: Hex digest to verify (skipped when None)
        timeout: Per-request timeout in seconds

    Returns:
        Path of the verified file

    Raises:
        requests.exceptions.RequestException: If the download fails
        ModelLoadFailure: If the checksum does not match
    """
    dest = Path(destination)
    dest.parent.mkdir(parents=True, exist_ok=True)
    partial = dest.with_name(dest.name + '.part')

    try:
        with requests.get(url, stream=True, timeout=timeout) as response:
            response.raise_for_status()
            with open(partial, 'wb') as f:
                for chunk in response.iter_content(chunk_size=CHUNK_SIZE):
                    if chunk:
                        f.write(chunk)
    except requests.exceptions.RequestException as e:
        partial.unlink(missing_ok=True)
        raise requests.exceptions.RequestException(f"Error downloading model from {url}: {e}")

    if expected_sha256:
        actual = sha256_file(partial)
        if actual.lower() != expected_sha256.strip().lower():
            partial.unlink(missing_ok=True)
            raise ModelLoadFailure(
                f"Checksum mismatch for {url}: expected {expected_sha256}, got {actual}"
            )
    else:
        logger.warning("No checksum given for %s; file not verified", url)

    partial.replace(dest)
    return dest


def checksum_path(model_path: Union[str, Path]) -> Path:
    """Sidecar next to the model: vgg16.onnx -> vgg16.onnx.sha256."""
    path = Path(model_path)
    return path.with_name(path.name + CHECKSUM_SUFFIX)


def write_checksum(model_path: Union[str, Path]) -> str:
    """Record the model's SHA-256 in sha256sum format and return the digest."""
    path = Path(model_path)
    digest = sha256_file(path)
    checksum_path(path).write_text(f"{digest}  {path.name}\n", encoding='utf-8')
    return digest


def verify_checksum(model_path: Union[str, Path]) -> Optional[str]:
    """
    Check a model against its .sha256 sidecar, when one exists.

    Returns:
        The verified digest, or None if there is no sidecar

    Raises:
        ModelLoadFailure: If the file does not match the recorded digest
    """
    sidecar = checksum_path(model_path)
    if not sidecar.exists():
        logger.debug("No checksum file for %s", model_path)
        return None
    fields = sidecar.read_text(encoding='utf-8').split()
    expected = fields[0].lower() if fields else ''
    actual = sha256_file(model_path)
    if actual != expected:
        raise ModelLoadFailure(
            f"Checksum mismatch for {model_path}: {sidecar.name} says {expected or 'nothing'}, file is {actual}"
        )
    return actual


def find_tap_tensor(model, tap: str = DEFAULT_TAP) -> str:
    """
    Name of the tensor to expose as the embedding output.

    ``tap`` is either an exact tensor name or a layer name such as ``fc2``.
    For a layer name the last tensor produced inside that layer is used, so
    a Dense layer with a fused activation yields the activated output.

    Raises:
        ShapeMismatch: If no tensor matches
    """
    produced = [
        (node.name, output)
        for node in model.graph.node
        for output in node.output
    ]
    if any(output == tap for _, output in produced):
        return tap
    # Nodes are stored in topological order, so the last match is the layer's final tensor
    matches = [output for node_name, output in produced if tap in node_name or tap in output]
    if not matches:
        raise ShapeMismatch(f"No tensor in the model matches {tap!r}")
    return matches[-1]


def truncate_model(
    source: Union[str, Path],
    destination: Union[str, Path],
    tap: str = DEFAULT_TAP
) -> str:
    """
    Cut a full VGG16 classifier graph so its only output is the fc2 activation.

    Args:
        source: Full model (e.g. a Keras VGG16(include_top=True) export)
        destination: Where to write the truncated model
        tap: Layer or exact tensor name to keep as the output

    Returns:
        Name of the new graph output (pass it as --embedding-output if it isn't picked up)

    Raises:
        ModelLoadFailure: If onnx is missing or the source cannot be read
        ShapeMismatch: If no tensor matches ``tap``
    """
    if onnx is None:
        raise ModelLoadFailure("onnx is not installed. Install it with: pip install onnx")
    try:
        model = onnx.load(str(source))
    except Exception as e:
        raise ModelLoadFailure(f"Cannot read model {source}: {e}") from e

    tensor = find_tap_tensor(model, tap)
    weights = {init.name for init in model.graph.initializer}
    input_names = [i.name for i in model.graph.input if i.name not in weights]

    Path(destination).parent.mkdir(parents=True, exist_ok=True)
    onnx.utils.extract_model(str(source), str(destination), input_names, [tensor])
    logger.info("Truncated %s at %s -> %s", source, tensor, destination)
    return tensor
