"""Binary embedding cache (``.afre`` files).

Layout, all little-endian::

    b'AFRE'  u16 version=1
    u16 len + UTF-8 extractor_id
    u32 dim  u32 count
    count x ( u16 len + UTF-8 "category/record_id", dim x float32 )
"""
import struct
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from afr_match.errors import CorruptCache, DimMismatch, MixedExtractors
from afr_match.features.base import EmbeddingVector

CACHE_MAGIC = b'AFRE'
CACHE_VERSION = 1
CACHE_SUFFIX = '.afre'
_FLOAT = np.dtype('<f4')


def encode_cache(vectors: Sequence[EmbeddingVector], extractor_id: Optional[str] = None) -> bytes:
    """
    Serialize vectors to cache bytes.

    Args:
        vectors: Vectors sharing one extractor_id and dim
        extractor_id: Header id for an empty list (ignored otherwise)

    Raises:
        MixedExtractors: If vectors come from different extractors
        DimMismatch: If dims differ
    """
    ids = {v.extractor_id for v in vectors}
    if len(ids) > 1:
        raise MixedExtractors(f"Cannot cache vectors from several extractors: {sorted(ids)}")
    dims = {v.dim for v in vectors}
    if len(dims) > 1:
        raise DimMismatch(f"Cannot cache vectors of different dims: {sorted(dims)}")

    header_id = ids.pop() if ids else (extractor_id or '')
    dim = dims.pop() if dims else 0
    id_bytes = header_id.encode('utf-8')

    parts = [
        CACHE_MAGIC,
        struct.pack('<HH', CACHE_VERSION, len(id_bytes)),
        id_bytes,
        struct.pack('<II', dim, len(vectors)),
    ]
    for vector in vectors:
        ref_bytes = vector.record_ref.encode('utf-8')
        parts.append(struct.pack('<H', len(ref_bytes)))
        parts.append(ref_bytes)
        parts.append(np.ascontiguousarray(vector.values, dtype=_FLOAT).tobytes())
    return b''.join(parts)


def decode_cache(payload: bytes) -> Tuple[str, int, List[EmbeddingVector]]:
    """
    Parse cache bytes.

    Returns:
        Tuple of (extractor_id, dim, vectors)

    Raises:
        CorruptCache: Bad magic or version, truncation, or trailing bytes
    """
    view = memoryview(payload)
    offset = 0

    def take(size: int) -> memoryview:
        nonlocal offset
        if offset + size > len(view):
            raise CorruptCache(f"Cache truncated at byte {offset} (needed {size} more)")
        chunk = view[offset:offset + size]
        offset += size
        return chunk

    if bytes(take(4)) != CACHE_MAGIC:
        raise CorruptCache("Not an embedding cache (bad magic)")
    version, id_len = struct.unpack('<HH', take(4))
    if version != CACHE_VERSION:
        raise CorruptCache(f"Unsupported cache version {version}")
    try:
        extractor_id = bytes(take(id_len)).decode('utf-8')
    except UnicodeDecodeError as e:
        raise CorruptCache(f"Bad extractor id: {e}") from e
    dim, count = struct.unpack('<II', take(8))
    if count and not dim:
        raise CorruptCache("Cache declares records of dimension 0")

    vectors = []
    for _ in range(count):
        (ref_len,) = struct.unpack('<H', take(2))
        try:
            record_ref = bytes(take(ref_len)).decode('utf-8')
        except UnicodeDecodeError as e:
            raise CorruptCache(f"Bad record reference: {e}") from e
        values = np.frombuffer(take(dim * _FLOAT.itemsize), dtype=_FLOAT).astype(np.float32)
        vectors.append(EmbeddingVector(record_ref=record_ref, values=values, extractor_id=extractor_id))

    if offset != len(view):
        raise CorruptCache(f"{len(view) - offset} trailing bytes after {count} records")
    return extractor_id, dim, vectors


def cache_save(
    vectors: Sequence[EmbeddingVector],
    destination: Union[str, Path],
    extractor_id: Optional[str] = None
) -> Path:
    """Write vectors to an embedding cache file."""
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_cache(vectors, extractor_id))
    return path


def cache_load(source: Union[str, Path]) -> List[EmbeddingVector]:
    """
    Read an embedding cache file.

    Raises:
        FileNotFoundError: If the file doesn't exist
        CorruptCache: If the content is malformed
    """
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"Embedding cache not found: {source}")
    _, _, vectors = decode_cache(path.read_bytes())
    return vectors


def cache_header(source: Union[str, Path]) -> Tuple[str, int, int]:
    """Read (extractor_id, dim, count) without decoding the records."""
    path = Path(source)
    with open(path, 'rb') as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != CACHE_MAGIC:
            raise CorruptCache(f"{path}: not an embedding cache")
        version, id_len = struct.unpack('<HH', head[4:8])
        if version != CACHE_VERSION:
            raise CorruptCache(f"{path}: unsupported cache version {version}")
        id_bytes = f.read(id_len)
        tail = f.read(8)
        if len(id_bytes) != id_len or len(tail) != 8:
            raise CorruptCache(f"{path}: truncated header")
    dim, count = struct.unpack('<II', tail)
    return id_bytes.decode('utf-8'), dim, count
