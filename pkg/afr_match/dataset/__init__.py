"""Dataset ingestion: SOCOFing parsing, relabeling, conversion, splitting and augmentation."""
import logging
from pathlib import Path
from typing import List, Optional, Union

from afr_match.dataset.imaging import AugmentOp, augment, convert_format, decode_png, load_image
from afr_match.dataset.socofing import (
    ALTERED_LEVELS,
    AlterationLevel,
    FingerprintRecord,
    IdentityKey,
    Level,
    MANIFEST_FILENAME,
    Manifest,
    category_counts,
    discover_categories,
    genuine_map,
    list_images,
    load_manifest,
    make_record_ref,
    parse_socofing_name,
    relabel,
    save_manifest,
    split_record_ref,
)
from afr_match.dataset.splitting import split, split_by_category

logger = logging.getLogger(__name__)


def load_category(
    out_root: Union[str, Path],
    level: Union[Level, str],
    manifest: Optional[Manifest] = None
) -> List[FingerprintRecord]:
    """
    Load a relabeled category (``<out_root>/<Level>/manifest.csv`` + PNGs) as records.

    Args:
        out_root: Root written by ``afr-match ingest``
        level: Category to load (or a directory name such as "Easy-aug")
        manifest: Already-loaded manifest, to skip re-reading it

    Returns:
        Records in manifest order
    """
    category = level.value if isinstance(level, Level) else str(level)
    category_dir = Path(out_root) / category
    if manifest is None:
        manifest = load_manifest(category_dir / MANIFEST_FILENAME)

    records = []
    for entry in manifest.entries:
        records.append(FingerprintRecord(
            record_id=entry.record_id,
            identity=entry.identity,
            alteration=entry.alteration,
            pixels=load_image(category_dir / entry.record_id),
            source_name=entry.source_name,
        ))
    logger.info("Loaded %d records from %s", len(records), category_dir)
    return records


__all__ = [
    'ALTERED_LEVELS',
    'AlterationLevel',
    'AugmentOp',
    'FingerprintRecord',
    'IdentityKey',
    'Level',
    'MANIFEST_FILENAME',
    'Manifest',
    'augment',
    'category_counts',
    'convert_format',
    'decode_png',
    'discover_categories',
    'genuine_map',
    'list_images',
    'load_category',
    'load_image',
    'load_manifest',
    'make_record_ref',
    'parse_socofing_name',
    'relabel',
    'save_manifest',
    'split',
    'split_by_category',
    'split_record_ref',
]
