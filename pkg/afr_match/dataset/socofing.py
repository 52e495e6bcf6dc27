"""SOCOFing-style dataset records: filename parsing, relabeling and manifests."""
import csv
import io
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
from dateutil import parser as date_parser

from afr_match.errors import DuplicateSource, UnknownAlterationTag, UnparseableName
from afr_match.utils.file_utils import load_json, save_json

logger = logging.getLogger(__name__)

MANIFEST_FILENAME = 'manifest.csv'
MANIFEST_COLUMNS = [
    'source_name', 'record_id', 'subject', 'gender', 'hand', 'finger', 'level', 'method_tag',
]
IMAGE_EXTENSIONS = ('.bmp', '.png')
AUGMENTED_SUFFIX = '-aug'

# Obliteration, central rotation, z-cut
KNOWN_METHOD_TAGS = ('Obl', 'CR', 'Zcut')


class Gender(str, Enum):
    M = 'M'
    F = 'F'


class Hand(str, Enum):
    LEFT = 'Left'
    RIGHT = 'Right'


class Finger(str, Enum):
    THUMB = 'thumb'
    INDEX = 'index'
    MIDDLE = 'middle'
    RING = 'ring'
    LITTLE = 'little'


class Level(str, Enum):
    REAL = 'Real'
    EASY = 'Easy'
    MEDIUM = 'Medium'
    HARD = 'Hard'

    @classmethod
    def parse(cls, text: str) -> 'Level':
        """Parse a level name case-insensitively ("easy", "Easy", "EASY")."""
        for level in cls:
            if level.value.lower() == str(text).strip().lower():
                return level
        raise ValueError(f"Unknown alteration level: {text!r}")


ALTERED_LEVELS = (Level.EASY, Level.MEDIUM, Level.HARD)

# SOCOFing ships altered images under "Altered/Altered-Easy" etc.
CATEGORY_DIR_ALIASES: Dict[Level, Tuple[str, ...]] = {
    Level.REAL: ('Real',),
    Level.EASY: ('Easy', 'Altered-Easy', 'Altered/Altered-Easy', 'Easy_Altered'),
    Level.MEDIUM: ('Medium', 'Altered-Medium', 'Altered/Altered-Medium', 'Medium_Altered'),
    Level.HARD: ('Hard', 'Altered-Hard', 'Altered/Altered-Hard', 'Hard_Altered'),
}


@dataclass(frozen=True)
class IdentityKey:
    """Who a print belongs to. Carried with every record, compared for ground truth."""
    subject_id: int
    gender: Gender
    hand: Hand
    finger: Finger

    def __post_init__(self):
        if self.subject_id < 1:
            raise UnparseableName(f"subject_id must be >= 1, got {self.subject_id}")


@dataclass(frozen=True)
class AlterationLevel:
    level: Level
    method_tag: Optional[str] = None

    def __post_init__(self):
        if self.level == Level.REAL and self.method_tag:
            raise UnparseableName("a Real print cannot carry an alteration method tag")


@dataclass
class FingerprintRecord:
    record_id: str
    identity: IdentityKey
    alteration: AlterationLevel
    pixels: np.ndarray
    source_name: str

    @property
    def record_ref(self) -> str:
        return make_record_ref(self.alteration.level, self.record_id)


@dataclass(frozen=True)
class ManifestEntry:
    source_name: str
    record_id: str
    identity: IdentityKey
    alteration: AlterationLevel

    @property
    def record_ref(self) -> str:
        return make_record_ref(self.alteration.level, self.record_id)


@dataclass
class Manifest:
    """The relabel mapping of one category directory."""
    entries: List[ManifestEntry]
    created_at: Optional[datetime] = None
    category: Optional[str] = None
    category_counts: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.category_counts:
            counts: Dict[str, int] = {}
            for entry in self.entries:
                key = entry.alteration.level.value
                counts[key] = counts.get(key, 0) + 1
            self.category_counts = counts

    def __len__(self) -> int:
        return len(self.entries)


def make_record_ref(level: Union[Level, str], record_id: str) -> str:
    """Build the canonical "category/record_id" reference, e.g. "Real/6.png"."""
    category = level.value if isinstance(level, Level) else str(level)
    return f"{category}/{record_id}"


def split_record_ref(record_ref: str) -> Tuple[str, str]:
    """Inverse of make_record_ref."""
    category, sep, record_id = record_ref.rpartition('/')
    if not sep or not category or not record_id:
        raise ValueError(f"Not a record reference: {record_ref!r}")
    return category, record_id


def parse_socofing_name(
    filename: str,
    level: Optional[Union[Level, str]] = None
) -> Tuple[IdentityKey, AlterationLevel]:
    """
    Parse identity and alteration metadata from a SOCOFing filename.

    Real prints look like ``1__M_Left_index_finger.BMP``; altered prints add a
    method suffix: ``1__M_Left_index_finger_Obl.BMP``. The easy/medium/hard
    tier is not in the name, so altered names need ``level``.

    Args:
        filename: Basename with extension
        level: Alteration tier of the directory the file came from. Defaults
            to Real for untagged names.

    Returns:
        Tuple of (IdentityKey, AlterationLevel)

    Raises:
        UnparseableName: If tokens are missing or unknown, or an altered name
            has no tier
        UnknownAlterationTag: If the method suffix is not recognised
    """
    if not filename or '.' not in filename:
        raise UnparseableName(f"Expected a basename with extension: {filename!r}")

    # Split "<subject>__<gender>_<hand>_<finger>_finger[_<tag>]"
    stem = Path(filename).stem
    subject, sep, rest = stem.partition('__')
    if not sep or not subject.isdigit():
        raise UnparseableName(f"Missing subject prefix: {filename!r}")

    tokens = rest.split('_')
    if len(tokens) not in (4, 5) or tokens[3] != 'finger':
        raise UnparseableName(f"Unexpected token layout: {filename!r}")

    try:
        identity = IdentityKey(
            subject_id=int(subject),
            gender=Gender(tokens[0]),
            hand=Hand(tokens[1]),
            finger=Finger(tokens[2]),
        )
    except ValueError as e:
        raise UnparseableName(f"{filename!r}: {e}") from e

    # Optional fifth token is the alteration method
    method_tag = tokens[4] if len(tokens) == 5 else None
    if method_tag is not None and method_tag not in KNOWN_METHOD_TAGS:
        raise UnknownAlterationTag(f"{filename!r}: unknown alteration tag {method_tag!r}")

    if level is None:
        if method_tag is not None:
            raise UnparseableName(
                f"{filename!r} is altered ({method_tag}); the Easy/Medium/Hard level must be supplied"
            )
        resolved = Level.REAL
    else:
        resolved = level if isinstance(level, Level) else Level.parse(level)

    return identity, AlterationLevel(level=resolved, method_tag=method_tag)


def relabel(
    source_dir_listing: Iterable[str],
    category: Union[Level, AlterationLevel, str],
    created_at: Optional[datetime] = None
) -> Manifest:
    """
    Assign short canonical names ("1.png", "2.png", ...) to a category listing.

    Names are numbered in lexicographic order of the source filename, so the
    mapping only depends on which files exist, not on directory order.

    Args:
        source_dir_listing: Filenames in the category directory
        category: The category's alteration level
        created_at: Manifest timestamp (default: now, UTC)

    Returns:
        Manifest recording source_name -> record_id plus parsed identity

    Raises:
        DuplicateSource: If a filename appears twice
        UnparseableName / UnknownAlterationTag: From parse_socofing_name
    """
    if isinstance(category, AlterationLevel):
        level = category.level
    elif isinstance(category, Level):
        level = category
    else:
        level = Level.parse(category)

    listing = list(source_dir_listing)
    if not listing:
        raise UnparseableName(f"Empty listing for category {level.value}")

    # Reject duplicates before numbering anything
    seen = set()
    for name in listing:
        if name in seen:
            raise DuplicateSource(f"Duplicate source file: {name}")
        seen.add(name)

    entries = []
    # Number in sorted order so directory order never matters
    for index, name in enumerate(sorted(listing), start=1):
        identity, alteration = parse_socofing_name(name, level)
        entries.append(ManifestEntry(
            source_name=name,
            record_id=f"{index}.png",
            identity=identity,
            alteration=alteration,
        ))

    return Manifest(
        entries=entries,
        created_at=created_at or datetime.now(timezone.utc),
        category=level.value,
    )


def manifest_to_csv(manifest: Manifest) -> bytes:
    """Serialize a manifest to UTF-8 CSV bytes with the fixed column order."""
    buffer = io.StringIO(newline='')
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(MANIFEST_COLUMNS)
    for entry in manifest.entries:
        writer.writerow([
            entry.source_name,
            entry.record_id,
            entry.identity.subject_id,
            entry.identity.gender.value,
            entry.identity.hand.value,
            entry.identity.finger.value,
            entry.alteration.level.value,
            entry.alteration.method_tag or '',
        ])
    return buffer.getvalue().encode('utf-8')


def manifest_meta_path(filepath: Union[str, Path]) -> Path:
    """Sidecar holding the manifest's category and creation time: manifest.csv -> manifest.json."""
    return Path(filepath).with_suffix('.json')


def save_manifest(manifest: Manifest, filepath: Union[str, Path]) -> Path:
    """Write manifest.csv plus its manifest.json sidecar, creating parent directories."""
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(manifest_to_csv(manifest))
    save_json(
        {
            'category': manifest.category,
            'created_at': manifest.created_at.isoformat() if manifest.created_at else None,
            'category_counts': manifest.category_counts,
        },
        manifest_meta_path(path),
    )
    return path


def load_manifest(
    filepath: Union[str, Path],
    created_at: Optional[Union[str, datetime]] = None
) -> Manifest:
    """
    Read a manifest.csv written by save_manifest.

    Identity columns are checked against the source filename on the way in.

    Args:
        filepath: Path to manifest.csv
        created_at: Timestamp (ISO string or datetime); defaults to the one in manifest.json

    Returns:
        Manifest

    Raises:
        FileNotFoundError: If the file doesn't exist
        UnparseableName: If a row disagrees with its source_name
    """
    path = Path(filepath)
    if not path.exists():
        raise FileNotFoundError(f"Manifest not found: {filepath}")

    entries = []
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.DictReader(f)
        for row in reader:
            level = Level.parse(row['level'])
            stored_identity = IdentityKey(
                subject_id=int(row['subject']),
                gender=Gender(row['gender']),
                hand=Hand(row['hand']),
                finger=Finger(row['finger']),
            )
            stored_alteration = AlterationLevel(level, row['method_tag'] or None)
            # Stored columns must agree with what the filename says
            parsed_identity, parsed_alteration = parse_socofing_name(row['source_name'], level)
            if (parsed_identity, parsed_alteration) != (stored_identity, stored_alteration):
                raise UnparseableName(
                    f"{path}: row for {row['source_name']} disagrees with its filename"
                )
            entries.append(ManifestEntry(
                source_name=row['source_name'],
                record_id=row['record_id'],
                identity=stored_identity,
                alteration=stored_alteration,
            ))

    category = entries[0].alteration.level.value if entries else path.parent.name
    meta_path = manifest_meta_path(path)
    if meta_path.exists():
        meta = load_json(meta_path)
        category = meta.get('category') or category
        # An explicit timestamp wins over the stored one
        if created_at is None:
            created_at = meta.get('created_at')
    if isinstance(created_at, str):
        created_at = date_parser.isoparse(created_at)

    return Manifest(entries=entries, created_at=created_at, category=category)


def category_counts(manifests: Iterable[Manifest]) -> Dict[str, int]:
    """
    Count records per alteration level across a set of manifests.

    Args:
        manifests: Manifests for any subset of the four categories

    Returns:
        Dictionary with one key per level (Real, Easy, Medium, Hard) and 'total'.
        Missing categories count as 0.
    """
    counts = {level.value: 0 for level in Level}
    for manifest in manifests:
        for level_name, count in manifest.category_counts.items():
            counts[level_name] = counts.get(level_name, 0) + count
    counts['total'] = sum(counts[level.value] for level in Level)
    return counts


def discover_categories(src: Union[str, Path]) -> Dict[Level, Path]:
    """
    Locate the four category directories under a dataset root.

    Accepts both the short layout (``Real/``, ``Easy/`` ...) and SOCOFing's own
    (``Real/``, ``Altered/Altered-Easy/`` ...).

    Returns:
        Mapping of level -> directory for every category found
    """
    root = Path(src)
    found: Dict[Level, Path] = {}
    for level, aliases in CATEGORY_DIR_ALIASES.items():
        for alias in aliases:
            candidate = root / alias
            if candidate.is_dir():
                found[level] = candidate
                break
    return found


def list_images(directory: Union[str, Path]) -> List[str]:
    """List image basenames (BMP or PNG, any case) in a directory, sorted."""
    return sorted(
        p.name for p in Path(directory).iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def genuine_map(
    real_manifest: Manifest,
    altered_manifest: Manifest
) -> Dict[Tuple[str, str], bool]:
    """
    Ground-truth labels for every (real, altered) pair.

    A pair is genuine iff both records carry the same IdentityKey.

    Returns:
        Dictionary mapping (real_ref, altered_ref) to True (genuine) or False (impostor)
    """
    labels = {}
    for real in real_manifest.entries:
        for altered in altered_manifest.entries:
            labels[(real.record_ref, altered.record_ref)] = real.identity == altered.identity
    logger.debug(
        "Built %d ground-truth labels (%d genuine)",
        len(labels), sum(1 for v in labels.values() if v)
    )
    return labels
