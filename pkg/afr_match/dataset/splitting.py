"""Seeded train/test splitting."""
import math
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, TypeVar

import numpy as np

from afr_match.dataset.socofing import FingerprintRecord
from afr_match.errors import InvalidFraction

T = TypeVar('T')


def split(
    records: Sequence[T],
    train_fraction: float = 0.8,
    seed: int = 42
) -> Tuple[List[T], List[T]]:
    """
    Shuffle with a seeded generator and cut into train and test lists.

    The train side gets floor(train_fraction * n) records.

    Args:
        records: Records to split (any sequence)
        train_fraction: Fraction in the open interval (0, 1)
        seed: Seed for the shuffle

    Returns:
        Tuple of (train, test) in shuffled order

    Raises:
        InvalidFraction: If the fraction is outside (0, 1) or records is empty
    """
    if not 0.0 < train_fraction < 1.0:
        raise InvalidFraction(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(records)
    if n == 0:
        raise InvalidFraction("Cannot split an empty record list")

    order = np.random.default_rng(seed).permutation(n)
    # Decimal fraction, not binary float: 0.29 * 100 must floor to 29
    n_train = math.floor(Fraction(str(train_fraction)) * n)
    shuffled = [records[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


def split_by_category(
    records: Sequence[FingerprintRecord],
    train_fraction: float = 0.8,
    seed: int = 42
) -> Dict[str, Tuple[List[FingerprintRecord], List[FingerprintRecord]]]:
    """
    Split each alteration category on its own, with the same fraction and seed.

    Returns:
        Dictionary mapping level name to (train, test)
    """
    grouped: Dict[str, List[FingerprintRecord]] = {}
    for record in records:
        grouped.setdefault(record.alteration.level.value, []).append(record)
    return {
        level: split(group, train_fraction, seed)
        for level, group in grouped.items()
    }
