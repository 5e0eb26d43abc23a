"""
Heterogeneous client data and the paired large-scale fading profile.

Client k (0-based) holds digit k // 2 only; the two clients of a digit
share its samples evenly and see the same beta.
"""
import logging
from typing import Sequence

import numpy as np

from learning.training import Dataset
from radio.channel import FadingProfile

log = logging.getLogger("otafl.harness")


def restrict_digits(data: Dataset, digits: Sequence[int]) -> Dataset:
    return data.subset(np.flatnonzero(np.isin(data.labels, list(digits))))


def balanced_digit_subset(data: Dataset, digits: Sequence[int], total: int) -> Dataset:
    """total // len(digits) samples of every digit, first occurrences in file order."""
    digits = list(digits)
    if not digits:
        raise ValueError("need at least one digit")
    per_digit = total // len(digits)
    if per_digit < 1:
        raise ValueError(f"total={total} is too small for {len(digits)} digits")
    picks = []
    for digit in digits:
        idx = np.flatnonzero(data.labels == digit)
        if idx.size < per_digit:
            log.warning(f"digit {digit}: only {idx.size} samples, wanted {per_digit}")
        picks.append(idx[:per_digit])
    return data.subset(np.sort(np.concatenate(picks)))


def partition_heterogeneous(train: Dataset, K: int) -> list[Dataset]:
    """K equal shards; clients 2i and 2i+1 split the samples of digit i."""
    if K < 2 or K % 2:
        raise ValueError(f"K must be even and >= 2, got {K}")
    digits = range(K // 2)
    per_digit = [np.flatnonzero(train.labels == digit) for digit in digits]
    counts = [idx.size for idx in per_digit]
    shard_size = min(counts) // 2
    if shard_size < 1:
        raise ValueError(f"digit counts {counts} leave an empty shard for K={K}")
    if max(counts) // 2 > shard_size:
        log.debug(f"Truncating every shard to {shard_size} samples (digit counts {counts})")

    shards = []
    for idx in per_digit:
        shards.append(train.subset(idx[:shard_size]))
        shards.append(train.subset(idx[shard_size:2 * shard_size]))
    return shards


def paired_beta_profile(K: int, low_db: float = -40.0, high_db: float = 0.0) -> FadingProfile:
    """K/2 levels equispaced in dB from low_db to high_db, one per client pair."""
    if K < 2 or K % 2:
        raise ValueError(f"K must be even and >= 2, got {K}")
    levels = np.linspace(low_db, high_db, K // 2)
    return FadingProfile.from_db(np.repeat(levels, 2))
