"""Deterministic 70/10/20 train/val/test assignment over track ids."""

from __future__ import annotations

import numpy as np

TRAIN_FRACTION = 0.7
VAL_FRACTION = 0.1


def split_assign(track_ids: list[str], seed: int) -> dict[str, str]:
    """Shuffle ids deterministically and cut 70/10/20.

    Ids are sorted before shuffling so the result is independent of the
    input order. Boundaries are cumulative floors (floor(0.7n), floor(0.8n))
    with the remainder going to test; this keeps every split within one
    track of its exact proportion and the test split never empty.
    """
    if len(track_ids) != len(set(track_ids)):
        raise ValueError("duplicate track ids")
    if not track_ids:
        raise ValueError("empty track id list")
    ordered = sorted(track_ids)
    rng = np.random.default_rng(seed)
    shuffled = [ordered[i] for i in rng.permutation(len(ordered))]
    n = len(shuffled)
    n_train = (n * 7) // 10
    n_val = (n * 8) // 10 - n_train
    assignment: dict[str, str] = {}
    for i, tid in enumerate(shuffled):
        if i < n_train:
            assignment[tid] = "train"
        elif i < n_train + n_val:
            assignment[tid] = "val"
        else:
            assignment[tid] = "test"
    return assignment
