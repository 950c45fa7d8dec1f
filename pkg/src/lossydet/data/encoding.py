"""Per-track codec parameter assignment.

Draws are counter-based: each (seed, track_id, field) triple is hashed to an
integer and mapped uniformly onto the field's value set. DS1 and DS2 share
the codec and bitrate draws by construction, so the two datasets differ only
in the cutoff frequency applied to the lossy versions.
"""

from __future__ import annotations

import hashlib

from .manifest import BITRATES_KBPS, CODECS, CUTOFFS_HZ, DATASET_IDS, EncodingSpec


def _draw(seed: int, track_id: str, field: str, n_choices: int) -> int:
    digest = hashlib.sha256(f"{seed}\x00{track_id}\x00{field}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % n_choices


def assign_encoding(
    track_id: str,
    dataset_id: str,
    seed: int,
    codecs: tuple[str, ...] = CODECS,
) -> EncodingSpec:
    """Deterministic uniform (codec, bitrate[, cutoff]) draw for one track.

    `codecs` restricts the codec pool (CLI --codecs filter); the draw stays
    deterministic in (seed, track_id) for any fixed pool.
    """
    if dataset_id not in DATASET_IDS:
        raise ValueError(f"unknown dataset_id {dataset_id!r}")
    pool = tuple(sorted(codecs))
    if not pool or any(c not in CODECS for c in pool):
        raise ValueError(f"invalid codec pool {codecs!r}")
    codec = pool[_draw(seed, track_id, "codec", len(pool))]
    bitrate = BITRATES_KBPS[_draw(seed, track_id, "bitrate", len(BITRATES_KBPS))]
    cutoff = None
    if dataset_id == "ds2":
        cutoff = CUTOFFS_HZ[_draw(seed, track_id, "cutoff", len(CUTOFFS_HZ))]
    return EncodingSpec(codec=codec, bitrate_kbps=bitrate, cutoff_hz=cutoff)
