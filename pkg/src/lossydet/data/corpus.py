"""Ingestion of a user-supplied lossless corpus directory."""

from __future__ import annotations

import logging
import wave
from dataclasses import dataclass
from pathlib import Path

from .manifest import SourceTrack

logger = logging.getLogger(__name__)

REQUIRED_SAMPLE_RATE = 44100
REQUIRED_BIT_DEPTH = 16
MIN_DURATION_S = 4.0


class EmptyCorpusError(RuntimeError):
    """Raised when a corpus directory contains no usable tracks."""


@dataclass(frozen=True)
class SkippedFile:
    path: Path
    reason: str  # "decode" | "sample_rate" | "bit_depth" | "duration"


def probe_wav(path: Path) -> SourceTrack | SkippedFile:
    """Validate one WAV file against the SourceTrack contract."""
    try:
        with wave.open(str(path), "rb") as wav:
            rate = wav.getframerate()
            width = wav.getsampwidth()
            n_frames = wav.getnframes()
    except (wave.Error, EOFError, OSError):
        return SkippedFile(path=path, reason="decode")
    if rate != REQUIRED_SAMPLE_RATE:
        return SkippedFile(path=path, reason="sample_rate")
    if width * 8 != REQUIRED_BIT_DEPTH:
        return SkippedFile(path=path, reason="bit_depth")
    duration = n_frames / rate
    if duration < MIN_DURATION_S:
        return SkippedFile(path=path, reason="duration")
    return SourceTrack(
        track_id=path.stem,
        path=path,
        duration_s=duration,
        sample_rate_hz=rate,
        bit_depth=width * 8,
    )


def ingest_corpus(
    directory: str | Path,
) -> tuple[list[SourceTrack], list[SkippedFile]]:
    """Scan a directory for valid 16-bit 44.1 kHz WAVs of at least 4 seconds.

    Returns (accepted, skipped); raises EmptyCorpusError if nothing passes.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise NotADirectoryError(f"{directory} is not a directory")
    accepted: list[SourceTrack] = []
    skipped: list[SkippedFile] = []
    for path in sorted(directory.glob("*.wav")):
        result = probe_wav(path)
        if isinstance(result, SourceTrack):
            accepted.append(result)
        else:
            logger.warning("skipping %s (%s)", result.path, result.reason)
            skipped.append(result)
    if not accepted:
        raise EmptyCorpusError(f"no valid lossless WAV files in {directory}")
    return accepted, skipped
