"""Dataset assembly: pair every source track with one transcoded lossy version.

Transcoding fans out over a thread pool (the work is subprocess-bound);
manifest assembly happens single-threaded after all workers join. A build
aborts if more than 1% of tracks fail to transcode.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .encoding import assign_encoding
from .manifest import CODECS, EncodingSpec, Manifest, SourceTrack, TrackRecord
from .splits import split_assign
from .transcode import TranscodeError, Transcoder

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.01


class BuildError(RuntimeError):
    """Too many transcode failures to produce a trustworthy dataset."""


@dataclass(frozen=True)
class DatasetSeeds:
    corpus_seed: int
    encoding_seed: int
    split_seed: int


def build_dataset(
    sources: list[SourceTrack],
    dataset_id: str,
    seeds: DatasetSeeds,
    out_dir: str | Path,
    transcoder: Transcoder | None = None,
    workers: int = 4,
    codecs: tuple[str, ...] = CODECS,
) -> Manifest:
    """Build ds1 or ds2: one lossless + one lossy record per source track."""
    if not sources:
        raise ValueError("no source tracks")
    out_dir = Path(out_dir)
    audio_dir = out_dir / dataset_id / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    transcoder = transcoder or Transcoder()

    split_map = split_assign([s.track_id for s in sources], seeds.split_seed)
    specs: dict[str, EncodingSpec] = {
        s.track_id: assign_encoding(
            s.track_id, dataset_id, seeds.encoding_seed, codecs=codecs
        )
        for s in sources
    }

    failures: list[tuple[str, str]] = []

    def _transcode_one(source: SourceTrack) -> Path | None:
        spec = specs[source.track_id]
        out_path = audio_dir / f"{source.track_id}_lossy.wav"
        try:
            return transcoder.transcode(source, spec, out_path)
        except TranscodeError as exc:
            logger.error("transcode failed for %s: %s", source.track_id, exc)
            failures.append((source.track_id, str(exc)))
            return None

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        lossy_paths = list(pool.map(_transcode_one, sources))

    if len(failures) > MAX_FAILURE_FRACTION * len(sources):
        raise BuildError(
            f"{len(failures)}/{len(sources)} tracks failed to transcode"
        )

    records: list[TrackRecord] = []
    for source, lossy_path in zip(sources, lossy_paths):
        if lossy_path is None:
            continue
        split = split_map[source.track_id]
        records.append(
            TrackRecord(
                track_id=source.track_id,
                audio_path=source.path,
                label="lossless",
                encoding=None,
                dataset_id=dataset_id,
                split=split,
            )
        )
        records.append(
            TrackRecord(
                track_id=source.track_id,
                audio_path=lossy_path,
                label="lossy",
                encoding=specs[source.track_id],
                dataset_id=dataset_id,
                split=split,
            )
        )
    records.sort(key=lambda r: (r.track_id, r.label))

    return Manifest(
        dataset_id=dataset_id,
        records=records,
        corpus_seed=seeds.corpus_seed,
        encoding_seed=seeds.encoding_seed,
        split_seed=seeds.split_seed,
        transcoder_version=transcoder.version,
        encoder_variants=dict(transcoder.encoder_variants),
        command_log=list(transcoder.command_log),
    )
