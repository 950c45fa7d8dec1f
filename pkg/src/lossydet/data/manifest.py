"""Dataset record types and JSON-lines manifest serialization.

A manifest is a JSONL file with one TrackRecord per line plus a sidecar
header JSON (`<manifest>.header.json`) holding the seeds, the transcoder
version, and the encoder variants actually used, so a build is fully
reproducible from the manifest pair alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

CODECS = ("mp3lame", "fdk_aac", "vorbis")
BITRATES_KBPS = (128, 256, 320)
CUTOFFS_HZ = (14000, 16000, 18000, 20000)
DATASET_IDS = ("ds1", "ds2")
SPLITS = ("train", "val", "test")

MANIFEST_FIELDS = (
    "track_id",
    "audio_path",
    "label",
    "codec",
    "bitrate_kbps",
    "cutoff_hz",
    "dataset_id",
    "split",
)


@dataclass(frozen=True)
class SourceTrack:
    """One lossless source file (16-bit, 44.1 kHz WAV, >= 4 s)."""

    track_id: str
    path: Path
    duration_s: float
    sample_rate_hz: int
    bit_depth: int


@dataclass(frozen=True)
class EncodingSpec:
    """Codec parameters for one lossy encoding; cutoff_hz is DS2-only."""

    codec: str
    bitrate_kbps: int
    cutoff_hz: int | None = None

    def __post_init__(self) -> None:
        if self.codec not in CODECS:
            raise ValueError(f"unknown codec {self.codec!r}")
        if self.bitrate_kbps not in BITRATES_KBPS:
            raise ValueError(f"unknown bitrate {self.bitrate_kbps}")
        if self.cutoff_hz is not None and self.cutoff_hz not in CUTOFFS_HZ:
            raise ValueError(f"unknown cutoff {self.cutoff_hz}")


@dataclass(frozen=True)
class TrackRecord:
    """One manifest line: an audio file with label, provenance, and split."""

    track_id: str
    audio_path: Path
    label: str  # "lossless" | "lossy"
    encoding: EncodingSpec | None
    dataset_id: str
    split: str

    def __post_init__(self) -> None:
        if self.label not in ("lossless", "lossy"):
            raise ValueError(f"bad label {self.label!r}")
        if (self.encoding is not None) != (self.label == "lossy"):
            raise ValueError("encoding must be present iff label is lossy")
        if self.dataset_id not in DATASET_IDS:
            raise ValueError(f"bad dataset_id {self.dataset_id!r}")
        if self.split not in SPLITS:
            raise ValueError(f"bad split {self.split!r}")

    def to_json(self) -> str:
        enc = self.encoding
        return json.dumps(
            {
                "track_id": self.track_id,
                "audio_path": str(self.audio_path),
                "label": self.label,
                "codec": enc.codec if enc else None,
                "bitrate_kbps": enc.bitrate_kbps if enc else None,
                "cutoff_hz": enc.cutoff_hz if enc else None,
                "dataset_id": self.dataset_id,
                "split": self.split,
            },
            sort_keys=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "TrackRecord":
        d = json.loads(line)
        enc = None
        if d["label"] == "lossy":
            enc = EncodingSpec(
                codec=d["codec"],
                bitrate_kbps=d["bitrate_kbps"],
                cutoff_hz=d["cutoff_hz"],
            )
        return cls(
            track_id=d["track_id"],
            audio_path=Path(d["audio_path"]),
            label=d["label"],
            encoding=enc,
            dataset_id=d["dataset_id"],
            split=d["split"],
        )


@dataclass
class Manifest:
    """All records of one dataset plus the seeds that produced them."""

    dataset_id: str
    records: list[TrackRecord]
    corpus_seed: int
    encoding_seed: int
    split_seed: int
    transcoder_version: str
    encoder_variants: dict[str, str] = field(default_factory=dict)
    command_log: list[str] = field(default_factory=list)

    def records_for_split(self, split: str) -> list[TrackRecord]:
        return [r for r in self.records if r.split == split]

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [r.to_json() for r in self.records]
        path.write_text("\n".join(lines) + ("\n" if lines else ""))
        header = {
            "dataset_id": self.dataset_id,
            "corpus_seed": self.corpus_seed,
            "encoding_seed": self.encoding_seed,
            "split_seed": self.split_seed,
            "transcoder_version": self.transcoder_version,
            "encoder_variants": self.encoder_variants,
            "n_records": len(self.records),
        }
        header_path = path.with_suffix(".header.json")
        header_path.write_text(json.dumps(header, indent=2) + "\n")
        if self.command_log:
            log_path = path.with_suffix(".commands.log")
            log_path.write_text("\n".join(self.command_log) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        records = [
            TrackRecord.from_json(line)
            for line in path.read_text().splitlines()
            if line.strip()
        ]
        header_path = path.with_suffix(".header.json")
        header = {}
        if header_path.exists():
            header = json.loads(header_path.read_text())
        return cls(
            dataset_id=header.get("dataset_id", records[0].dataset_id if records else "ds1"),
            records=records,
            corpus_seed=header.get("corpus_seed", 0),
            encoding_seed=header.get("encoding_seed", 0),
            split_seed=header.get("split_seed", 0),
            transcoder_version=header.get("transcoder_version", "unknown"),
            encoder_variants=header.get("encoder_variants", {}),
        )
