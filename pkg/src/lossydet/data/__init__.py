"""Dataset fabrication: synthetic corpus, codec assignment, transcoding, manifests."""

from .manifest import EncodingSpec, Manifest, SourceTrack, TrackRecord
from .splits import split_assign
from .encoding import assign_encoding
from .synth import generate_synthetic_corpus
from .corpus import ingest_corpus
from .transcode import Transcoder, TranscodeError, CodecUnavailableError
from .build import BuildError, DatasetSeeds, build_dataset
from .verify import band_energy_ratio

__all__ = [
    "BuildError",
    "DatasetSeeds",
    "band_energy_ratio",
    "EncodingSpec",
    "Manifest",
    "SourceTrack",
    "TrackRecord",
    "split_assign",
    "assign_encoding",
    "generate_synthetic_corpus",
    "ingest_corpus",
    "Transcoder",
    "TranscodeError",
    "CodecUnavailableError",
    "build_dataset",
]
