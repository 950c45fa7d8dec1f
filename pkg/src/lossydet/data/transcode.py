"""Driving an external ffmpeg-compatible transcoder.

Each lossy file is produced in two steps: encode the source WAV into the
codec's own container, then decode it back to 16-bit 44.1 kHz WAV. Every
command line is recorded so a manifest sidecar can carry full provenance.

Builds without the nonfree libfdk_aac encoder fall back to the native `aac`
encoder; the substitution is reported via `encoder_variants()` and recorded
in the manifest header.
"""

from __future__ import annotations

import os
import shutil
import subprocess
from pathlib import Path

from .manifest import EncodingSpec, SourceTrack

ENV_TRANSCODER = "LOSSYDET_FFMPEG"

_PREFERRED_ENCODERS = {
    "mp3lame": ["libmp3lame"],
    "fdk_aac": ["libfdk_aac", "aac"],
    "vorbis": ["libvorbis"],
}
_EXTENSIONS = {"mp3lame": "mp3", "fdk_aac": "m4a", "vorbis": "ogg"}


class TranscodeError(RuntimeError):
    """Transcoder process exited nonzero; carries its stderr."""


class CodecUnavailableError(RuntimeError):
    """No usable encoder for the requested codec in this transcoder build."""


def find_transcoder(binary: str | Path | None = None) -> Path:
    """Resolve the transcoder binary: explicit arg > env var > PATH."""
    candidate = binary or os.environ.get(ENV_TRANSCODER) or "ffmpeg"
    resolved = shutil.which(str(candidate))
    if resolved is None:
        raise FileNotFoundError(
            f"transcoder binary {candidate!r} not found; install ffmpeg or set "
            f"${ENV_TRANSCODER}"
        )
    return Path(resolved)


class Transcoder:
    """A resolved transcoder binary plus its encoder capability map."""

    def __init__(self, binary: str | Path | None = None):
        self.binary = find_transcoder(binary)
        self.version = self._query_version()
        self._available = self._query_encoders()
        self.encoder_variants: dict[str, str] = {}
        for codec, candidates in _PREFERRED_ENCODERS.items():
            for name in candidates:
                if name in self._available:
                    self.encoder_variants[codec] = name
                    break
        self.command_log: list[str] = []

    def _query_version(self) -> str:
        out = subprocess.run(
            [str(self.binary), "-version"], capture_output=True, text=True
        )
        first = out.stdout.splitlines()[0] if out.stdout else "unknown"
        return first.strip()

    def _query_encoders(self) -> set[str]:
        out = subprocess.run(
            [str(self.binary), "-encoders"], capture_output=True, text=True
        )
        names = set()
        for line in out.stdout.splitlines():
            parts = line.split()
            if len(parts) >= 2 and parts[0].startswith("A"):
                names.add(parts[1])
        return names

    def encoder_for(self, codec: str) -> str:
        try:
            return self.encoder_variants[codec]
        except KeyError:
            raise CodecUnavailableError(
                f"no encoder for codec {codec!r} in {self.binary}"
            ) from None

    def _run(self, args: list[str]) -> None:
        self.command_log.append(" ".join(args))
        proc = subprocess.run(args, capture_output=True, text=True)
        if proc.returncode != 0:
            raise TranscodeError(
                f"command failed ({proc.returncode}): {' '.join(args)}\n{proc.stderr}"
            )

    def transcode(
        self, source: SourceTrack, spec: EncodingSpec, out_path: str | Path
    ) -> Path:
        """Encode with (codec, bitrate, optional cutoff), decode back to WAV."""
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        encoder = self.encoder_for(spec.codec)
        tmp = out_path.with_suffix("." + _EXTENSIONS[spec.codec])
        encode_cmd = [
            str(self.binary),
            "-y",
            "-v",
            "error",
            "-i",
            str(source.path),
            "-c:a",
            encoder,
            "-b:a",
            f"{spec.bitrate_kbps}k",
        ]
        if spec.cutoff_hz is not None:
            encode_cmd += ["-cutoff", str(spec.cutoff_hz)]
        elif encoder in ("aac", "libvorbis") and spec.bitrate_kbps >= 192:
            # these encoders stop band-limiting at high bitrates; pin the
            # 20 kHz ceiling libfdk_aac applies by default so every default
            # encode carries a bandwidth reduction, as lower bitrates do
            encode_cmd += ["-cutoff", "20000"]
        encode_cmd.append(str(tmp))
        decode_cmd = [
            str(self.binary),
            "-y",
            "-v",
            "error",
            "-i",
            str(tmp),
            "-ar",
            "44100",
            "-sample_fmt",
            "s16",
            # decoder flush can append padding frames; trim to the source
            # duration so file length never encodes the codec
            "-t",
            f"{source.duration_s:.6f}",
            str(out_path),
        ]
        try:
            self._run(encode_cmd)
            self._run(decode_cmd)
        finally:
            tmp.unlink(missing_ok=True)
        return out_path
