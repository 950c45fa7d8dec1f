"""Track-level prediction: overlapping 2-s windows, mean aggregation, threshold.

No mask is applied at inference time; the random mask is purely a training
augmentation. Ties at the threshold resolve to "lossy" (a false alarm is
preferable to a missed lossy file in a quality-assurance pipeline).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import CLIP_SAMPLES
from .data.manifest import EncodingSpec, Manifest
from .frontend import AudioClip, load_audio, spectrogram
from .model import LossyDetector

logger = logging.getLogger(__name__)

WINDOW_HOP = CLIP_SAMPLES // 2  # 50% overlap


@dataclass
class PredictionRecord:
    track_id: str
    p_lossy: float
    window_probs: list[float]
    predicted: str  # "lossless" | "lossy"
    label_true: str | None = None
    encoding: EncodingSpec | None = None
    error: str | None = None

    def to_json(self) -> str:
        enc = self.encoding
        return json.dumps(
            {
                "track_id": self.track_id,
                "p_lossy": self.p_lossy,
                "window_probs": self.window_probs,
                "predicted": self.predicted,
                "label_true": self.label_true,
                "codec": enc.codec if enc else None,
                "bitrate_kbps": enc.bitrate_kbps if enc else None,
                "cutoff_hz": enc.cutoff_hz if enc else None,
                "error": self.error,
            }
        )

    @classmethod
    def from_json(cls, line: str) -> "PredictionRecord":
        d = json.loads(line)
        enc = None
        if d.get("codec"):
            enc = EncodingSpec(
                codec=d["codec"],
                bitrate_kbps=d["bitrate_kbps"],
                cutoff_hz=d.get("cutoff_hz"),
            )
        return cls(
            track_id=d["track_id"],
            p_lossy=d["p_lossy"],
            window_probs=d["window_probs"],
            predicted=d["predicted"],
            label_true=d.get("label_true"),
            encoding=enc,
            error=d.get("error"),
        )


def decide(p_lossy: float, threshold: float = 0.5) -> str:
    return "lossy" if p_lossy >= threshold else "lossless"


def windows(clip: AudioClip) -> list[AudioClip]:
    """2-s windows with 50% overlap; a trailing partial window is zero-padded."""
    n = clip.n_samples
    if n == 0:
        raise ValueError("empty clip")
    if n <= CLIP_SAMPLES:
        padded = np.zeros(CLIP_SAMPLES, dtype=clip.samples.dtype)
        padded[:n] = clip.samples
        return [AudioClip(samples=padded, sample_rate_hz=clip.sample_rate_hz)]
    out: list[AudioClip] = []
    start = 0
    while start < n:
        chunk = clip.samples[start : start + CLIP_SAMPLES]
        if len(chunk) == CLIP_SAMPLES:
            out.append(AudioClip(samples=chunk, sample_rate_hz=clip.sample_rate_hz))
        elif len(chunk) > 0 and start < n:
            padded = np.zeros(CLIP_SAMPLES, dtype=clip.samples.dtype)
            padded[: len(chunk)] = chunk
            out.append(AudioClip(samples=padded, sample_rate_hz=clip.sample_rate_hz))
        if start + CLIP_SAMPLES >= n:
            break
        start += WINDOW_HOP
    return out


def window_probabilities(
    model: LossyDetector, clips: list[AudioClip], batch_size: int = 32
) -> list[float]:
    """p_lossy of each window, batched through the model in inference mode."""
    model.eval()
    specs = np.stack([spectrogram(c).values for c in clips])
    tensor = torch.from_numpy(specs).unsqueeze(1).float()
    probs: list[float] = []
    with torch.no_grad():
        for i in range(0, len(clips), batch_size):
            out = model(tensor[i : i + batch_size])
            probs.extend(out[:, 1].tolist())
    return probs


def predict_clip(
    model: LossyDetector,
    clip: AudioClip,
    threshold: float = 0.5,
    track_id: str = "",
) -> PredictionRecord:
    probs = window_probabilities(model, windows(clip))
    p_lossy = float(np.mean(probs))
    return PredictionRecord(
        track_id=track_id,
        p_lossy=p_lossy,
        window_probs=probs,
        predicted=decide(p_lossy, threshold),
    )


def predict_track(
    path: str | Path,
    model: LossyDetector,
    threshold: float = 0.5,
) -> PredictionRecord:
    """Windowed prediction for one audio file."""
    path = Path(path)
    clip = load_audio(path)
    return predict_clip(model, clip, threshold=threshold, track_id=path.stem)


def predict_manifest(
    manifest: Manifest,
    model: LossyDetector,
    split: str = "test",
    threshold: float = 0.5,
) -> list[PredictionRecord]:
    """One PredictionRecord per record of the chosen split, ordered by track id.

    Unreadable files yield error records; the run continues.
    """
    records = manifest.records_for_split(split)
    out: list[PredictionRecord] = []
    for record in sorted(records, key=lambda r: (r.track_id, r.label)):
        try:
            pred = predict_track(record.audio_path, model, threshold=threshold)
        except OSError as exc:
            logger.error("cannot read %s: %s", record.audio_path, exc)
            out.append(
                PredictionRecord(
                    track_id=record.track_id,
                    p_lossy=float("nan"),
                    window_probs=[],
                    predicted="lossless",
                    label_true=record.label,
                    encoding=record.encoding,
                    error=str(exc),
                )
            )
            continue
        pred.track_id = record.track_id
        pred.label_true = record.label
        pred.encoding = record.encoding
        out.append(pred)
    return out


def save_predictions(predictions: list[PredictionRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(p.to_json() + "\n" for p in predictions))
    return path


def load_predictions(path: str | Path) -> list[PredictionRecord]:
    return [
        PredictionRecord.from_json(line)
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
