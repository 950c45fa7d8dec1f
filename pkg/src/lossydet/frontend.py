"""Audio loading, 2-second crops, log-magnitude spectrograms, frequency masking.

The spectrogram geometry is fixed across the whole project: 1024-point FFT,
hop 512, Hann window, centered reflect padding, magnitude converted to dB
relative to the per-example maximum and floored at -80 dB. A 2-second clip
(88200 samples at 44.1 kHz) therefore always maps to a 513 x 173 matrix.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import (
    BIN_HZ,
    DB_FLOOR,
    HOP_LENGTH,
    N_BINS,
    N_FFT,
    NYQUIST_HZ,
    SAMPLE_RATE,
)


class AudioFormatError(ValueError):
    """Raised for inputs that decode but violate the 44.1 kHz / 16-bit contract."""


@dataclass
class AudioClip:
    """Mono audio in [-1, 1] at 44.1 kHz."""

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Spectrogram:
    """Log-magnitude time-frequency matrix, [n_bins, n_frames] in dB <= 0."""

    values: np.ndarray
    bin_hz: float = BIN_HZ
    frame_hop_s: float = HOP_LENGTH / SAMPLE_RATE

    @property
    def n_bins(self) -> int:
        return self.values.shape[0]

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MaskSpec:
    """The cutoff drawn for one masking application and the fill value used."""

    cutoff_hz: float
    fill_value: float


def load_audio(path: str | Path) -> AudioClip:
    """Load a 44.1 kHz WAV file, average channels to mono, scale to [-1, 1]."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            rate = wav.getframerate()
            width = wav.getsampwidth()
            n_channels = wav.getnchannels()
            n_frames = wav.getnframes()
            raw = wav.readframes(n_frames)
    except (wave.Error, EOFError) as exc:
        raise OSError(f"cannot decode {path}: {exc}") from exc
    if rate != SAMPLE_RATE:
        raise AudioFormatError(f"{path}: sample rate {rate}, expected {SAMPLE_RATE}")
    if width == 2:
        samples = np.frombuffer(raw, dtype="<i2").astype(np.float32) / 32768.0
    elif width == 4:
        samples = np.frombuffer(raw, dtype="<i4").astype(np.float32) / 2147483648.0
    else:
        raise AudioFormatError(f"{path}: unsupported sample width {width} bytes")
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)
    return AudioClip(samples=samples)


def random_crop(
    clip: AudioClip,
    rng: np.random.Generator,
    duration_s: float = 2.0,
) -> AudioClip:
    """Take a contiguous random crop; clips shorter than the target are zero-padded."""
    target = int(round(duration_s * clip.sample_rate_hz))
    if clip.n_samples < target:
        padded = np.zeros(target, dtype=clip.samples.dtype)
        padded[: clip.n_samples] = clip.samples
        return AudioClip(samples=padded, sample_rate_hz=clip.sample_rate_hz)
    offset = int(rng.integers(0, clip.n_samples - target + 1))
    return AudioClip(
        samples=clip.samples[offset : offset + target],
        sample_rate_hz=clip.sample_rate_hz,
    )


_HANN = np.hanning(N_FFT + 1)[:-1]  # periodic Hann, matches common STFT layers


def spectrogram(clip: AudioClip) -> Spectrogram:
    """Centered magnitude STFT in dB relative to the example maximum.

    Frames are centered via reflect padding of n_fft//2 on both sides, so an
    88200-sample clip yields 88200//512 + 1 = 173 frames of 513 bins.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    pad = N_FFT // 2
    x = np.pad(x, pad, mode="reflect")
    n_frames = 1 + (len(x) - N_FFT) // HOP_LENGTH
    strides = (x.strides[0] * HOP_LENGTH, x.strides[0])
    frames = np.lib.stride_tricks.as_strided(
        x, shape=(n_frames, N_FFT), strides=strides
    )
    mag = np.abs(np.fft.rfft(frames * _HANN, axis=1)).T  # [n_bins, n_frames]
    return Spectrogram(values=_to_db(mag))


def _to_db(mag: np.ndarray) -> np.ndarray:
    """20*log10(mag / max), floored at DB_FLOOR; silence maps to the floor."""
    peak = mag.max()
    if peak <= 0.0:
        return np.full(mag.shape, DB_FLOOR, dtype=np.float32)
    floor_amp = peak * 10.0 ** (DB_FLOOR / 20.0)
    db = 20.0 * np.log10(np.maximum(mag, floor_amp) / peak)
    return db.astype(np.float32)


def bin_of_frequency(f_hz: float) -> int:
    """Smallest bin index k with center frequency k*(44100/1024) strictly above f_hz.

    Masking nulls bins k and above; f_hz = Nyquist yields 513, i.e. no bin.
    """
    if not 0.0 <= f_hz <= NYQUIST_HZ:
        raise ValueError(f"frequency {f_hz} outside [0, {NYQUIST_HZ}]")
    k = int(np.floor(f_hz / BIN_HZ)) + 1
    # guard against float rounding at exact bin centers
    while k > 0 and (k - 1) * BIN_HZ > f_hz:
        k -= 1
    while k * BIN_HZ <= f_hz:
        k += 1
    return min(k, N_BINS)


def apply_fixed_mask(spec: Spectrogram, cutoff_hz: float) -> Spectrogram:
    """Set every bin row at or above bin_of_frequency(cutoff_hz) to min(spec)."""
    start = bin_of_frequency(cutoff_hz)
    values = spec.values.copy()
    if start < values.shape[0]:
        values[start:, :] = values.min()
    return Spectrogram(values=values, bin_hz=spec.bin_hz, frame_hop_s=spec.frame_hop_s)


def apply_random_mask(
    spec: Spectrogram,
    rng: np.random.Generator,
    f_low: float = 14000.0,
) -> tuple[Spectrogram, MaskSpec]:
    """Mask all bins above a cutoff drawn uniformly from [f_low, Nyquist].

    The fill value is the minimum of the input spectrogram, so the masked
    region is indistinguishable from the quietest content of the example.
    """
    if f_low > NYQUIST_HZ:
        raise ValueError(f"f_low {f_low} exceeds Nyquist {NYQUIST_HZ}")
    cutoff = float(rng.uniform(f_low, NYQUIST_HZ))
    masked = apply_fixed_mask(spec, cutoff)
    return masked, MaskSpec(cutoff_hz=cutoff, fill_value=float(spec.values.min()))


def save_spectrogram_png(spec: Spectrogram, out_path: str | Path, title: str = "") -> Path:
    """Debug/report export: linear-frequency spectrogram image."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    extent = (
        0.0,
        spec.n_frames * spec.frame_hop_s,
        0.0,
        spec.n_bins * spec.bin_hz / 1000.0,
    )
    im = ax.imshow(
        spec.values, origin="lower", aspect="auto", cmap="viridis", extent=extent
    )
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (kHz)")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="dB")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
