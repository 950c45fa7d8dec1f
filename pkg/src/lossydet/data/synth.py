"""Synthetic lossless corpus generator.

Each track mixes three ingredients chosen to make codec artifacts both
present and non-trivial to detect:

- a harmonic chord progression whose partials extend all the way to the
  Nyquist frequency (so a codec cutoff always removes real content), with a
  per-track spectral tilt so the amount of near-Nyquist energy varies widely
  across tracks;
- periodic broadband transients (noise bursts with a sharp attack), which
  perceptual codecs answer with post-transient spectral holes;
- low-level wideband noise at a randomized level, so a quiet upper register
  does not by itself imply lossy coding.

Two further touches keep the classification honest. A minority of tracks
get a steep "production bandwidth" shelf at a random knee in the
14-16.3 kHz range, mimicking dull masters and older recordings, so a
spectrum that drops to the display floor mid-treble also occurs for
lossless material and a detector cannot equate "band-limited" with "lossy";
encoder default rolloffs all sit above that range, so the position of the
edge, not its existence, carries the class information. And every track
carries a deep full-band noise bed, below the spectrogram floor but far
above the 16-bit quantization floor, so genuine energy always remains above
any codec cutoff: an encoder's brick wall leaves near-digital silence where
a lossless file still measures real noise.

Tracks are stereo (the bitrate grid includes 256/320 kbps, which some
encoders reject for mono input) and fully deterministic per (seed, index).
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .manifest import SourceTrack

SAMPLE_RATE = 44100

# equal-tempered scale roots used for chord progressions (Hz)
_ROOTS = np.array([220.0, 246.9, 277.2, 293.7, 329.6, 370.0, 415.3])


def _harmonic_segment(
    rng: np.random.Generator, n: int, tilt: float
) -> np.ndarray:
    """One chord: 3 notes, partials up to Nyquist with 1/h^tilt amplitudes."""
    root = float(rng.choice(_ROOTS)) * float(rng.choice([1.0, 2.0]))
    intervals = rng.choice([3, 4, 5, 7, 9], size=2, replace=False)
    f0s = [root] + [root * 2 ** (i / 12.0) for i in intervals]
    t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    out = np.zeros(n)
    for f0 in f0s:
        n_harm = int((SAMPLE_RATE / 2 - 1.0) // f0)
        h = np.arange(1, n_harm + 1, dtype=np.float64)
        freqs = f0 * h * (1.0 + rng.normal(0.0, 2e-4, size=n_harm))
        amps = h ** (-tilt)
        phases = rng.uniform(0.0, 2 * np.pi, size=n_harm)
        out += (amps[:, None] * np.sin(2 * np.pi * freqs[:, None] * t + phases[:, None])).sum(axis=0)
    # short fade at the segment edges to avoid clicks between chords
    fade = min(1024, n // 4)
    env = np.ones(n)
    ramp = np.linspace(0.0, 1.0, fade)
    env[:fade] = ramp
    env[-fade:] = ramp[::-1]
    return out * env


def _transients(rng: np.random.Generator, n: int) -> np.ndarray:
    """Periodic broadband noise bursts with sharp attacks and fast decay."""
    out = np.zeros(n)
    pos = int(rng.integers(0, 8000))
    while pos < n - 2048:
        length = int(rng.integers(300, 1500))
        burst = rng.normal(0.0, 1.0, size=length)
        decay = np.exp(-np.arange(length) / (length / 5.0))
        amp = rng.uniform(0.5, 1.5)
        out[pos : pos + length] += amp * burst * decay
        pos += int(rng.integers(10000, 30000))
    return out


def _bandwidth_shelf(
    samples: np.ndarray, knee_hz: float, width: float
) -> np.ndarray:
    """Steeply attenuate one channel above knee_hz (raised-cosine transition).

    The transition width is randomized per track over the same range encoder
    lowpass filters span, so neither edge sharpness nor shape separates dull
    masters from transcodes; only the edge position can.
    """
    spectrum = np.fft.rfft(samples)
    freqs = np.fft.rfftfreq(len(samples), d=1.0 / SAMPLE_RATE)
    gain = np.ones_like(freqs)
    ramp = (freqs >= knee_hz) & (freqs < knee_hz + width)
    gain[ramp] = 0.5 * (1.0 + np.cos(np.pi * (freqs[ramp] - knee_hz) / width))
    gain[freqs >= knee_hz + width] = 0.0
    return np.fft.irfft(spectrum * gain, n=len(samples))


def _render_track(
    rng: np.random.Generator, n_samples: int
) -> np.ndarray:
    """Render one stereo track as float64 [n_samples, 2], peak-normalized."""
    tilt = rng.uniform(0.6, 1.4)
    harm = np.zeros(n_samples)
    pos = 0
    while pos < n_samples:
        seg_len = min(int(rng.integers(30000, 50000)), n_samples - pos)
        harm[pos : pos + seg_len] = _harmonic_segment(rng, seg_len, tilt)
        pos += seg_len
    harm /= max(np.abs(harm).max(), 1e-9)

    trans = _transients(rng, n_samples)
    trans_gain = rng.uniform(0.25, 0.6)

    noise_db = rng.uniform(-60.0, -48.0)
    noise_gain = 10.0 ** (noise_db / 20.0)

    pan = rng.uniform(0.4, 0.6)
    left = (
        harm * (1.0 - pan)
        + trans * trans_gain * 0.5
        + rng.normal(0.0, 1.0, n_samples) * noise_gain
    )
    right = (
        harm * pan
        + trans * trans_gain * 0.5
        + rng.normal(0.0, 1.0, n_samples) * noise_gain
    )
    stereo = np.stack([left, right], axis=1)
    stereo *= 0.85 / max(np.abs(stereo).max(), 1e-9)

    # audible air bed the encoder has to spend bits on at any bitrate
    air_gain = 10.0 ** (rng.uniform(-52.0, -44.0) / 20.0)
    stereo += rng.normal(0.0, 1.0, size=stereo.shape) * air_gain

    # Half the masters are band-limited, so "a spectral edge exists" carries
    # no label information and only the edge's position does. Most knees sit
    # above every encoder default rolloff (harmless to the lossy copy's wall);
    # a small minority sit below them, where only dull masters, never encoder
    # defaults, produce an edge.
    draw = rng.random()
    if draw < 0.05:
        knee_hz = float(rng.uniform(12000.0, 15000.0))
    elif draw < 0.5:
        knee_hz = float(rng.uniform(21000.0, 22000.0))
    else:
        knee_hz = None
    if knee_hz is not None:
        width = float(rng.uniform(50.0, 600.0))
        for ch in range(2):
            stereo[:, ch] = _bandwidth_shelf(stereo[:, ch], knee_hz, width)

    # deep full-band noise, below the spectrogram floor but far above both the
    # 16-bit quantization floor and a codec's nulled bands, so every track
    # keeps measurable energy above any cutoff frequency
    deep_gain = 10.0 ** (-75.0 / 20.0)
    stereo += rng.normal(0.0, 1.0, size=stereo.shape) * deep_gain

    stereo *= 0.85 / max(np.abs(stereo).max(), 1e-9)
    return stereo


def write_wav(path: Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    """Write float samples in [-1, 1] (shape [n] or [n, ch]) as 16-bit PCM."""
    if samples.ndim == 1:
        samples = samples[:, None]
    pcm = np.clip(np.round(samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(samples.shape[1])
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm.tobytes())


def generate_synthetic_corpus(
    n_tracks: int,
    duration_s: float,
    seed: int,
    out_dir: str | Path,
) -> list[SourceTrack]:
    """Write n_tracks deterministic stereo WAVs and return their SourceTracks."""
    if n_tracks < 1:
        raise ValueError("n_tracks must be >= 1")
    if duration_s < 4.0:
        raise ValueError("duration_s must be >= 4 (need room for 2-s crops)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_samples = int(round(duration_s * SAMPLE_RATE))
    tracks: list[SourceTrack] = []
    for idx in range(n_tracks):
        rng = np.random.default_rng([seed, idx])
        track_id = f"synth_{seed}_{idx:05d}"
        path = out_dir / f"{track_id}.wav"
        write_wav(path, _render_track(rng, n_samples))
        tracks.append(
            SourceTrack(
                track_id=track_id,
                path=path,
                duration_s=duration_s,
                sample_rate_hz=SAMPLE_RATE,
                bit_depth=16,
            )
        )
    return tracks
