"""Band-energy oracle: did the encoder actually apply the requested cutoff?

The check compares the lossy file against its lossless counterpart in the
band above (cutoff + 1 kHz). The median over STFT frames is used rather
than the mean so transient bleed-through above the cutoff (which some AAC
encoders deliberately preserve) does not fail an otherwise correct rolloff.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..frontend import load_audio

_N_FFT = 2048
_HOP = 1024


def _band_frame_energy(samples: np.ndarray, low_hz: float) -> np.ndarray:
    """Per-frame energy above low_hz (linear power, one value per frame)."""
    window = np.hanning(_N_FFT)
    n_frames = max(1 + (len(samples) - _N_FFT) // _HOP, 1)
    freqs = np.fft.rfftfreq(_N_FFT, 1.0 / 44100)
    band = freqs >= low_hz
    energies = np.empty(n_frames)
    for i in range(n_frames):
        frame = samples[i * _HOP : i * _HOP + _N_FFT]
        if len(frame) < _N_FFT:
            frame = np.pad(frame, (0, _N_FFT - len(frame)))
        spectrum = np.abs(np.fft.rfft(frame * window)) ** 2
        energies[i] = spectrum[band].sum()
    return energies


def band_energy_ratio(
    lossless_path: str | Path, lossy_path: str | Path, cutoff_hz: float
) -> float:
    """Median per-frame energy above (cutoff + 1 kHz), lossy relative to lossless."""
    low = cutoff_hz + 1000.0
    reference = _band_frame_energy(load_audio(lossless_path).samples, low)
    candidate = _band_frame_energy(load_audio(lossy_path).samples, low)
    n = min(len(reference), len(candidate))
    ref_med = np.median(reference[:n])
    cand_med = np.median(candidate[:n])
    if ref_med <= 0.0:
        return 0.0
    return float(cand_med / ref_med)
