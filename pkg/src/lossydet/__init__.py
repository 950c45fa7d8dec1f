"""Blind detection of lossy audio compression hidden in lossless containers.

The package covers the full experiment lifecycle: fabricating paired
lossless/lossy datasets with an external transcoder, training a CNN+BiLSTM
detector with optional random high-frequency spectrogram masking, windowed
track-level inference, and evaluation reports (grouped accuracy tables,
F1-threshold curves, saliency maps, error galleries).
"""

__version__ = "0.1.0"

SAMPLE_RATE = 44100
CLIP_SECONDS = 2.0
CLIP_SAMPLES = 88200
N_FFT = 1024
HOP_LENGTH = 512
N_BINS = N_FFT // 2 + 1
N_FRAMES = CLIP_SAMPLES // HOP_LENGTH + 1
NYQUIST_HZ = SAMPLE_RATE / 2
BIN_HZ = SAMPLE_RATE / N_FFT
DB_FLOOR = -80.0
