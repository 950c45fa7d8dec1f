"""Shared fixtures: tiny synthetic audio, transcoder availability, tiny models."""

from __future__ import annotations

import shutil

import numpy as np
import pytest

from lossydet import CLIP_SAMPLES, SAMPLE_RATE
from lossydet.frontend import AudioClip
from lossydet.model import ModelConfig

HAVE_TRANSCODER = shutil.which("ffmpeg") is not None

requires_transcoder = pytest.mark.skipif(
    not HAVE_TRANSCODER, reason="no ffmpeg binary on PATH"
)


def tone_clip(freq_hz: float = 1000.0, n_samples: int = CLIP_SAMPLES) -> AudioClip:
    # cosine phase: even symmetry keeps the reflect-padded edges smooth
    t = np.arange(n_samples) / SAMPLE_RATE
    return AudioClip(samples=np.cos(2 * np.pi * freq_hz * t).astype(np.float32))


def noise_clip(seed: int = 0, n_samples: int = CLIP_SAMPLES) -> AudioClip:
    rng = np.random.default_rng(seed)
    return AudioClip(
        samples=(0.3 * rng.standard_normal(n_samples)).astype(np.float32)
    )


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    return ModelConfig(conv_channels=(2, 2, 2, 2), lstm_hidden=4, head_width=8)
