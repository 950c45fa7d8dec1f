"""CNN + bidirectional LSTM + softmax classifier over 513x173 spectrograms.

Four conv blocks (3x3 same-padded conv -> ReLU -> batch norm -> max pool)
reduce the input to a [C, 32, 5] map; the 5 pooled time steps form the
sequence for a 2-layer BiLSTM of hidden size 128 per direction, whose final
forward/backward top-layer states are concatenated into the 256-wide dense
head with 2 softmax outputs (lossless, lossy).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn as nn

from . import N_BINS, N_FRAMES

CHECKPOINT_FORMAT_VERSION = 1

EPS = 1e-7


@dataclass
class ModelConfig:
    n_fft: int = 1024
    conv_channels: tuple[int, int, int, int] = (16, 32, 64, 128)
    kernel: tuple[int, int] = (3, 3)
    pool_sizes: tuple[tuple[int, int], ...] = ((2, 2), (2, 2), (2, 2), (2, 4))
    lstm_hidden: int = 128
    lstm_layers: int = 2
    bidirectional: bool = True
    head_width: int = 256
    n_classes: int = 2
    mask_enabled: bool = False
    mask_low_hz: float = 14000.0

    def __post_init__(self) -> None:
        self.conv_channels = tuple(self.conv_channels)
        self.kernel = tuple(self.kernel)
        self.pool_sizes = tuple(tuple(p) for p in self.pool_sizes)
        if self.head_width != 2 * self.lstm_hidden:
            raise ValueError("head_width must equal 2 * lstm_hidden")
        if self.pool_sizes != ((2, 2), (2, 2), (2, 2), (2, 4)):
            raise ValueError("pool_sizes are fixed at ((2,2),(2,2),(2,2),(2,4))")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class LossyDetector(nn.Module):
    """The full detector; forward maps [B, 1, 513, 173] to [B, 2] probabilities."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        blocks = []
        in_ch = 1
        for out_ch, pool in zip(config.conv_channels, config.pool_sizes):
            blocks.append(
                nn.Sequential(
                    nn.Conv2d(in_ch, out_ch, config.kernel, padding="same"),
                    nn.ReLU(),
                    nn.BatchNorm2d(out_ch),
                    nn.MaxPool2d(pool),
                )
            )
            in_ch = out_ch
        self.blocks = nn.ModuleList(blocks)

        freq, time = N_BINS, N_FRAMES
        for pf, pt in config.pool_sizes:
            freq, time = freq // pf, time // pt
        self._pooled_freq = freq
        self._pooled_time = time
        lstm_input = config.conv_channels[-1] * freq

        self.lstm = nn.LSTM(
            input_size=lstm_input,
            hidden_size=config.lstm_hidden,
            num_layers=config.lstm_layers,
            bidirectional=config.bidirectional,
            batch_first=True,
        )
        self.head = nn.Linear(config.head_width, config.n_classes)

    def forward(self, batch: torch.Tensor) -> torch.Tensor:
        if batch.ndim != 4 or batch.shape[1:] != (1, N_BINS, N_FRAMES):
            raise ValueError(
                f"expected input [B, 1, {N_BINS}, {N_FRAMES}], got {tuple(batch.shape)}"
            )
        x = batch
        for block in self.blocks:
            x = block(x)
        # [B, C, F, T] -> sequence over the pooled time axis, features = C*F
        x = x.permute(0, 3, 1, 2).flatten(start_dim=2)
        _, (hidden, _) = self.lstm(x)
        # final forward and backward states of the top layer
        fwd = hidden[-2]
        bwd = hidden[-1]
        logits = self.head(torch.cat([fwd, bwd], dim=1))
        return torch.softmax(logits, dim=1)


def init_model(config: ModelConfig, seed: int) -> LossyDetector:
    """Deterministically initialized model (torch default fan-in init)."""
    torch.manual_seed(seed)
    return LossyDetector(config)


def loss(probabilities: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean cross entropy -log p[label] over the batch, probabilities clamped."""
    picked = probabilities.gather(1, labels.view(-1, 1)).clamp_min(EPS)
    return (-torch.log(picked)).mean()


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def save_checkpoint(
    model: LossyDetector, path: str | Path, metadata: dict | None = None
) -> Path:
    """Single-archive checkpoint: config JSON + weights + training metadata."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "config": json.dumps(model.config.to_dict()),
            "state_dict": model.state_dict(),
            "metadata": metadata or {},
        },
        path,
    )
    return path


def load_checkpoint(path: str | Path) -> tuple[LossyDetector, dict]:
    path = Path(path)
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    config = ModelConfig.from_dict(json.loads(payload["config"]))
    model = LossyDetector(config)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("metadata", {})
