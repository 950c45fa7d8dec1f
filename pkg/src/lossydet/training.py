"""Training loop: per-epoch random crops, optional random mask, early stopping.

Model selection uses track-level validation accuracy computed with the same
windowed mean aggregation as testing, so the checkpoint kept is the one that
maximizes the metric actually reported. The trainer only ever touches
records with split in {train, val}; passing it a test record is a contract
violation.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from .data.manifest import Manifest, TrackRecord
from .frontend import apply_random_mask, load_audio, random_crop, spectrogram
from .inference import predict_track
from .model import LossyDetector, ModelConfig, init_model, loss, save_checkpoint

logger = logging.getLogger(__name__)

LABEL_INDEX = {"lossless": 0, "lossy": 1}


class SplitLeakageError(RuntimeError):
    """The trainer was handed a record from the test split."""


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 100
    learning_rate: float = 1e-3
    early_stop_patience: int = 10
    seed: int = 0
    mask_enabled: bool = False
    mask_probability: float = 1.0
    mask_low_hz: float = 14000.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.mask_probability <= 1.0:
            raise ValueError("mask_probability must be in [0, 1]")


def make_example(
    record: TrackRecord,
    rng: np.random.Generator,
    config: TrainConfig,
) -> tuple[np.ndarray, int]:
    """Load -> mono -> random 2-s crop -> spectrogram -> optional random mask."""
    clip = random_crop(load_audio(record.audio_path), rng)
    spec = spectrogram(clip)
    if config.mask_enabled and rng.random() < config.mask_probability:
        spec, _ = apply_random_mask(spec, rng, f_low=config.mask_low_hz)
    return spec.values, LABEL_INDEX[record.label]


def _guard_splits(records: list[TrackRecord]) -> None:
    for r in records:
        if r.split not in ("train", "val"):
            raise SplitLeakageError(
                f"record {r.track_id} has split {r.split!r}; trainer may only "
                f"see train/val"
            )


def _epoch_batches(
    records: list[TrackRecord],
    rng: np.random.Generator,
    config: TrainConfig,
):
    """One pass over the tracks: one fresh crop each, shuffled, batched."""
    order = rng.permutation(len(records))
    for i in range(0, len(order), config.batch_size):
        batch_records = [records[j] for j in order[i : i + config.batch_size]]
        specs, labels = [], []
        for record in batch_records:
            try:
                spec, label = make_example(record, rng, config)
            except OSError as exc:
                logger.warning("skipping unreadable %s: %s", record.audio_path, exc)
                continue
            specs.append(spec)
            labels.append(label)
        if not specs:
            continue
        x = torch.from_numpy(np.stack(specs)).unsqueeze(1).float()
        y = torch.tensor(labels, dtype=torch.long)
        yield x, y


def _validation_accuracy(model: LossyDetector, records: list[TrackRecord]) -> float:
    """Track-level accuracy over the val split with windowed mean aggregation."""
    model.eval()
    correct = 0
    for record in records:
        pred = predict_track(record.audio_path, model)
        correct += int(pred.predicted == record.label)
    return correct / max(len(records), 1)


def train(
    manifest: Manifest,
    model_config: ModelConfig,
    train_config: TrainConfig,
    run_dir: str | Path,
) -> Path:
    """Train on the manifest's train split, select on val, return checkpoint path."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    train_records = manifest.records_for_split("train")
    val_records = manifest.records_for_split("val")
    if not train_records or not val_records:
        raise ValueError("manifest must contain train and val records")
    _guard_splits(train_records + val_records)

    (run_dir / "config.json").write_text(
        json.dumps(
            {
                "model": model_config.to_dict(),
                "train": asdict(train_config),
                "manifest_dataset_id": manifest.dataset_id,
            },
            indent=2,
        )
        + "\n"
    )

    model = init_model(model_config, train_config.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=train_config.learning_rate)
    rng = np.random.default_rng(train_config.seed)

    checkpoint_path = run_dir / "best.ckpt"
    best_val = -1.0
    best_epoch = -1
    since_improvement = 0
    metrics_path = run_dir / "metrics.csv"
    with open(metrics_path, "w", newline="") as metrics_file:
        writer = csv.writer(metrics_file)
        writer.writerow(["epoch", "train_loss", "val_accuracy"])
        for epoch in range(train_config.max_epochs):
            model.train()
            losses = []
            for x, y in _epoch_batches(train_records, rng, train_config):
                optimizer.zero_grad()
                batch_loss = loss(model(x), y)
                if not torch.isfinite(batch_loss):
                    raise DivergenceError(
                        f"non-finite loss at epoch {epoch}: {batch_loss.item()}"
                    )
                batch_loss.backward()
                optimizer.step()
                losses.append(batch_loss.item())
            train_loss = float(np.mean(losses)) if losses else float("nan")

            val_accuracy = _validation_accuracy(model, val_records)
            writer.writerow([epoch, f"{train_loss:.6f}", f"{val_accuracy:.6f}"])
            metrics_file.flush()
            logger.info(
                "epoch %d: train_loss=%.4f val_accuracy=%.4f",
                epoch,
                train_loss,
                val_accuracy,
            )

            if val_accuracy > best_val:
                best_val = val_accuracy
                best_epoch = epoch
                since_improvement = 0
                save_checkpoint(
                    model,
                    checkpoint_path,
                    metadata={
                        "epoch": epoch,
                        "val_accuracy": val_accuracy,
                        "seed": train_config.seed,
                        "mask_enabled": train_config.mask_enabled,
                        "mask_probability": train_config.mask_probability,
                        "dataset_id": manifest.dataset_id,
                    },
                )
            else:
                since_improvement += 1
                if since_improvement >= train_config.early_stop_patience:
                    logger.info("early stop at epoch %d (best %d)", epoch, best_epoch)
                    break

    return checkpoint_path
