"""Evaluation: grouped accuracy tables, F1-threshold curves, saliency, errors.

Accuracy cells are percentages of tracks in a provenance group that were
classified correctly; table means are unweighted averages over non-empty
cells. F1 curves treat lossless tracks as negatives and one codec's lossy
tracks as positives, discarding tracks from other codecs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data.manifest import BITRATES_KBPS, CODECS, CUTOFFS_HZ, Manifest
from .frontend import Spectrogram, save_spectrogram_png
from .inference import PredictionRecord
from .model import LossyDetector

THRESHOLD_GRID = [round(t * 0.01, 2) for t in range(101)]


def _valid(predictions: list[PredictionRecord]) -> list[PredictionRecord]:
    return [p for p in predictions if p.error is None and not math.isnan(p.p_lossy)]


def _accuracy(preds: list[PredictionRecord]) -> float | None:
    """Percentage of records whose prediction matches ground truth."""
    if not preds:
        return None
    correct = sum(int(p.predicted == p.label_true) for p in preds)
    return 100.0 * correct / len(preds)


def _mean(cells: list[float | None]) -> float | None:
    kept = [c for c in cells if c is not None]
    return sum(kept) / len(kept) if kept else None


@dataclass
class CodecBitrateTable:
    """Accuracy per (codec, bitrate) cell plus lossless column and mean."""

    cells: dict[str, dict[str, float | None]]  # codec -> bitrate -> accuracy
    lossless: float | None
    mean: float | None

    def to_dict(self) -> dict:
        return {"cells": self.cells, "lossless": self.lossless, "mean": self.mean}


@dataclass
class CutoffTable:
    """Accuracy grouped by cutoff x codec and cutoff x bitrate with marginals."""

    by_codec: dict[str, dict[str, float | None]]  # cutoff -> codec -> accuracy
    by_bitrate: dict[str, dict[str, float | None]]  # cutoff -> bitrate -> accuracy
    codec_means: dict[str, float | None]
    bitrate_means: dict[str, float | None]
    cutoff_means: dict[str, float | None]
    grand_mean: float | None
    lossless: float | None

    def to_dict(self) -> dict:
        return {
            "by_codec": self.by_codec,
            "by_bitrate": self.by_bitrate,
            "codec_means": self.codec_means,
            "bitrate_means": self.bitrate_means,
            "cutoff_means": self.cutoff_means,
            "grand_mean": self.grand_mean,
            "lossless": self.lossless,
        }


@dataclass
class F1Curve:
    positive_codec: str
    thresholds: list[float]
    f1: list[float]
    peak_f1: float
    area: float

    def to_dict(self) -> dict:
        return {
            "positive_codec": self.positive_codec,
            "thresholds": self.thresholds,
            "f1": self.f1,
            "peak_f1": self.peak_f1,
            "area": self.area,
        }


@dataclass
class EvalReport:
    dataset_id: str
    table_codec_bitrate: CodecBitrateTable
    table_cutoff: CutoffTable | None
    f1_curves: dict[str, F1Curve]
    summary: dict[str, float | None]

    def to_dict(self) -> dict:
        return {
            "dataset_id": self.dataset_id,
            "table_codec_bitrate": self.table_codec_bitrate.to_dict(),
            "table_cutoff": self.table_cutoff.to_dict() if self.table_cutoff else None,
            "f1_curves": {k: v.to_dict() for k, v in self.f1_curves.items()},
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        cutoff = None
        if d.get("table_cutoff"):
            cutoff = CutoffTable(**d["table_cutoff"])
        return cls(
            dataset_id=d["dataset_id"],
            table_codec_bitrate=CodecBitrateTable(**d["table_codec_bitrate"]),
            table_cutoff=cutoff,
            f1_curves={k: F1Curve(**v) for k, v in d.get("f1_curves", {}).items()},
            summary=d.get("summary", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def accuracy_table(predictions: list[PredictionRecord]) -> CodecBitrateTable:
    """Per (codec, bitrate) lossy accuracy, lossless accuracy, unweighted mean."""
    preds = _valid(predictions)
    cells: dict[str, dict[str, float | None]] = {}
    flat: list[float | None] = []
    for codec in CODECS:
        cells[codec] = {}
        for bitrate in BITRATES_KBPS:
            group = [
                p
                for p in preds
                if p.label_true == "lossy"
                and p.encoding is not None
                and p.encoding.codec == codec
                and p.encoding.bitrate_kbps == bitrate
            ]
            acc = _accuracy(group)
            cells[codec][str(bitrate)] = acc
            flat.append(acc)
    lossless = _accuracy([p for p in preds if p.label_true == "lossless"])
    return CodecBitrateTable(
        cells=cells, lossless=lossless, mean=_mean(flat + [lossless])
    )


def cutoff_table(predictions: list[PredictionRecord]) -> CutoffTable:
    """DS2 breakdown: accuracy per cutoff x codec and cutoff x bitrate."""
    preds = _valid(predictions)
    lossy = [p for p in preds if p.label_true == "lossy"]
    for p in lossy:
        if p.encoding is None or p.encoding.cutoff_hz is None:
            raise ValueError(f"lossy prediction {p.track_id} lacks cutoff provenance")

    by_codec: dict[str, dict[str, float | None]] = {}
    by_bitrate: dict[str, dict[str, float | None]] = {}
    for cutoff in CUTOFFS_HZ:
        key = str(cutoff)
        by_codec[key] = {}
        by_bitrate[key] = {}
        for codec in CODECS:
            group = [
                p
                for p in lossy
                if p.encoding.cutoff_hz == cutoff and p.encoding.codec == codec
            ]
            by_codec[key][codec] = _accuracy(group)
        for bitrate in BITRATES_KBPS:
            group = [
                p
                for p in lossy
                if p.encoding.cutoff_hz == cutoff
                and p.encoding.bitrate_kbps == bitrate
            ]
            by_bitrate[key][str(bitrate)] = _accuracy(group)

    codec_means = {
        codec: _mean([by_codec[str(c)][codec] for c in CUTOFFS_HZ]) for codec in CODECS
    }
    bitrate_means = {
        str(b): _mean([by_bitrate[str(c)][str(b)] for c in CUTOFFS_HZ])
        for b in BITRATES_KBPS
    }
    cutoff_means = {
        str(c): _mean(list(by_codec[str(c)].values())) for c in CUTOFFS_HZ
    }
    grand_mean = _mean(
        [by_codec[str(c)][codec] for c in CUTOFFS_HZ for codec in CODECS]
    )
    lossless = _accuracy([p for p in preds if p.label_true == "lossless"])
    return CutoffTable(
        by_codec=by_codec,
        by_bitrate=by_bitrate,
        codec_means=codec_means,
        bitrate_means=bitrate_means,
        cutoff_means=cutoff_means,
        grand_mean=grand_mean,
        lossless=lossless,
    )


def f1_curve(
    predictions: list[PredictionRecord], positive_codec: str
) -> F1Curve:
    """F1 over the threshold grid, keeping lossless negatives and one codec.

    F1 is 0 where precision or recall is undefined. The area is the
    trapezoidal integral over thresholds in [0, 1].
    """
    preds = _valid(predictions)
    positives = [
        p.p_lossy
        for p in preds
        if p.label_true == "lossy"
        and p.encoding is not None
        and p.encoding.codec == positive_codec
    ]
    negatives = [p.p_lossy for p in preds if p.label_true == "lossless"]
    if not positives:
        raise ValueError(f"no positive tracks for codec {positive_codec!r}")
    if not negatives:
        raise ValueError("no lossless (negative) tracks")

    f1_values: list[float] = []
    for t in THRESHOLD_GRID:
        tp = sum(1 for p in positives if p >= t)
        fn = len(positives) - tp
        fp = sum(1 for p in negatives if p >= t)
        if tp == 0:
            f1_values.append(0.0)
            continue
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        f1_values.append(2 * precision * recall / (precision + recall))
    area = float(np.trapezoid(f1_values, THRESHOLD_GRID))
    return F1Curve(
        positive_codec=positive_codec,
        thresholds=list(THRESHOLD_GRID),
        f1=f1_values,
        peak_f1=max(f1_values),
        area=area,
    )


def saliency_map(model: LossyDetector, spec: Spectrogram) -> np.ndarray:
    """|d p_lossy / d S| per spectrogram cell, normalized to [0, 1]."""
    model.eval()
    x = torch.from_numpy(spec.values).float().reshape(1, 1, *spec.values.shape)
    x.requires_grad_(True)
    p_lossy = model(x)[0, 1]
    p_lossy.backward()
    grad = x.grad.detach().numpy()[0, 0]
    sal = np.abs(grad)
    peak = sal.max()
    if peak > 0:
        sal = sal / peak
    return sal


def save_saliency_png(sal: np.ndarray, out_path: str | Path, title: str = "") -> Path:
    """Export a normalized saliency heatmap with the spectrogram axis layout."""
    save_spectrogram_png(Spectrogram(values=sal), out_path, title=title)
    return Path(out_path)


def summarize(predictions: list[PredictionRecord]) -> dict[str, float | None]:
    preds = _valid(predictions)
    lossy = [p for p in preds if p.label_true == "lossy"]
    lossless = [p for p in preds if p.label_true == "lossless"]
    return {
        "overall_accuracy": _accuracy(preds),
        "lossy_accuracy": _accuracy(lossy),
        "lossless_accuracy": _accuracy(lossless),
        "n_tracks": float(len(preds)),
        "n_errors": float(len(predictions) - len(preds)),
    }


def build_report(
    predictions: list[PredictionRecord], dataset_id: str
) -> EvalReport:
    """Assemble the full report for one prediction run."""
    table = accuracy_table(predictions)
    cutoff = None
    lossy = [p for p in _valid(predictions) if p.label_true == "lossy"]
    if lossy and all(
        p.encoding is not None and p.encoding.cutoff_hz is not None for p in lossy
    ):
        cutoff = cutoff_table(predictions)
    curves: dict[str, F1Curve] = {}
    for codec in CODECS:
        try:
            curves[codec] = f1_curve(predictions, codec)
        except ValueError:
            continue
    return EvalReport(
        dataset_id=dataset_id,
        table_codec_bitrate=table,
        table_cutoff=cutoff,
        f1_curves=curves,
        summary=summarize(predictions),
    )


def compare_reports(report_naive: EvalReport, report_masked: EvalReport) -> dict:
    """Cellwise deltas (masked - naive) and the robustness verdict."""
    if report_naive.dataset_id != report_masked.dataset_id:
        raise ValueError("reports were built over different datasets")

    def _delta(a: float | None, b: float | None) -> float | None:
        if a is None or b is None:
            return None
        return b - a

    deltas: dict[str, dict] = {"codec_bitrate": {}}
    for codec, row in report_naive.table_codec_bitrate.cells.items():
        deltas["codec_bitrate"][codec] = {
            bitrate: _delta(acc, report_masked.table_codec_bitrate.cells[codec][bitrate])
            for bitrate, acc in row.items()
        }
    deltas["mean"] = _delta(
        report_naive.table_codec_bitrate.mean, report_masked.table_codec_bitrate.mean
    )

    verdict = None
    if report_naive.table_cutoff and report_masked.table_cutoff:
        naive_gm = report_naive.table_cutoff.grand_mean
        masked_gm = report_masked.table_cutoff.grand_mean
        deltas["cutoff_grand_mean"] = _delta(naive_gm, masked_gm)
        deltas["cutoff_by_codec"] = {
            cutoff: {
                codec: _delta(acc, report_masked.table_cutoff.by_codec[cutoff][codec])
                for codec, acc in row.items()
            }
            for cutoff, row in report_naive.table_cutoff.by_codec.items()
        }
        if naive_gm is not None and masked_gm is not None:
            verdict = masked_gm >= naive_gm
    return {
        "deltas": deltas,
        "masked_at_least_as_robust": verdict,
    }


def error_gallery(
    predictions: list[PredictionRecord],
    manifest: Manifest,
    out_dir: str | Path,
) -> dict:
    """Export spectrogram PNG + provenance for every misclassified track."""
    from .frontend import load_audio, spectrogram as make_spectrogram
    from .inference import windows

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        (r.track_id, r.label): r.audio_path for r in manifest.records
    }
    sections: dict[str, list[dict]] = {"lossless_errors": [], "lossy_errors": []}
    for pred in _valid(predictions):
        if pred.predicted == pred.label_true:
            continue
        section = (
            "lossless_errors" if pred.label_true == "lossless" else "lossy_errors"
        )
        entry = {
            "track_id": pred.track_id,
            "p_lossy": pred.p_lossy,
            "label_true": pred.label_true,
            "predicted": pred.predicted,
            "codec": pred.encoding.codec if pred.encoding else None,
            "bitrate_kbps": pred.encoding.bitrate_kbps if pred.encoding else None,
            "cutoff_hz": pred.encoding.cutoff_hz if pred.encoding else None,
        }
        audio_path = paths.get((pred.track_id, pred.label_true))
        if audio_path is not None and Path(audio_path).exists():
            clip = windows(load_audio(audio_path))[0]
            png = out_dir / section / f"{pred.track_id}.png"
            save_spectrogram_png(
                make_spectrogram(clip),
                png,
                title=f"{pred.track_id} p_lossy={pred.p_lossy:.3f}",
            )
            entry["png"] = str(png)
        sections[section].append(entry)

    report = {
        "n_lossless_errors": len(sections["lossless_errors"]),
        "n_lossy_errors": len(sections["lossy_errors"]),
        **sections,
    }
    (out_dir / "errors.json").write_text(json.dumps(report, indent=2) + "\n")
    return report


def _format_cell(value: float | None) -> str:
    return "-" if value is None else f"{value:5.1f}"


def report_markdown(report: EvalReport) -> str:
    """Human-readable tables shaped like the grouped accuracy breakdowns."""
    lines = [f"# Evaluation report ({report.dataset_id})", ""]
    t = report.table_codec_bitrate
    header = ["codec"] + [str(b) for b in BITRATES_KBPS]
    lines.append("## Accuracy by codec and bitrate (%)")
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for codec in CODECS:
        row = [codec] + [_format_cell(t.cells[codec][str(b)]) for b in BITRATES_KBPS]
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    lines.append(f"- lossless: {_format_cell(t.lossless)}")
    lines.append(f"- mean: {_format_cell(t.mean)}")
    lines.append("")
    if report.table_cutoff:
        c = report.table_cutoff
        lines.append("## Accuracy by cutoff (%)")
        header = ["cutoff"] + list(CODECS) + [str(b) for b in BITRATES_KBPS] + ["mean"]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for cutoff in CUTOFFS_HZ:
            key = str(cutoff)
            row = (
                [f"{cutoff // 1000} kHz"]
                + [_format_cell(c.by_codec[key][codec]) for codec in CODECS]
                + [_format_cell(c.by_bitrate[key][str(b)]) for b in BITRATES_KBPS]
                + [_format_cell(c.cutoff_means[key])]
            )
            lines.append("| " + " | ".join(row) + " |")
        mean_row = (
            ["mean"]
            + [_format_cell(c.codec_means[codec]) for codec in CODECS]
            + [_format_cell(c.bitrate_means[str(b)]) for b in BITRATES_KBPS]
            + [_format_cell(c.grand_mean)]
        )
        lines.append("| " + " | ".join(mean_row) + " |")
        lines.append("")
        lines.append(f"- lossless: {_format_cell(c.lossless)}")
        lines.append("")
    if report.f1_curves:
        lines.append("## F1-threshold analysis")
        for codec, curve in report.f1_curves.items():
            lines.append(
                f"- {codec}: peak F1 = {curve.peak_f1:.3f}, area = {curve.area:.3f}"
            )
        lines.append("")
    s = report.summary
    lines.append("## Summary")
    for key in ("overall_accuracy", "lossy_accuracy", "lossless_accuracy"):
        lines.append(f"- {key}: {_format_cell(s.get(key))}")
    lines.append("")
    return "\n".join(lines)


def write_report_bundle(report: EvalReport, out_dir: str | Path) -> Path:
    """Write report.json, report.md, and one f1_<codec>.csv per curve."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2) + "\n"
    )
    (out_dir / "report.md").write_text(report_markdown(report))
    for codec, curve in report.f1_curves.items():
        with open(out_dir / f"f1_{codec}.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["threshold", "f1"])
            for t, v in zip(curve.thresholds, curve.f1):
                writer.writerow([f"{t:.2f}", f"{v:.6f}"])
            writer.writerow(["peak_f1", f"{curve.peak_f1:.6f}"])
            writer.writerow(["area", f"{curve.area:.6f}"])
    return out_dir
