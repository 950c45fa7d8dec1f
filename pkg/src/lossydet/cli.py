"""Command-line entry point for the full experiment lifecycle.

Subcommands: build-dataset, train, evaluate, infer, saliency, report.

Exit codes: 0 = success (and "lossless" verdict for infer), 3 = "lossy"
verdict from infer, 2 = usage error, 1 = internal error. Every run writes
its merged configuration into its output directory; output directories are
keyed by a hash of that configuration so identical invocations reproduce
identical artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .data import (
    DatasetSeeds,
    Transcoder,
    build_dataset,
    generate_synthetic_corpus,
    ingest_corpus,
)
from .data.manifest import CODECS, Manifest
from .evaluation import (
    EvalReport,
    build_report,
    compare_reports,
    error_gallery,
    saliency_map,
    save_saliency_png,
    write_report_bundle,
)
from .frontend import load_audio, save_spectrogram_png, spectrogram
from .inference import predict_manifest, predict_track, save_predictions, windows
from .model import ModelConfig, load_checkpoint
from .training import TrainConfig, train

logger = logging.getLogger("lossydet")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_LOSSY = 3


class UsageError(ValueError):
    pass


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()[:8]


def _run_dir(out_root: Path, name: str, payload: dict) -> Path:
    run_dir = out_root / f"{name}_{_config_hash(payload)}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "run_config.json").write_text(
        json.dumps(payload, indent=2, default=str) + "\n"
    )
    return run_dir


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} not found")
    return json.loads(p.read_text())


def _merged(args: argparse.Namespace, keys: list[str]) -> dict:
    """Config-file values overridden by explicitly passed flags."""
    file_cfg = _load_config_file(getattr(args, "config", None))
    merged = {}
    for key in keys:
        flag_value = getattr(args, key.replace("-", "_"), None)
        if flag_value is not None:
            merged[key] = flag_value
        elif key in file_cfg:
            merged[key] = file_cfg[key]
    return merged


def cmd_build_dataset(args: argparse.Namespace) -> int:
    cfg = _merged(
        args,
        ["synthetic", "corpus", "seed", "out", "codecs", "workers", "duration",
         "transcoder"],
    )
    out_root = Path(cfg.get("out", "data"))
    seed = int(cfg.get("seed", 0))
    workers = int(cfg.get("workers", 4))
    duration = float(cfg.get("duration", 10.0))
    codecs = tuple(str(cfg["codecs"]).split(",")) if cfg.get("codecs") else CODECS

    if cfg.get("synthetic"):
        corpus_dir = out_root / "corpus"
        sources = generate_synthetic_corpus(
            int(cfg["synthetic"]), duration, seed, corpus_dir
        )
    elif cfg.get("corpus"):
        sources, skipped = ingest_corpus(cfg["corpus"])
        for s in skipped:
            logger.warning("skipped %s (%s)", s.path, s.reason)
    else:
        raise UsageError("either --synthetic N or --corpus DIR is required")

    try:
        transcoder = Transcoder(cfg.get("transcoder"))
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc

    seeds = DatasetSeeds(corpus_seed=seed, encoding_seed=seed, split_seed=seed)
    for dataset_id in ("ds1", "ds2"):
        manifest = build_dataset(
            sources,
            dataset_id,
            seeds,
            out_root,
            transcoder=transcoder,
            workers=workers,
            codecs=codecs,
        )
        path = manifest.save(out_root / dataset_id / "manifest.jsonl")
        print(path)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _merged(
        args,
        ["manifest", "mask", "mask-probability", "seed", "epochs", "batch-size",
         "lr", "patience", "out"],
    )
    if not cfg.get("manifest"):
        raise UsageError("--manifest is required")
    manifest = Manifest.load(cfg["manifest"])
    mask_enabled = str(cfg.get("mask", "off")).lower() in ("on", "true", "1")
    train_config = TrainConfig(
        batch_size=int(cfg.get("batch-size", 32)),
        max_epochs=int(cfg.get("epochs", 100)),
        learning_rate=float(cfg.get("lr", 1e-3)),
        early_stop_patience=int(cfg.get("patience", 10)),
        seed=int(cfg.get("seed", 0)),
        mask_enabled=mask_enabled,
        mask_probability=float(cfg.get("mask-probability", 1.0)),
    )
    model_config = ModelConfig(mask_enabled=mask_enabled)
    run_dir = _run_dir(Path(cfg.get("out", "runs")), "train", cfg)
    checkpoint = train(manifest, model_config, train_config, run_dir)
    print(checkpoint)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _merged(args, ["manifest", "checkpoint", "split", "threshold", "out"])
    for key in ("manifest", "checkpoint"):
        if not cfg.get(key):
            raise UsageError(f"--{key} is required")
    manifest = Manifest.load(cfg["manifest"])
    model, _ = load_checkpoint(cfg["checkpoint"])
    split = cfg.get("split", "test")
    threshold = float(cfg.get("threshold", 0.5))
    run_dir = _run_dir(Path(cfg.get("out", "eval")), "evaluate", cfg)

    predictions = predict_manifest(manifest, model, split=split, threshold=threshold)
    save_predictions(predictions, run_dir / "predictions.jsonl")
    report = build_report(predictions, manifest.dataset_id)
    write_report_bundle(report, run_dir)
    error_gallery(predictions, manifest, run_dir / "errors")
    print(run_dir / "report.json")
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    cfg = _merged(args, ["checkpoint", "threshold"])
    if not cfg.get("checkpoint"):
        raise UsageError("--checkpoint is required")
    if not args.audio:
        raise UsageError("an audio file is required")
    model, _ = load_checkpoint(cfg["checkpoint"])
    pred = predict_track(
        args.audio, model, threshold=float(cfg.get("threshold", 0.5))
    )
    print(f"p_lossy={pred.p_lossy:.4f} verdict={pred.predicted}")
    return EXIT_LOSSY if pred.predicted == "lossy" else EXIT_OK


def cmd_saliency(args: argparse.Namespace) -> int:
    cfg = _merged(args, ["checkpoint", "out"])
    if not cfg.get("checkpoint"):
        raise UsageError("--checkpoint is required")
    if not args.audio:
        raise UsageError("an audio file is required")
    model, _ = load_checkpoint(cfg["checkpoint"])
    out_dir = Path(cfg.get("out", "saliency"))
    clip = windows(load_audio(args.audio))[0]
    spec = spectrogram(clip)
    stem = Path(args.audio).stem
    spec_png = save_spectrogram_png(spec, out_dir / f"{stem}_spectrogram.png", stem)
    sal = saliency_map(model, spec)
    sal_png = save_saliency_png(sal, out_dir / f"{stem}_saliency.png", f"{stem} saliency")
    print(spec_png)
    print(sal_png)
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _merged(args, ["naive", "masked", "out"])
    for key in ("naive", "masked"):
        if not cfg.get(key):
            raise UsageError(f"--{key} report.json is required")
    naive = EvalReport.load(cfg["naive"])
    masked = EvalReport.load(cfg["masked"])
    delta = compare_reports(naive, masked)
    out_dir = Path(cfg.get("out", "report"))
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "delta.json"
    out_path.write_text(json.dumps(delta, indent=2) + "\n")
    verdict = delta["masked_at_least_as_robust"]
    print(f"masked_at_least_as_robust={verdict}")
    print(out_path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossydet",
        description="Blind lossy-audio-compression detection toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="fabricate ds1/ds2 manifests and audio")
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--synthetic", type=int, help="generate N synthetic tracks")
    p.add_argument("--corpus", help="ingest lossless WAVs from this directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output root directory")
    p.add_argument("--codecs", help="comma-separated codec subset")
    p.add_argument("--workers", type=int, help="concurrent transcoder processes")
    p.add_argument("--duration", type=float, help="synthetic track length (s)")
    p.add_argument("--transcoder", help="path to the ffmpeg-compatible binary")
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train a detector on a ds1 manifest")
    p.add_argument("--config")
    p.add_argument("--manifest", help="ds1 manifest.jsonl")
    p.add_argument("--mask", choices=["on", "off"], help="random mask augmentation")
    p.add_argument("--mask-probability", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="windowed predictions + report bundle")
    p.add_argument("--config")
    p.add_argument("--manifest")
    p.add_argument("--checkpoint")
    p.add_argument("--split", choices=["train", "val", "test"])
    p.add_argument("--threshold", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("infer", help="classify one audio file (exit 0/3)")
    p.add_argument("audio")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--threshold", type=float)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("saliency", help="export spectrogram + saliency PNGs")
    p.add_argument("audio")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--out")
    p.set_defaults(func=cmd_saliency)

    p = sub.add_parser("report", help="compare naive vs masked evaluation reports")
    p.add_argument("--config")
    p.add_argument("--naive", help="report.json of the naive model")
    p.add_argument("--masked", help="report.json of the masked model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        logger.exception("internal error: %s", exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
