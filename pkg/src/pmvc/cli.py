"""Command-line entry point.

One executable with subcommands covering the whole pipeline. Every
subcommand draws all randomness from the single run seed (config key
train.seed, overridable with --seed), so repeating an invocation
reproduces its artifacts bitwise.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime or
training error, 3 I/O error. Errors print a human-readable message plus
a machine-readable code on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .augment import RPConfig, random_prosody
from .data import DatasetManifest, prepare_dataset
from .dsp import MelSpectrogram, invert_mel, load_audio, mel_spectrogram, save_wav
from .errors import (
    AudioIOError,
    ConfigurationError,
    PMVCError,
    StateError,
    TrainingError,
    ValidationError,
)
from .evaluate import conversion_eval, export_latents, mcd, partition_sweep, probe_content_leakage
from .serialize import load_mel, save_mel
from .speaker import load_speaker_encoder, pretrain_speaker_encoder, save_speaker_encoder
from .training import (
    convert,
    copy_config_snapshot,
    load_model_checkpoint,
    require_checkpoint,
    train,
)

EXIT_CODES = {
    ValidationError: 1,
    ConfigurationError: 1,
    StateError: 2,
    TrainingError: 2,
    AudioIOError: 3,
}


def _default_run_dir() -> str:
    return os.environ.get("PMVC_RUN_DIR", "runs")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable); see main --help for keys",
    )
    p.add_argument("--seed", type=int, default=None, help="override train.seed")
    p.add_argument(
        "--run-dir",
        default=_default_run_dir(),
        help="run directory (env PMVC_RUN_DIR overrides the default)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmvc",
        description="Text-free expressive voice conversion: prepare, train, convert, evaluate.",
        epilog=config_mod.schema_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("prepare", help="analyze a WAV corpus into mels + manifest")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default=None, help="dataset directory (default RUN_DIR/data)")
    _add_common(p)

    p = sub.add_parser("pretrain-speaker", help="GE2E-pretrain the speaker encoder")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="speaker checkpoint path (default RUN_DIR/speaker.ckpt)")
    _add_common(p)

    p = sub.add_parser("train", help="run the main disentanglement training loop")
    p.add_argument("--manifest", required=True)
    p.add_argument("--speaker-ckpt", required=True)
    _add_common(p)

    p = sub.add_parser("augment", help="apply random-prosody augmentation to one file")
    p.add_argument("--in", dest="input", required=True, help="input WAV or .mel file")
    p.add_argument("--out", required=True, help="output .mel file")
    p.add_argument("--wav", default=None, help="also write a Griffin-Lim WAV here")
    p.add_argument("--t", type=int, default=None, help="override rp.split_length")
    p.add_argument("--rate-low", type=float, default=None, help="override rp.rate_low")
    p.add_argument("--rate-high", type=float, default=None, help="override rp.rate_high")
    _add_common(p)

    p = sub.add_parser("convert", help="convert a source utterance to a target voice")
    p.add_argument("--source", required=True, help="source WAV or .mel file")
    p.add_argument("--target-dir", required=True, help="directory of target-speaker WAV/.mel files")
    p.add_argument("--ckpt", required=True, help="trained model checkpoint")
    p.add_argument("--speaker-ckpt", required=True)
    p.add_argument("--out", required=True, help="output prefix; writes <out>.mel and <out>.wav")
    _add_common(p)

    p = sub.add_parser("evaluate", help="all-pairs conversion protocol with detection scores")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--speaker-ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None, help="report path (default RUN_DIR/evaluation.json)")
    _add_common(p)

    p = sub.add_parser("probe", help="content-leakage probe on seen and unseen speakers")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--condition", default="with_adv", choices=["with_adv", "without_adv"])
    p.add_argument("--out", default=None, help="report path (default RUN_DIR/probe.json)")
    _add_common(p)

    p = sub.add_parser("sweep", help="retrain across latent partitions and compare")
    p.add_argument("--manifest", required=True)
    p.add_argument("--speaker-ckpt", required=True)
    _add_common(p)

    p = sub.add_parser("export-latents", help="dump flattened latents as CSV for projection")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--speakers", default=None, help="comma-separated speaker ids (default: all)")
    p.add_argument("--out", required=True)
    _add_common(p)

    return parser


def _load_input_mel(path, cfg) -> MelSpectrogram:
    path = Path(path)
    if path.suffix == ".mel":
        return load_mel(path)
    params = cfg.mel_params()
    return mel_spectrogram(load_audio(path, sample_rate=params.sample_rate), params)


def _load_reference_utts(target_dir, params) -> list:
    target_dir = Path(target_dir)
    utts = []
    for f in sorted(target_dir.iterdir()):
        if f.suffix == ".mel":
            utts.append(load_mel(f).frames)
        elif f.suffix == ".wav":
            utts.append(mel_spectrogram(load_audio(f, sample_rate=params.sample_rate), params).frames)
    if not utts:
        raise ValidationError(f"no WAV or .mel files in {target_dir}")
    return utts


def _cmd_prepare(args, cfg) -> None:
    out = Path(args.out or Path(args.run_dir) / "data")
    manifest = prepare_dataset(
        args.corpus,
        out,
        frame_params=cfg.mel_params(),
        policy=cfg.frame_policy(),
        n_test_speakers=cfg["data.n_test_speakers"],
        seed=cfg["train.seed"],
    )
    print(
        f"prepared {len(manifest.entries)} utterances "
        f"({len(manifest.train_speakers)} train / {len(manifest.test_speakers)} test speakers, "
        f"{manifest.skipped} skipped) -> {out / 'manifest.json'}"
    )


def _cmd_pretrain_speaker(args, cfg) -> None:
    manifest = DatasetManifest.load(args.manifest)
    enc_cfg, tr_cfg = cfg.speaker_configs()
    corpus = manifest.by_speaker(manifest.train_speakers)
    model = pretrain_speaker_encoder(corpus, enc_cfg, tr_cfg)
    out = Path(args.out or Path(args.run_dir) / "speaker.ckpt")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_speaker_encoder(out, model, frame_params=manifest.frame_params.to_dict())
    print(f"speaker encoder saved -> {out}")


def _cmd_train(args, cfg) -> None:
    manifest = DatasetManifest.load(args.manifest)
    speaker_encoder = require_checkpoint(args.speaker_ckpt, load_speaker_encoder)
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    copy_config_snapshot(args.config, run_dir)
    result = train(
        manifest,
        cfg.model_config(),
        cfg.train_config(),
        cfg.rp_config(),
        speaker_encoder,
        run_dir,
    )
    print(f"training done; final checkpoint -> {result.checkpoint_path}")


def _cmd_augment(args, cfg) -> None:
    spec = _load_input_mel(args.input, cfg)
    rp = cfg.rp_config()
    rp = RPConfig(
        split_length=args.t if args.t is not None else rp.split_length,
        rate_low=args.rate_low if args.rate_low is not None else rp.rate_low,
        rate_high=args.rate_high if args.rate_high is not None else rp.rate_high,
    )
    pair = random_prosody(spec, rp, cfg["train.seed"])
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_mel(args.out, pair.augmented)
    print(f"augmented mel ({pair.augmented.n_frames} frames) -> {args.out}")
    if args.wav:
        clip = invert_mel(pair.augmented, iterations=cfg["eval.griffin_lim_iterations"])
        save_wav(args.wav, clip)
        print(f"Griffin-Lim audio -> {args.wav}")


def _cmd_convert(args, cfg) -> None:
    model, frame_params, _ = require_checkpoint(args.ckpt, load_model_checkpoint)
    speaker_encoder = require_checkpoint(args.speaker_ckpt, load_speaker_encoder)
    from .dsp import MelParams

    params = MelParams.from_dict(frame_params) if frame_params else cfg.mel_params()
    source = _load_input_mel(args.source, cfg)
    targets = _load_reference_utts(args.target_dir, params)
    out_frames = convert([source.frames], targets, model, speaker_encoder)
    out_spec = MelSpectrogram(frames=out_frames.astype(np.float32), params=params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_mel(out.with_suffix(".mel"), out_spec)
    clip = invert_mel(out_spec, iterations=cfg["eval.griffin_lim_iterations"])
    save_wav(out.with_suffix(".wav"), clip)
    print(f"converted -> {out.with_suffix('.mel')} and {out.with_suffix('.wav')}")


def _cmd_evaluate(args, cfg) -> None:
    model, _, _ = require_checkpoint(args.ckpt, load_model_checkpoint)
    speaker_encoder = require_checkpoint(args.speaker_ckpt, load_speaker_encoder)
    manifest = DatasetManifest.load(args.manifest)
    records = conversion_eval(
        model,
        speaker_encoder,
        manifest,
        n_speakers=cfg["eval.conversion_speakers"],
        reference_utts=cfg["train.embed_utterances"],
        seed=cfg["train.seed"],
    )
    wins = sum(r["score_target"] > r["score_source"] for r in records)
    report = {
        "pairs": records,
        "target_preferred": wins,
        "total_pairs": len(records),
        "mean_detection_score": float(np.mean([r["score_target"] for r in records])),
    }
    out = Path(args.out or Path(args.run_dir) / "evaluation.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    print(f"{wins}/{len(records)} conversions closer to target -> {out}")


def _cmd_probe(args, cfg) -> None:
    model, _, _ = require_checkpoint(args.ckpt, load_model_checkpoint)
    manifest = DatasetManifest.load(args.manifest)
    report = probe_content_leakage(
        model,
        manifest,
        n_utts=cfg["eval.probe_utterances"],
        condition=args.condition,
        seed=cfg["train.seed"],
    )
    doc = {
        "condition": report.condition,
        "seen": {"mean": report.seen[0], "std": report.seen[1], "errors": report.seen_errors},
        "unseen": {"mean": report.unseen[0], "std": report.unseen[1], "errors": report.unseen_errors},
    }
    out = Path(args.out or Path(args.run_dir) / "probe.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(doc, indent=2) + "\n")
    print(
        f"probe error seen {report.seen[0]:.3f}±{report.seen[1]:.3f}, "
        f"unseen {report.unseen[0]:.3f}±{report.unseen[1]:.3f} -> {out}"
    )


def _cmd_sweep(args, cfg) -> None:
    manifest = DatasetManifest.load(args.manifest)
    speaker_encoder = require_checkpoint(args.speaker_ckpt, load_speaker_encoder)
    run_dir = Path(args.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    results = partition_sweep(
        manifest,
        cfg.model_config(),
        cfg.train_config(),
        cfg.rp_config(),
        speaker_encoder,
        run_dir,
    )
    out = run_dir / "sweep_results.json"
    out.write_text(json.dumps(results, indent=2) + "\n")
    for row in results:
        print(
            f"partition {row['content_dim']}/{row['prosody_dim']}: {row['status']} "
            f"recon={row['final_recon']:.4f} detection={row['detection_score']:.3f}"
        )
    print(f"sweep results -> {out}")


def _cmd_export_latents(args, cfg) -> None:
    model, _, _ = require_checkpoint(args.ckpt, load_model_checkpoint)
    manifest = DatasetManifest.load(args.manifest)
    speakers = args.speakers.split(",") if args.speakers else manifest.speakers()
    n_rows = export_latents(model, manifest, speakers, args.out)
    print(f"exported {n_rows} latent rows -> {args.out}")


COMMANDS = {
    "prepare": _cmd_prepare,
    "pretrain-speaker": _cmd_pretrain_speaker,
    "train": _cmd_train,
    "augment": _cmd_augment,
    "convert": _cmd_convert,
    "evaluate": _cmd_evaluate,
    "probe": _cmd_probe,
    "sweep": _cmd_sweep,
    "export-latents": _cmd_export_latents,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_mod.load_config(args.config, args.overrides, seed=args.seed)
        COMMANDS[args.verb](args, cfg)
    except PMVCError as exc:
        code = EXIT_CODES.get(type(exc), 2)
        print(f"error[{exc.code}]: {exc}", file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
