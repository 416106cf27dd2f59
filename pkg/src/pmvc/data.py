"""Dataset preparation and the manifest shared by training and evaluation.

`prepare_dataset` walks a corpus laid out as corpus/speaker_id/*.wav,
computes fixed-length log-mels, serializes them in the shared mel
container format and writes a JSON manifest. Unreadable or too-short
files are logged and skipped; the skip count lands in the manifest.

The last `n_test_speakers` (sorted by id) are held out entirely so
zero-shot evaluation sees speakers the model never trained on.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import FrameWindowPolicy, MelParams, fit_frames, load_audio, mel_spectrogram
from .errors import PMVCError, ValidationError
from .serialize import load_mel, save_mel

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    utterance_id: str
    mel_path: str  # relative to the manifest's directory
    frames: int


@dataclass
class DatasetManifest:
    frame_params: MelParams
    policy: FrameWindowPolicy
    entries: list[ManifestEntry] = field(default_factory=list)
    train_speakers: list[str] = field(default_factory=list)
    test_speakers: list[str] = field(default_factory=list)
    skipped: int = 0
    seed: int = 0
    root: Path | None = None  # set on load/save; base for mel_path

    def speakers(self) -> list[str]:
        return sorted({e.speaker_id for e in self.entries})

    def entries_for(self, speakers) -> list[ManifestEntry]:
        wanted = set(speakers)
        return [e for e in self.entries if e.speaker_id in wanted]

    def load_frames(self, entry: ManifestEntry) -> np.ndarray:
        return load_mel(Path(self.root) / entry.mel_path).frames

    def by_speaker(self, speakers=None) -> dict[str, list[np.ndarray]]:
        speakers = self.speakers() if speakers is None else list(speakers)
        return {
            s: [self.load_frames(e) for e in self.entries if e.speaker_id == s]
            for s in speakers
        }

    def save(self, path) -> None:
        path = Path(path)
        doc = {
            "frame_params": self.frame_params.to_dict(),
            "policy": {
                "target_frames": self.policy.target_frames,
                "pad_value": self.policy.pad_value,
                "crop_rule": self.policy.crop_rule,
            },
            "entries": [
                {
                    "speaker_id": e.speaker_id,
                    "utterance_id": e.utterance_id,
                    "mel_path": e.mel_path,
                    "frames": e.frames,
                }
                for e in self.entries
            ],
            "train_speakers": self.train_speakers,
            "test_speakers": self.test_speakers,
            "skipped": self.skipped,
            "seed": self.seed,
        }
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        self.root = path.parent

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        doc = json.loads(path.read_text())
        manifest = cls(
            frame_params=MelParams.from_dict(doc["frame_params"]),
            policy=FrameWindowPolicy(**doc["policy"]),
            entries=[ManifestEntry(**e) for e in doc["entries"]],
            train_speakers=doc["train_speakers"],
            test_speakers=doc["test_speakers"],
            skipped=doc["skipped"],
            seed=doc["seed"],
            root=path.parent,
        )
        return manifest


def _file_seed(run_seed: int, rel_path: str) -> int:
    digest = hashlib.sha256(f"{run_seed}:{rel_path}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def prepare_dataset(
    corpus_dir,
    out_dir,
    frame_params: MelParams | None = None,
    policy: FrameWindowPolicy | None = None,
    n_test_speakers: int = 2,
    seed: int = 0,
) -> DatasetManifest:
    """Analyze a WAV corpus into fixed-length mels plus a manifest."""
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    frame_params = frame_params or MelParams()
    policy = policy or FrameWindowPolicy()

    speaker_dirs = sorted(d for d in corpus_dir.iterdir() if d.is_dir()) if corpus_dir.is_dir() else []
    if not speaker_dirs:
        raise ValidationError(f"no speaker directories under {corpus_dir}")

    manifest = DatasetManifest(frame_params=frame_params, policy=policy, seed=seed)
    for spk_dir in speaker_dirs:
        for wav in sorted(spk_dir.glob("*.wav")):
            rel = f"{spk_dir.name}/{wav.stem}"
            try:
                clip = load_audio(wav, sample_rate=frame_params.sample_rate)
                spec = mel_spectrogram(clip, frame_params)
            except PMVCError as exc:
                log.warning("skipping %s: %s", wav, exc)
                manifest.skipped += 1
                continue
            spec = fit_frames(spec, policy, rng_seed=_file_seed(seed, rel))
            mel_rel = f"mels/{spk_dir.name}/{wav.stem}.mel"
            mel_path = out_dir / mel_rel
            mel_path.parent.mkdir(parents=True, exist_ok=True)
            save_mel(mel_path, spec)
            manifest.entries.append(
                ManifestEntry(
                    speaker_id=spk_dir.name,
                    utterance_id=wav.stem,
                    mel_path=mel_rel,
                    frames=spec.n_frames,
                )
            )

    speakers = manifest.speakers()
    if not speakers:
        raise ValidationError(f"no usable WAV files under {corpus_dir}")
    n_test = min(n_test_speakers, max(len(speakers) - 2, 0))
    manifest.train_speakers = speakers[: len(speakers) - n_test]
    manifest.test_speakers = speakers[len(speakers) - n_test :]
    manifest.save(out_dir / "manifest.json")
    return manifest
