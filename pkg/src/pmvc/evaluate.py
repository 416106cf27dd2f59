"""Evaluation suite: MCD, speaker-similarity detection score,
content-leakage probe, latent export and the latent-partition sweep.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np
import scipy.fftpack
import torch

from .augment import RPConfig
from .data import DatasetManifest
from .dsp import AudioClip, MelParams, MelSpectrogram, mel_spectrogram
from .errors import ValidationError
from .losses import COSINE_EPS
from .nets import ModelConfig, PMVCModel
from .speaker import SpeakerEncoder, embed_speaker
from .training import TrainConfig, convert, load_model_checkpoint, train

MCD_SCALE = (10.0 / np.log(10.0)) * np.sqrt(2.0)
N_CEPSTRA = 13


@dataclass(frozen=True)
class ProbeReport:
    condition: str  # "with_adv" or "without_adv"
    seen_errors: list[float]
    unseen_errors: list[float]

    @staticmethod
    def _agg(errors):
        return (float(np.mean(errors)), float(np.std(errors))) if errors else (float("nan"), 0.0)

    @property
    def seen(self) -> tuple[float, float]:
        return self._agg(self.seen_errors)

    @property
    def unseen(self) -> tuple[float, float]:
        return self._agg(self.unseen_errors)


def _cepstra(frames: np.ndarray) -> np.ndarray:
    """Per-frame mel cepstra, coefficients 1..13 (0th excluded)."""
    cep = scipy.fftpack.dct(frames, type=2, norm="ortho", axis=1)
    return cep[:, 1 : N_CEPSTRA + 1]


def _dtw_path(cost: np.ndarray) -> list[tuple[int, int]]:
    """Symmetric DTW with (1,1), (1,0), (0,1) moves; returns the path."""
    t1, t2 = cost.shape
    acc = np.full((t1, t2), np.inf)
    acc[0, 0] = cost[0, 0]
    for i in range(t1):
        for j in range(t2):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0 and j > 0:
                best = acc[i - 1, j - 1]
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            acc[i, j] = cost[i, j] + best
    path = [(t1 - 1, t2 - 1)]
    i, j = t1 - 1, t2 - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            candidates.append((acc[i - 1, j], (i - 1, j)))
        if j > 0:
            candidates.append((acc[i, j - 1], (i, j - 1)))
        _, (i, j) = min(candidates, key=lambda c: c[0])
        path.append((i, j))
    path.reverse()
    return path


def _to_mel(x, params: MelParams | None) -> np.ndarray:
    if isinstance(x, AudioClip):
        return mel_spectrogram(x, params or MelParams(sample_rate=x.sample_rate)).frames
    if isinstance(x, MelSpectrogram):
        return x.frames
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValidationError("mcd input must be an audio clip or a T x F mel matrix")
    return arr


def mcd(reference, candidate, params: MelParams | None = None) -> float:
    """Mel-cepstral distortion in dB after dynamic-time-warping alignment."""
    ref = _cepstra(_to_mel(reference, params))
    cand = _cepstra(_to_mel(candidate, params))
    diff = ref[:, None, :] - cand[None, :, :]
    cost = np.sqrt((diff**2).sum(axis=2))
    path = _dtw_path(cost)
    return float(MCD_SCALE * np.mean([cost[i, j] for i, j in path]))


def detection_score(converted, target_utts: list, speaker_encoder: SpeakerEncoder) -> float:
    """Speaker-similarity score in [0, 1]: rescaled cosine between the
    converted utterance's embedding and the target speaker's embedding."""
    conv_frames = converted.frames if isinstance(converted, MelSpectrogram) else np.asarray(converted)
    conv_emb = embed_speaker([conv_frames], speaker_encoder)
    target_emb = embed_speaker(target_utts, speaker_encoder)
    cos = float(np.dot(conv_emb, target_emb) / (np.linalg.norm(conv_emb) * np.linalg.norm(target_emb) + COSINE_EPS))
    return float(np.clip((1.0 + cos) / 2.0, 0.0, 1.0))


def _probe_error(model: PMVCModel, frames: np.ndarray) -> float:
    with torch.no_grad():
        mel = torch.from_numpy(frames.astype(np.float32)).unsqueeze(0)
        z = model.encoder(mel)
        content, prosody = model.encoder.split(z)
        predicted = model.predictor(prosody)
        num = float(((predicted - content) ** 2).mean())
        den = float((content**2).mean()) + COSINE_EPS
    return float(np.clip(num / den, 0.0, 1.0))


def probe_content_leakage(
    model: PMVCModel,
    manifest: DatasetManifest,
    n_utts: int = 30,
    condition: str = "with_adv",
    seed: int = 0,
) -> ProbeReport:
    """Normalized prediction error of content from prosody, per split.

    Higher error means less content information survives in the prosody
    channels. Pure function of (model, utterance set): utterance order
    and batching seeds do not matter; the seed only picks utterances.
    """
    rng = np.random.default_rng(seed)
    half = n_utts // 2

    def sample(speakers, k):
        entries = manifest.entries_for(speakers)
        if not entries:
            raise ValidationError("manifest split has no utterances to probe")
        picks = rng.choice(len(entries), size=min(k, len(entries)), replace=False)
        return [entries[int(i)] for i in picks]

    model.eval()
    seen = [_probe_error(model, manifest.load_frames(e)) for e in sample(manifest.train_speakers, half)]
    unseen_speakers = manifest.test_speakers or manifest.train_speakers
    unseen = [_probe_error(model, manifest.load_frames(e)) for e in sample(unseen_speakers, n_utts - half)]
    return ProbeReport(condition=condition, seen_errors=seen, unseen_errors=unseen)


def export_latents(model: PMVCModel, manifest: DatasetManifest, speakers, out_path) -> int:
    """Write one CSV row per utterance: speaker, utterance, split index,
    then the flattened (T x D) latent. Returns the row count."""
    model.eval()
    n_rows = 0
    with open(out_path, "w", newline="") as f:
        writer = csv.writer(f)
        for entry in manifest.entries_for(speakers):
            frames = manifest.load_frames(entry)
            with torch.no_grad():
                z = model.encoder(torch.from_numpy(frames.astype(np.float32)).unsqueeze(0))[0]
            row = [entry.speaker_id, entry.utterance_id, model.cfg.content_dim]
            row.extend(f"{v:.6g}" for v in z.reshape(-1).numpy())
            writer.writerow(row)
            n_rows += 1
    return n_rows


def conversion_eval(
    model: PMVCModel,
    speaker_encoder: SpeakerEncoder,
    manifest: DatasetManifest,
    speakers=None,
    n_speakers: int = 4,
    reference_utts: int = 10,
    seed: int = 0,
) -> list[dict]:
    """All-pairs conversion protocol (n x (n-1) pairs).

    For each (source, target) pair, convert one source utterance and
    score its speaker similarity against both speakers.
    """
    if speakers is None:
        speakers = manifest.train_speakers[:n_speakers]
    if len(speakers) < 2:
        raise ValidationError("conversion evaluation needs at least 2 speakers")
    rng = np.random.default_rng(seed)
    by_spk = {s: [manifest.load_frames(e) for e in manifest.entries_for([s])] for s in speakers}
    records = []
    for src in speakers:
        for tgt in speakers:
            if src == tgt:
                continue
            src_utt = by_spk[src][int(rng.integers(0, len(by_spk[src])))]
            src_refs = by_spk[src][:reference_utts]
            tgt_refs = by_spk[tgt][:reference_utts]
            converted = convert([src_utt], tgt_refs, model, speaker_encoder)
            records.append(
                {
                    "source": src,
                    "target": tgt,
                    "score_target": detection_score(converted, tgt_refs, speaker_encoder),
                    "score_source": detection_score(converted, src_refs, speaker_encoder),
                }
            )
    return records


def partition_sweep(
    manifest: DatasetManifest,
    base_model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    rp_cfg: RPConfig,
    speaker_encoder: SpeakerEncoder,
    run_dir,
    partitions=((128, 128), (96, 160), (64, 192), (160, 96), (192, 64)),
) -> list[dict]:
    """Retrain with different content/prosody channel splits.

    Every partition shares the seed and step budget; diverged runs are
    reported in the result rows, never dropped.
    """
    from pathlib import Path

    results = []
    for content_dim, prosody_dim in partitions:
        cfg = replace(base_model_cfg, content_dim=content_dim, prosody_dim=prosody_dim)
        sub_dir = Path(run_dir) / f"partition_{content_dim}_{prosody_dim}"
        row = {"content_dim": content_dim, "prosody_dim": prosody_dim}
        try:
            result = train(manifest, cfg, train_cfg, rp_cfg, speaker_encoder, sub_dir)
            model, _, _ = load_model_checkpoint(result.checkpoint_path)
            records = conversion_eval(model, speaker_encoder, manifest, seed=train_cfg.seed)
            row.update(
                status="ok",
                final_recon=result.final_recon(),
                detection_score=float(np.mean([r["score_target"] for r in records])),
            )
        except Exception as exc:  # diverged run: reported, not dropped
            row.update(status=f"failed: {exc}", final_recon=float("nan"), detection_score=float("nan"))
        results.append(row)
    return results
