"""Speaker encoder: GE2E pretraining and utterance embedding.

The encoder consumes mel frames, so no separate waveform path is needed.
It is pretrained once with the generalized end-to-end contrast (each
utterance embedding is scored against every speaker centroid, its own
speaker's centroid excluding itself) and then frozen; the main training
loop only reads embeddings from it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .dsp import MelSpectrogram
from .errors import ValidationError
from .serialize import load_checkpoint, save_checkpoint


@dataclass(frozen=True)
class SpeakerEncoderConfig:
    n_mels: int = 80
    hidden: int = 256
    recurrent_layers: int = 2
    embedding_dim: int = 256

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "SpeakerEncoderConfig":
        return cls(**d)


@dataclass(frozen=True)
class SpeakerTrainConfig:
    steps: int = 1500
    speakers_per_batch: int = 4
    utterances_per_speaker: int = 5
    learning_rate: float = 1e-3
    crop_frames: int = 128
    seed: int = 0


class SpeakerEncoder(nn.Module):
    def __init__(self, cfg: SpeakerEncoderConfig):
        super().__init__()
        self.cfg = cfg
        self.rnn = nn.LSTM(
            cfg.n_mels, cfg.hidden, num_layers=cfg.recurrent_layers, batch_first=True
        )
        self.proj = nn.Linear(cfg.hidden, cfg.embedding_dim)
        # GE2E similarity scale/offset; only used during pretraining
        self.sim_weight = nn.Parameter(torch.tensor(10.0))
        self.sim_bias = nn.Parameter(torch.tensor(-5.0))

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """(B, T, n_mels) -> unit-norm embeddings (B, embedding_dim)."""
        h, _ = self.rnn(mel)
        e = self.proj(h[:, -1])
        return F.normalize(e, dim=-1, eps=1e-12)


def ge2e_loss(embeddings: torch.Tensor, w: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Softmax GE2E contrast over an (N, M, d) embedding grid."""
    n, m, _ = embeddings.shape
    centroids = embeddings.mean(dim=1)  # (N, d)
    # own-speaker centroid excludes the utterance itself
    excl = (centroids.unsqueeze(1) * m - embeddings) / (m - 1)  # (N, M, d)

    sim = torch.einsum("nmd,kd->nmk", F.normalize(embeddings, dim=-1), F.normalize(centroids, dim=-1))
    own = F.cosine_similarity(embeddings, excl, dim=-1)  # (N, M)
    idx = torch.arange(n)
    sim = sim.clone()
    sim[idx, :, idx] = own
    sim = torch.clamp(w, min=1e-6) * sim + b

    labels = idx.repeat_interleave(m)
    return F.cross_entropy(sim.reshape(n * m, n), labels)


def _as_frames(utt) -> np.ndarray:
    if isinstance(utt, MelSpectrogram):
        return utt.frames
    return np.asarray(utt, dtype=np.float32)


def _crop(frames: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    t = frames.shape[0]
    if t <= length:
        out = np.zeros((length, frames.shape[1]), dtype=frames.dtype)
        out[:t] = frames
        return out
    start = int(rng.integers(0, t - length + 1))
    return frames[start : start + length]


def pretrain_speaker_encoder(
    corpus: dict[str, list],
    enc_cfg: SpeakerEncoderConfig | None = None,
    train_cfg: SpeakerTrainConfig | None = None,
) -> SpeakerEncoder:
    """Train a speaker encoder with GE2E over speaker-labeled mels.

    `corpus` maps speaker id -> list of (T, F) mel arrays or
    MelSpectrogram objects; needs at least 2 speakers with 2 utterances.
    """
    enc_cfg = enc_cfg or SpeakerEncoderConfig()
    train_cfg = train_cfg or SpeakerTrainConfig()
    speakers = sorted(corpus)
    if len(speakers) < 2:
        raise ValidationError("speaker pretraining needs at least 2 speakers")
    for s in speakers:
        if len(corpus[s]) < 2:
            raise ValidationError(f"speaker {s!r} has fewer than 2 utterances")

    rng = np.random.default_rng(train_cfg.seed)
    torch.manual_seed(train_cfg.seed)
    model = SpeakerEncoder(enc_cfg)
    opt = torch.optim.Adam(model.parameters(), lr=train_cfg.learning_rate)

    n = min(train_cfg.speakers_per_batch, len(speakers))
    m = train_cfg.utterances_per_speaker
    for _ in range(train_cfg.steps):
        batch_speakers = rng.choice(len(speakers), size=n, replace=False)
        batch = []
        for si in batch_speakers:
            utts = corpus[speakers[int(si)]]
            picks = rng.integers(0, len(utts), size=m)
            for ui in picks:
                batch.append(_crop(_as_frames(utts[int(ui)]), train_cfg.crop_frames, rng))
        mel = torch.from_numpy(np.stack(batch).astype(np.float32))
        emb = model(mel).reshape(n, m, -1)
        loss = ge2e_loss(emb, model.sim_weight, model.sim_bias)
        opt.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(model.parameters(), 3.0)
        opt.step()
    model.eval()
    return model


def embed_speaker(utterances: list, model: SpeakerEncoder) -> np.ndarray:
    """Average per-utterance embeddings and renormalize to unit length."""
    if not utterances:
        raise ValidationError("embed_speaker needs at least one utterance")
    with torch.no_grad():
        embs = []
        for utt in utterances:
            mel = torch.from_numpy(_as_frames(utt).astype(np.float32)).unsqueeze(0)
            embs.append(model(mel)[0])
        mean = torch.stack(embs).mean(dim=0)
        mean = F.normalize(mean, dim=-1, eps=1e-12)
    return mean.numpy()


def save_speaker_encoder(path, model: SpeakerEncoder, frame_params: dict | None = None) -> None:
    tensors = {k: v.detach().numpy().astype(np.float32) for k, v in model.state_dict().items()}
    save_checkpoint(
        path, "speaker-encoder", tensors, model.cfg.to_dict(), frame_params=frame_params
    )


def load_speaker_encoder(path) -> SpeakerEncoder:
    ckpt = load_checkpoint(path, expected_kind="speaker-encoder")
    model = SpeakerEncoder(SpeakerEncoderConfig.from_dict(ckpt["config"]))
    state = {k: torch.from_numpy(v) for k, v in ckpt["tensors"].items()}
    model.load_state_dict(state)
    model.eval()
    return model
