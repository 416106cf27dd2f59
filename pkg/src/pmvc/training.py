"""Training loop, checkpointing, and conversion.

One Adam instance covers encoder, decoder and content predictor; the
gradient-reversal layer inside the model turns the shared descent step
into the min-max game (the predictor descends the prediction error, the
encoder ascends it). With `adversarial=False` the predictor still trains
as a probe but the encoder never sees its gradient.

All randomness stems from the run seed: batch sampling, per-item
augmentation seeds and parameter init are derived deterministically, so
a rerun with the same seed reproduces the loss curve bitwise on the
same hardware configuration.
"""

from __future__ import annotations

import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .augment import RPConfig, random_prosody
from .data import DatasetManifest
from .dsp import MelSpectrogram
from .errors import TrainingError, ValidationError
from .losses import LossBreakdown, LossWeights, adv_loss, recon_loss, sim_loss, total_loss
from .nets import ModelConfig, PMVCModel
from .serialize import load_checkpoint, save_checkpoint
from .speaker import SpeakerEncoder, embed_speaker

log = logging.getLogger(__name__)

MODEL_KIND = "pmvc-model"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    total_steps: int = 20000
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.99
    adam_eps: float = 1e-9
    log_interval: int = 100
    checkpoint_interval: int = 2000
    seed: int = 0
    adversarial: bool = True
    sim_weight: float = 0.5
    adv_weight: float = 0.5
    embed_utterances: int = 10

    def __post_init__(self):
        if self.batch_size < 1 or self.total_steps < 1:
            raise ValidationError("batch_size and total_steps must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")


@dataclass
class TrainResult:
    checkpoint_path: Path
    history: list[tuple[int, LossBreakdown]] = field(default_factory=list)

    def final_recon(self, tail: int = 50) -> float:
        recents = [b.recon for _, b in self.history[-tail:]]
        return float(np.mean(recents))


def save_model_checkpoint(path, model: PMVCModel, frame_params: dict | None, step: int) -> None:
    tensors = {k: v.detach().cpu().numpy().astype(np.float32) for k, v in model.state_dict().items()}
    save_checkpoint(path, MODEL_KIND, tensors, model.cfg.to_dict(), frame_params=frame_params, step=step)


def load_model_checkpoint(path) -> tuple[PMVCModel, dict | None, int]:
    ckpt = load_checkpoint(path, expected_kind=MODEL_KIND)
    model = PMVCModel(ModelConfig.from_dict(ckpt["config"]))
    model.load_state_dict({k: torch.from_numpy(v) for k, v in ckpt["tensors"].items()})
    model.eval()
    return model, ckpt["frame_params"], ckpt["step"]


def _item_seed(run_seed: int, step: int, item: int) -> int:
    return int(np.random.SeedSequence([run_seed, step, item]).generate_state(1)[0])


def speaker_embedding_table(
    manifest: DatasetManifest,
    speaker_encoder: SpeakerEncoder,
    speakers,
    n_utterances: int = 10,
    cache_path=None,
) -> dict[str, np.ndarray]:
    """Fixed per-speaker embeddings from the first n utterances, cached."""
    table = {}
    for spk in speakers:
        utts = [manifest.load_frames(e) for e in manifest.entries_for([spk])[:n_utterances]]
        if not utts:
            raise ValidationError(f"speaker {spk!r} has no utterances in the manifest")
        table[spk] = embed_speaker(utts, speaker_encoder)
    if cache_path is not None:
        np.savez(cache_path, **table)
    return table


def train(
    manifest: DatasetManifest,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    rp_cfg: RPConfig,
    speaker_encoder: SpeakerEncoder,
    run_dir,
) -> TrainResult:
    """Run the min-max training loop and write checkpoints + loss log."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)

    entries = manifest.entries_for(manifest.train_speakers)
    if not entries:
        raise ValidationError("manifest has no training entries")
    mels = [manifest.load_frames(e) for e in entries]
    speakers = [e.speaker_id for e in entries]

    emb_table = speaker_embedding_table(
        manifest,
        speaker_encoder,
        manifest.train_speakers,
        n_utterances=train_cfg.embed_utterances,
        cache_path=run_dir / "speaker_embeddings.npz",
    )

    torch.manual_seed(train_cfg.seed)
    model = PMVCModel(model_cfg)
    model.train()
    for p in speaker_encoder.parameters():  # theta_s stays frozen
        p.requires_grad_(False)

    opt = torch.optim.Adam(
        model.parameters(),
        lr=train_cfg.learning_rate,
        betas=(train_cfg.adam_beta1, train_cfg.adam_beta2),
        eps=train_cfg.adam_eps,
    )
    weights = LossWeights(sim_weight=train_cfg.sim_weight, adv_weight=train_cfg.adv_weight)
    batch_rng = np.random.default_rng([train_cfg.seed, 0xBA7C4])
    frame_params = manifest.frame_params.to_dict()

    history: list[tuple[int, LossBreakdown]] = []
    last_ckpt = run_dir / "final.ckpt"
    log_lines = []
    for step in range(1, train_cfg.total_steps + 1):
        idxs = batch_rng.integers(0, len(entries), size=train_cfg.batch_size)
        x_np, res_np, emb_np = [], [], []
        for slot, i in enumerate(idxs):
            frames = mels[int(i)]
            spec = MelSpectrogram(frames=frames, params=manifest.frame_params)
            pair = random_prosody(spec, rp_cfg, _item_seed(train_cfg.seed, step, slot))
            x_np.append(frames)
            res_np.append(pair.augmented.frames)
            emb_np.append(emb_table[speakers[int(i)]])
        x = torch.from_numpy(np.stack(x_np).astype(np.float32))
        x_res = torch.from_numpy(np.stack(res_np).astype(np.float32))
        spk = torch.from_numpy(np.stack(emb_np).astype(np.float32))

        c_x, p_x, pred_x, recon_x = model(x, spk, adversarial=train_cfg.adversarial)
        c_r, p_r, pred_r, recon_r = model(x_res, spk, adversarial=train_cfg.adversarial)

        l_recon = recon_loss(x, recon_x, x_res, recon_r)
        l_sim = sim_loss(c_x, c_r, p_x, p_r)
        l_adv = adv_loss(pred_x, c_x, pred_r, c_r)
        try:
            loss, breakdown = total_loss(l_recon, l_sim, l_adv, weights)
        except TrainingError:
            log.error("aborting at step %d; last checkpoint: %s", step, last_ckpt)
            raise

        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append((step, breakdown))

        if step == 1 or step % train_cfg.log_interval == 0 or step == train_cfg.total_steps:
            log_lines.append(breakdown.format_line(step))
        if step % train_cfg.checkpoint_interval == 0:
            ckpt = run_dir / f"ckpt_{step:06d}.ckpt"
            save_model_checkpoint(ckpt, model, frame_params, step)

    save_model_checkpoint(last_ckpt, model, frame_params, train_cfg.total_steps)
    (run_dir / "loss_log.txt").write_text("\n".join(log_lines) + "\n")
    return TrainResult(checkpoint_path=last_ckpt, history=history)


def convert(
    source_utts: list,
    target_utts: list,
    model: PMVCModel,
    speaker_encoder: SpeakerEncoder,
    frame_params=None,
) -> np.ndarray:
    """Render the first source utterance with the target speaker's timbre.

    Returns (T, n_mels) mel frames; works unchanged for speakers never
    seen in training since timbre enters only via the speaker embedding.
    """
    if not source_utts or not target_utts:
        raise ValidationError("convert needs at least one source and one target utterance")
    src = source_utts[0]
    frames = src.frames if isinstance(src, MelSpectrogram) else np.asarray(src, dtype=np.float32)
    target_emb = embed_speaker(target_utts, speaker_encoder)
    model.eval()
    with torch.no_grad():
        mel = torch.from_numpy(frames.astype(np.float32)).unsqueeze(0)
        z = model.encoder(mel)
        content, prosody = model.encoder.split(z)
        spk = torch.from_numpy(target_emb.astype(np.float32)).unsqueeze(0)
        out = model.decoder(content, prosody, spk)[0].numpy()
    return out


def require_checkpoint(path, loader):
    """Load a checkpoint, naming the missing prerequisite if absent."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"missing prerequisite checkpoint: {path}")
    return loader(path)


def copy_config_snapshot(config_path, run_dir) -> None:
    if config_path is not None:
        shutil.copy(config_path, Path(run_dir) / "config_snapshot.yaml")
