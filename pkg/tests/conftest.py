"""Shared desk-scale fixtures: synthetic corpus, prepared dataset,
pretrained speaker encoder, and trained models with/without the
adversarial objective. Session-scoped because training is the slow part.

Also collects one PASS/FAIL line per acceptance criterion and replays
them in the terminal summary so they survive output capturing.
"""

import pytest

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[criterion {number:02d}] {name}: {status}{suffix}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

from pmvc.augment import RPConfig
from pmvc.data import prepare_dataset
from pmvc.dsp import FrameWindowPolicy, MelParams
from pmvc.nets import ModelConfig
from pmvc.speaker import (
    SpeakerEncoderConfig,
    SpeakerTrainConfig,
    pretrain_speaker_encoder,
    save_speaker_encoder,
)
from pmvc.synth import generate_corpus
from pmvc.training import TrainConfig, load_model_checkpoint, train

DESK_MEL = MelParams(sample_rate=8000, fft_size=512, win_length=512, hop_length=128, n_mels=48)
DESK_POLICY = FrameWindowPolicy(target_frames=64)
DESK_MODEL = ModelConfig(
    content_dim=16,
    prosody_dim=16,
    n_mels=48,
    encoder_channels=32,
    predictor_hidden=16,
    decoder_channels=32,
    speaker_dim=32,
)
DESK_SPEAKER_ENC = SpeakerEncoderConfig(n_mels=48, hidden=64, embedding_dim=32)
DESK_SPEAKER_TRAIN = SpeakerTrainConfig(
    steps=400, speakers_per_batch=4, utterances_per_speaker=4, crop_frames=48, seed=0
)


def desk_train_config(adversarial: bool = True, total_steps: int = 1200) -> TrainConfig:
    return TrainConfig(
        batch_size=8,
        total_steps=total_steps,
        learning_rate=1e-3,
        log_interval=400,
        checkpoint_interval=100_000,
        seed=0,
        adversarial=adversarial,
    )


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    generate_corpus(
        root,
        n_speakers=6,
        utterances_per_speaker=12,
        sample_rate=DESK_MEL.sample_rate,
        seed=7,
        syllable_duration=0.12,
    )
    return root


@pytest.fixture(scope="session")
def desk_manifest(desk_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    return prepare_dataset(desk_corpus, out, DESK_MEL, DESK_POLICY, n_test_speakers=2, seed=0)


@pytest.fixture(scope="session")
def desk_speaker_encoder(desk_manifest):
    corpus = desk_manifest.by_speaker(desk_manifest.train_speakers)
    return pretrain_speaker_encoder(corpus, DESK_SPEAKER_ENC, DESK_SPEAKER_TRAIN)


@pytest.fixture(scope="session")
def desk_speaker_ckpt(desk_speaker_encoder, desk_manifest, tmp_path_factory):
    path = tmp_path_factory.mktemp("speaker") / "speaker.ckpt"
    save_speaker_encoder(path, desk_speaker_encoder, desk_manifest.frame_params.to_dict())
    return path


def _train_desk(manifest, speaker_encoder, run_dir, adversarial):
    result = train(
        manifest,
        DESK_MODEL,
        desk_train_config(adversarial=adversarial),
        RPConfig(),
        speaker_encoder,
        run_dir,
    )
    model, _, _ = load_model_checkpoint(result.checkpoint_path)
    return {"model": model, "result": result, "ckpt": result.checkpoint_path}


@pytest.fixture(scope="session")
def trained_adv(desk_manifest, desk_speaker_encoder, tmp_path_factory):
    return _train_desk(
        desk_manifest, desk_speaker_encoder, tmp_path_factory.mktemp("run_adv"), True
    )


@pytest.fixture(scope="session")
def trained_noadv(desk_manifest, desk_speaker_encoder, tmp_path_factory):
    return _train_desk(
        desk_manifest, desk_speaker_encoder, tmp_path_factory.mktemp("run_noadv"), False
    )
