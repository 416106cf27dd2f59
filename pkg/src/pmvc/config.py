"""Declarative run configuration.

Every tunable lives under a dotted key (section.name). A YAML config
file supplies nested sections; `--set key=value` overrides individual
keys. Unknown keys are rejected so a run directory's config snapshot is
always complete and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .augment import RPConfig
from .dsp import FrameWindowPolicy, MelParams
from .errors import ConfigurationError
from .nets import ModelConfig
from .speaker import SpeakerEncoderConfig, SpeakerTrainConfig
from .training import TrainConfig

# key -> (default, type, description)
CONFIG_SCHEMA: dict[str, tuple] = {
    "mel.sample_rate": (22050, int, "analysis sample rate in Hz"),
    "mel.fft_size": (1024, int, "FFT size in samples"),
    "mel.win_length": (1024, int, "analysis window length in samples"),
    "mel.hop_length": (256, int, "hop between frames in samples"),
    "mel.n_mels": (80, int, "number of mel bins"),
    "mel.fmin": (0.0, float, "lowest filterbank frequency in Hz"),
    "mel.fmax": (None, float, "highest filterbank frequency; null = sample_rate/2"),
    "mel.floor_epsilon": (1e-5, float, "power floor added before the log"),
    "policy.target_frames": (256, int, "fixed training frame count"),
    "policy.pad_value": (None, float, "pad constant for short clips; null = log(floor_epsilon)"),
    "policy.crop_rule": ("random_window", str, "random_window or left_window"),
    "rp.split_length": (2, int, "segment length in frames for prosody randomization"),
    "rp.rate_low": (0.6, float, "lower bound of the stretch-rate draw (> 0.5)"),
    "rp.rate_high": (2.0, float, "upper bound of the stretch-rate draw"),
    "model.content_dim": (128, int, "latent channels assigned to content"),
    "model.prosody_dim": (128, int, "latent channels assigned to prosody"),
    "model.encoder_conv_layers": (3, int, "conv blocks in the feature encoder"),
    "model.encoder_channels": (512, int, "hidden channels in the feature encoder"),
    "model.encoder_kernel": (5, int, "encoder conv kernel size"),
    "model.predictor_recurrent_layers": (2, int, "BiLSTM layers in the content predictor"),
    "model.predictor_conv_layers": (3, int, "conv layers in the content predictor"),
    "model.predictor_hidden": (128, int, "predictor hidden size per direction"),
    "model.decoder_conv_layers": (3, int, "conv blocks in the decoder"),
    "model.decoder_channels": (256, int, "hidden channels in the decoder"),
    "model.decoder_kernel": (5, int, "decoder conv kernel size"),
    "model.speaker_dim": (256, int, "speaker embedding dimension"),
    "model.grl_lambda": (1.0, float, "gradient-reversal scale"),
    "model.in_epsilon": (1e-5, float, "instance-norm variance epsilon"),
    "model.leaky_slope": (0.2, float, "LeakyReLU negative slope"),
    "train.batch_size": (16, int, "training batch size"),
    "train.total_steps": (20000, int, "number of optimizer steps"),
    "train.learning_rate": (1e-4, float, "Adam learning rate"),
    "train.adam_beta1": (0.9, float, "Adam beta1"),
    "train.adam_beta2": (0.99, float, "Adam beta2"),
    "train.adam_eps": (1e-9, float, "Adam epsilon"),
    "train.log_interval": (100, int, "steps between loss-log lines"),
    "train.checkpoint_interval": (2000, int, "steps between checkpoints"),
    "train.seed": (0, int, "run seed; all randomness derives from it"),
    "train.adversarial": (True, bool, "enable the gradient-reversal adversarial objective"),
    "train.sim_weight": (0.5, float, "weight of the similarity-contrast loss (alpha)"),
    "train.adv_weight": (0.5, float, "weight of the adversarial loss (beta)"),
    "train.embed_utterances": (10, int, "utterances averaged per speaker embedding"),
    "speaker.hidden": (256, int, "speaker-encoder LSTM hidden size"),
    "speaker.recurrent_layers": (2, int, "speaker-encoder LSTM layers"),
    "speaker.embedding_dim": (256, int, "speaker embedding size (must match model.speaker_dim)"),
    "speaker.steps": (1500, int, "GE2E pretraining steps"),
    "speaker.speakers_per_batch": (4, int, "speakers per GE2E batch"),
    "speaker.utterances_per_speaker": (5, int, "utterances per speaker per GE2E batch"),
    "speaker.learning_rate": (1e-3, float, "GE2E Adam learning rate"),
    "speaker.crop_frames": (128, int, "random crop length for GE2E batches"),
    "data.n_test_speakers": (2, int, "speakers held out for zero-shot evaluation"),
    "eval.griffin_lim_iterations": (60, int, "Griffin-Lim iterations for audible output"),
    "eval.probe_utterances": (30, int, "utterances for the content-leakage probe"),
    "eval.conversion_speakers": (4, int, "speakers in the all-pairs conversion protocol"),
}


def _coerce(key: str, value, typ):
    if value is None:
        return None
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
            return value.lower() in ("true", "1", "yes")
        raise ConfigurationError(f"{key}: expected a boolean, got {value!r}")
    try:
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key}: expected {typ.__name__}, got {value!r}")


@dataclass
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def section(self, prefix: str) -> dict:
        plen = len(prefix) + 1
        return {k[plen:]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def mel_params(self) -> MelParams:
        return MelParams(**self.section("mel"))

    def frame_policy(self) -> FrameWindowPolicy:
        return FrameWindowPolicy(**self.section("policy"))

    def rp_config(self) -> RPConfig:
        return RPConfig(**self.section("rp"))

    def model_config(self) -> ModelConfig:
        return ModelConfig(n_mels=self["mel.n_mels"], **self.section("model"))

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.section("train"))

    def speaker_configs(self) -> tuple[SpeakerEncoderConfig, SpeakerTrainConfig]:
        s = self.section("speaker")
        enc = SpeakerEncoderConfig(
            n_mels=self["mel.n_mels"],
            hidden=s["hidden"],
            recurrent_layers=s["recurrent_layers"],
            embedding_dim=s["embedding_dim"],
        )
        tr = SpeakerTrainConfig(
            steps=s["steps"],
            speakers_per_batch=s["speakers_per_batch"],
            utterances_per_speaker=s["utterances_per_speaker"],
            learning_rate=s["learning_rate"],
            crop_frames=s["crop_frames"],
            seed=self["train.seed"],
        )
        return enc, tr


def _flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, f"{key}."))
        else:
            flat[key] = v
    return flat


def load_config(path=None, overrides: list[str] | None = None, seed: int | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional YAML file, then overrides."""
    values = {k: default for k, (default, _, _) in CONFIG_SCHEMA.items()}

    if path is not None:
        doc = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(doc, dict):
            raise ConfigurationError(f"{path}: config file must be a mapping")
        for key, value in _flatten(doc).items():
            if key not in CONFIG_SCHEMA:
                raise ConfigurationError(f"{path}: unknown config key {key!r}")
            values[key] = _coerce(key, value, CONFIG_SCHEMA[key][1])

    for item in overrides or []:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        if key not in CONFIG_SCHEMA:
            raise ConfigurationError(f"unknown config key {key!r}")
        value = yaml.safe_load(raw)
        values[key] = _coerce(key, value, CONFIG_SCHEMA[key][1])

    if seed is not None:
        values["train.seed"] = int(seed)

    if values["speaker.embedding_dim"] != values["model.speaker_dim"]:
        raise ConfigurationError("speaker.embedding_dim must equal model.speaker_dim")
    return RunConfig(values=values)


def schema_help() -> str:
    lines = ["config keys (YAML sections or --set key=value):"]
    for key, (default, _, desc) in CONFIG_SCHEMA.items():
        lines.append(f"  {key} (default {default!r}): {desc}")
    return "\n".join(lines)
