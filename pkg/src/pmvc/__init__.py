"""PMVC: text-free expressive voice conversion with prosody-randomization
augmentation, instance-norm disentanglement and an adversarial
mask-and-predict probe."""

__version__ = "0.1.0"

from .augment import AugmentedPair, RPConfig, partner_rate, random_prosody, stretch_segment
from .dsp import (
    AudioClip,
    FrameWindowPolicy,
    MelParams,
    MelSpectrogram,
    fit_frames,
    invert_mel,
    load_audio,
    mel_spectrogram,
)
from .losses import LossBreakdown, LossWeights, adv_loss, cosine_sim, recon_loss, sim_loss, total_loss
from .nets import GradientReversal, ModelConfig, PMVCModel, grl_backward, grl_forward, instance_norm

__all__ = [
    "AudioClip",
    "AugmentedPair",
    "FrameWindowPolicy",
    "GradientReversal",
    "LossBreakdown",
    "LossWeights",
    "MelParams",
    "MelSpectrogram",
    "ModelConfig",
    "PMVCModel",
    "RPConfig",
    "adv_loss",
    "cosine_sim",
    "fit_frames",
    "grl_backward",
    "grl_forward",
    "instance_norm",
    "invert_mel",
    "load_audio",
    "mel_spectrogram",
    "partner_rate",
    "random_prosody",
    "recon_loss",
    "sim_loss",
    "stretch_segment",
    "total_loss",
]
