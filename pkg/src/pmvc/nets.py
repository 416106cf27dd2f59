"""Trainable machinery: feature encoder, content predictor, decoder.

The encoder strips global static (speaker) statistics with per-channel
instance normalization over time and emits a latent whose channels are
split into a content half and a prosody half. A content predictor sits
behind a gradient-reversal layer and tries to reconstruct the content
half from the prosody half alone; the reversal makes the encoder and the
predictor adversaries. The decoder tiles a speaker embedding over time,
concatenates it with both latent halves and renders mel frames, with
AdaIN conditioning from the speaker embedding at every block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .errors import ConfigurationError, ValidationError


@dataclass(frozen=True)
class ModelConfig:
    content_dim: int = 128
    prosody_dim: int = 128
    n_mels: int = 80
    encoder_conv_layers: int = 3
    encoder_channels: int = 512
    encoder_kernel: int = 5
    predictor_recurrent_layers: int = 2
    predictor_conv_layers: int = 3
    predictor_hidden: int = 128
    decoder_conv_layers: int = 3
    decoder_channels: int = 256
    decoder_kernel: int = 5
    speaker_dim: int = 256
    grl_lambda: float = 1.0
    in_epsilon: float = 1e-5
    leaky_slope: float = 0.2

    def __post_init__(self):
        for name in (
            "content_dim",
            "prosody_dim",
            "n_mels",
            "encoder_conv_layers",
            "encoder_channels",
            "predictor_recurrent_layers",
            "predictor_conv_layers",
            "predictor_hidden",
            "decoder_conv_layers",
            "decoder_channels",
            "speaker_dim",
        ):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.grl_lambda <= 0:
            raise ConfigurationError("grl_lambda must be > 0")
        if self.in_epsilon <= 0:
            raise ConfigurationError("in_epsilon must be > 0")

    @property
    def latent_dim(self) -> int:
        return self.content_dim + self.prosody_dim

    def to_dict(self) -> dict:
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def _in_norm_ct(x: torch.Tensor, eps: float) -> torch.Tensor:
    """Normalize (..., C, T) per channel over the time axis, no affine."""
    mu = x.mean(dim=-1, keepdim=True)
    var = ((x - mu) ** 2).mean(dim=-1, keepdim=True)
    return (x - mu) / torch.sqrt(var + eps)


def instance_norm(feature_map, eps: float = 1e-5):
    """Per-channel mean/variance normalization of a (T, C) feature map.

    Accepts a numpy array or torch tensor; returns the same kind. The
    divisor is sqrt(mean squared deviation + eps), so constant channels
    map to zeros instead of dividing by zero.
    """
    if isinstance(feature_map, np.ndarray):
        x = np.asarray(feature_map, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValidationError("feature map must be a non-empty T x C matrix")
        mu = x.mean(axis=0, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=0, keepdims=True)
        return ((x - mu) / np.sqrt(var + eps)).astype(feature_map.dtype)
    if feature_map.dim() != 2 or feature_map.shape[0] < 1:
        raise ValidationError("feature map must be a non-empty T x C matrix")
    return _in_norm_ct(feature_map.transpose(0, 1), eps).transpose(0, 1)


class InstanceNorm(nn.Module):
    """Instance normalization over time for (B, C, T) tensors, no affine."""

    def __init__(self, eps: float = 1e-5):
        super().__init__()
        self.eps = eps

    def forward(self, x):
        return _in_norm_ct(x, self.eps)


class _ReverseGrad(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, lam):
        ctx.lam = lam
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return -ctx.lam * grad_output, None


def grl_forward(x: torch.Tensor, lam: float = 1.0) -> torch.Tensor:
    """Identity forward, gradient scaled by -lam on the way back."""
    return _ReverseGrad.apply(x, lam)


def grl_backward(upstream_grad: torch.Tensor, lam: float = 1.0) -> torch.Tensor:
    """What the reversal layer hands downstream for a given upstream gradient."""
    return -lam * upstream_grad


class GradientReversal(nn.Module):
    def __init__(self, lam: float = 1.0):
        super().__init__()
        self.lam = lam

    def forward(self, x):
        return grl_forward(x, self.lam)


class FeatureEncoder(nn.Module):
    """Conv + instance-norm stack producing the split latent.

    The raw input is never concatenated back into the latent, so no
    pre-normalization (speaker-bearing) statistics survive into Z.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        k, pad = cfg.encoder_kernel, cfg.encoder_kernel // 2
        convs = []
        in_ch = cfg.n_mels
        for _ in range(cfg.encoder_conv_layers):
            convs.append(nn.Conv1d(in_ch, cfg.encoder_channels, k, padding=pad))
            in_ch = cfg.encoder_channels
        self.convs = nn.ModuleList(convs)
        self.norm = InstanceNorm(cfg.in_epsilon)
        self.act = nn.LeakyReLU(cfg.leaky_slope)
        self.proj = nn.Conv1d(cfg.encoder_channels, cfg.latent_dim, 1)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """(B, T, n_mels) -> latent (B, T, content_dim + prosody_dim)."""
        if mel.shape[-1] != self.cfg.n_mels:
            raise ConfigurationError(
                f"input has {mel.shape[-1]} mel bins, model expects {self.cfg.n_mels}"
            )
        h = mel.transpose(1, 2)
        for conv in self.convs:
            h = self.act(self.norm(conv(h)))
        z = self.norm(self.proj(h))
        return z.transpose(1, 2)

    def split(self, z: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Latent -> (content channels, prosody channels)."""
        return z[..., : self.cfg.content_dim], z[..., self.cfg.content_dim :]


class ContentPredictor(nn.Module):
    """Bidirectional recurrent + conv stack predicting content from prosody."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.rnn = nn.LSTM(
            cfg.prosody_dim,
            cfg.predictor_hidden,
            num_layers=cfg.predictor_recurrent_layers,
            bidirectional=True,
            batch_first=True,
        )
        k, pad = 5, 2
        ch = 2 * cfg.predictor_hidden
        convs = []
        for _ in range(cfg.predictor_conv_layers - 1):
            convs.append(nn.Conv1d(ch, ch, k, padding=pad))
        convs.append(nn.Conv1d(ch, cfg.content_dim, k, padding=pad))
        self.convs = nn.ModuleList(convs)
        self.act = nn.LeakyReLU(cfg.leaky_slope)

    def forward(self, prosody: torch.Tensor) -> torch.Tensor:
        """(B, T, prosody_dim) -> predicted content (B, T, content_dim)."""
        if prosody.shape[-1] != self.cfg.prosody_dim:
            raise ConfigurationError(
                f"predictor got {prosody.shape[-1]} channels, expects {self.cfg.prosody_dim}"
            )
        h, _ = self.rnn(prosody)
        h = h.transpose(1, 2)
        for conv in self.convs[:-1]:
            h = self.act(conv(h))
        return self.convs[-1](h).transpose(1, 2)


class Decoder(nn.Module):
    """AdaIN-conditioned decoder rendering mel frames from (C, P, S)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        k, pad = cfg.decoder_kernel, cfg.decoder_kernel // 2
        in_ch = cfg.latent_dim + cfg.speaker_dim
        convs, adains = [], []
        for _ in range(cfg.decoder_conv_layers):
            convs.append(nn.Conv1d(in_ch, cfg.decoder_channels, k, padding=pad))
            adains.append(nn.Linear(cfg.speaker_dim, 2 * cfg.decoder_channels))
            in_ch = cfg.decoder_channels
        self.convs = nn.ModuleList(convs)
        self.adains = nn.ModuleList(adains)
        self.norm = InstanceNorm(cfg.in_epsilon)
        self.act = nn.LeakyReLU(cfg.leaky_slope)
        self.rnn = nn.LSTM(cfg.decoder_channels, cfg.decoder_channels, batch_first=True)
        self.out = nn.Linear(cfg.decoder_channels, cfg.n_mels)

    def forward(
        self, content: torch.Tensor, prosody: torch.Tensor, speaker: torch.Tensor
    ) -> torch.Tensor:
        """(B,T,Cd), (B,T,Pd), (B,ds) -> mel frames (B, T, n_mels)."""
        if content.shape[1] != prosody.shape[1]:
            raise ValidationError("content and prosody must share the frame axis")
        t = content.shape[1]
        tiled = speaker.unsqueeze(1).expand(-1, t, -1)
        h = torch.cat([content, prosody, tiled], dim=-1).transpose(1, 2)
        for conv, adain in zip(self.convs, self.adains):
            h = self.norm(conv(h))
            scale, shift = adain(speaker).chunk(2, dim=-1)
            h = h * (1 + scale.unsqueeze(-1)) + shift.unsqueeze(-1)
            h = self.act(h)
        h, _ = self.rnn(h.transpose(1, 2))
        return self.out(h)


class PMVCModel(nn.Module):
    """Encoder + content predictor (behind a GRL) + decoder."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = FeatureEncoder(cfg)
        self.predictor = ContentPredictor(cfg)
        self.decoder = Decoder(cfg)
        self.grl = GradientReversal(cfg.grl_lambda)

    def forward(self, mel: torch.Tensor, speaker: torch.Tensor, adversarial: bool = True):
        """One full pass; returns (content, prosody, predicted content, recon).

        With adversarial=True the predictor input passes through the
        reversal layer so encoder and predictor optimize opposite goals;
        with adversarial=False the predictor sees a detached copy and the
        encoder receives no gradient from the prediction error at all.
        """
        z = self.encoder(mel)
        content, prosody = self.encoder.split(z)
        probe_in = self.grl(prosody) if adversarial else prosody.detach()
        predicted = self.predictor(probe_in)
        recon = self.decoder(content, prosody, speaker)
        return content, prosody, predicted, recon


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def two_encoder_parameter_count(model: PMVCModel) -> int:
    """Analytic size of the two-encoder variant (never instantiated).

    Adds a duplicate feature encoder dedicated to prosody plus the linear
    layer that maps its latent down to the prosody channel count.
    """
    cfg = model.cfg
    extra_linear = cfg.latent_dim * cfg.prosody_dim + cfg.prosody_dim
    return count_parameters(model) + count_parameters(model.encoder) + extra_linear
