"""Loss terms and their weighted combination.

All squared-norm losses use per-element means rather than sums so the
weights keep the same meaning across tensor sizes. Time-varying
embeddings are flattened over (time x channel) into single vectors
before cosine similarity. The similarity-contrast denominator is
clamped below at 0.1 because the content-similarity score can approach
zero (or go negative) early in training.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import TrainingError, ValidationError

COSINE_EPS = 1e-8
SIM_DENOM_FLOOR = 0.1


@dataclass(frozen=True)
class LossWeights:
    sim_weight: float = 0.5  # alpha
    adv_weight: float = 0.5  # beta

    def __post_init__(self):
        if self.sim_weight < 0 or self.adv_weight < 0:
            raise ValidationError("loss weights must be non-negative")


@dataclass(frozen=True)
class LossBreakdown:
    recon: float
    sim: float
    adv: float
    total: float

    def format_line(self, step: int) -> str:
        return (
            f"step={step} recon={self.recon:.6f} sim={self.sim:.6f} "
            f"adv={self.adv:.6f} total={self.total:.6f}"
        )


def cosine_sim(u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Cosine similarity of two embeddings flattened to vectors.

    Zero-norm inputs yield 0 instead of dividing by zero.
    """
    if u.shape != v.shape:
        raise ValidationError(f"shape mismatch {tuple(u.shape)} vs {tuple(v.shape)}")
    u = u.reshape(-1)
    v = v.reshape(-1)
    return (u @ v) / (u.norm() * v.norm() + COSINE_EPS)


def _batch_cosine(u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Mean over the batch of per-item flattened cosine similarities."""
    u = u.reshape(u.shape[0], -1)
    v = v.reshape(v.shape[0], -1)
    num = (u * v).sum(dim=1)
    den = u.norm(dim=1) * v.norm(dim=1) + COSINE_EPS
    return (num / den).mean()


def sim_loss(
    content: torch.Tensor,
    content_res: torch.Tensor,
    prosody: torch.Tensor,
    prosody_res: torch.Tensor,
) -> torch.Tensor:
    """Similarity contrast: prosody cosine over (floored) content cosine.

    Minimizing it pushes the prosody halves of an augmented pair apart
    while pulling the content halves together.
    """
    if content.dim() == 2:
        g_p = cosine_sim(prosody, prosody_res)
        g_c = cosine_sim(content, content_res)
    else:
        g_p = _batch_cosine(prosody, prosody_res)
        g_c = _batch_cosine(content, content_res)
    return g_p / torch.clamp(g_c, min=SIM_DENOM_FLOOR)


def _paired_mse(a: torch.Tensor, b: torch.Tensor, c: torch.Tensor, d: torch.Tensor):
    if a.shape != b.shape or c.shape != d.shape:
        raise ValidationError("loss inputs must come in equal-shape pairs")
    return ((a - b) ** 2).mean() + ((c - d) ** 2).mean()


def recon_loss(
    x: torch.Tensor, x_hat: torch.Tensor, x_res: torch.Tensor, x_res_hat: torch.Tensor
) -> torch.Tensor:
    """Element-mean squared error of both reconstructions."""
    return _paired_mse(x_hat, x, x_res_hat, x_res)


def adv_loss(
    predicted: torch.Tensor,
    content: torch.Tensor,
    predicted_res: torch.Tensor,
    content_res: torch.Tensor,
) -> torch.Tensor:
    """Mask-and-predict error; the content targets are detached so the
    encoder only feels this loss through the reversal layer."""
    return _paired_mse(predicted, content.detach(), predicted_res, content_res.detach())


def total_loss(
    recon: torch.Tensor, sim: torch.Tensor, adv: torch.Tensor, weights: LossWeights
) -> tuple[torch.Tensor, LossBreakdown]:
    """Weighted combination; returns the differentiable total and a breakdown."""
    recon, sim, adv = torch.as_tensor(recon), torch.as_tensor(sim), torch.as_tensor(adv)
    for name, value in (("recon", recon), ("sim", sim), ("adv", adv)):
        if not torch.isfinite(value):
            raise TrainingError(f"non-finite loss component: {name}={float(value)}")
    total = recon + weights.sim_weight * sim + weights.adv_weight * adv
    breakdown = LossBreakdown(
        recon=float(recon.detach()),
        sim=float(sim.detach()),
        adv=float(adv.detach()),
        total=float(total.detach()),
    )
    return total, breakdown
