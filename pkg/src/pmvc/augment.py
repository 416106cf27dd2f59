"""Random-prosody augmentation over mel-spectrogram frames.

The input is cut into fixed-length segments. Segments are removed in
uniformly random pairs; each pair gets a stretch rate a drawn uniformly
from [rate_low, rate_high], one member is resampled to round(t / a)
frames and its partner takes the complement 2t - round(t / a), so the
pair (and therefore the whole utterance) keeps its exact frame count.
The paired rate a / (2a - 1) follows from durations scaling as 1 / rate:
1/a + (2a - 1)/a = 2 segment lengths.

Segments are stitched back in their original order, so content order is
preserved while local pace is randomized. Deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dsp import MelSpectrogram
from .errors import ValidationError


@dataclass(frozen=True)
class RPConfig:
    split_length: int = 2
    rate_low: float = 0.6
    rate_high: float = 2.0

    def __post_init__(self):
        if self.split_length < 1:
            raise ValidationError("split_length must be >= 1")
        if self.rate_low <= 0.5:
            raise ValidationError("rate_low must be > 0.5 (partner rate a/(2a-1) requires a > 0.5)")
        if self.rate_low > self.rate_high:
            raise ValidationError("rate_low must be <= rate_high")


@dataclass(frozen=True)
class AugmentedPair:
    original: MelSpectrogram
    augmented: MelSpectrogram
    rng_seed: int


def partner_rate(a: float) -> float:
    """Complementary stretch rate a / (2a - 1) for the second segment of a pair."""
    if a <= 0.5:
        raise ValidationError(f"stretch rate {a} must be > 0.5")
    return a / (2.0 * a - 1.0)


def stretch_segment(frames: np.ndarray, new_len: int) -> np.ndarray:
    """Linearly resample (T, F) frames along time to exactly new_len frames.

    Endpoints are preserved; new_len == 1 keeps the first frame.
    """
    if frames.ndim != 2 or frames.shape[0] < 1:
        raise ValidationError("segment must be a non-empty T x F matrix")
    if new_len < 1:
        raise ValidationError("new_len must be >= 1")
    t = frames.shape[0]
    if new_len == t:
        return frames.copy()
    if new_len == 1 or t == 1:
        return np.repeat(frames[:1], new_len, axis=0)
    pos = np.linspace(0.0, t - 1.0, new_len)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, t - 1)
    frac = (pos - lo).astype(frames.dtype)[:, None]
    return frames[lo] * (1 - frac) + frames[hi] * frac


def random_prosody(spec: MelSpectrogram, cfg: RPConfig, rng_seed: int) -> AugmentedPair:
    """Length-preserving prosody randomization of a mel-spectrogram."""
    t = cfg.split_length
    total = spec.n_frames
    if total < t:
        raise ValidationError(f"spectrogram of {total} frames is shorter than split length {t}")

    rng = np.random.default_rng(rng_seed)
    num = total // t
    segments = [spec.frames[i * t : (i + 1) * t] for i in range(num)]
    tail = spec.frames[num * t :]  # remainder < t passes through unmodified

    out: list[np.ndarray | None] = [None] * num
    remaining = list(range(num))
    while len(remaining) > 1:
        i_pos, j_pos = rng.choice(len(remaining), size=2, replace=False)
        i, j = remaining[int(i_pos)], remaining[int(j_pos)]
        remaining = [k for k in remaining if k not in (i, j)]
        a = float(rng.uniform(cfg.rate_low, cfg.rate_high))
        len_i = int(np.clip(round(t / a), 1, 2 * t - 1))
        len_j = 2 * t - len_i
        out[i] = stretch_segment(segments[i], len_i)
        out[j] = stretch_segment(segments[j], len_j)
    for k in remaining:  # odd segment count: last one passes through
        out[k] = segments[k].copy()

    parts = [p for p in out if p is not None]
    if tail.shape[0]:
        parts.append(tail)
    frames = np.concatenate(parts, axis=0) if parts else spec.frames.copy()
    assert frames.shape[0] == total
    augmented = replace(spec, frames=frames.astype(spec.frames.dtype))
    return AugmentedPair(original=spec, augmented=augmented, rng_seed=rng_seed)
