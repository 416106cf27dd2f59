"""Waveform <-> mel-spectrogram frontend.

All functions here are pure and deterministic given their arguments, so
they are safe to call from parallel workers. Analysis uses an uncentered
STFT (frames lie fully inside the signal), which gives the frame count
T = 1 + floor((len - win_length) / hop_length).

Resampling uses scipy's polyphase resampler with its default Kaiser
window (windowed-sinc interpolation); output length is
ceil(input_len * up / down) after rate reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.io.wavfile
import scipy.signal

from .errors import AudioIOError, ValidationError

DEFAULT_SAMPLE_RATE = 22050


@dataclass(frozen=True)
class MelParams:
    """STFT + mel filterbank settings shared by one training run."""

    sample_rate: int = DEFAULT_SAMPLE_RATE
    fft_size: int = 1024
    win_length: int = 1024
    hop_length: int = 256
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float | None = None  # None -> sample_rate / 2
    floor_epsilon: float = 1e-5

    def __post_init__(self):
        if self.sample_rate <= 0 or self.fft_size <= 0 or self.hop_length <= 0:
            raise ValidationError("sample_rate, fft_size and hop_length must be positive")
        if self.win_length > self.fft_size:
            raise ValidationError("win_length must not exceed fft_size")
        if self.n_mels < 1:
            raise ValidationError("n_mels must be >= 1")

    @property
    def effective_fmax(self) -> float:
        return self.sample_rate / 2 if self.fmax is None else self.fmax

    def to_dict(self) -> dict:
        return {
            "sample_rate": self.sample_rate,
            "fft_size": self.fft_size,
            "win_length": self.win_length,
            "hop_length": self.hop_length,
            "n_mels": self.n_mels,
            "fmin": self.fmin,
            "fmax": self.fmax,
            "floor_epsilon": self.floor_epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MelParams":
        return cls(**d)


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray  # mono float array in [-1, 1]
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("audio samples must be finite")


@dataclass(frozen=True)
class MelSpectrogram:
    frames: np.ndarray  # (T, F) float32
    params: MelParams = field(default_factory=MelParams)
    log_scaled: bool = True

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] < 1 or self.frames.shape[1] < 1:
            raise ValidationError("mel frames must be a non-empty T x F matrix")
        if not np.all(np.isfinite(self.frames)):
            raise ValidationError("mel frames must be finite")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class FrameWindowPolicy:
    """Fixed training frame length: crop long inputs, right-pad short ones."""

    target_frames: int = 256
    pad_value: float | None = None  # None -> log(floor_epsilon), the silence value
    crop_rule: str = "random_window"  # or "left_window"

    def __post_init__(self):
        if self.target_frames <= 0:
            raise ValidationError("target_frames must be positive")
        if self.crop_rule not in ("random_window", "left_window"):
            raise ValidationError(f"unknown crop_rule {self.crop_rule!r}")
        if self.pad_value is not None and not math.isfinite(self.pad_value):
            raise ValidationError("pad_value must be finite")


def _to_float(samples: np.ndarray) -> np.ndarray:
    if samples.dtype == np.int16:
        return samples.astype(np.float64) / 32768.0
    if samples.dtype == np.int32:
        # scipy widens 24-bit PCM into int32, so one scale covers both
        return samples.astype(np.float64) / 2147483648.0
    if samples.dtype == np.uint8:
        return (samples.astype(np.float64) - 128.0) / 128.0
    if samples.dtype in (np.float32, np.float64):
        return samples.astype(np.float64)
    raise AudioIOError(f"unsupported WAV sample format {samples.dtype}")


def load_audio(path, sample_rate: int = DEFAULT_SAMPLE_RATE) -> AudioClip:
    """Read a PCM WAV file as a mono clip at the requested rate.

    Multichannel input is averaged to mono; integer formats are scaled
    to [-1, 1]; the rate is converted with polyphase resampling.
    """
    try:
        file_rate, data = scipy.io.wavfile.read(path)
    except FileNotFoundError:
        raise AudioIOError(f"no such file: {path}")
    except Exception as exc:
        raise AudioIOError(f"cannot read WAV file {path}: {exc}")
    if data.size == 0:
        raise ValidationError(f"zero-length audio: {path}")
    x = _to_float(np.asarray(data))
    if x.ndim == 2:
        x = x.mean(axis=1)
    if file_rate != sample_rate:
        g = math.gcd(sample_rate, file_rate)
        x = scipy.signal.resample_poly(x, sample_rate // g, file_rate // g)
    x = np.clip(x, -1.0, 1.0)
    return AudioClip(samples=x, sample_rate=sample_rate)


def save_wav(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono WAV."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype(np.int16)
    try:
        scipy.io.wavfile.write(path, clip.sample_rate, pcm)
    except Exception as exc:
        raise AudioIOError(f"cannot write WAV file {path}: {exc}")


def mel_filterbank(params: MelParams) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, fft_size // 2 + 1)."""

    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)

    n_freqs = params.fft_size // 2 + 1
    freqs = np.linspace(0.0, params.sample_rate / 2.0, n_freqs)
    mel_pts = np.linspace(hz_to_mel(params.fmin), hz_to_mel(params.effective_fmax), params.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)

    fb = np.zeros((params.n_mels, n_freqs), dtype=np.float64)
    for m in range(params.n_mels):
        lo, ctr, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (freqs - lo) / max(ctr - lo, 1e-8)
        down = (hi - freqs) / max(hi - ctr, 1e-8)
        fb[m] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def _window(params: MelParams) -> np.ndarray:
    return scipy.signal.get_window("hann", params.win_length, fftbins=True)


def stft(samples: np.ndarray, params: MelParams) -> np.ndarray:
    """Uncentered STFT, shape (T, fft_size // 2 + 1), complex."""
    n = len(samples)
    if n < params.win_length:
        raise ValidationError(
            f"clip of {n} samples is shorter than one window ({params.win_length})"
        )
    n_frames = 1 + (n - params.win_length) // params.hop_length
    win = _window(params)
    idx = np.arange(params.win_length)[None, :] + params.hop_length * np.arange(n_frames)[:, None]
    frames = samples[idx] * win[None, :]
    return np.fft.rfft(frames, n=params.fft_size, axis=1)


def istft(spec: np.ndarray, params: MelParams) -> np.ndarray:
    """Windowed overlap-add inverse of `stft`; length (T-1)*hop + win."""
    n_frames = spec.shape[0]
    win = _window(params)
    out_len = (n_frames - 1) * params.hop_length + params.win_length
    out = np.zeros(out_len)
    norm = np.zeros(out_len)
    frames = np.fft.irfft(spec, n=params.fft_size, axis=1)[:, : params.win_length]
    for i in range(n_frames):
        s = i * params.hop_length
        out[s : s + params.win_length] += frames[i] * win
        norm[s : s + params.win_length] += win**2
    return out / np.maximum(norm, 1e-10)


def mel_spectrogram(clip: AudioClip, params: MelParams | None = None) -> MelSpectrogram:
    """Log-mel analysis: log(mel_power + floor_epsilon), shape (T, n_mels)."""
    params = params or MelParams()
    if params.sample_rate != clip.sample_rate:
        raise ValidationError(
            f"clip rate {clip.sample_rate} != analysis rate {params.sample_rate}"
        )
    spec = stft(np.asarray(clip.samples, dtype=np.float64), params)
    power = np.abs(spec) ** 2
    mel_power = power @ mel_filterbank(params).T
    frames = np.log(mel_power + params.floor_epsilon).astype(np.float32)
    return MelSpectrogram(frames=frames, params=params, log_scaled=True)


def invert_mel(spec: MelSpectrogram, iterations: int = 60) -> AudioClip:
    """Griffin-Lim phase reconstruction from a log-mel spectrogram.

    Stands in for a neural vocoder; deterministic (zero-phase init).
    """
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    params = spec.params
    mel_power = np.maximum(np.exp(spec.frames.astype(np.float64)) - params.floor_epsilon, 0.0)
    fb = mel_filterbank(params)
    power = np.clip(mel_power @ np.linalg.pinv(fb).T, 0.0, None)
    mag = np.sqrt(power)

    phase = np.zeros_like(mag)
    for _ in range(iterations):
        x = istft(mag * np.exp(1j * phase), params)
        rebuilt = stft(x, params)
        phase = np.angle(rebuilt)
    x = istft(mag * np.exp(1j * phase), params)
    peak = np.max(np.abs(x))
    if peak > 1.0:
        x = x / peak
    return AudioClip(samples=x, sample_rate=params.sample_rate)


def fit_frames(
    spec: MelSpectrogram, policy: FrameWindowPolicy, rng_seed: int = 0
) -> MelSpectrogram:
    """Crop or right-pad to exactly policy.target_frames frames."""
    t, target = spec.n_frames, policy.target_frames
    pad_value = policy.pad_value
    if pad_value is None:
        pad_value = float(np.log(spec.params.floor_epsilon))
    if t == target:
        return spec
    if t > target:
        if policy.crop_rule == "random_window":
            start = int(np.random.default_rng(rng_seed).integers(0, t - target + 1))
        else:
            start = 0
        frames = spec.frames[start : start + target]
    else:
        pad = np.full((target - t, spec.n_bins), pad_value, dtype=spec.frames.dtype)
        frames = np.concatenate([spec.frames, pad], axis=0)
    return replace(spec, frames=frames)
