"""STFT magnitude and log-mel spectrograms.

The torch functions are differentiable and batched; ``spectrogram`` is the
numpy-facing wrapper used by the data pipeline.
"""
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import torch

from ..exceptions import TooShort


@dataclass(frozen=True)
class SpectrogramParams:
    n_fft: int = 1024
    hop: int = 256
    win: int = 1024
    sample_rate: int = 16000
    n_mels: int = 80
    fmin: float = 0.0
    fmax: float = 8000.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if self.win > self.n_fft:
            raise ValueError("win must not exceed n_fft")
        if self.fmax > self.sample_rate / 2:
            raise ValueError("fmax above Nyquist")

    @property
    def n_bins(self):
        return self.n_fft // 2 + 1

    def num_frames(self, num_samples):
        return 1 + (num_samples - self.win) // self.hop

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    frames: np.ndarray
    kind: str
    params: SpectrogramParams

    @property
    def num_frames(self):
        return self.frames.shape[0]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


@lru_cache(maxsize=8)
def mel_filterbank(params):
    """Triangular HTK-scale filters, area-normalized; shape [n_mels, n_bins]."""
    bin_freqs = np.linspace(0.0, params.sample_rate / 2, params.n_bins)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(params.fmin), _hz_to_mel(params.fmax),
                                   params.n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_freqs[None, :] - lower) / (center - lower)
    down = (upper - bin_freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(up, down))
    fb *= (2.0 / (upper - lower))
    return fb


@lru_cache(maxsize=8)
def _window(win):
    return torch.hann_window(win, periodic=True, dtype=torch.float64)


def stft_magnitude(wave, params, eps=1e-12):
    """|STFT| of ``wave`` [..., T] without centering -> [..., frames, n_bins]."""
    if wave.shape[-1] < params.win:
        raise TooShort(f"need at least {params.win} samples, got {wave.shape[-1]}")
    frames = wave.unfold(-1, params.win, params.hop)
    frames = frames * _window(params.win).to(wave.dtype)
    spec = torch.fft.rfft(frames, n=params.n_fft)
    return torch.sqrt(spec.real ** 2 + spec.imag ** 2 + eps)


def log_mel(magnitude, params):
    fb = torch.as_tensor(mel_filterbank(params), dtype=magnitude.dtype)
    mel = magnitude @ fb.T
    return torch.log(torch.clamp(mel, min=params.log_floor))


def padded_for_frames(wave, params):
    """Reflect-pad so that a wave of ``k * hop`` samples yields ``k`` frames."""
    pad = (params.win - params.hop) // 2
    extra = (params.win - params.hop) % 2
    squeeze = wave.dim() == 1
    x = wave.unsqueeze(0) if squeeze else wave
    x = torch.nn.functional.pad(x.unsqueeze(1), (pad, pad + extra), mode="reflect").squeeze(1)
    return x.squeeze(0) if squeeze else x


def mel_frames(wave, params):
    """Log-mel with one frame per ``hop`` samples; used for reconstruction."""
    return log_mel(stft_magnitude(padded_for_frames(wave, params), params), params)


def linear_frames(wave, params):
    return stft_magnitude(padded_for_frames(wave, params), params)


def spectrogram(clip, params=SpectrogramParams(), kind="linear"):
    """Center-less spectrogram of an :class:`AudioClip`.

    ``num_frames == 1 + (len - win) // hop``.
    """
    if kind not in ("linear", "mel"):
        raise ValueError(f"kind must be 'linear' or 'mel', got {kind!r}")
    if clip.sample_rate != params.sample_rate:
        raise ValueError(f"clip rate {clip.sample_rate} != params rate {params.sample_rate}")
    wave = torch.from_numpy(clip.samples)
    mag = stft_magnitude(wave, params)
    out = log_mel(mag, params) if kind == "mel" else mag
    return Spectrogram(out.numpy(), kind, params)
