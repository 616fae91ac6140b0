"""Audio clips, WAV I/O, resampling and peak normalization."""
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile

from ..exceptions import BadFormat, SilentClip

SILENCE_PEAK = 1e-8
# Kaiser beta for the polyphase anti-aliasing filter; ~90 dB stopband
RESAMPLE_WINDOW = ("kaiser", 9.0)


@dataclass(frozen=True, eq=False)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise BadFormat(f"audio must be mono, got shape {samples.shape}")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise BadFormat(f"sample rate must be a positive integer, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise BadFormat("audio contains non-finite samples")
        if samples.size and np.max(np.abs(samples)) > 1.0:
            raise BadFormat("audio samples must lie in [-1, 1]")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    @property
    def peak(self):
        return float(np.max(np.abs(self.samples))) if self.samples.size else 0.0


def peak_dbfs(clip, floor_db=-120.0):
    peak = clip.peak
    return max(20.0 * np.log10(peak), floor_db) if peak > 0 else floor_db


def read_wav(path):
    """Read a mono PCM-16 WAV file; anything else raises ``BadFormat``."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except (OSError, ValueError) as exc:
        raise BadFormat(f"cannot read WAV {path}: {exc}") from exc
    if data.dtype != np.int16:
        raise BadFormat(f"{path}: expected PCM-16, got {data.dtype}")
    if data.ndim != 1:
        raise BadFormat(f"{path}: expected mono, got {data.shape[1]} channels")
    return AudioClip(data.astype(np.float64) / 32768.0, rate)


def write_wav(path, clip):
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype(np.int16)
    wavfile.write(Path(path), clip.sample_rate, pcm)


def resample(clip, target_rate):
    """Band-limited resampling with a Kaiser-windowed sinc polyphase filter.

    Output length is ``round(n * target / source)``, so duration is kept to
    within half an output sample.
    """
    if target_rate <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    ratio = Fraction(int(target_rate), clip.sample_rate)
    out = signal.resample_poly(clip.samples, ratio.numerator, ratio.denominator,
                               window=RESAMPLE_WINDOW)
    out = out[:int(Fraction(len(clip)) * ratio + Fraction(1, 2))]
    # filter overshoot can leave the [-1, 1] range
    return AudioClip(np.clip(out, -1.0, 1.0), int(target_rate))


def normalize_volume(clip, target_peak_dbfs=-3.0):
    """Scale the clip so that its peak sits at ``target_peak_dbfs``."""
    peak = clip.peak
    if peak < SILENCE_PEAK:
        raise SilentClip(f"peak {peak:.3g} is below {SILENCE_PEAK:g}")
    target = 10.0 ** (target_peak_dbfs / 20.0)
    if target > 1.0:
        raise ValueError(f"target peak {target_peak_dbfs} dBFS exceeds full scale")
    return AudioClip(clip.samples * (target / peak), clip.sample_rate)
