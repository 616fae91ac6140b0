"""Noise-scale parameterized inference plus silence and speed analytics."""
from dataclasses import dataclass

import numpy as np
import torch

from .audio.clip import AudioClip, normalize_volume
from .exceptions import FingerprintMismatch, NegativeNoise, NegativeScale, TooShort, UnknownSpeaker
from .model.vits import durations_from_log


@dataclass(frozen=True)
class SynthesisParams:
    ns: float = 0.667
    nsd: float = 0.8
    speaker_id: int = 0
    seed: int = 0
    length_scale: float = 1.0

    def __post_init__(self):
        if self.ns < 0:
            raise NegativeScale(f"ns must be >= 0, got {self.ns}")
        if self.nsd < 0:
            raise NegativeNoise(f"nsd must be >= 0, got {self.nsd}")
        if self.length_scale <= 0:
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    clip: AudioClip
    durations_frames: np.ndarray
    silence_ratio: float
    phonemes_per_second: float
    text: str = ""

    @property
    def num_phonemes(self):
        return len(self.durations_frames)


def silence_ratio(clip, frame_ms=25.0, hop_ms=10.0, threshold_dbfs=-40.0):
    """Fraction of analysis frames whose RMS falls below ``threshold_dbfs``."""
    frame = int(round(clip.sample_rate * frame_ms / 1000))
    hop = int(round(clip.sample_rate * hop_ms / 1000))
    if len(clip) < frame:
        raise TooShort(f"clip of {len(clip)} samples is shorter than one {frame}-sample frame")
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, frame)[::hop]
    rms = np.sqrt(np.mean(frames ** 2, axis=1))
    threshold = 10.0 ** (threshold_dbfs / 20.0)
    return float(np.mean(rms < threshold))


def speech_rate(result):
    """Phonemes (model input tokens) per second of output audio."""
    return result.num_phonemes / result.clip.duration


def utterance_seed(seed, index):
    return (int(seed) * 1_000_003 + int(index)) % (2 ** 63)


def synthesize(text, params, model, frontend, sample_rate=16000, peak_dbfs=-3.0,
               symbol_table_version=None, utterance_index=0):
    """Text -> normalized waveform with per-phoneme durations and analytics.

    frontend -> prior encoder -> duration sampling (nsd) -> expansion ->
    prior sampling (ns) -> inverse flow -> decoder -> peak normalization.
    """
    if symbol_table_version is not None and symbol_table_version != frontend.table_.version:
        raise FingerprintMismatch(
            f"model expects symbol table {symbol_table_version}, frontend has {frontend.table_.version}")
    if not 0 <= params.speaker_id < model.cfg.num_speakers:
        raise UnknownSpeaker(f"speaker {params.speaker_id} outside 0..{model.cfg.num_speakers - 1}")
    seq = frontend.phonemize(text)
    gen = torch.Generator().manual_seed(utterance_seed(params.seed, utterance_index))
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            hidden, stats = model.prior_encode(list(seq.ids), params.speaker_id)
            dur = model.duration_sample(hidden, params.nsd, gen, params.speaker_id)
            frames = durations_from_log(dur.log_durations.double().numpy(), params.length_scale)
            z_p = model.sample_prior_latent(model.expand(stats, frames), params.ns, gen)
            z = model.flow_inverse(z_p, params.speaker_id)
            wave = model.decode(z, params.speaker_id).double().numpy()
    finally:
        model.train(was_training)
    clip = normalize_volume(AudioClip(wave, sample_rate), peak_dbfs)
    result = SynthesisResult(clip, frames, silence_ratio(clip), 0.0, text)
    return SynthesisResult(clip, frames, result.silence_ratio, speech_rate(result), text)
