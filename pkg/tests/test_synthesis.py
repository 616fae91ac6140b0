import numpy as np
import pytest
import torch

from spoofsynth.audio import AudioClip, peak_dbfs
from spoofsynth.exceptions import FingerprintMismatch, NegativeNoise, NegativeScale, TooShort, UnknownSpeaker
from spoofsynth.model.vits import DurationSample
from spoofsynth.synthesis import (SynthesisParams, SynthesisResult, silence_ratio, speech_rate,
                                  synthesize, utterance_seed)

TEXT = "今天天气很好"
LONG_TEXT = "我们明天去北京，他在银行工作。这个问题很重要，大家一起吃饭。"


def test_params_validation():
    with pytest.raises(NegativeScale):
        SynthesisParams(ns=-0.1)
    with pytest.raises(NegativeNoise):
        SynthesisParams(nsd=-0.1)
    with pytest.raises(ValueError):
        SynthesisParams(length_scale=0)


# --- analytics -------------------------------------------------------------------------

def test_silence_ratio_extremes(rng):
    assert silence_ratio(AudioClip(np.zeros(16000), 16000)) == 1.0
    assert silence_ratio(AudioClip(rng.uniform(-1, 1, 16000), 16000)) == 0.0
    with pytest.raises(TooShort):
        silence_ratio(AudioClip(np.zeros(100), 16000))


def test_silence_ratio_half():
    t = np.arange(16000) / 16000
    clip = AudioClip(np.concatenate([np.zeros(16000), 0.5 * np.sin(2 * np.pi * 440 * t)]), 16000)
    frames = 1 + (len(clip) - 400) // 160
    assert abs(silence_ratio(clip) - 0.5) <= 1 / frames + 1e-12


def test_silence_ratio_after_scaling_is_threshold_relative(rng):
    loud = AudioClip(rng.uniform(-1, 1, 8000) * np.repeat([1.0, 0.001], 4000), 16000)
    assert 0 < silence_ratio(loud) < 1


def test_speech_rate_arithmetic():
    result = SynthesisResult(AudioClip(np.zeros(32000), 16000), np.ones(10, dtype=int), 1.0, 0.0)
    assert speech_rate(result) == 5.0
    halved = SynthesisResult(AudioClip(np.zeros(16000), 16000), np.ones(10, dtype=int), 1.0, 0.0)
    assert speech_rate(halved) == 2 * speech_rate(result)


def test_utterance_seeds_differ():
    assert len({utterance_seed(3, i) for i in range(100)}) == 100


# --- synthesis on an untrained model ---------------------------------------------------

@pytest.fixture(scope="module")
def fresh_model():
    from spoofsynth.model import VITS

    torch.manual_seed(0)
    return VITS().eval()


def test_untrained_synthesis_contracts(fresh_model, frontend):
    for seed in range(5):
        r = synthesize(TEXT, SynthesisParams(seed=seed), fresh_model, frontend)
        assert int(r.durations_frames.sum()) * fresh_model.cfg.hop == len(r.clip)
        assert abs(peak_dbfs(r.clip) + 3.0) < 0.01
        assert 0.0 <= r.silence_ratio <= 1.0


def test_fingerprint_and_speaker_checks(fresh_model, frontend):
    with pytest.raises(FingerprintMismatch):
        synthesize(TEXT, SynthesisParams(), fresh_model, frontend, symbol_table_version="sha256:bad")
    with pytest.raises(UnknownSpeaker):
        synthesize(TEXT, SynthesisParams(speaker_id=99), fresh_model, frontend)


def test_length_scale_mechanics_with_controlled_durations(fresh_model, frontend, monkeypatch):
    """With durations the floor never touches, halving the tempo doubles the rate."""
    def fixed(hidden, nsd, generator=None, speaker=None):
        n = hidden.shape[0]
        return DurationSample(torch.log(torch.linspace(6.0, 14.0, n)), float(nsd))

    monkeypatch.setattr(fresh_model, "duration_sample", fixed)
    slow = synthesize(LONG_TEXT, SynthesisParams(0, 0), fresh_model, frontend)
    fast = synthesize(LONG_TEXT, SynthesisParams(0, 0, length_scale=0.5), fresh_model, frontend)
    ratio = fast.phonemes_per_second / slow.phonemes_per_second
    assert abs(ratio / 2.0 - 1) < 0.02


# --- synthesis on the smoke-trained model ---------------------------------------------

def test_zero_noise_is_deterministic(trained_model, frontend):
    a = synthesize(TEXT, SynthesisParams(0, 0, seed=1), trained_model, frontend)
    b = synthesize(TEXT, SynthesisParams(0, 0, seed=2), trained_model, frontend)
    assert np.array_equal(a.clip.samples, b.clip.samples)


def test_fixed_seed_is_deterministic(trained_model, frontend):
    a = synthesize(TEXT, SynthesisParams(seed=4), trained_model, frontend)
    b = synthesize(TEXT, SynthesisParams(seed=4), trained_model, frontend)
    assert np.array_equal(a.clip.samples, b.clip.samples)


def test_sample_count_and_peak_on_every_output(trained_model, frontend):
    for i, (ns, nsd) in enumerate([(0.1, 0.3), (0.667, 0.8), (0.0, 0.0), (1.0, 1.0)]):
        r = synthesize(TEXT, SynthesisParams(ns, nsd, seed=i), trained_model, frontend)
        assert int(r.durations_frames.sum()) * trained_model.cfg.hop == len(r.clip)
        assert abs(peak_dbfs(r.clip) + 3.0) < 0.01


def test_smaller_noise_scales_give_shorter_median_duration(trained_model, frontend):
    def median_samples(ns, nsd):
        return np.median([len(synthesize(TEXT, SynthesisParams(ns, nsd, seed=s), trained_model,
                                         frontend).clip) for s in range(100)])

    assert median_samples(0.1, 0.3) < median_samples(0.667, 0.8)


def length_scale_ratio(model, frontend, text=LONG_TEXT):
    slow = synthesize(text, SynthesisParams(0.667, 0.8, seed=0), model, frontend)
    fast = synthesize(text, SynthesisParams(0.667, 0.8, seed=0, length_scale=0.5), model, frontend)
    return fast.phonemes_per_second / slow.phonemes_per_second


def test_length_scale_speeds_up_trained_model(trained_model, frontend):
    assert length_scale_ratio(trained_model, frontend) > 1.0
