"""A tiny synthetic Mandarin corpus for smoke training and CLI demos.

Each syllable is rendered as an optional noise burst (the initial) followed
by a harmonic segment whose pitch follows the lexical tone contour and whose
spectral tilt depends on the final.  Nothing about it sounds like speech, but
it has the structure a TTS model must learn: text-dependent timing, pitch and
timbre, and per-speaker pitch range.
"""
from pathlib import Path

import numpy as np

from ..frontend import PronunciationLexicon, g2p, normalize_text
from .clip import AudioClip, write_wav
from .corpus import METADATA, WAV_DIR, CorpusEntry, write_metadata

TEXTS = (
    "今天天气很好", "我们明天去北京", "他在银行工作", "我喜欢音乐",
    "请重新说一遍", "孩子长大了", "这个问题很重要", "共有32个学生",
    "老师说话很慢", "大家一起吃饭", "房间里没有人", "声音合成系统",
    "我的朋友在上海", "时间过得很快", "中文很有意思", "电话响了2次",
)
SPEAKERS = ("SSB0001", "SSB0002", "SSB0003", "SSB0004")
_BASE_F0 = (110.0, 150.0, 200.0, 240.0)

# relative pitch at start/middle/end of the syllable
_TONE_CONTOURS = {1: (1.25, 1.25, 1.25), 2: (0.95, 1.05, 1.3), 3: (0.9, 0.75, 0.95),
                  4: (1.35, 1.1, 0.8), 5: (1.0, 0.95, 0.9)}
_VOICED_INITIALS = set("mnlrwy")


def _syllable_audio(syl, f0, rate, rng, tempo):
    parts = []
    if syl.initial:
        n = int(rate * (0.035 if syl.initial in _VOICED_INITIALS else 0.05) * tempo)
        if syl.initial in _VOICED_INITIALS:
            t = np.arange(n) / rate
            parts.append(0.25 * np.sin(2 * np.pi * f0 * t))
        else:
            burst = rng.standard_normal(n) * np.hanning(n)
            parts.append(0.15 * burst)
    dur = (0.09 if syl.tone == 5 else 0.16 + 0.01 * len(syl.final)) * tempo
    n = int(rate * dur)
    contour = np.interp(np.linspace(0, 2, n), [0, 1, 2], _TONE_CONTOURS[syl.tone]) * f0
    phase = 2 * np.pi * np.cumsum(contour) / rate
    # spectral tilt keyed on the final's first letter gives vowel-like timbre
    tilt = 0.4 + 0.1 * "aeiouv".index(syl.final[0])
    wave = sum(tilt ** (h - 1) * np.sin(h * phase) for h in range(1, 9))
    env = np.minimum(1.0, np.minimum(np.arange(n), np.arange(n)[::-1]) / (0.01 * rate))
    parts.append(0.3 * wave * env / 2.5)
    return np.concatenate(parts)


def render(text, speaker_index, rate=44100, seed=0, lexicon=None):
    lexicon = lexicon or PronunciationLexicon.default()
    seq = g2p(normalize_text(text), lexicon)
    rng = np.random.default_rng(seed)
    f0 = _BASE_F0[speaker_index % len(_BASE_F0)]
    tempo = 0.9 + 0.1 * (speaker_index % 3)
    lead = np.zeros(int(0.15 * rate))
    pieces = [lead]
    for i, syl in enumerate(seq.syllables):
        pieces.append(_syllable_audio(syl, f0, rate, rng, tempo))
        if i % 3 == 2:
            pieces.append(np.zeros(int(0.06 * rate)))
    pieces.append(lead)
    wave = np.concatenate(pieces)
    wave = wave + 1e-3 * rng.standard_normal(wave.size)
    wave *= 0.5 / np.max(np.abs(wave))
    return AudioClip(wave, rate)


def make_synthetic_corpus(out_dir, rate=44100, seed=0):
    """Write the 16-utterance corpus (4 speakers x 4 texts) to ``out_dir``."""
    out_dir = Path(out_dir)
    (out_dir / WAV_DIR).mkdir(parents=True, exist_ok=True)
    entries = []
    for i, text in enumerate(TEXTS):
        spk_index = i % len(SPEAKERS)
        utt = f"{SPEAKERS[spk_index]}{i:04d}"
        path = out_dir / WAV_DIR / f"{utt}.wav"
        write_wav(path, render(text, spk_index, rate, seed + i))
        entries.append(CorpusEntry(utt, SPEAKERS[spk_index], text, path))
    write_metadata(out_dir / METADATA, entries)
    return entries
