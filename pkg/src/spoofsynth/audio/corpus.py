"""AISHELL-3 shaped corpus handling.

A corpus directory holds ``metadata.txt`` (``utterance_id|speaker_id|text``
per line) and ``wav/<utterance_id>.wav`` files.
"""
import logging
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from ..exceptions import BadFormat, SpeakerTooSmall
from .clip import normalize_volume, read_wav, resample, write_wav

logger = logging.getLogger(__name__)

METADATA = "metadata.txt"
WAV_DIR = "wav"


@dataclass(frozen=True)
class CorpusEntry:
    utterance_id: str
    speaker_id: str
    text: str
    audio_path: Path


def read_metadata(corpus_dir):
    corpus_dir = Path(corpus_dir)
    path = corpus_dir / METADATA
    if not path.is_file():
        raise BadFormat(f"missing metadata file {path}")
    entries, seen = [], set()
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 3 or not parts[0] or not parts[1]:
            raise BadFormat(f"{path}:{lineno}: expected 'utterance_id|speaker_id|text'")
        utt, spk, text = parts
        if utt in seen:
            raise BadFormat(f"{path}:{lineno}: duplicate utterance id {utt!r}")
        seen.add(utt)
        entries.append(CorpusEntry(utt, spk, text, corpus_dir / WAV_DIR / f"{utt}.wav"))
    return entries


def write_metadata(path, entries):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            fh.write(f"{e.utterance_id}|{e.speaker_id}|{e.text}\n")


def split_per_speaker(corpus, seed=0):
    """Hold out exactly one utterance per speaker for validation."""
    by_speaker = defaultdict(list)
    for entry in corpus:
        by_speaker[entry.speaker_id].append(entry)
    rng = random.Random(seed)
    held_out = set()
    for spk in sorted(by_speaker):
        utts = by_speaker[spk]
        if len(utts) < 2:
            raise SpeakerTooSmall(spk)
        held_out.add(rng.choice(sorted(u.utterance_id for u in utts)))
    train = [e for e in corpus if e.utterance_id not in held_out]
    valid = [e for e in corpus if e.utterance_id in held_out]
    return train, valid


def prepare_corpus(in_dir, out_dir, rate=16000, peak_dbfs=-3.0, seed=0):
    """Resample and peak-normalize every utterance, then write the split lists."""
    out_dir = Path(out_dir)
    (out_dir / WAV_DIR).mkdir(parents=True, exist_ok=True)
    entries = read_metadata(in_dir)
    for entry in entries:
        clip = normalize_volume(resample(read_wav(entry.audio_path), rate), peak_dbfs)
        write_wav(out_dir / WAV_DIR / f"{entry.utterance_id}.wav", clip)
    write_metadata(out_dir / METADATA, entries)
    train, valid = split_per_speaker(entries, seed)
    write_metadata(out_dir / "train.txt", train)
    write_metadata(out_dir / "valid.txt", valid)
    logger.info("prepared %d utterances (%d train / %d valid)", len(entries), len(train), len(valid))
    return train, valid


def read_split(corpus_dir, name):
    """Entries listed in ``train.txt`` or ``valid.txt`` of a prepared corpus."""
    corpus_dir = Path(corpus_dir)
    index = {e.utterance_id: e for e in read_metadata(corpus_dir)}
    path = corpus_dir / f"{name}.txt"
    if not path.is_file():
        raise BadFormat(f"missing split file {path}")
    ids = [line.split("|", 1)[0] for line in path.read_text(encoding="utf-8").splitlines() if line]
    return [index[i] for i in ids]
