"""Audio I/O, corpus ingestion and spectrogram extraction."""
from .clip import AudioClip, normalize_volume, peak_dbfs, read_wav, resample, write_wav
from .corpus import CorpusEntry, prepare_corpus, read_metadata, read_split, split_per_speaker
from .spectrogram import Spectrogram, SpectrogramParams, spectrogram

__all__ = [
    "AudioClip", "CorpusEntry", "Spectrogram", "SpectrogramParams", "normalize_volume",
    "peak_dbfs", "prepare_corpus", "read_metadata", "read_split", "read_wav", "resample",
    "spectrogram", "split_per_speaker", "write_wav",
]
