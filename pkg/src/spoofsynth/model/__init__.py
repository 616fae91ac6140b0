"""VITS-style synthesizer: encoders, flow, alignment, duration model, decoder."""
from .config import ModelConfig
from .mas import AlignmentPath, mas_align, maximum_path
from .vits import VITS, DurationSample, PriorStats, build_discriminator, durations_from_log

__all__ = [
    "AlignmentPath", "DurationSample", "ModelConfig", "PriorStats", "VITS",
    "build_discriminator", "durations_from_log", "mas_align", "maximum_path",
]
