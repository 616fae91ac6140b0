"""Mandarin text-to-speech spoofing toolkit."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .exceptions import DataError, RuntimeFailure, SpoofSynthError, UsageError
from .frontend import TextFrontend

__all__ = ["DataError", "RuntimeFailure", "SpoofSynthError", "TextFrontend", "UsageError",
           "__version__"]
