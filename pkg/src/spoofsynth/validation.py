"""Input validation helpers shared by the estimator wrappers and the CLI."""
import math

import numpy as np

from .audio.clip import AudioClip
from .exceptions import BadFormat, DataError


def check_clip(x, sample_rate=None):
    """Coerce ``x`` to an :class:`AudioClip`.

    Accepts a clip, or a 1-D array when ``sample_rate`` is given.
    """
    if isinstance(x, AudioClip):
        return x
    if sample_rate is None:
        raise BadFormat(f"expected AudioClip, got {type(x).__name__} without a sample rate")
    return AudioClip(np.asarray(x, dtype=np.float64), sample_rate)


def check_clips(X, sample_rate=None):
    if isinstance(X, AudioClip):
        return [X]
    return [check_clip(x, sample_rate) for x in X]


def check_texts(X):
    if isinstance(X, str):
        return [X]
    texts = list(X)
    for t in texts:
        if not isinstance(t, str):
            raise BadFormat(f"expected text, got {type(t).__name__}")
    return texts


def check_scalar(value, name, *, minimum=None, strict=False, exc=DataError):
    """Finite real ``value`` with an optional lower bound."""
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise exc(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value):
        raise exc(f"{name} must be finite, got {value}")
    if minimum is not None and (value <= minimum if strict else value < minimum):
        op = ">" if strict else ">="
        raise exc(f"{name} must be {op} {minimum}, got {value}")
    return value


def check_scores(scores, name):
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if not np.all(np.isfinite(arr)):
        raise BadFormat(f"{name} contains non-finite scores")
    return arr
