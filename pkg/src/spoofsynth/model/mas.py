"""Monotonic alignment search."""
from dataclasses import dataclass

import numpy as np
import torch

from ..exceptions import InfeasibleShape


@dataclass(frozen=True, eq=False)
class AlignmentPath:
    """0/1 matrix [phonemes, frames]; every frame belongs to exactly one phoneme."""

    assignment: np.ndarray

    @property
    def durations(self):
        return self.assignment.sum(axis=1)

    @property
    def frame_to_phoneme(self):
        return self.assignment.argmax(axis=0)

    def check(self):
        a = self.assignment
        if not np.all(a.sum(axis=0) == 1):
            raise AssertionError("a frame is assigned to zero or several phonemes")
        idx = self.frame_to_phoneme
        steps = np.diff(idx)
        if idx[0] != 0 or idx[-1] != a.shape[0] - 1 or np.any((steps != 0) & (steps != 1)):
            raise AssertionError("path is not monotone and surjective")
        return self


def mas_align(log_lik):
    """Best monotone phoneme-to-frame path through ``log_lik`` [phonemes, frames].

    Among equally scoring paths the one whose phoneme transitions happen
    earliest (lexicographically smallest tuple of transition frames) wins.
    """
    v = np.asarray(log_lik, dtype=np.float64)
    n, t = v.shape
    if n == 0 or n > t:
        raise InfeasibleShape(f"cannot align {n} phonemes to {t} frames")
    # best[i, j]: score of frames j..t-1 given frame j sits on phoneme i
    best = np.full((n, t), -np.inf)
    best[n - 1, t - 1] = v[n - 1, t - 1]
    for j in range(t - 2, -1, -1):
        nxt = best[:, j + 1]
        advance = np.append(nxt[1:], -np.inf)
        best[:, j] = v[:, j] + np.maximum(nxt, advance)

    path = np.zeros((n, t), dtype=np.int8)
    i = 0
    path[0, 0] = 1
    for j in range(1, t):
        if i + 1 < n and best[i + 1, j] >= best[i, j]:
            i += 1
        path[i, j] = 1
    return AlignmentPath(path)


def maximum_path(log_lik, text_lengths, frame_lengths):
    """Batched :func:`mas_align` on a torch tensor [B, T_text, T_frames]."""
    values = log_lik.detach().cpu().double().numpy()
    out = np.zeros(values.shape, dtype=np.float32)
    for b in range(values.shape[0]):
        nt, nf = int(text_lengths[b]), int(frame_lengths[b])
        out[b, :nt, :nf] = mas_align(values[b, :nt, :nf]).assignment
    return torch.from_numpy(out).to(log_lik.dtype)
