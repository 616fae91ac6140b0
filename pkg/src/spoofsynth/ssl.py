"""wav2vec-2.0-style feature extractor and the feature-matching constraint loss.

The extractor is a strided convolutional feature encoder followed by a
convolutional positional embedding and a stack of transformer blocks.
``tap_layer`` selects which representation is exposed: 0 is the projected
convolutional output, ``k >= 1`` the output of transformer block ``k``.
"""
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .container import arrays_to_state_dict, load_container, save_container, state_dict_to_arrays
from .exceptions import BadFormat, BadLayer, ShapeMismatch, TooShort
from .model.layers import AttentionBlock

SSL_HEADER = "spoofsynth-ssl-v1"


@dataclass(frozen=True)
class SSLConfig:
    conv_kernels: tuple = (10, 8, 4, 4)
    conv_strides: tuple = (5, 4, 2, 2)
    conv_channels: int = 32
    transformer_layers: int = 2
    transformer_dim: int = 64
    n_heads: int = 2
    ffn_dim: int = 128
    pos_kernel: int = 15
    tap_layer: int = 1

    def __post_init__(self):
        if len(self.conv_kernels) != len(self.conv_strides):
            raise ValueError("one kernel per conv stride")
        if self.transformer_layers < 1:
            raise ValueError("need at least one transformer layer")
        if not 0 <= self.tap_layer <= self.transformer_layers:
            raise BadLayer(f"tap_layer {self.tap_layer} outside 0..{self.transformer_layers}")

    @property
    def feature_hop(self):
        return int(np.prod(self.conv_strides))

    def num_frames(self, num_samples):
        n = num_samples
        for k, s in zip(self.conv_kernels, self.conv_strides):
            n = (n - k) // s + 1
        return n

    def min_samples(self):
        n = 1
        for k, s in reversed(list(zip(self.conv_kernels, self.conv_strides))):
            n = (n - 1) * s + k
        return n

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items() if k in names})


class SSLExtractor(nn.Module):
    def __init__(self, cfg=None):
        super().__init__()
        cfg = cfg or SSLConfig()
        self.cfg = cfg
        convs = []
        cin = 1
        for k, s in zip(cfg.conv_kernels, cfg.conv_strides):
            convs.append(nn.Conv1d(cin, cfg.conv_channels, k, s, bias=False))
            cin = cfg.conv_channels
        self.convs = nn.ModuleList(convs)
        self.first_norm = nn.GroupNorm(cfg.conv_channels, cfg.conv_channels)
        self.feat_norm = nn.LayerNorm(cfg.conv_channels)
        self.proj = nn.Linear(cfg.conv_channels, cfg.transformer_dim)
        self.pos_conv = nn.Conv1d(cfg.transformer_dim, cfg.transformer_dim, cfg.pos_kernel,
                                  padding=cfg.pos_kernel // 2, groups=4)
        self.enc_norm = nn.LayerNorm(cfg.transformer_dim)
        self.blocks = nn.ModuleList([
            AttentionBlock(cfg.transformer_dim, cfg.n_heads, cfg.ffn_dim, ffn_kernel=1)
            for _ in range(cfg.transformer_layers)])

    def forward(self, wave, tap_layer=None):
        """wave [B, T] -> features [B, T_feat, transformer_dim]."""
        tap = self.cfg.tap_layer if tap_layer is None else tap_layer
        if not 0 <= tap <= self.cfg.transformer_layers:
            raise BadLayer(f"tap_layer {tap} outside 0..{self.cfg.transformer_layers}")
        if wave.size(-1) < self.cfg.min_samples():
            raise TooShort(f"need at least {self.cfg.min_samples()} samples, got {wave.size(-1)}")
        x = wave[:, None, :]
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i == 0:
                x = self.first_norm(x)
            x = F.gelu(x)
        x = self.proj(self.feat_norm(x.transpose(1, 2)))
        if tap == 0:
            return x
        x = self.enc_norm(x + F.gelu(self.pos_conv(x.transpose(1, 2))).transpose(1, 2))
        for block in self.blocks[:tap]:
            x = block(x)
        return x

    def freeze(self):
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)
        return self

    def save(self, path):
        save_container(path, SSL_HEADER, {"ssl_config": self.cfg.to_dict()},
                       state_dict_to_arrays(self.state_dict()))


def extract_features(extractor, clip_or_wave, tap_layer=None):
    """Features [T_feat, dim] of one clip (AudioClip, numpy array or 1-D tensor)."""
    samples = getattr(clip_or_wave, "samples", clip_or_wave)
    wave = torch.as_tensor(samples, dtype=next(extractor.parameters()).dtype)
    return extractor(wave.reshape(1, -1), tap_layer)[0]


class ConstraintLoss(NamedTuple):
    value: torch.Tensor
    num_samples: int


def constraint_loss(extractor, real, fake):
    """Mean squared error between extractor features of real and fake audio.

    Both waveforms ([T] or [B, T]) are trimmed to the shorter length first;
    the trimmed length is returned alongside the loss.  Gradients reach
    ``fake`` and, if it requires grad, ``real``; never the extractor itself
    once frozen.
    """
    real = getattr(real, "samples", real)
    fake = getattr(fake, "samples", fake)
    dtype = next(extractor.parameters()).dtype
    real = torch.as_tensor(real, dtype=dtype)
    fake = torch.as_tensor(fake, dtype=dtype)
    if real.dim() == 1:
        real, fake = real[None], fake[None]
    n = min(real.size(-1), fake.size(-1))
    if n < extractor.cfg.min_samples():
        raise TooShort(f"need at least {extractor.cfg.min_samples()} samples, got {n}")
    f_real = extractor(real[..., :n])
    f_fake = extractor(fake[..., :n])
    return ConstraintLoss(torch.mean((f_fake - f_real) ** 2), n)


def load_pretrained(path, cfg=None):
    """Build an extractor from a ``spoofsynth-ssl-v1`` weights file.

    With ``cfg`` given, the file must match its shapes exactly.  The
    extractor is returned frozen.
    """
    meta, arrays = load_container(path, SSL_HEADER)
    file_cfg = SSLConfig.from_dict(meta.get("ssl_config", {}))
    extractor = SSLExtractor(cfg or file_cfg)
    expected = extractor.state_dict()
    state = arrays_to_state_dict(arrays)
    if set(state) != set(expected):
        missing = sorted(set(expected) ^ set(state))
        raise ShapeMismatch(f"{path}: parameter names differ from the config: {missing[:5]}")
    for name, tensor in expected.items():
        if tuple(state[name].shape) != tuple(tensor.shape):
            raise ShapeMismatch(f"{path}: {name} has shape {tuple(state[name].shape)}, "
                                f"expected {tuple(tensor.shape)}")
        if state[name].dtype != tensor.dtype:
            raise BadFormat(f"{path}: {name} has dtype {state[name].dtype}")
    extractor.load_state_dict(state)
    return extractor.freeze()
