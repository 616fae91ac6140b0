"""Conditional-VAE text-to-waveform synthesizer."""
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..exceptions import (EmptySequence, NegativeNoise, NegativeScale, ShapeMismatch,
                          UnknownSpeaker)
from .config import ModelConfig
from .layers import (AttentionBlock, CouplingFlow, Generator, MultiPeriodDiscriminator,
                     StochasticDurationPredictor, WN, sequence_mask)
from .mas import maximum_path


@dataclass(frozen=True, eq=False)
class PriorStats:
    mu: torch.Tensor        # [T, latent]
    logsigma: torch.Tensor  # [T, latent]


@dataclass(frozen=True, eq=False)
class DurationSample:
    log_durations: torch.Tensor  # [T]
    noise_std_used: float


class TextEncoder(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.hidden = cfg.hidden_dim
        self.emb = nn.Embedding(cfg.n_vocab, cfg.hidden_dim)
        nn.init.normal_(self.emb.weight, 0.0, cfg.hidden_dim ** -0.5)
        self.blocks = nn.ModuleList([
            AttentionBlock(cfg.hidden_dim, cfg.n_heads, cfg.filter_dim, 3, cfg.dropout)
            for _ in range(cfg.text_encoder_layers)])
        self.proj = nn.Conv1d(cfg.hidden_dim, 2 * cfg.latent_dim, 1)

    def forward(self, ids, lengths):
        mask = sequence_mask(lengths, ids.size(1))
        x = self.emb(ids) * math.sqrt(self.hidden)
        x = x * mask[..., None].to(x.dtype)
        for block in self.blocks:
            x = block(x, mask)
        x = x.transpose(1, 2)
        x_mask = mask[:, None, :].to(x.dtype)
        m, logs = (self.proj(x) * x_mask).chunk(2, dim=1)
        return x, m, logs, x_mask


class PosteriorEncoder(nn.Module):
    def __init__(self, cfg):
        super().__init__()
        self.pre = nn.Conv1d(cfg.n_bins, cfg.hidden_dim, 1)
        self.enc = WN(cfg.hidden_dim, cfg.posterior_kernel, 1, cfg.posterior_layers,
                      cfg.speaker_embed_dim)
        self.proj = nn.Conv1d(cfg.hidden_dim, 2 * cfg.latent_dim, 1)

    def forward(self, spec, lengths, g=None, eps=None, generator=None):
        y_mask = sequence_mask(lengths, spec.size(2))[:, None, :].to(spec.dtype)
        x = self.pre(spec) * y_mask
        x = self.enc(x, y_mask, g)
        m, logs = (self.proj(x) * y_mask).chunk(2, dim=1)
        if eps is None:
            eps = torch.randn(m.shape, dtype=m.dtype, generator=generator)
        z = (m + eps * torch.exp(logs)) * y_mask
        return z, m, logs, y_mask, eps


def gaussian_log_lik(z_p, m_p, logs_p):
    """log N(z_p[:, :, j] | m_p[:, :, i], exp(logs_p)) summed over channels -> [B, T_text, T_frames]."""
    s_p_sq_r = torch.exp(-2 * logs_p)
    c1 = torch.sum(-0.5 * math.log(2 * math.pi) - logs_p, [1], keepdim=True).transpose(1, 2)
    c2 = torch.matmul(s_p_sq_r.transpose(1, 2), -0.5 * z_p ** 2)
    c3 = torch.matmul((m_p * s_p_sq_r).transpose(1, 2), z_p)
    c4 = torch.sum(-0.5 * m_p ** 2 * s_p_sq_r, [1], keepdim=True).transpose(1, 2)
    return c1 + c2 + c3 + c4


def durations_from_log(log_durations, length_scale=1.0):
    """Integer frame counts from log-durations.

    Frame boundaries are the ceilings of the cumulative scaled durations, so
    the total tracks ``sum(exp(logw) * length_scale)`` to within one frame;
    each phoneme keeps at least one frame.
    """
    if length_scale <= 0:
        raise ValueError(f"length_scale must be positive, got {length_scale}")
    w = np.exp(np.asarray(log_durations, dtype=np.float64)) * length_scale
    ends = np.ceil(np.cumsum(w) - 1e-9).astype(np.int64)
    d = np.diff(np.concatenate([[0], ends]))
    return np.maximum(d, 1)


class VITS(nn.Module):
    def __init__(self, cfg=None):
        super().__init__()
        cfg = cfg or ModelConfig()
        self.cfg = cfg
        self.enc_p = TextEncoder(cfg)
        self.enc_q = PosteriorEncoder(cfg)
        self.flow = CouplingFlow(cfg.latent_dim, cfg.hidden_dim, cfg.flow_kernel,
                                 cfg.flow_wn_layers, cfg.flow_layers, cfg.speaker_embed_dim)
        self.dp = StochasticDurationPredictor(cfg.hidden_dim, cfg.sdp_channels, 3, cfg.sdp_flows,
                                              cfg.speaker_embed_dim)
        self.dec = Generator(cfg.latent_dim, cfg.decoder_initial_channels,
                             cfg.decoder_upsample_rates, cfg.decoder_upsample_kernels,
                             cfg.resblock_kernels, cfg.resblock_dilations, cfg.speaker_embed_dim)
        self.emb_g = nn.Embedding(cfg.num_speakers, cfg.speaker_embed_dim)

    @property
    def hop(self):
        return self.cfg.hop

    def speaker_embedding(self, sid):
        sid = torch.as_tensor(sid, dtype=torch.long).reshape(-1)
        if torch.any((sid < 0) | (sid >= self.cfg.num_speakers)):
            raise UnknownSpeaker(f"speaker ids {sid.tolist()} outside 0..{self.cfg.num_speakers - 1}")
        return self.emb_g(sid)[..., None]

    # --- single-utterance operations ([T, C] layout) ----------------------

    def prior_encode(self, ids, speaker):
        """Phoneme IDs -> (hidden [T, hidden_dim], PriorStats)."""
        ids = torch.as_tensor(ids, dtype=torch.long).reshape(-1)
        if ids.numel() == 0:
            raise EmptySequence("phoneme sequence is empty")
        if torch.any((ids < 0) | (ids >= self.cfg.n_vocab)):
            raise ShapeMismatch("phoneme id outside the symbol table")
        self.speaker_embedding(speaker)
        x, m, logs, _ = self.enc_p(ids[None], torch.tensor([ids.numel()]))
        return x[0].T, PriorStats(m[0].T, logs[0].T)

    def posterior_encode(self, spec, speaker, eps=None, generator=None):
        """Linear spectrogram [frames, n_bins] -> (z, mu_q, logsigma_q, eps), each [frames, latent]."""
        spec = torch.as_tensor(spec, dtype=self.emb_g.weight.dtype)
        if spec.dim() != 2 or spec.size(1) != self.cfg.n_bins:
            raise ShapeMismatch(f"expected [frames, {self.cfg.n_bins}] spectrogram, got {tuple(spec.shape)}")
        g = self.speaker_embedding(speaker)
        if eps is not None:
            eps = torch.as_tensor(eps, dtype=spec.dtype).T[None]
        z, m, logs, _, eps = self.enc_q(spec.T[None], torch.tensor([spec.size(0)]), g, eps, generator)
        return z[0].T, m[0].T, logs[0].T, eps[0].T

    def flow_forward(self, z, speaker=None):
        return self._flow(z, speaker, reverse=False)

    def flow_inverse(self, f_z, speaker=None):
        return self._flow(f_z, speaker, reverse=True)

    def _flow(self, z, speaker, reverse):
        z = torch.as_tensor(z, dtype=self.emb_g.weight.dtype)
        if z.dim() != 2 or z.size(1) != self.cfg.latent_dim:
            raise ShapeMismatch(f"expected [frames, {self.cfg.latent_dim}], got {tuple(z.shape)}")
        g = None if speaker is None else self.speaker_embedding(speaker)
        mask = torch.ones(1, 1, z.size(0), dtype=z.dtype)
        return self.flow(z.T[None], mask, g, reverse=reverse)[0].T

    def duration_sample(self, hidden, nsd, generator=None, speaker=None):
        """Sample log-durations [T] with input noise of standard deviation ``nsd``."""
        if nsd < 0:
            raise NegativeNoise(f"nsd must be >= 0, got {nsd}")
        x = torch.as_tensor(hidden).T[None]
        mask = torch.ones(1, 1, x.size(2), dtype=x.dtype)
        g = None if speaker is None else self.speaker_embedding(speaker)
        logw = self.dp.sample(x, mask, g, noise_std=nsd, generator=generator)
        return DurationSample(logw[0, 0], float(nsd))

    @staticmethod
    def expand(stats, durations):
        reps = torch.as_tensor(np.asarray(durations), dtype=torch.long)
        return PriorStats(torch.repeat_interleave(stats.mu, reps, dim=0),
                          torch.repeat_interleave(stats.logsigma, reps, dim=0))

    @staticmethod
    def sample_prior_latent(stats, ns, generator=None):
        """z_p = mu + ns * exp(logsigma) * eps."""
        if ns < 0:
            raise NegativeScale(f"ns must be >= 0, got {ns}")
        if ns == 0:
            return stats.mu.clone()
        eps = torch.randn(stats.mu.shape, dtype=stats.mu.dtype, generator=generator)
        return stats.mu + ns * torch.exp(stats.logsigma) * eps

    def decode(self, z_slice, speaker=None):
        """Latent frames [frames, latent] -> waveform [hop * frames] in [-1, 1]."""
        z = torch.as_tensor(z_slice, dtype=self.emb_g.weight.dtype)
        if z.dim() != 2 or z.size(1) != self.cfg.latent_dim:
            raise ShapeMismatch(f"expected [frames, {self.cfg.latent_dim}], got {tuple(z.shape)}")
        g = None if speaker is None else self.speaker_embedding(speaker)
        return self.dec(z.T[None], g)[0, 0]

    # --- batched training pass -------------------------------------------

    def forward(self, ids, id_lengths, spec, spec_lengths, sid, segment_frames, generator=None):
        x, m_p, logs_p, x_mask = self.enc_p(ids, id_lengths)
        g = self.speaker_embedding(sid)
        z, m_q, logs_q, y_mask, _ = self.enc_q(spec, spec_lengths, g, generator=generator)
        z_p = self.flow(z, y_mask, g)

        with torch.no_grad():
            log_lik = gaussian_log_lik(z_p, m_p, logs_p)
            attn = maximum_path(log_lik, id_lengths, spec_lengths)  # [B, T_text, T_frames]

        w = attn.sum(2)[:, None, :]
        l_length = self.dp(x, x_mask, w, g, generator=generator)
        l_length = torch.sum(l_length) / torch.sum(x_mask)

        m_p = torch.matmul(m_p, attn)        # [B, C, T_frames]
        logs_p = torch.matmul(logs_p, attn)
        # flow of the posterior mean, for the closed-form KL
        m_q_f = self.flow(m_q, y_mask, g)

        starts = _slice_starts(spec_lengths, segment_frames, generator)
        z_slice = _take_slices(z, starts, segment_frames)
        y_hat = self.dec(z_slice, g)
        return {
            "y_hat": y_hat, "starts": starts, "l_length": l_length, "attn": attn,
            "durations": w[:, 0], "x_mask": x_mask, "y_mask": y_mask,
            "z": z, "z_p": z_p, "m_p": m_p, "logs_p": logs_p,
            "m_q": m_q, "m_q_flowed": m_q_f, "logs_q": logs_q,
        }


def build_discriminator(cfg):
    return MultiPeriodDiscriminator(cfg.disc_periods, cfg.disc_channels)


def _slice_starts(lengths, segment, generator):
    hi = torch.clamp_min(lengths - segment, 0) + 1
    r = torch.rand(lengths.shape, generator=generator)
    return (r * hi).long()


def _take_slices(x, starts, segment):
    if x.size(2) < segment:
        x = nn.functional.pad(x, (0, segment - x.size(2)))
    return torch.stack([x[i, :, s:s + segment] for i, s in enumerate(starts.tolist())])


def take_wave_slices(wave, starts, segment, hop):
    """Waveform counterpart of latent slices: wave [B, T] -> [B, 1, segment * hop]."""
    n = segment * hop
    if wave.size(1) < n + int(starts.max()) * hop:
        wave = nn.functional.pad(wave, (0, n + int(starts.max()) * hop - wave.size(1)))
    return torch.stack([wave[i, s * hop:s * hop + n] for i, s in enumerate(starts.tolist())])[:, None]
