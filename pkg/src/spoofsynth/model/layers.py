"""Neural building blocks, channels-first ([batch, channels, time]) throughout."""
import math

import torch
from torch import nn
from torch.nn import functional as F

LRELU_SLOPE = 0.1


def sequence_mask(lengths, max_len=None):
    max_len = int(max_len or lengths.max())
    return torch.arange(max_len, device=lengths.device)[None, :] < lengths[:, None]


class ChannelLayerNorm(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.norm = nn.LayerNorm(channels)

    def forward(self, x):
        return self.norm(x.transpose(1, -1)).transpose(1, -1)


class AttentionBlock(nn.Module):
    """Post-norm self-attention block with a convolutional feed-forward.

    ``ffn_kernel > 1`` makes the block position-aware without explicit
    positional encodings.
    """

    def __init__(self, dim, n_heads, ffn_dim, ffn_kernel=3, dropout=0.0):
        super().__init__()
        self.attn = nn.MultiheadAttention(dim, n_heads, dropout=dropout, batch_first=True)
        self.norm1 = nn.LayerNorm(dim)
        self.ffn1 = nn.Conv1d(dim, ffn_dim, ffn_kernel, padding=ffn_kernel // 2)
        self.ffn2 = nn.Conv1d(ffn_dim, dim, ffn_kernel, padding=ffn_kernel // 2)
        self.norm2 = nn.LayerNorm(dim)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, mask=None):
        """x: [B, T, D]; mask: [B, T] bool, True on valid frames."""
        pad = None if mask is None else ~mask
        h, _ = self.attn(x, x, x, key_padding_mask=pad, need_weights=False)
        x = self.norm1(x + self.drop(h))
        m = 1.0 if mask is None else mask[:, None, :].to(x.dtype)
        h = self.ffn1(x.transpose(1, 2) * m)
        h = self.ffn2(F.gelu(h) * m).transpose(1, 2)
        x = self.norm2(x + self.drop(h))
        return x if mask is None else x * mask[..., None].to(x.dtype)


class WN(nn.Module):
    """Gated dilated convolution stack with optional global conditioning."""

    def __init__(self, hidden, kernel_size, dilation_rate, n_layers, gin_channels=0):
        super().__init__()
        self.hidden = hidden
        self.n_layers = n_layers
        self.in_layers = nn.ModuleList()
        self.res_skip = nn.ModuleList()
        for i in range(n_layers):
            dilation = dilation_rate ** i
            pad = (kernel_size * dilation - dilation) // 2
            self.in_layers.append(nn.Conv1d(hidden, 2 * hidden, kernel_size,
                                            dilation=dilation, padding=pad))
            out = 2 * hidden if i < n_layers - 1 else hidden
            self.res_skip.append(nn.Conv1d(hidden, out, 1))
        self.cond = nn.Conv1d(gin_channels, 2 * hidden * n_layers, 1) if gin_channels else None

    def forward(self, x, mask, g=None):
        out = torch.zeros_like(x)
        g_all = self.cond(g) if (g is not None and self.cond is not None) else None
        for i in range(self.n_layers):
            h = self.in_layers[i](x)
            if g_all is not None:
                h = h + g_all[:, i * 2 * self.hidden:(i + 1) * 2 * self.hidden]
            a, b = h.chunk(2, dim=1)
            acts = torch.tanh(a) * torch.sigmoid(b)
            rs = self.res_skip[i](acts)
            if i < self.n_layers - 1:
                x = (x + rs[:, :self.hidden]) * mask
                out = out + rs[:, self.hidden:]
            else:
                out = out + rs
        return out * mask


class ResidualCoupling(nn.Module):
    """Mean-only affine coupling: the second half is shifted by a function of the first."""

    def __init__(self, channels, hidden, kernel_size, n_layers, gin_channels=0):
        super().__init__()
        assert channels % 2 == 0, "coupling needs an even channel count"
        self.half = channels // 2
        self.pre = nn.Conv1d(self.half, hidden, 1)
        self.enc = WN(hidden, kernel_size, 1, n_layers, gin_channels)
        self.post = nn.Conv1d(hidden, self.half, 1)
        nn.init.zeros_(self.post.weight)
        nn.init.zeros_(self.post.bias)

    def shift(self, x0, mask, g=None):
        h = self.pre(x0) * mask
        h = self.enc(h, mask, g)
        return self.post(h) * mask

    def forward(self, x, mask, g=None, reverse=False):
        x0, x1 = x[:, :self.half], x[:, self.half:]
        m = self.shift(x0, mask, g)
        x1 = (x1 - m) * mask if reverse else m + x1 * mask
        return torch.cat([x0, x1], dim=1)


class Flip(nn.Module):
    def forward(self, x, *args, **kwargs):
        return torch.flip(x, [1])


class CouplingFlow(nn.Module):
    """Stack of (coupling, flip) pairs; volume preserving, so no log-det."""

    def __init__(self, channels, hidden, kernel_size, wn_layers, n_flows, gin_channels=0):
        super().__init__()
        self.flows = nn.ModuleList()
        for _ in range(n_flows):
            self.flows.append(ResidualCoupling(channels, hidden, kernel_size, wn_layers, gin_channels))
            self.flows.append(Flip())

    def forward(self, x, mask, g=None, reverse=False):
        for flow in (reversed(self.flows) if reverse else self.flows):
            x = flow(x, mask, g=g, reverse=reverse)
        return x


# --- stochastic duration predictor pieces ---------------------------------

class DDSConv(nn.Module):
    """Dilated depth-separable convolutions."""

    def __init__(self, channels, kernel_size, n_layers, dropout=0.0):
        super().__init__()
        self.convs_sep = nn.ModuleList()
        self.convs_1x1 = nn.ModuleList()
        self.norms_1 = nn.ModuleList()
        self.norms_2 = nn.ModuleList()
        for i in range(n_layers):
            dilation = kernel_size ** i
            pad = (kernel_size * dilation - dilation) // 2
            self.convs_sep.append(nn.Conv1d(channels, channels, kernel_size, groups=channels,
                                            dilation=dilation, padding=pad))
            self.convs_1x1.append(nn.Conv1d(channels, channels, 1))
            self.norms_1.append(ChannelLayerNorm(channels))
            self.norms_2.append(ChannelLayerNorm(channels))
        self.drop = nn.Dropout(dropout)

    def forward(self, x, mask, g=None):
        if g is not None:
            x = x + g
        for sep, pw, n1, n2 in zip(self.convs_sep, self.convs_1x1, self.norms_1, self.norms_2):
            y = F.gelu(n1(sep(x * mask)))
            y = F.gelu(n2(pw(y)))
            x = x + self.drop(y)
        return x * mask


class ElementwiseAffine(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.m = nn.Parameter(torch.zeros(channels, 1))
        self.logs = nn.Parameter(torch.zeros(channels, 1))

    def forward(self, x, mask, g=None, reverse=False):
        if reverse:
            return (x - self.m) * torch.exp(-self.logs) * mask
        y = (self.m + torch.exp(self.logs) * x) * mask
        return y, torch.sum(self.logs * mask, [1, 2])


class AffineCoupling2(nn.Module):
    """Two-channel affine coupling conditioned on text features.

    Stands in for the spline coupling of the reference duration predictor.
    """

    def __init__(self, filter_channels, kernel_size, n_layers=3):
        super().__init__()
        self.pre = nn.Conv1d(1, filter_channels, 1)
        self.convs = DDSConv(filter_channels, kernel_size, n_layers)
        self.proj = nn.Conv1d(filter_channels, 2, 1)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(self, x, mask, g=None, reverse=False):
        x0, x1 = x[:, :1], x[:, 1:]
        h = self.convs(self.pre(x0), mask, g)
        m, logs = self.proj(h).chunk(2, dim=1)
        logs = torch.tanh(logs) * mask
        m = m * mask
        if reverse:
            x1 = (x1 - m) * torch.exp(-logs) * mask
            return torch.cat([x0, x1], 1)
        x1 = (m + x1 * torch.exp(logs)) * mask
        return torch.cat([x0, x1], 1), torch.sum(logs, [1, 2])


class Log(nn.Module):
    def forward(self, x, mask, g=None, reverse=False):
        if reverse:
            return torch.exp(x) * mask
        y = torch.log(torch.clamp_min(x, 1e-5)) * mask
        return y, torch.sum(-y, [1, 2])


class FlipFlow(nn.Module):
    def forward(self, x, *args, reverse=False, **kwargs):
        x = torch.flip(x, [1])
        if reverse:
            return x
        return x, torch.zeros(x.size(0), dtype=x.dtype, device=x.device)


class StochasticDurationPredictor(nn.Module):
    """Flow-based duration model with variational dequantization.

    ``forward`` returns the per-utterance negative log-likelihood bound of
    the integer durations; ``sample`` maps scaled Gaussian noise to
    log-durations.
    """

    def __init__(self, in_channels, filter_channels, kernel_size=3, n_flows=2, gin_channels=0):
        super().__init__()
        self.log_flow = Log()
        self.flows = nn.ModuleList([ElementwiseAffine(2)])
        self.post_flows = nn.ModuleList([ElementwiseAffine(2)])
        for _ in range(n_flows):
            self.flows.extend([AffineCoupling2(filter_channels, kernel_size), FlipFlow()])
            self.post_flows.extend([AffineCoupling2(filter_channels, kernel_size), FlipFlow()])
        self.pre = nn.Conv1d(in_channels, filter_channels, 1)
        self.convs = DDSConv(filter_channels, kernel_size, 3)
        self.proj = nn.Conv1d(filter_channels, filter_channels, 1)
        self.post_pre = nn.Conv1d(1, filter_channels, 1)
        self.post_convs = DDSConv(filter_channels, kernel_size, 3)
        self.post_proj = nn.Conv1d(filter_channels, filter_channels, 1)
        self.cond = nn.Conv1d(gin_channels, filter_channels, 1) if gin_channels else None

    def _condition(self, x, mask, g):
        x = self.pre(torch.detach(x))
        if g is not None and self.cond is not None:
            x = x + self.cond(torch.detach(g))
        x = self.convs(x, mask)
        return self.proj(x) * mask

    def forward(self, x, mask, w, g=None, generator=None):
        x = self._condition(x, mask, g)
        h_w = self.post_proj(self.post_convs(self.post_pre(w), mask)) * mask
        e_q = torch.randn(w.size(0), 2, w.size(2), dtype=x.dtype, generator=generator) * mask
        z_q = e_q
        logdet_q = 0.0
        for flow in self.post_flows:
            z_q, ld = flow(z_q, mask, g=x + h_w)
            logdet_q = logdet_q + ld
        z_u, z1 = z_q[:, :1], z_q[:, 1:]
        u = torch.sigmoid(z_u) * mask
        z0 = (w - u) * mask
        logdet_q = logdet_q + torch.sum((F.logsigmoid(z_u) + F.logsigmoid(-z_u)) * mask, [1, 2])
        logq = torch.sum(-0.5 * (math.log(2 * math.pi) + e_q ** 2) * mask, [1, 2]) - logdet_q

        z0, logdet = self.log_flow(z0, mask)
        z = torch.cat([z0, z1], 1)
        for flow in self.flows:
            z, ld = flow(z, mask, g=x)
            logdet = logdet + ld
        nll = torch.sum(0.5 * (math.log(2 * math.pi) + z ** 2) * mask, [1, 2]) - logdet
        return nll + logq

    def sample(self, x, mask, g=None, noise_std=1.0, generator=None):
        x = self._condition(x, mask, g)
        if noise_std == 0:
            z = torch.zeros(x.size(0), 2, x.size(2), dtype=x.dtype)
        else:
            z = torch.randn(x.size(0), 2, x.size(2), dtype=x.dtype, generator=generator) * noise_std
        z = z * mask
        for flow in reversed(self.flows):
            z = flow(z, mask, g=x, reverse=True)
        return z[:, :1]


# --- waveform generator and discriminators --------------------------------

class ResBlock(nn.Module):
    def __init__(self, channels, kernel_size, dilations):
        super().__init__()
        self.convs = nn.ModuleList([
            nn.Conv1d(channels, channels, kernel_size, dilation=d,
                      padding=(kernel_size * d - d) // 2) for d in dilations])

    def forward(self, x):
        for conv in self.convs:
            x = x + conv(F.leaky_relu(x, LRELU_SLOPE))
        return x


class Generator(nn.Module):
    """Transposed-convolution upsampler from latent frames to waveform."""

    def __init__(self, in_channels, initial_channels, upsample_rates, upsample_kernels,
                 resblock_kernels=(3,), resblock_dilations=((1, 3),), gin_channels=0):
        super().__init__()
        self.conv_pre = nn.Conv1d(in_channels, initial_channels, 7, padding=3)
        self.cond = nn.Conv1d(gin_channels, initial_channels, 1) if gin_channels else None
        self.ups = nn.ModuleList()
        self.resblocks = nn.ModuleList()
        ch = initial_channels
        for u, k in zip(upsample_rates, upsample_kernels):
            if (k - u) % 2:
                raise ValueError(f"upsample kernel {k} and rate {u} must differ by an even number")
            self.ups.append(nn.ConvTranspose1d(ch, ch // 2, k, u, padding=(k - u) // 2))
            ch //= 2
            self.resblocks.append(nn.ModuleList(
                [ResBlock(ch, rk, rd) for rk, rd in zip(resblock_kernels, resblock_dilations)]))
        self.conv_post = nn.Conv1d(ch, 1, 7, padding=3, bias=False)
        for up in self.ups:
            nn.init.normal_(up.weight, 0.0, 0.01)

    def forward(self, x, g=None):
        x = self.conv_pre(x)
        if g is not None and self.cond is not None:
            x = x + self.cond(g)
        for up, blocks in zip(self.ups, self.resblocks):
            x = up(F.leaky_relu(x, LRELU_SLOPE))
            x = sum(b(x) for b in blocks) / len(blocks)
        x = self.conv_post(F.leaky_relu(x))
        return torch.tanh(x)


class PeriodDiscriminator(nn.Module):
    def __init__(self, period, channels=(8, 16, 32), kernel_size=5, stride=3):
        super().__init__()
        self.period = period
        pad = (kernel_size - 1) // 2
        chans = (1, *channels)
        self.convs = nn.ModuleList([
            nn.Conv2d(cin, cout, (kernel_size, 1), (stride, 1), padding=(pad, 0))
            for cin, cout in zip(chans[:-1], chans[1:])])
        self.convs.append(nn.Conv2d(chans[-1], chans[-1], (kernel_size, 1), 1, padding=(pad, 0)))
        self.conv_post = nn.Conv2d(chans[-1], 1, (3, 1), 1, padding=(1, 0))

    def forward(self, x):
        fmap = []
        b, c, t = x.shape
        if t % self.period:
            n_pad = self.period - t % self.period
            x = F.pad(x, (0, n_pad), "reflect")
            t += n_pad
        x = x.view(b, c, t // self.period, self.period)
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            fmap.append(x)
        x = self.conv_post(x)
        fmap.append(x)
        return torch.flatten(x, 1, -1), fmap


class ScaleDiscriminator(nn.Module):
    def __init__(self, channels=(8, 16, 32, 32)):
        super().__init__()
        chans = (1, *channels)
        layers = [nn.Conv1d(1, chans[1], 15, 1, padding=7)]
        for cin, cout in zip(chans[1:-1], chans[2:]):
            layers.append(nn.Conv1d(cin, cout, 41, 4, groups=4, padding=20))
        layers.append(nn.Conv1d(chans[-1], chans[-1], 5, 1, padding=2))
        self.convs = nn.ModuleList(layers)
        self.conv_post = nn.Conv1d(chans[-1], 1, 3, 1, padding=1)

    def forward(self, x):
        fmap = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            fmap.append(x)
        x = self.conv_post(x)
        fmap.append(x)
        return torch.flatten(x, 1, -1), fmap


class MultiPeriodDiscriminator(nn.Module):
    """One scale discriminator plus one period discriminator per period."""

    def __init__(self, periods=(2, 3, 5), channels=(8, 16, 32)):
        super().__init__()
        self.discriminators = nn.ModuleList(
            [ScaleDiscriminator((*channels, channels[-1]))]
            + [PeriodDiscriminator(p, channels) for p in periods])

    def forward(self, y):
        """Return (logits, feature_maps), one entry per sub-discriminator."""
        logits, fmaps = [], []
        for d in self.discriminators:
            logit, fmap = d(y)
            logits.append(logit)
            fmaps.append(fmap)
        return logits, fmaps
