from dataclasses import asdict, dataclass, fields
import math


@dataclass(frozen=True)
class ModelConfig:
    """Network sizes.  Defaults are the CPU-sized toy configuration."""

    n_vocab: int = 196
    n_bins: int = 513
    hop: int = 256
    hidden_dim: int = 64
    filter_dim: int = 128
    n_heads: int = 2
    text_encoder_layers: int = 2
    latent_dim: int = 16
    posterior_layers: int = 4
    posterior_kernel: int = 5
    flow_layers: int = 2
    flow_kernel: int = 5
    flow_wn_layers: int = 2
    sdp_channels: int = 32
    sdp_flows: int = 2
    decoder_initial_channels: int = 64
    decoder_upsample_rates: tuple = (8, 8, 2, 2)
    decoder_upsample_kernels: tuple = (16, 16, 4, 4)
    resblock_kernels: tuple = (3,)
    resblock_dilations: tuple = ((1, 3),)
    num_speakers: int = 4
    speaker_embed_dim: int = 16
    disc_periods: tuple = (2, 3, 5)
    disc_channels: tuple = (8, 16, 32)
    dropout: float = 0.0

    def __post_init__(self):
        if math.prod(self.decoder_upsample_rates) != self.hop:
            raise ValueError(
                f"product of decoder_upsample_rates {self.decoder_upsample_rates} != hop {self.hop}")
        if len(self.decoder_upsample_kernels) != len(self.decoder_upsample_rates):
            raise ValueError("one upsample kernel per upsample rate")
        if self.latent_dim % 2:
            raise ValueError("latent_dim must be even for the coupling flow")
        if self.decoder_initial_channels % 2 ** len(self.decoder_upsample_rates):
            raise ValueError("decoder channels must halve cleanly at every upsample")
        if self.hidden_dim % self.n_heads:
            raise ValueError("hidden_dim must be divisible by n_heads")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for k, v in d.items():
            if k not in names:
                raise ValueError(f"unknown model config field {k!r}")
            kwargs[k] = _tupleize(v)
        return cls(**kwargs)


def _tupleize(v):
    return tuple(_tupleize(x) for x in v) if isinstance(v, list) else v
