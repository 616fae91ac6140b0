"""Loss assembly, the alternating GAN training step and checkpointing."""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .audio.clip import read_wav
from .audio.spectrogram import SpectrogramParams, linear_frames, mel_frames
from .container import arrays_to_state_dict, load_container, save_container, state_dict_to_arrays
from .exceptions import BadFormat, FingerprintMismatch, NonFiniteLoss
from .model import VITS, ModelConfig, build_discriminator
from .model.vits import take_wave_slices
from .ssl import SSLConfig, SSLExtractor, constraint_loss

logger = logging.getLogger(__name__)

CKPT_HEADER = "spoofsynth-ckpt-v1"


@dataclass(frozen=True)
class LossWeights:
    mel: float = 45.0
    kl: float = 1.0
    duration: float = 1.0
    adversarial: float = 1.0
    feature_match: float = 2.0
    constraint: float = 1.0


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 200
    batch_size: int = 4
    segment_frames: int = 32
    learning_rate: float = 2e-4
    betas: tuple = (0.8, 0.99)
    eps: float = 1e-9
    lr_decay: float = 0.999875
    seed: int = 1234
    use_ssl: bool = True
    weights: LossWeights = LossWeights()

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "weights" in d:
            d["weights"] = LossWeights(**d["weights"])
        if "betas" in d:
            d["betas"] = tuple(d["betas"])
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown train config fields {sorted(unknown)}")
        return cls(**d)


def load_config_file(path):
    """JSON file with optional ``model``, ``ssl`` and ``train`` sections."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise BadFormat(f"cannot read config {path}: {exc}") from exc
    return (ModelConfig.from_dict(raw.get("model", {})), SSLConfig.from_dict(raw.get("ssl", {})),
            TrainConfig.from_dict(raw.get("train", {})))


@dataclass
class LossBreakdown:
    """Per-step loss terms.

    ``mel_recon``, ``kl``, ``duration``, ``adversarial_g`` and
    ``feature_match`` are already multiplied by their weights;
    ``constraint`` is the raw SSL feature MSE, so
    ``total_g == mel_recon + kl + duration + adversarial_g + feature_match
    + constraint_weight * constraint``.
    """

    mel_recon: float
    kl: float
    duration: float
    adversarial_g: float
    feature_match: float
    constraint: float
    total_g: float
    total_d: float
    constraint_weight: float = 1.0
    graph: object = field(default=None, compare=False, repr=False)

    TERMS = ("mel_recon", "kl", "duration", "adversarial_g", "feature_match", "constraint",
             "total_g", "total_d")

    def as_dict(self):
        return {k: getattr(self, k) for k in self.TERMS}

    def check_finite(self):
        for k in self.TERMS:
            if not math.isfinite(getattr(self, k)):
                raise NonFiniteLoss(k, getattr(self, k))
        return self


# --- data --------------------------------------------------------------------

@dataclass
class Batch:
    ids: torch.Tensor
    id_lengths: torch.Tensor
    spec: torch.Tensor
    spec_lengths: torch.Tensor
    wave: torch.Tensor
    sid: torch.Tensor


def build_dataset(entries, frontend, spec_params, speakers):
    """Precompute phoneme IDs, linear spectrograms and trimmed waveforms."""
    items = []
    index = {s: i for i, s in enumerate(speakers)}
    for e in entries:
        clip = read_wav(e.audio_path)
        if clip.sample_rate != spec_params.sample_rate:
            raise BadFormat(f"{e.audio_path}: rate {clip.sample_rate} != {spec_params.sample_rate}")
        frames = len(clip) // spec_params.hop
        wave = torch.from_numpy(clip.samples[:frames * spec_params.hop]).float()
        spec = linear_frames(wave, spec_params).T.contiguous()
        items.append({"utt": e.utterance_id, "ids": torch.tensor(frontend.transform([e.text])[0]),
                      "spec": spec, "wave": wave, "sid": index[e.speaker_id]})
    return items


def collate(items):
    b = len(items)
    id_len = torch.tensor([len(it["ids"]) for it in items])
    spec_len = torch.tensor([it["spec"].size(1) for it in items])
    n_bins = items[0]["spec"].size(0)
    ids = torch.zeros(b, int(id_len.max()), dtype=torch.long)
    spec = torch.zeros(b, n_bins, int(spec_len.max()))
    wave = torch.zeros(b, max(it["wave"].numel() for it in items))
    for i, it in enumerate(items):
        ids[i, :len(it["ids"])] = it["ids"]
        spec[i, :, :it["spec"].size(1)] = it["spec"]
        wave[i, :it["wave"].numel()] = it["wave"]
    return Batch(ids, id_len, spec, spec_len, wave, torch.tensor([it["sid"] for it in items]))


# --- losses ------------------------------------------------------------------

def kl_divergence(m_q, logs_q, m_p, logs_p, mask):
    """Closed-form KL(N(m_q, e^logs_q) || N(m_p, e^logs_p)) per frame, averaged over frames.

    ``m_q`` is the flow-mapped posterior mean.  Non-negative, and zero when
    the two Gaussians coincide.
    """
    kl = (logs_p - logs_q - 0.5
          + 0.5 * (torch.exp(2 * logs_q) + (m_q - m_p) ** 2) * torch.exp(-2 * logs_p))
    return torch.sum(kl * mask) / torch.sum(mask)


def discriminator_loss(disc, y, y_hat):
    real, _ = disc(y)
    fake, _ = disc(y_hat)
    return sum(torch.mean((1 - r) ** 2) + torch.mean(g ** 2) for r, g in zip(real, fake))


def adversarial_and_fm(disc, y, y_hat):
    _, fmap_r = disc(y)
    logits_g, fmap_g = disc(y_hat)
    adv = sum(torch.mean((1 - g) ** 2) for g in logits_g)
    fm = sum(torch.mean(torch.abs(r.detach() - g))
             for fr, fg in zip(fmap_r, fmap_g) for r, g in zip(fr, fg))
    return adv, fm


def generator_forward(model, batch, segment_frames, generator=None, decode_override=None):
    out = model(batch.ids, batch.id_lengths, batch.spec, batch.spec_lengths, batch.sid,
                segment_frames, generator)
    out["y"] = take_wave_slices(batch.wave, out["starts"], segment_frames, model.hop)
    if decode_override is not None:
        out["y_hat"] = decode_override(out["y"], out)
    return out


def generator_terms(out, disc, ssl, weights, spec_params):
    """Weighted generator loss terms as tensors; ``total`` carries the graph."""
    y, y_hat = out["y"], out["y_hat"]
    mel_l1 = torch.mean(torch.abs(mel_frames(y[:, 0], spec_params) - mel_frames(y_hat[:, 0], spec_params)))
    kl = kl_divergence(out["m_q_flowed"], out["logs_q"], out["m_p"], out["logs_p"], out["y_mask"])
    adv, fm = adversarial_and_fm(disc, y, y_hat)
    if ssl is not None:
        constraint = constraint_loss(ssl, y[:, 0], y_hat[:, 0]).value
    else:
        constraint = torch.zeros((), dtype=y_hat.dtype)
    terms = {
        "mel_recon": weights.mel * mel_l1,
        "kl": weights.kl * kl,
        "duration": weights.duration * out["l_length"],
        "adversarial_g": weights.adversarial * adv,
        "feature_match": weights.feature_match * fm,
        "constraint": constraint,
    }
    # summed in float64 so the total recomposes exactly from the reported terms
    t64 = {k: v.double() for k, v in terms.items()}
    total = (t64["mel_recon"] + t64["kl"] + t64["duration"] + t64["adversarial_g"]
             + t64["feature_match"] + weights.constraint * t64["constraint"])
    return terms, total


def _breakdown(terms, total, total_d, weights):
    values = {k: float(v.detach()) for k, v in terms.items()}
    return LossBreakdown(**values, total_g=float(total.detach()), total_d=float(total_d),
                         constraint_weight=weights.constraint, graph=total)


def generator_loss(batch, model, ssl, weights, disc, spec_params, segment_frames=32,
                   generator=None, decode_override=None):
    """Full generator objective for one batch, without any parameter update.

    ``decode_override(real_slice, forward_outputs)`` may replace the decoded
    waveform, e.g. to inject the real audio as an oracle generator.
    """
    out = generator_forward(model, batch, segment_frames, generator, decode_override)
    terms, total = generator_terms(out, disc, ssl, weights, spec_params)
    with torch.no_grad():
        total_d = discriminator_loss(disc, out["y"], out["y_hat"].detach())
    return _breakdown(terms, total, total_d, weights)


# --- training state --------------------------------------------------------------

class TrainState:
    """Everything a training run mutates, plus the fingerprints it was built with."""

    def __init__(self, model_cfg=None, ssl_cfg=None, train_cfg=None, spec_params=None,
                 speakers=(), symbol_table_version="", ssl=None):
        self.model_cfg = model_cfg or ModelConfig()
        self.train_cfg = train_cfg or TrainConfig()
        self.spec_params = spec_params or SpectrogramParams()
        self.speakers = list(speakers)
        self.symbol_table_version = symbol_table_version
        torch.manual_seed(self.train_cfg.seed)
        self.model = VITS(self.model_cfg)
        self.disc = build_discriminator(self.model_cfg)
        if self.train_cfg.use_ssl:
            self.ssl = (ssl or SSLExtractor(ssl_cfg or SSLConfig())).freeze()
        else:
            self.ssl = None
        self.ssl_cfg = self.ssl.cfg if self.ssl is not None else (ssl_cfg or SSLConfig())
        tc = self.train_cfg
        self.opt_g = torch.optim.AdamW(self.model.parameters(), tc.learning_rate, tc.betas, tc.eps)
        self.opt_d = torch.optim.AdamW(self.disc.parameters(), tc.learning_rate, tc.betas, tc.eps)
        self.sched_g = torch.optim.lr_scheduler.ExponentialLR(self.opt_g, tc.lr_decay)
        self.sched_d = torch.optim.lr_scheduler.ExponentialLR(self.opt_d, tc.lr_decay)
        self.step = 0
        self.gen = torch.Generator().manual_seed(tc.seed)
        self.data_gen = torch.Generator().manual_seed(tc.seed + 1)

    def next_batch(self, dataset):
        idx = torch.randperm(len(dataset), generator=self.data_gen)[:self.train_cfg.batch_size]
        return collate([dataset[i] for i in sorted(idx.tolist())])


def train_step(state, batch):
    """One discriminator update followed by one generator update."""
    tc = state.train_cfg
    state.model.train()
    state.disc.train()
    out = generator_forward(state.model, batch, tc.segment_frames, state.gen)

    loss_d = discriminator_loss(state.disc, out["y"], out["y_hat"].detach())
    if not torch.isfinite(loss_d):
        raise NonFiniteLoss("total_d", float(loss_d))
    state.opt_d.zero_grad()
    loss_d.backward()
    state.opt_d.step()

    terms, total = generator_terms(out, state.disc, state.ssl, tc.weights, state.spec_params)
    losses = _breakdown(terms, total, loss_d.detach(), tc.weights).check_finite()
    state.opt_g.zero_grad()
    total.backward()
    state.opt_g.step()
    state.sched_g.step()
    state.sched_d.step()
    state.step += 1
    losses.graph = None
    return state, losses


def train(state, dataset, steps=None, log_every=20, callback=None):
    history = []
    for _ in range(steps if steps is not None else state.train_cfg.steps):
        state, losses = train_step(state, state.next_batch(dataset))
        history.append(losses)
        if callback is not None:
            callback(state, losses)
        if log_every and state.step % log_every == 0:
            logger.info("step %d: %s", state.step,
                        " ".join(f"{k}={v:.4f}" for k, v in losses.as_dict().items()))
    return history


# --- checkpoints -----------------------------------------------------------------

def _optimizer_to_container(opt, prefix):
    sd = opt.state_dict()
    arrays, scalars = {}, {}
    for idx, st in sd["state"].items():
        for key, val in st.items():
            if torch.is_tensor(val):
                arrays[f"{prefix}/state/{idx}/{key}"] = val.detach().cpu().numpy()
            else:
                scalars[f"{idx}/{key}"] = val
    return {"param_groups": sd["param_groups"], "scalars": scalars}, arrays


def _optimizer_from_container(opt, meta, arrays, prefix):
    state = {}
    for name, arr in arrays.items():
        if name.startswith(prefix + "/state/"):
            idx, key = name[len(prefix) + 7:].split("/", 1)
            state.setdefault(int(idx), {})[key] = torch.from_numpy(arr)
    for name, val in meta["scalars"].items():
        idx, key = name.split("/", 1)
        state.setdefault(int(idx), {})[key] = val
    groups = [{**g, "betas": tuple(g["betas"])} if "betas" in g else g for g in meta["param_groups"]]
    opt.load_state_dict({"state": state, "param_groups": groups})


def save_checkpoint(state, path):
    arrays = {}
    arrays.update(state_dict_to_arrays(state.model.state_dict(), "model/"))
    arrays.update(state_dict_to_arrays(state.disc.state_dict(), "disc/"))
    if state.ssl is not None:
        arrays.update(state_dict_to_arrays(state.ssl.state_dict(), "ssl/"))
    og, a = _optimizer_to_container(state.opt_g, "opt_g")
    arrays.update(a)
    od, a = _optimizer_to_container(state.opt_d, "opt_d")
    arrays.update(a)
    arrays["rng/gen"] = state.gen.get_state().numpy()
    arrays["rng/data_gen"] = state.data_gen.get_state().numpy()
    meta = {
        "model_config": state.model_cfg.to_dict(),
        "ssl_config": state.ssl_cfg.to_dict(),
        "train_config": state.train_cfg.to_dict(),
        "spec_params": state.spec_params.to_dict(),
        "symbol_table_version": state.symbol_table_version,
        "speakers": state.speakers,
        "step": state.step,
        "opt_g": og, "opt_d": od,
        "sched_g": state.sched_g.state_dict(), "sched_d": state.sched_d.state_dict(),
    }
    save_container(path, CKPT_HEADER, meta, arrays)


def load_checkpoint(path, symbol_table_version=None, spec_params=None):
    """Restore a :class:`TrainState`.

    If fingerprints are given they must match the checkpoint, otherwise
    ``FingerprintMismatch`` is raised.
    """
    meta, arrays = load_container(path, CKPT_HEADER)
    try:
        model_cfg = ModelConfig.from_dict(meta["model_config"])
        ssl_cfg = SSLConfig.from_dict(meta["ssl_config"])
        train_cfg = TrainConfig.from_dict(meta["train_config"])
        ckpt_spec = SpectrogramParams(**meta["spec_params"])
    except (KeyError, TypeError, ValueError) as exc:
        raise BadFormat(f"{path}: incomplete checkpoint metadata: {exc}") from exc
    if symbol_table_version is not None and symbol_table_version != meta["symbol_table_version"]:
        raise FingerprintMismatch(
            f"{path}: symbol table {meta['symbol_table_version']} != {symbol_table_version}")
    if spec_params is not None and spec_params != ckpt_spec:
        raise FingerprintMismatch(f"{path}: spectrogram parameters differ")
    state = TrainState(model_cfg, ssl_cfg, train_cfg, ckpt_spec, meta["speakers"],
                       meta["symbol_table_version"])
    state.model.load_state_dict(arrays_to_state_dict(arrays, "model/"))
    state.disc.load_state_dict(arrays_to_state_dict(arrays, "disc/"))
    if state.ssl is not None:
        state.ssl.load_state_dict(arrays_to_state_dict(arrays, "ssl/"))
    _optimizer_from_container(state.opt_g, meta["opt_g"], arrays, "opt_g")
    _optimizer_from_container(state.opt_d, meta["opt_d"], arrays, "opt_d")
    state.sched_g.load_state_dict(meta["sched_g"])
    state.sched_d.load_state_dict(meta["sched_d"])
    state.gen.set_state(torch.from_numpy(arrays["rng/gen"]))
    state.data_gen.set_state(torch.from_numpy(arrays["rng/data_gen"]))
    state.step = int(meta["step"])
    return state
