import dataclasses

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from spoofsynth.audio.spectrogram import SpectrogramParams
from spoofsynth.exceptions import BadFormat, FingerprintMismatch, NonFiniteLoss
from spoofsynth.model import VITS, ModelConfig, build_discriminator
from spoofsynth.ssl import SSLConfig, SSLExtractor
from spoofsynth.training import (LossBreakdown, LossWeights, TrainConfig, TrainState, collate,
                                 generator_forward, generator_loss, generator_terms, kl_divergence,
                                 load_checkpoint, load_config_file, save_checkpoint, train,
                                 train_step)

SPEC = SpectrogramParams()


def make_state(speakers, version, **train_kw):
    return TrainState(train_cfg=TrainConfig(**train_kw), spec_params=SPEC, speakers=speakers,
                      symbol_table_version=version)


def losses_close(a, b, tol=1e-6):
    return all(abs(x - y) <= tol for x, y in zip(a.as_dict().values(), b.as_dict().values()))


# --- loss pieces ---------------------------------------------------------------------

def test_kl_zero_for_identical_gaussians(rng):
    m = torch.from_numpy(rng.normal(size=(2, 16, 30)))
    logs = torch.from_numpy(rng.normal(size=(2, 16, 30)) * 0.3)
    mask = torch.ones(2, 1, 30, dtype=torch.float64)
    assert float(kl_divergence(m, logs, m, logs, mask)) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_kl_non_negative(seed):
    g = torch.Generator().manual_seed(seed)
    shape = (1, 4, 7)
    args = [torch.randn(shape, generator=g, dtype=torch.float64) for _ in range(4)]
    mask = torch.ones(1, 1, 7, dtype=torch.float64)
    assert float(kl_divergence(args[0], args[1] * 0.5, args[2], args[3] * 0.5, mask)) >= -1e-12


def test_non_finite_loss_names_term():
    lb = LossBreakdown(1.0, float("nan"), 0.0, 0.0, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(NonFiniteLoss, match="kl"):
        lb.check_finite()


def test_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"train": {"steps": 7, "weights": {"constraint": 0.5}}, "model": {"hidden_dim": 32}}')
    model_cfg, ssl_cfg, train_cfg = load_config_file(path)
    assert train_cfg.steps == 7 and train_cfg.weights.constraint == 0.5
    assert model_cfg.hidden_dim == 32 and ssl_cfg == SSLConfig()
    path.write_text('{"train": {"nonsense": 1}}')
    with pytest.raises(ValueError):
        load_config_file(path)
    with pytest.raises(BadFormat):
        load_config_file(tmp_path / "missing.json")


# --- generator loss --------------------------------------------------------------------

def test_total_decomposes_on_20_batches(dataset, frontend):
    ds, speakers = dataset
    state = make_state(speakers, frontend.table_.version, weights=LossWeights(constraint=0.7))
    gen = torch.Generator().manual_seed(7)
    for _ in range(20):
        batch = state.next_batch(ds)
        lb = generator_loss(batch, state.model, state.ssl, state.train_cfg.weights, state.disc,
                            SPEC, generator=gen)
        recomposed = (lb.mel_recon + lb.kl + lb.duration + lb.adversarial_g + lb.feature_match
                      + 0.7 * lb.constraint)
        assert abs(lb.total_g - recomposed) <= 1e-6
        assert lb.kl >= 0 and lb.mel_recon >= 0 and lb.constraint >= 0


def test_injected_real_audio_zeroes_reconstruction(dataset, frontend):
    ds, speakers = dataset
    state = make_state(speakers, frontend.table_.version)
    batch = collate(ds[:3])
    lb = generator_loss(batch, state.model, state.ssl, state.train_cfg.weights, state.disc, SPEC,
                        generator=torch.Generator().manual_seed(0),
                        decode_override=lambda y, out: y.clone())
    assert lb.mel_recon == 0.0 and lb.constraint == 0.0 and lb.feature_match == 0.0


def test_lambda_zero_equals_no_ssl(dataset, frontend):
    ds, speakers = dataset
    a = make_state(speakers, frontend.table_.version, weights=LossWeights(constraint=0.0))
    b = make_state(speakers, frontend.table_.version, use_ssl=False)
    assert b.ssl is None
    for _ in range(3):
        _, la = train_step(a, a.next_batch(ds))
        _, lb = train_step(b, b.next_batch(ds))
        assert abs(la.total_g - lb.total_g) <= 1e-6


def test_constraint_gradient_reaches_decoder(dataset, frontend):
    ds, speakers = dataset
    state = make_state(speakers, frontend.table_.version)
    out = generator_forward(state.model, collate(ds[:2]), 32, torch.Generator().manual_seed(0))
    terms, _ = generator_terms(out, state.disc, state.ssl, state.train_cfg.weights, SPEC)
    terms["constraint"].backward()
    grads = [p.grad for p in state.model.dec.parameters()]
    assert any(g is not None and torch.any(g != 0) for g in grads)
    assert all(p.grad is None for p in state.ssl.parameters())


def test_total_loss_gradient_matches_finite_differences(dataset):
    """d total_g / d(decoder params) in float64 against central differences."""
    ds, _ = dataset
    torch.manual_seed(11)
    model = VITS(ModelConfig()).double()
    disc = build_discriminator(model.cfg).double()
    ssl = SSLExtractor(SSLConfig()).double().freeze()
    batch = collate(ds[:1])
    batch = dataclasses.replace(batch, spec=batch.spec.double(), wave=batch.wave.double())
    weights = LossWeights()

    def total():
        out = generator_forward(model, batch, 8, torch.Generator().manual_seed(5))
        return generator_terms(out, disc, ssl, weights, SPEC)[1]

    model.zero_grad()
    total().backward()
    params = [model.dec.conv_post.weight, model.dec.conv_pre.bias, model.dec.ups[-1].weight]
    rng = np.random.default_rng(0)
    analytic, numeric = [], []
    h = 1e-6
    with torch.no_grad():
        for p in params:
            flat = p.view(-1)
            for i in rng.choice(flat.numel(), size=min(8, flat.numel()), replace=False):
                orig = flat[i].item()
                flat[i] = orig + h
                up = total().item()
                flat[i] = orig - h
                down = total().item()
                flat[i] = orig
                numeric.append((up - down) / (2 * h))
                analytic.append(p.grad.view(-1)[i].item())
    analytic, numeric = np.array(analytic), np.array(numeric)
    rel = np.linalg.norm(analytic - numeric) / np.linalg.norm(numeric)
    assert rel < 1e-2


# --- train step, determinism and checkpoints ----------------------------------------

def test_training_is_deterministic(dataset, frontend):
    ds, speakers = dataset
    runs = []
    for _ in range(2):
        state = make_state(speakers, frontend.table_.version)
        runs.append([lb.as_dict() for lb in train(state, ds, steps=3, log_every=0)])
    assert runs[0] == runs[1]


def test_ssl_frozen_through_step(dataset, frontend):
    ds, speakers = dataset
    state = make_state(speakers, frontend.table_.version)
    before = {k: v.clone() for k, v in state.ssl.state_dict().items()}
    train(state, ds, steps=2, log_every=0)
    assert all(torch.equal(before[k], v) for k, v in state.ssl.state_dict().items())
    assert state.step == 2


def test_checkpoint_round_trip_is_byte_identical(dataset, frontend, tmp_path):
    ds, speakers = dataset
    state = make_state(speakers, frontend.table_.version)
    train(state, ds, steps=2, log_every=0)
    first, second = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(state, first)
    save_checkpoint(load_checkpoint(first), second)
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes().startswith(b"spoofsynth-ckpt-v1\n")


def test_checkpoint_fingerprint_guards(dataset, frontend, tmp_path):
    ds, speakers = dataset
    state = make_state(speakers, frontend.table_.version)
    path = tmp_path / "c.ckpt"
    save_checkpoint(state, path)
    with pytest.raises(FingerprintMismatch):
        load_checkpoint(path, symbol_table_version="sha256:0000000000000000")
    with pytest.raises(FingerprintMismatch):
        load_checkpoint(path, spec_params=SpectrogramParams(n_mels=40))
    load_checkpoint(path, frontend.table_.version, SPEC)
    with pytest.raises(BadFormat):
        load_checkpoint(tmp_path / "missing.ckpt")
    (tmp_path / "junk.ckpt").write_bytes(b"not a checkpoint\n")
    with pytest.raises(BadFormat):
        load_checkpoint(tmp_path / "junk.ckpt")


def test_resume_matches_unbroken_run(dataset, frontend, tmp_path):
    ds, speakers = dataset
    unbroken = make_state(speakers, frontend.table_.version)
    train(unbroken, ds, steps=2, log_every=0)
    save_checkpoint(unbroken, tmp_path / "mid.ckpt")
    expected = train(unbroken, ds, steps=2, log_every=0)
    resumed = load_checkpoint(tmp_path / "mid.ckpt")
    got = train(resumed, ds, steps=2, log_every=0)
    assert all(losses_close(a, b) for a, b in zip(expected, got))


# --- smoke run -------------------------------------------------------------------------

def test_smoke_training(smoke_run):
    history = smoke_run["history"]
    assert len(history) == 200
    for lb in history:
        lb.check_finite()
    mel = np.array([lb.mel_recon for lb in history])
    assert mel[-10:].mean() <= 0.7 * mel[:10].mean()
    ssl = smoke_run["state"].ssl.state_dict()
    assert all(torch.equal(smoke_run["ssl_before"][k], v) for k, v in ssl.items())
