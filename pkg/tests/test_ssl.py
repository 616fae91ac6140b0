import numpy as np
import pytest
import torch

from spoofsynth.audio import AudioClip
from spoofsynth.exceptions import BadFormat, BadLayer, ShapeMismatch, TooShort
from spoofsynth.ssl import SSLConfig, SSLExtractor, constraint_loss, extract_features, load_pretrained

TOY = SSLConfig(conv_kernels=(2, 2), conv_strides=(2, 2), conv_channels=4, transformer_layers=1,
                transformer_dim=8, n_heads=2, ffn_dim=8, pos_kernel=3, tap_layer=1)


@pytest.fixture(scope="module")
def extractor():
    torch.manual_seed(0)
    return SSLExtractor().freeze()


def test_bad_layer():
    with pytest.raises(BadLayer):
        SSLConfig(transformer_layers=2, tap_layer=3)
    ex = SSLExtractor()
    with pytest.raises(BadLayer):
        ex(torch.zeros(1, 4000), tap_layer=5)


def test_feature_frame_formula(extractor, rng):
    cfg = extractor.cfg
    for n in rng.integers(cfg.min_samples(), 6000, 50):
        feats = extract_features(extractor, rng.uniform(-0.5, 0.5, int(n)))
        expected = int(n)
        for k, s in zip(cfg.conv_kernels, cfg.conv_strides):
            expected = (expected - k) // s + 1
        assert feats.shape == (expected, cfg.transformer_dim)


def test_too_short(extractor):
    with pytest.raises(TooShort):
        extract_features(extractor, np.zeros(extractor.cfg.min_samples() - 1))
    assert extract_features(extractor, np.zeros(extractor.cfg.min_samples())).shape[0] == 1


def test_identical_inputs_identical_features(extractor, rng):
    clip = AudioClip(rng.uniform(-0.5, 0.5, 3200), 16000)
    assert torch.equal(extract_features(extractor, clip), extract_features(extractor, clip))


def test_tap_zero_is_conv_output(extractor, rng):
    wave = torch.from_numpy(rng.uniform(-0.5, 0.5, (1, 3200))).float()
    conv = extractor(wave, tap_layer=0)
    first = extractor(wave, tap_layer=1)
    assert conv.shape == first.shape and not torch.allclose(conv, first)


def test_constraint_loss_identity_symmetry_and_sign(extractor, rng):
    x = rng.uniform(-0.5, 0.5, 3200)
    assert float(constraint_loss(extractor, x, x).value) == 0.0
    for _ in range(100):
        a, b = rng.uniform(-0.5, 0.5, 800), rng.uniform(-0.5, 0.5, 800)
        ab = constraint_loss(extractor, a, b).value
        assert float(ab) >= 0
        assert torch.allclose(ab, constraint_loss(extractor, b, a).value)


def test_constraint_loss_trims_to_shorter(extractor, rng):
    a, b = rng.uniform(-0.5, 0.5, 3000), rng.uniform(-0.5, 0.5, 2000)
    result = constraint_loss(extractor, a, b)
    assert result.num_samples == 2000
    assert torch.equal(result.value, constraint_loss(extractor, a[:2000], b).value)


def test_constraint_gradient_matches_finite_differences():
    torch.manual_seed(3)
    ex = SSLExtractor(TOY).double().freeze()
    real = torch.rand(16, dtype=torch.float64) - 0.5
    fake = (torch.rand(16, dtype=torch.float64) - 0.5).requires_grad_(True)
    constraint_loss(ex, real, fake).value.backward()
    h = 1e-6
    numeric = torch.zeros(16, dtype=torch.float64)
    with torch.no_grad():
        for i in range(16):
            up, down = fake.detach().clone(), fake.detach().clone()
            up[i] += h
            down[i] -= h
            numeric[i] = (constraint_loss(ex, real, up).value
                          - constraint_loss(ex, real, down).value) / (2 * h)
    rel = torch.linalg.norm(fake.grad - numeric) / torch.linalg.norm(numeric)
    assert rel < 1e-3


def test_frozen_extractor_gets_no_grad(extractor, rng):
    fake = torch.from_numpy(rng.uniform(-0.5, 0.5, 1600)).float().requires_grad_(True)
    constraint_loss(extractor, torch.zeros(1600), fake).value.backward()
    assert fake.grad is not None and torch.any(fake.grad != 0)
    assert all(p.grad is None for p in extractor.parameters())


def test_save_load_round_trip(extractor, tmp_path, rng):
    path = tmp_path / "ssl.bin"
    extractor.save(path)
    again = load_pretrained(path)
    probe = rng.uniform(-0.5, 0.5, 2400)
    assert torch.equal(extract_features(extractor, probe), extract_features(again, probe))
    assert path.read_bytes().startswith(b"spoofsynth-ssl-v1\n")


def test_wrong_dim_is_shape_mismatch(extractor, tmp_path):
    path = tmp_path / "ssl.bin"
    extractor.save(path)
    with pytest.raises(ShapeMismatch):
        load_pretrained(path, SSLConfig(transformer_dim=32, ffn_dim=64))


def test_missing_file_names_path(tmp_path):
    path = tmp_path / "nope.bin"
    with pytest.raises(BadFormat, match="nope.bin"):
        load_pretrained(path)
