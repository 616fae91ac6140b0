import time

import numpy as np
import pytest
import torch

from spoofsynth.audio.corpus import prepare_corpus, read_metadata
from spoofsynth.audio.spectrogram import SpectrogramParams
from spoofsynth.audio.synthetic import make_synthetic_corpus
from spoofsynth.frontend import TextFrontend

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def frontend():
    return TextFrontend().fit()


@pytest.fixture(scope="session")
def raw_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("raw")
    make_synthetic_corpus(out)
    return out


@pytest.fixture(scope="session")
def corpus(raw_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("prepared")
    prepare_corpus(raw_corpus, out, 16000, -3.0, seed=0)
    return out


@pytest.fixture(scope="session")
def dataset(corpus, frontend):
    from spoofsynth.training import build_dataset

    entries = read_metadata(corpus)
    speakers = sorted({e.speaker_id for e in entries})
    return build_dataset(entries, frontend, SpectrogramParams(), speakers), speakers


@pytest.fixture(scope="session")
def smoke_run(dataset, frontend):
    """The 200-step training run shared by the smoke and synthesis checks."""
    from spoofsynth.training import TrainState, train

    ds, speakers = dataset
    state = TrainState(speakers=speakers, symbol_table_version=frontend.table_.version)
    ssl_before = {k: v.clone() for k, v in state.ssl.state_dict().items()}
    start = time.perf_counter()
    history = train(state, ds, steps=200, log_every=0)
    return {"state": state, "history": history, "ssl_before": ssl_before,
            "seconds": time.perf_counter() - start}


@pytest.fixture(scope="session")
def trained_model(smoke_run):
    return smoke_run["state"].model.eval()


@pytest.fixture
def rng():
    return np.random.default_rng(0)
