"""scikit-learn style wrappers around the pipeline stages.

All of these follow the estimator conventions: constructor arguments are
stored verbatim, learned state gets a trailing underscore, and ``fit``
returns ``self``.  They compose with ``sklearn.pipeline.Pipeline``.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio.clip import normalize_volume, resample
from .audio.spectrogram import SpectrogramParams, spectrogram
from .evaluation import StubDetector, compute_eer
from .exceptions import NegativeNoise, NegativeScale, UnknownSpeaker, UsageError
from .frontend import TextFrontend
from .synthesis import SynthesisParams, synthesize
from .validation import check_clips, check_scalar, check_scores, check_texts


class Resampler(TransformerMixin, BaseEstimator):
    def __init__(self, target_rate=16000):
        self.target_rate = target_rate

    def __sklearn_is_fitted__(self):
        return True  # stateless

    def fit(self, X=None, y=None):
        check_scalar(self.target_rate, "target_rate", minimum=0, strict=True)
        return self

    def transform(self, X):
        return [resample(c, int(self.target_rate)) for c in check_clips(X)]


class VolumeNormalizer(TransformerMixin, BaseEstimator):
    def __init__(self, target_peak_dbfs=-3.0):
        self.target_peak_dbfs = target_peak_dbfs

    def __sklearn_is_fitted__(self):
        return True  # stateless

    def fit(self, X=None, y=None):
        check_scalar(self.target_peak_dbfs, "target_peak_dbfs")
        return self

    def transform(self, X):
        return [normalize_volume(c, self.target_peak_dbfs) for c in check_clips(X)]


class SpectrogramExtractor(TransformerMixin, BaseEstimator):
    """Clips -> list of ``[frames, bins]`` arrays (linear or log-mel)."""

    def __init__(self, kind="linear", n_fft=1024, hop=256, win=1024, sample_rate=16000, n_mels=80):
        self.kind = kind
        self.n_fft = n_fft
        self.hop = hop
        self.win = win
        self.sample_rate = sample_rate
        self.n_mels = n_mels

    def fit(self, X=None, y=None):
        self.params_ = SpectrogramParams(n_fft=self.n_fft, hop=self.hop, win=self.win,
                                         sample_rate=self.sample_rate, n_mels=self.n_mels)
        return self

    def transform(self, X):
        check_is_fitted(self)
        return [spectrogram(c, self.params_, self.kind).frames for c in check_clips(X)]


class SpoofSynthesizer(BaseEstimator):
    """Texts -> synthesized clips from a trained checkpoint.

    ``fit`` loads the checkpoint (no training happens here; use the
    ``train`` command or :mod:`spoofsynth.training` for that).
    """

    def __init__(self, checkpoint=None, ns=0.667, nsd=0.8, speaker=0, seed=0,
                 length_scale=1.0, peak_dbfs=-3.0):
        self.checkpoint = checkpoint
        self.ns = ns
        self.nsd = nsd
        self.speaker = speaker
        self.seed = seed
        self.length_scale = length_scale
        self.peak_dbfs = peak_dbfs

    def fit(self, X=None, y=None):
        from .training import load_checkpoint

        if self.checkpoint is None:
            raise UsageError("SpoofSynthesizer needs a checkpoint path")
        check_scalar(self.ns, "ns", minimum=0, exc=NegativeScale)
        check_scalar(self.nsd, "nsd", minimum=0, exc=NegativeNoise)
        self.frontend_ = TextFrontend().fit()
        state = load_checkpoint(self.checkpoint, symbol_table_version=self.frontend_.table_.version)
        self.model_ = state.model.eval()
        self.speakers_ = list(state.speakers)
        self.sample_rate_ = state.spec_params.sample_rate
        return self

    def speaker_index(self, speaker):
        if isinstance(speaker, (int, np.integer)):
            return int(speaker)
        if speaker in self.speakers_:
            return self.speakers_.index(speaker)
        if isinstance(speaker, str) and speaker.isdigit():
            return int(speaker)
        raise UnknownSpeaker(f"unknown speaker {speaker!r}; known: {self.speakers_}")

    def synthesize(self, text, ns=None, nsd=None, speaker=None, seed=None, index=0):
        """One utterance -> :class:`SynthesisResult`; ``None`` falls back to the init params."""
        check_is_fitted(self)
        params = SynthesisParams(
            ns=self.ns if ns is None else ns, nsd=self.nsd if nsd is None else nsd,
            speaker_id=self.speaker_index(self.speaker if speaker is None else speaker),
            seed=self.seed if seed is None else seed, length_scale=self.length_scale)
        return synthesize(text, params, self.model_, self.frontend_, self.sample_rate_,
                          self.peak_dbfs, utterance_index=index)

    def predict(self, X):
        return [self.synthesize(t, index=i).clip for i, t in enumerate(check_texts(X))]


class StubScorer(BaseEstimator):
    """Estimator face of the stub detector.

    ``decision_function`` gives genuineness scores.  ``fit`` with labels
    (1 = genuine, 0 = spoof) sets ``threshold_`` at the EER crossing so
    ``predict`` can emit hard decisions.
    """

    def __init__(self, silence_weight=1.0, level_weight=1.0, ref_dbfs=-3.0):
        self.silence_weight = silence_weight
        self.level_weight = level_weight
        self.ref_dbfs = ref_dbfs

    def _detector(self):
        return StubDetector(self.silence_weight, self.level_weight, self.ref_dbfs)

    def decision_function(self, X):
        det = self._detector()
        return np.array([det.score_clip(c) for c in check_clips(X)])

    def fit(self, X, y):
        scores = self.decision_function(X)
        y = np.asarray(y).astype(bool)
        if y.shape != scores.shape:
            raise UsageError(f"{len(scores)} clips but {y.size} labels")
        result = compute_eer(check_scores(scores[y], "genuine"), check_scores(scores[~y], "spoof"))
        self.threshold_ = result.threshold
        self.eer_ = result.eer
        return self

    def predict(self, X):
        check_is_fitted(self)
        return (self.decision_function(X) >= self.threshold_).astype(int)
