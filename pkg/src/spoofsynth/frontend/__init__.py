"""Mandarin text frontend: normalization, G2P and symbol encoding."""
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .g2p import LongestMatchResolver, PhonemeSequence, PronunciationLexicon, g2p, sequence_from_ids
from .normalize import NormalizedText, normalize_text, read_cardinal
from .symbols import Syllable, SymbolTable, decode, encode

__all__ = [
    "LongestMatchResolver", "NormalizedText", "PhonemeSequence", "PronunciationLexicon",
    "Syllable", "SymbolTable", "TextFrontend", "decode", "encode", "g2p", "normalize_text",
    "read_cardinal", "sequence_from_ids",
]


class TextFrontend(TransformerMixin, BaseEstimator):
    """Raw text -> phoneme ID sequences.

    Parameters
    ----------
    lexicon_path, symbols_path : str or None
        Files to load; ``None`` selects the bundled resources.
    boundary : bool
        Wrap each sequence in BOS/EOS tokens.
    resolver : callable or None
        Polyphone resolver, defaults to :class:`LongestMatchResolver`.
    """

    def __init__(self, lexicon_path=None, symbols_path=None, boundary=True, resolver=None):
        self.lexicon_path = lexicon_path
        self.symbols_path = symbols_path
        self.boundary = boundary
        self.resolver = resolver

    def fit(self, X=None, y=None):
        self.lexicon_ = (PronunciationLexicon.load(self.lexicon_path) if self.lexicon_path
                         else PronunciationLexicon.default())
        self.table_ = (SymbolTable.load(self.symbols_path) if self.symbols_path
                       else SymbolTable.default())
        self.symbol_table_version_ = self.table_.version
        return self

    def __sklearn_is_fitted__(self):
        return hasattr(self, "table_")

    def phonemize(self, text):
        check_is_fitted(self)
        return g2p(normalize_text(text), self.lexicon_, self.table_, self.resolver, self.boundary)

    def transform(self, X):
        if isinstance(X, str):
            X = [X]
        return [list(self.phonemize(text).ids) for text in X]
