"""Grapheme-to-phoneme conversion with lexicon-based polyphone resolution."""
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..exceptions import BadFormat, EmptyInput, OutOfLexicon, UnknownSymbol
from .normalize import NormalizedText
from .symbols import Syllable, SymbolTable, decode, encode


class PronunciationLexicon:
    """Read-only word -> readings map.

    File format: ``word<TAB>syl[ syl...]`` per line.  Repeated single
    characters list alternative readings, most frequent first.
    """

    def __init__(self, entries):
        self._entries = {}
        for word, syllables in entries:
            if len(syllables) != len(word):
                raise BadFormat(f"entry {word!r} has {len(syllables)} syllables")
            self._entries.setdefault(word, []).append(tuple(syllables))
        self.max_word_len = max((len(w) for w in self._entries), default=1)

    @classmethod
    def load(cls, path):
        entries = []
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise BadFormat(f"cannot read lexicon {path}: {exc}") from exc
        with fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    word, pron = line.split("\t")
                    syllables = [Syllable.parse(s) for s in pron.split()]
                except (ValueError, UnknownSymbol) as exc:
                    raise BadFormat(f"{path}:{lineno}: {exc}") from exc
                entries.append((word, syllables))
        return cls(entries)

    @classmethod
    def default(cls):
        return _default_lexicon()

    def __contains__(self, word):
        return word in self._entries

    def readings(self, word):
        return self._entries.get(word, [])


class LongestMatchResolver:
    """Forward maximum matching over multi-character words.

    Characters not covered by any word take their first listed reading.
    Any callable ``(chars, lexicon) -> list[Syllable]`` can replace this.
    """

    def __call__(self, chars, lexicon):
        out = []
        i = 0
        while i < len(chars):
            for size in range(min(lexicon.max_word_len, len(chars) - i), 1, -1):
                readings = lexicon.readings(chars[i:i + size])
                if readings:
                    out.extend(readings[0])
                    i += size
                    break
            else:
                out.extend(lexicon.readings(chars[i])[0])
                i += 1
        return out


@dataclass(frozen=True)
class PhonemeSequence:
    syllables: tuple
    ids: tuple
    symbol_table_version: str

    def __len__(self):
        return len(self.ids)

    def pinyin(self):
        return " ".join(str(s) for s in self.syllables)


def g2p(norm, lexicon, table=None, resolver=None, boundary=True):
    """Convert normalized text into a :class:`PhonemeSequence`.

    One syllable is produced per character.
    """
    chars = norm.chars if isinstance(norm, NormalizedText) else str(norm)
    if not chars:
        raise EmptyInput("cannot convert empty text")
    for pos, ch in enumerate(chars):
        if not lexicon.readings(ch):
            raise OutOfLexicon(ch, pos)
    resolver = resolver or LongestMatchResolver()
    syllables = tuple(resolver(chars, lexicon))
    if len(syllables) != len(chars):
        raise BadFormat(f"resolver returned {len(syllables)} syllables for {len(chars)} chars")
    table = table or SymbolTable.default()
    return PhonemeSequence(syllables, tuple(encode(syllables, table, boundary)), table.version)


def sequence_from_ids(ids, table, boundary=True):
    return PhonemeSequence(tuple(decode(ids, table, boundary)), tuple(ids), table.version)


@lru_cache(maxsize=1)
def _default_lexicon():
    return PronunciationLexicon.load(resources.files("spoofsynth.resources") / "lexicon.tsv")
