"""Pinyin syllable decomposition and the phoneme symbol table."""
import hashlib
from dataclasses import dataclass
from importlib import resources

from ..exceptions import BadFormat, UnknownSymbol

# longest first so zh/ch/sh win over z/c/s
INITIALS = ("zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
            "j", "q", "x", "r", "z", "c", "s", "y", "w")
FINALS = ("a", "ai", "an", "ang", "ao", "e", "ei", "en", "eng", "er", "i", "ia", "ian",
          "iang", "iao", "ie", "in", "ing", "iong", "iu", "o", "ong", "ou", "u", "ua",
          "uai", "uan", "uang", "ue", "ui", "un", "uo", "v", "ve")
TONES = (1, 2, 3, 4, 5)

PAD, BOS, EOS = "_", "^", "$"


@dataclass(frozen=True)
class Syllable:
    initial: str
    final: str
    tone: int

    def __post_init__(self):
        if self.initial and self.initial not in INITIALS:
            raise UnknownSymbol(f"unknown initial {self.initial!r}")
        if self.final not in FINALS:
            raise UnknownSymbol(f"unknown final {self.final!r}")
        if self.tone not in TONES:
            raise UnknownSymbol(f"tone must be 1..5, got {self.tone}")

    @classmethod
    def parse(cls, text):
        """Parse a tone-numbered pinyin syllable such as ``hao3``."""
        text = text.strip().lower().replace("ü", "v")
        if len(text) < 2 or not text[-1].isdigit():
            raise UnknownSymbol(f"syllable {text!r} lacks a tone digit")
        body, tone = text[:-1], int(text[-1])
        initial = next((i for i in INITIALS if body.startswith(i) and body != i), "")
        return cls(initial, body[len(initial):], tone)

    @property
    def final_symbol(self):
        return f"{self.final}{self.tone}"

    def __str__(self):
        return f"{self.initial}{self.final}{self.tone}"


def default_symbols():
    return [PAD, BOS, EOS, *INITIALS, *(f"{f}{t}" for f in FINALS for t in TONES)]


class SymbolTable:
    """Bidirectional symbol <-> ID map; the ID is the line number in the file."""

    def __init__(self, symbols):
        symbols = list(symbols)
        if len(set(symbols)) != len(symbols):
            raise BadFormat("symbol table contains duplicate symbols")
        self.symbols = symbols
        self._ids = {s: i for i, s in enumerate(symbols)}
        digest = hashlib.sha256("\n".join(symbols).encode("utf-8")).hexdigest()
        self.version = f"sha256:{digest[:16]}"

    @classmethod
    def default(cls):
        return cls.load(resources.files("spoofsynth.resources") / "symbols.txt")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            symbols = [line.rstrip("\n") for line in fh]
        while symbols and not symbols[-1]:
            symbols.pop()
        return cls(symbols)

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.symbols) + "\n")

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return symbol in self._ids

    def id(self, symbol):
        try:
            return self._ids[symbol]
        except KeyError:
            raise UnknownSymbol(f"symbol {symbol!r} not in table") from None

    def symbol(self, idx):
        if not 0 <= idx < len(self.symbols):
            raise UnknownSymbol(f"id {idx} out of range")
        return self.symbols[idx]


def encode(syllables, table, boundary=True):
    """Map syllables to IDs: optional initial ID, then final+tone ID."""
    ids = [table.id(BOS)] if boundary else []
    for syl in syllables:
        if syl.initial:
            ids.append(table.id(syl.initial))
        ids.append(table.id(syl.final_symbol))
    if boundary:
        ids.append(table.id(EOS))
    return ids


def decode(ids, table, boundary=True):
    """Inverse of :func:`encode`."""
    ids = list(ids)
    if boundary:
        if len(ids) < 2 or ids[0] != table.id(BOS) or ids[-1] != table.id(EOS):
            raise UnknownSymbol("id sequence lacks boundary tokens")
        ids = ids[1:-1]
    out = []
    initial = ""
    for idx in ids:
        sym = table.symbol(idx)
        if sym in INITIALS:
            if initial:
                raise UnknownSymbol(f"two initials in a row at id {idx}")
            initial = sym
        elif sym[:-1] in FINALS and sym[-1:].isdigit():
            out.append(Syllable(initial, sym[:-1], int(sym[-1])))
            initial = ""
        else:
            raise UnknownSymbol(f"unexpected symbol {sym!r} inside sequence")
    if initial:
        raise UnknownSymbol("dangling initial at end of sequence")
    return out
