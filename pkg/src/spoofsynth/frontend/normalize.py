"""Rule-based text normalization for Mandarin.

Digits and a small whitelist of symbols are expanded into Chinese words.
Every other non-Chinese character is dropped and reported as a warning.
"""
import logging
import re
import unicodedata
from dataclasses import dataclass, field

from ..exceptions import EmptyInput

logger = logging.getLogger(__name__)

DIGITS = "零一二三四五六七八九"
_UNITS = ("", "十", "百", "千")

# 2 reads liang3 when it directly counts one of these
MEASURE_WORDS = frozenset("个只位本张条次天件块种辆斤把双台杯")

MAX_CARDINAL_DIGITS = 4

ORIGINAL = "original"
FROM_NUMBER = "expanded-from-number"
FROM_SYMBOL = "expanded-from-symbol"

_NUMBER = re.compile(
    r"(?P<sign>[-−])?(?P<int>\d+)(?:\.(?P<frac>\d+))?"
    r"(?P<unit>%|‰|℃|°C)?"
)
_RANGE_MARKS = "-~～"
_STANDALONE_SYMBOLS = {"+": "加", "=": "等于"}
_PREFIX_UNITS = {"%": "百分之", "‰": "千分之"}
_SUFFIX_UNITS = {"℃": "摄氏度", "°C": "摄氏度"}


def is_hanzi(ch):
    return "一" <= ch <= "鿿"


@dataclass(frozen=True)
class NormalizedText:
    chars: str
    provenance: tuple
    warnings: tuple = field(default=(), compare=False)

    def __str__(self):
        return self.chars

    def __len__(self):
        return len(self.chars)


def read_digits(digits):
    """Digit-by-digit reading, used for codes and long runs."""
    return "".join(DIGITS[int(d)] for d in digits)


def read_cardinal(n):
    """Positional reading of an integer in 0..9999."""
    if not 0 <= n < 10 ** MAX_CARDINAL_DIGITS:
        raise ValueError(f"cardinal reading only covers 0..9999, got {n}")
    if n == 0:
        return DIGITS[0]
    digits = [int(d) for d in str(n)]
    width = len(digits)
    out = []
    pending_zero = False
    for pos, d in enumerate(digits):
        place = width - pos - 1
        if d == 0:
            pending_zero = bool(out)
            continue
        if pending_zero:
            out.append(DIGITS[0])
            pending_zero = False
        # leading 1 of 10..19 is silent
        if not (d == 1 and place == 1 and pos == 0):
            out.append(DIGITS[d])
        out.append(_UNITS[place])
    return "".join(out)


def read_integer(digits):
    if len(digits) > MAX_CARDINAL_DIGITS or (len(digits) > 1 and digits[0] == "0"):
        return read_digits(digits)
    return read_cardinal(int(digits))


def _expand_number(m, following):
    """Return list of (text, tag) pieces for a regex number match."""
    pieces = []
    unit = m.group("unit")
    if unit in _PREFIX_UNITS:
        pieces.append((_PREFIX_UNITS[unit], FROM_SYMBOL))
    if m.group("sign"):
        pieces.append(("负", FROM_SYMBOL))
    int_part, frac = m.group("int"), m.group("frac")
    if (int_part == "2" and frac is None and unit is None and not m.group("sign")
            and following in MEASURE_WORDS):
        pieces.append(("两", FROM_NUMBER))
    else:
        pieces.append((read_integer(int_part), FROM_NUMBER))
    if frac is not None:
        pieces.append(("点", FROM_NUMBER))
        pieces.append((read_digits(frac), FROM_NUMBER))
    if unit in _SUFFIX_UNITS:
        pieces.append((_SUFFIX_UNITS[unit], FROM_SYMBOL))
    return pieces


def normalize_text(raw):
    """Expand numbers and whitelisted symbols; keep only Chinese characters.

    Raises ``EmptyInput`` when nothing readable remains.
    """
    if isinstance(raw, NormalizedText):
        raw = raw.chars
    # NFKC folds full-width digits and symbols to ASCII
    raw = unicodedata.normalize("NFKC", raw)
    chars, tags, warnings = [], [], []

    def emit(text, tag):
        for ch in text:
            chars.append(ch)
            tags.append(tag)

    i = 0
    while i < len(raw):
        ch = raw[i]
        if (ch in _RANGE_MARKS and 0 < i < len(raw) - 1
                and raw[i - 1].isdigit() and raw[i + 1].isdigit()):
            emit("到", FROM_SYMBOL)
            i += 1
            continue
        m = _NUMBER.match(raw, i) if (ch.isdigit() or ch in "-−") else None
        if m is not None and m.group("int").isascii():
            following = raw[m.end()] if m.end() < len(raw) else ""
            for text, tag in _expand_number(m, following):
                emit(text, tag)
            i = m.end()
            continue
        if is_hanzi(ch):
            emit(ch, ORIGINAL)
        elif ch in _STANDALONE_SYMBOLS:
            emit(_STANDALONE_SYMBOLS[ch], FROM_SYMBOL)
        elif not ch.isspace():
            warnings.append(f"dropped {ch!r} at position {i}")
        i += 1

    for w in warnings:
        logger.warning("normalize_text: %s", w)
    if not chars:
        raise EmptyInput(f"no readable content in {raw!r}")
    return NormalizedText("".join(chars), tuple(tags), tuple(warnings))
