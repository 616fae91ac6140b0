from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import number_oracle, tn_cases
from spoofsynth.exceptions import BadFormat, EmptyInput, OutOfLexicon, UnknownSymbol
from spoofsynth.frontend import (PronunciationLexicon, Syllable, SymbolTable, TextFrontend, decode,
                                 encode, g2p, normalize_text, read_cardinal, sequence_from_ids)
from spoofsynth.frontend.normalize import FROM_NUMBER, FROM_SYMBOL, ORIGINAL, is_hanzi
from spoofsynth.frontend.symbols import FINALS, INITIALS, TONES

GOLDEN = Path(__file__).parent / "fixtures" / "g2p_golden.tsv"


def load_goldens():
    rows = []
    for line in GOLDEN.read_text(encoding="utf-8").splitlines():
        if line.strip():
            text, pinyin = line.split("\t")
            rows.append((text, pinyin))
    return rows


# --- normalization -----------------------------------------------------------------

def test_cardinal_matches_oracle_for_all_four_digit_numbers():
    mismatches = [n for n in range(10000) if read_cardinal(n) != number_oracle(n)]
    assert mismatches == []


@pytest.mark.parametrize("raw, expected", tn_cases())
def test_tn_cases(raw, expected):
    assert normalize_text(raw).chars == expected


def test_examples():
    assert normalize_text("共123人").chars == "共一百二十三人"
    assert normalize_text("你好").chars == "你好"
    assert normalize_text("50%").chars == "百分之五十"


def test_provenance_tags():
    norm = normalize_text("共12%人")
    assert norm.chars == "共百分之十二人"
    assert norm.provenance == (ORIGINAL, FROM_SYMBOL, FROM_SYMBOL, FROM_SYMBOL,
                               FROM_NUMBER, FROM_NUMBER, ORIGINAL)


def test_unknown_symbols_dropped_with_warning(caplog):
    norm = normalize_text("你好，world!")
    assert norm.chars == "你好"
    assert len(norm.warnings) >= 2


def test_full_width_digits_are_folded():
    assert normalize_text("１２３").chars == "一百二十三"


def test_empty_input():
    for raw in ["", "   ", "!!!", "abc"]:
        with pytest.raises(EmptyInput):
            normalize_text(raw)


def test_range_reads_dao():
    norm = normalize_text("3~5个")
    assert norm.chars == "三到五个"


mixed_text = st.text(alphabet="你好中国人民共个0123456789%.-℃ +=，!a", min_size=1, max_size=20)


@settings(max_examples=300, deadline=None)
@given(mixed_text)
def test_normalize_idempotent_and_clean(raw):
    try:
        once = normalize_text(raw)
    except EmptyInput:
        return
    assert all(is_hanzi(c) for c in once.chars)
    assert len(once.provenance) == len(once.chars)
    assert normalize_text(once.chars).chars == once.chars


# --- g2p -------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def lexicon():
    return PronunciationLexicon.default()


def test_g2p_goldens_all_match(frontend):
    rows = load_goldens()
    assert len(rows) == 100
    wrong = [(t, p, frontend.phonemize(t).pinyin()) for t, p in rows
             if frontend.phonemize(t).pinyin() != p]
    assert wrong == []


def test_nihao_syllables(lexicon):
    seq = g2p(normalize_text("你好"), lexicon)
    assert seq.syllables == (Syllable("n", "i", 3), Syllable("h", "ao", 3))


def test_yinhang_polyphone(lexicon):
    assert str(g2p(normalize_text("银行"), lexicon).syllables[1]) == "hang2"
    assert str(g2p(normalize_text("行走"), lexicon).syllables[0]) == "xing2"


def test_out_of_lexicon_reports_position():
    lex = PronunciationLexicon([("你", [Syllable.parse("ni3")])])
    with pytest.raises(OutOfLexicon) as info:
        g2p(normalize_text("你好"), lex)
    assert info.value.char == "好" and info.value.position == 1


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="银行长大音乐重新你好我们的地了不一中国", min_size=1, max_size=15))
def test_one_syllable_per_character(text):
    lexicon = PronunciationLexicon.default()
    norm = normalize_text(text)
    seq = g2p(norm, lexicon)
    assert len(seq.syllables) == len(norm.chars)
    assert all(s.tone in TONES for s in seq.syllables)


def test_lexicon_load_errors(tmp_path):
    with pytest.raises(BadFormat):
        PronunciationLexicon.load(tmp_path / "missing.tsv")
    bad = tmp_path / "bad.tsv"
    bad.write_text("你 ni3\n", encoding="utf-8")
    with pytest.raises(BadFormat):
        PronunciationLexicon.load(bad)


# --- symbols ---------------------------------------------------------------------------

def test_symbol_ids_distinct():
    table = SymbolTable.default()
    ids = [table.id(s) for s in table.symbols]
    assert len(set(ids)) == len(table.symbols) == len(set(table.symbols))
    assert ids == list(range(len(ids)))


def test_empty_sequence_is_boundaries_only():
    table = SymbolTable.default()
    ids = encode([], table)
    assert len(ids) == 2
    assert list(decode(ids, table)) == []


def test_unknown_symbol():
    table = SymbolTable.default()
    with pytest.raises(UnknownSymbol):
        decode([10_000], table)
    with pytest.raises(UnknownSymbol):
        encode([Syllable("zz", "a", 1)], table)


syllables = st.builds(Syllable, st.sampled_from(("",) + INITIALS), st.sampled_from(FINALS),
                      st.sampled_from(TONES))


@settings(max_examples=300, deadline=None)
@given(st.lists(syllables, max_size=30), st.booleans())
def test_encode_decode_round_trip(syls, boundary):
    table = SymbolTable.default()
    ids = encode(syls, table, boundary)
    assert tuple(decode(ids, table, boundary)) == tuple(syls)


def test_symbol_table_file_round_trip(tmp_path):
    table = SymbolTable.default()
    table.save(tmp_path / "symbols.txt")
    again = SymbolTable.load(tmp_path / "symbols.txt")
    assert again.symbols == table.symbols and again.version == table.version


def test_sequence_from_ids_round_trip(frontend):
    seq = frontend.phonemize("今天天气很好")
    again = sequence_from_ids(seq.ids, frontend.table_)
    assert again.syllables == seq.syllables


def test_text_frontend_estimator_api():
    fe = TextFrontend(boundary=False)
    assert fe.get_params()["boundary"] is False
    ids = fe.fit().transform(["你好", "中国"])
    assert len(ids) == 2 and all(len(x) == 4 for x in ids)
