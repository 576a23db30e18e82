import math
import unicodedata
import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_table, write_tsv
from namecct.corpus import (
    ContextKey,
    CorpusFormatError,
    SourceTable,
    build_name_table,
    fixture_dir,
    ingest_directory,
    ingest_source,
    normalize_name,
    poststratify,
    read_name_table,
    write_name_table,
)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("José", "jose"),
        ("Jean-Pierre Dupont", "jean"),
        ("Åsa", "asa"),
        ("李", None),
        ("  Mary Ann", "mary"),
        ("O'Brien", "o"),
        ("J. Robert", "j"),
        ("ZOË", "zoe"),
        ("", None),
        ("ﬁona", "fiona"),  # compatibility ligature
    ],
)
def test_normalize_examples(raw, expected):
    assert normalize_name(raw) == expected


def _strip_by_decomposition_table(s):
    # independent route: walk the raw decomposition mappings recursively
    out = []

    def expand(ch):
        dec = unicodedata.decomposition(ch)
        if not dec:
            return ch
        parts = [p for p in dec.split() if not p.startswith("<")]
        return "".join(expand(chr(int(p, 16))) for p in parts)

    for ch in s:
        for c in expand(ch):
            if not unicodedata.combining(c):
                out.append(c)
    return "".join(out)


@pytest.mark.parametrize("raw", ["Åsa", "Zoë", "Ángel", "Łukasz", "Ștefan", "Dvořák"])
def test_diacritics_match_decomposition_oracle(raw):
    oracle = "".join(c for c in _strip_by_decomposition_table(raw).lower() if "a" <= c <= "z")
    assert normalize_name(raw) == (oracle or None)


@given(st.text())
@settings(max_examples=300)
def test_normalize_idempotent_and_ascii(raw):
    key = normalize_name(raw)
    if key is not None:
        assert key and all("a" <= c <= "z" for c in key)
        assert normalize_name(key) == key


def test_ingest_parses_and_merges(tmp_path):
    p = write_tsv(tmp_path / "src.tsv", [
        ("Anna", 1990, "US", 412, 3),
        ("Kim", "-", "JP", 5, 0),
        ("Kim", "-", "JP", 2, 1),
        ("李", "-", "CN", 1, 1),
    ])
    t = ingest_source(p)
    assert t.source_id == "src"
    assert t.entries[("anna", ContextKey("US", 1990))] == (412.0, 3.0)
    assert t.entries[("kim", ContextKey("JP", -1))] == (7.0, 1.0)
    assert t.skipped == 1
    assert not t.stratified


def test_ingest_source_id_override(tmp_path):
    p = write_tsv(tmp_path / "x.tsv", [("Anna", "-", "--", 1, 0)])
    assert ingest_source(p, "wiki").source_id == "wiki"


@pytest.mark.parametrize(
    "row, reason",
    [
        (("Anna", "-", "US", -1, 3), "negative weight at line 3"),
        (("Anna", "-", "US", 1), "expected 5 columns"),
        (("Anna", "1995", "US", 1, 1), "unparsable decade"),
        (("Anna", "abc", "US", 1, 1), "unparsable decade"),
        (("Anna", "-", "USA", 1, 1), "invalid country"),
        (("Anna", "-", "US", "x", 1), "unparsable weight"),
    ],
)
def test_ingest_errors_name_file_line_reason(tmp_path, row, reason):
    p = write_tsv(tmp_path / "bad.tsv", [("Zoe", "-", "--", 1, 0), row])
    with pytest.raises(CorpusFormatError) as exc:
        ingest_source(p)
    assert exc.value.line == 3
    assert reason in str(exc.value)
    assert "bad.tsv" in str(exc.value)


def test_ingest_negative_weight_line_number(tmp_path):
    p = write_tsv(tmp_path / "bad.tsv", [("Anna", "-", "US", -1, 3)])
    with pytest.raises(CorpusFormatError, match="negative weight at line 2"):
        ingest_source(p)


def test_ingest_empty_file(tmp_path):
    (tmp_path / "e.tsv").write_text("")
    with pytest.raises(CorpusFormatError, match="empty"):
        ingest_source(tmp_path / "e.tsv")
    write_tsv(tmp_path / "h.tsv", [])
    with pytest.raises(CorpusFormatError, match="empty"):
        ingest_source(tmp_path / "h.tsv")


def _source(entries, sid="s"):
    return SourceTable(sid, {(n, ContextKey()): w for n, w in entries.items()})


def test_poststratify_worked_example():
    # F = 300, M = 100 -> male weights x3
    t = _source({"alex": (10.0, 10.0), "mary": (290.0, 0.0), "john": (0.0, 90.0)})
    s = poststratify(t)
    assert s.stratified
    wf, wm = s.entries[("alex", ContextKey())]
    assert (wf, wm) == (10.0, 30.0)
    assert wf / (wf + wm) == 0.25
    tf, tm = s.totals()
    assert math.isclose(tf, tm, rel_tol=1e-9)


def test_poststratify_balanced_is_identity():
    t = _source({"a": (3.0, 1.0), "b": (1.0, 3.0)})
    s = poststratify(t)
    assert s.entries == t.entries and s.stratified


def test_poststratify_one_group_warns():
    t = _source({"a": (3.0, 0.0), "b": (1.0, 0.0)})
    with pytest.warns(UserWarning):
        s = poststratify(t)
    assert s.entries == t.entries
    assert not s.stratified and s.warning


def test_poststratify_twice_is_error():
    t = poststratify(_source({"a": (3.0, 1.0)}))
    with pytest.raises(ValueError, match="already"):
        poststratify(t)


_w = st.one_of(st.just(0.0), st.floats(1e-3, 1e6))
weights = st.tuples(_w, _w).filter(lambda w: w[0] + w[1] > 0)


@given(st.dictionaries(st.text("abcdefgh", min_size=1, max_size=4), weights, min_size=1, max_size=30))
@settings(max_examples=200)
def test_poststratify_equalizes_and_is_monotone(entries):
    t = _source(entries)
    tf, tm = t.totals()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = poststratify(t)
    if tf == 0 or tm == 0:
        assert s.entries == t.entries
        return
    sf, sm = s.totals()
    assert math.isclose(sf, sm, rel_tol=1e-9)
    # order of p_f across names is preserved (monotone per-group scaling)
    names = sorted(entries)
    before = [t.entries[(n, ContextKey())][0] / sum(t.entries[(n, ContextKey())]) for n in names]
    after = [s.entries[(n, ContextKey())][0] / sum(s.entries[(n, ContextKey())]) for n in names]
    for i in range(len(names)):
        for j in range(len(names)):
            if before[i] < before[j]:
                assert after[i] <= after[j]


def test_build_name_table_examples():
    t = make_table({"s": {"anna": (9, 1)}})
    assert t.p_f_by_source("anna") == {"s": 0.9}
    assert t.total_weight("anna") == 10
    t = make_table({"a": {"lee": (1, 9)}, "b": {"lee": (0, 10)}})
    assert t.p_f_by_source("lee") == {"a": 0.1, "b": 0.0}
    assert "nobody" not in t


def test_build_name_table_duplicate_source():
    s = _source({"a": (1.0, 0.0)})
    with pytest.raises(ValueError, match="duplicate"):
        build_name_table([s, s])


def test_build_name_table_permutation_invariant(fixture_table):
    sources = ingest_directory(fixture_dir())
    assert build_name_table(sources[::-1]) == fixture_table
    assert build_name_table(sources[2:] + sources[:2]) == fixture_table


def test_round_trip(tmp_path, fixture_table):
    write_name_table(fixture_table, tmp_path / "corpus.tsv")
    back = read_name_table(tmp_path / "corpus.tsv")
    assert back == fixture_table
    write_name_table(back, tmp_path / "again.tsv")
    assert (tmp_path / "corpus.tsv").read_bytes() == (tmp_path / "again.tsv").read_bytes()


def test_contexts_aggregate():
    t = make_table({
        "a": {"jean": {("FR", 1950): (1, 9), ("US", -1): (8, 2)}},
        "b": {"jean": {("FR", 1950): (0, 5)}, "anna": {("US", 1990): (5, 0)}},
    })
    assert t.pooled("jean")[ContextKey("FR", 1950)] == (1.0, 14.0)
    assert t.country_totals == {"FR": 15.0, "US": 15.0}
    assert t.decade_totals == {1950: 15.0, 1990: 5.0}
    assert t.average_p_f("jean", countries={"FR"}) == pytest.approx((0.1 + 0.0) / 2)
    assert t.average_p_f("jean", countries={"ZZ"}) is None


def test_fixture_is_large_enough(fixture_table):
    assert len(fixture_table) >= 2000
