import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_replace
from phenopipe.ingest import (
    AbbreviationRule,
    EmptyCorpus,
    InvalidEncoding,
    Note,
    RawCorpus,
    deabbreviate,
    export_record_xml,
    load_abbreviation_rules,
    parse_abbreviation_rules,
    parse_record_xml,
    read_notes_dir,
    split_master,
    write_notes_dir,
)

SENT = "[record_end]"


def test_two_records():
    notes = split_master("A[record_end]B[record_end]")
    assert [n.text for n in notes] == ["A", "B"]
    assert [n.note_id for n in notes] == [1, 2]


def test_sentinel_only_is_empty():
    with pytest.raises(EmptyCorpus):
        split_master("[record_end]")


def test_blank_segments_skipped():
    notes = split_master("A[record_end]  \n[record_end]B")
    assert [n.text for n in notes] == ["A", "B"]


def test_many_segments():
    corpus = "".join(f"RECORD #{i}\nnote {i}\n{SENT}\n" for i in range(1249))
    notes = split_master(corpus)
    assert len(notes) == 1249
    assert notes[10].source_id == "10"


def test_originals_rejoin_to_corpus():
    corpus = "x\n[record_end]\ny [record_end]\n"
    notes = split_master(corpus)
    assert SENT.join(n.original_text for n in notes) + SENT + "\n" == corpus


def test_invalid_utf8(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_bytes(b"ok\xff\xfe")
    with pytest.raises(InvalidEncoding):
        RawCorpus.read(p)


def test_note_char_count_checked():
    with pytest.raises(ValueError):
        Note(1, "1", "abc", "abc", char_count=2)


def test_abbreviation_single():
    rules = [AbbreviationRule(r"\bHTN\b", "hypertension", "r1")]
    assert deabbreviate("pt has HTN", rules) == "pt has hypertension"


def test_abbreviation_identity():
    assert deabbreviate("no rules", []) == "no rules"


def test_abbreviation_repeated():
    rules = [AbbreviationRule(r"\bCAD\b", "coronary artery disease", "r1")]
    assert deabbreviate("CAD and CAD", rules) == "coronary artery disease and coronary artery disease"


@given(st.lists(st.sampled_from(["CAD", "xCAD", "CADy", " ", ".", "and", "\n", "cad"]), max_size=20))
def test_abbreviation_matches_naive_scan(parts):
    text = "".join(parts)
    rules = [AbbreviationRule(r"\bCAD\b", "coronary artery disease", "r1")]
    assert deabbreviate(text, rules) == naive_replace(text, "CAD", "coronary artery disease")


def test_replacement_backslashes_are_literal():
    rules = [AbbreviationRule(r"\bX\b", r"a\1b", "r1")]
    assert deabbreviate("X", rules) == r"a\1b"


def test_bad_pattern_rejected():
    with pytest.raises(Exception):
        AbbreviationRule("(", "x", "r1")


def test_parse_rules_file_format():
    rules = parse_abbreviation_rules(["# comment", "", "\\bpt\\b\tpatient"])
    assert len(rules) == 1 and rules[0].replacement == "patient"
    with pytest.raises(ValueError):
        parse_abbreviation_rules(["no tab here"])


def test_bundled_rules_load():
    rules = load_abbreviation_rules()
    assert deabbreviate("h/o HTN", rules) == "history of hypertension"


def test_xml_escape_round_trip():
    note = Note(1, "1", "a<b", "a<b")
    doc = export_record_xml(note)
    assert "<b" not in doc.replace("<record", "")
    assert parse_record_xml(doc) == (1, "a<b")


@settings(max_examples=200)
@given(st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1))
def test_xml_round_trip_property(text):
    note = Note(3, "3", text, text)
    assert parse_record_xml(export_record_xml(note)) == (3, text)


def test_notes_dir_round_trip(tmp_path):
    notes = split_master("RECORD #77\nfirst[record_end]second\n[record_end]")
    write_notes_dir(notes, tmp_path / "n")
    back = read_notes_dir(tmp_path / "n")
    assert [(n.note_id, n.source_id, n.text) for n in back] == [(n.note_id, n.source_id, n.text) for n in notes]
