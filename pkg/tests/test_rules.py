import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import BLANK_RESULT, BLANK_SPAN, BLANK_TEXT, CASCADE_RECORDS, CASCADE_TEXT, naive_blank
from phenopipe.ingest import Note
from phenopipe.rules import (
    ABSENT,
    PRESENT,
    QUESTIONABLE,
    UNMENTIONED,
    DiseaseRuleSet,
    RuleFileError,
    SpanOutOfRange,
    blank_span,
    cascade_match,
    load_rules,
    parse_rules,
    read_matches_csv,
    read_rule_labels_csv,
    rule_labels_all,
    split_sentences,
    to_intuitive,
    write_matches_csv,
    write_rule_labels_csv,
)

OBESITY = DiseaseRuleSet.from_strings("Obesity", [r"\bobes(?:e|ity)\b"], [r"\?", r"\bpossible\b"], [r"\bno\b"])
CAD = DiseaseRuleSet.from_strings("CAD", [r"\bcoronary artery disease\b"], [], [r"\bno evidence of\b"])


def note(text, nid=1):
    return Note(nid, str(nid), text, text)


def test_blank_example():
    assert blank_span(BLANK_TEXT, BLANK_SPAN) == BLANK_RESULT


def test_blank_empty_span():
    assert blank_span("abc", (0, 0)) == "abc"


def test_blank_out_of_range():
    with pytest.raises(SpanOutOfRange):
        blank_span("abc", (2, 5))
    with pytest.raises(SpanOutOfRange):
        blank_span("abc", (2, 1))


@given(st.text(max_size=60), st.data())
def test_blank_matches_naive(text, data):
    s = data.draw(st.integers(0, len(text)))
    e = data.draw(st.integers(s, len(text)))
    assert blank_span(text, (s, e)) == naive_blank(text, s, e)


def test_absent_cad():
    recs, label = cascade_match(note("no evidence of coronary artery disease"), CAD)
    assert [(r.category, r.dis_alias) for r in recs] == [(ABSENT, "coronary artery disease")]
    assert label.label == ABSENT


def test_no_alias_is_unmentioned():
    recs, label = cascade_match(note("patient is well"), CAD)
    assert recs == [] and label.label == UNMENTIONED


def test_questionable_then_present():
    recs, label = cascade_match(note(CASCADE_TEXT), OBESITY)
    assert [(r.category, r.dis_pos) for r in recs] == CASCADE_RECORDS
    for r in recs:
        assert CASCADE_TEXT[r.dis_pos[0]:r.dis_pos[1]] == r.dis_alias
    assert recs[0].sentence == "?obesity" and recs[1].sentence is None
    assert label.label == QUESTIONABLE


def test_precedence_absent_over_present():
    _, label = cascade_match(note("Obese. No obesity today."), OBESITY)
    assert label.label == ABSENT


def test_blanked_mention_not_reused():
    recs, _ = cascade_match(note("possible obesity, no obesity"), OBESITY)
    # both mentions share one sentence: the questionable pass consumes them first
    assert [r.category for r in recs] == [QUESTIONABLE, QUESTIONABLE]


def test_sentences_keep_decimals():
    text = "Dose 2.5 mg daily. Next line\nthird; fourth"
    spans = split_sentences(text)
    assert [text[s:e] for s, e in spans] == ["Dose 2.5 mg daily", "Next line", "third", "fourth"]


def test_intuitive_mapping():
    assert to_intuitive(UNMENTIONED) == ABSENT
    assert [to_intuitive(l) for l in (PRESENT, ABSENT, QUESTIONABLE)] == [PRESENT, ABSENT, QUESTIONABLE]


def test_rule_labels_cardinality():
    rules = load_rules()
    assert len(rules) == 16
    labels, _ = rule_labels_all([note("obesity noted", 1), note("well", 2)], rules)
    assert len(labels) == 32
    first = {l.disease: l.label for l in labels if l.note_id == 1}
    assert first.pop("Obesity") == PRESENT
    assert set(first.values()) == {UNMENTIONED}


WORDS = ["obesity", "obese", "no", "possible", "?", ".", " ", "\n", ";", "fine", "2.5", "obesityx"]


@settings(max_examples=300)
@given(st.lists(st.sampled_from(WORDS), max_size=25))
def test_records_anchor_to_original(parts):
    text = "".join(parts)
    recs, label = cascade_match(note(text), OBESITY)
    for r in recs:
        assert text[r.dis_pos[0]:r.dis_pos[1]] == r.dis_alias
        if r.category == PRESENT:
            assert r.sentence is None and r.sen_pos is None
        else:
            s, e = r.sen_pos
            assert s <= r.dis_pos[0] and r.dis_pos[1] <= e and text[s:e] == r.sentence
    spans = sorted(r.dis_pos for r in recs)
    assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))
    cats = {r.category for r in recs}
    expected = next((c for c in (QUESTIONABLE, ABSENT, PRESENT) if c in cats), UNMENTIONED)
    assert label.label == expected


def test_rule_dsl_errors():
    with pytest.raises(RuleFileError):
        parse_rules(["alias: x"])
    with pytest.raises(RuleFileError):
        parse_rules(["disease: X", "alias: ("])
    with pytest.raises(RuleFileError):
        parse_rules(["disease: X", "bogus: y"])
    with pytest.raises(RuleFileError):
        parse_rules(["disease: X", "absent: no"])


def test_csv_round_trips(tmp_path):
    labels, recs = rule_labels_all([note(CASCADE_TEXT)], [OBESITY])
    write_matches_csv(recs, tmp_path / "m.csv")
    write_rule_labels_csv(labels, tmp_path / "l.csv")
    assert read_matches_csv(tmp_path / "m.csv") == recs
    assert read_rule_labels_csv(tmp_path / "l.csv") == labels


def test_matches_csv_keeps_carriage_returns(tmp_path):
    _, recs = rule_labels_all([note("possible obesity\rstill")], [OBESITY])
    assert "\r" in recs[0].sentence
    write_matches_csv(recs, tmp_path / "m.csv")
    assert read_matches_csv(tmp_path / "m.csv") == recs
