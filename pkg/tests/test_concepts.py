import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import CONCEPT_SPANS, CONCEPT_TEXT
from phenopipe.concepts import (
    CLINICAL_SEMANTIC_TYPES,
    ConceptAnnotation,
    LexiconEntry,
    LexiconMatcher,
    SemanticTypeFilter,
    drop_section,
    extract_concepts,
    filter_by_semantic_types,
    load_lexicon,
    read_annotations_csv,
    write_annotations_csv,
)
from phenopipe.ingest import Note
from phenopipe.sections import SectionSpan

LEX = [
    LexiconEntry("obesity", "C0028754", "T047"),
    LexiconEntry("diabetes", "C0011849", "T047"),
    LexiconEntry("coronary artery disease", "C1956346", "T047"),
    LexiconEntry("artery", "C0003842", "T023"),
    LexiconEntry("metformin", "C0025598", "T121"),
]


def note(text):
    return Note(1, "1", text, text)


def whole(text):
    return [SectionSpan(1, 0, 0, max(len(text) - 1, 0))]


def test_two_concepts():
    anns = extract_concepts(note(CONCEPT_TEXT), LEX, whole(CONCEPT_TEXT))
    assert [(a.start, a.end, a.cui) for a in anns] == CONCEPT_SPANS
    assert all(CONCEPT_TEXT[a.start:a.end] == a.lexical_variant for a in anns)


def test_no_match():
    assert extract_concepts(note("nothing to see"), LEX, whole("nothing to see")) == []


def test_longest_wins():
    text = "history of coronary artery disease"
    anns = extract_concepts(note(text), LEX, whole(text))
    assert [a.lexical_variant for a in anns] == ["coronary artery disease"]


def test_case_insensitive_and_token_aligned():
    m = LexiconMatcher(LEX)
    assert [(s, e) for s, e, _ in m.match("Obesity, OBESITY")] == [(0, 7), (9, 16)]
    assert m.match("nonobesity obesitys") == []


def test_section_ids_attached():
    text = "obesity\nFAMILY HISTORY: diabetes"
    spans = [SectionSpan(1, 0, 0, 7), SectionSpan(1, 7, 8, len(text) - 1)]
    anns = extract_concepts(note(text), LEX, spans)
    assert [a.section_concept_id for a in anns] == [0, 7]
    assert [a.cui for a in drop_section(anns, 7)] == ["C0028754"]
    assert drop_section(anns, 99) == anns


def test_semantic_type_filter():
    a47 = ConceptAnnotation(1, "C0028754", "T047", "obesity", 0, 7, 0)
    a121 = ConceptAnnotation(1, "C0025598", "T121", "metformin", 8, 17, 0)
    assert len(CLINICAL_SEMANTIC_TYPES) == 15
    assert filter_by_semantic_types([a47], SemanticTypeFilter(CLINICAL_SEMANTIC_TYPES)) == [a47]
    assert filter_by_semantic_types([a47, a121], SemanticTypeFilter(frozenset({"T047"}))) == [a47]
    assert filter_by_semantic_types([], SemanticTypeFilter(frozenset({"T047"}))) == []
    with pytest.raises(ValueError):
        SemanticTypeFilter(frozenset())


def test_conflicting_surface_rejected():
    with pytest.raises(ValueError):
        LexiconMatcher([LexiconEntry("x", "C0000001", "T047"), LexiconEntry("x", "C0000002", "T047")])


def test_malformed_entries():
    with pytest.raises(ValueError):
        LexiconEntry("obesity", "C123", "T047")
    with pytest.raises(ValueError):
        LexiconEntry("Obesity", "C0028754", "T047")


def brute_force_matches(text, entries):
    """Try every surface at every offset; keep leftmost, then longest."""
    def boundary(i):
        return i <= 0 or i >= len(text) or text[i - 1].isalnum() != text[i].isalnum()

    out, i = [], 0
    while i < len(text):
        best = None
        for e in entries:
            j = i + len(e.surface)
            if text[i:j].lower() == e.surface and boundary(i) and boundary(j):
                if best is None or len(e.surface) > len(best.surface):
                    best = e
        if best is not None:
            out.append((i, i + len(best.surface), best.cui))
            i += len(best.surface)
        else:
            i += 1
    return out


@given(st.lists(st.sampled_from(["obesity", "Diabetes", "coronary", " artery", " disease", " ", ", ",
                                 "x", "metformin", "\n", "2"]), max_size=20))
def test_matches_brute_force(parts):
    text = "".join(parts)
    got = [(s, e, ent.cui) for s, e, ent in LexiconMatcher(LEX).match(text)]
    assert got == brute_force_matches(text, LEX)
    for s, e, _ in got:
        assert text[s:e].lower() in {x.surface for x in LEX}


def test_bundled_lexicon_and_csv_round_trip(tmp_path):
    entries = load_lexicon()
    assert len(entries) > 50
    text = "Obesity and hypertension"
    anns = extract_concepts(note(text), entries, whole(text))
    assert {a.lexical_variant for a in anns} == {"Obesity", "hypertension"}
    write_annotations_csv(anns, tmp_path / "a.csv")
    assert read_annotations_csv(tmp_path / "a.csv") == anns
