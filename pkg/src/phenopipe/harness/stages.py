"""The text-processing stages shared by the pipeline and experiment runners."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..concepts import ConceptAnnotation, LexiconEntry, LexiconMatcher, extract_concepts, load_lexicon
from ..ingest import DEFAULT_SENTINEL, Note, RawCorpus, load_abbreviation_rules, split_master
from ..rules import DiseaseRuleSet, RegexMatchRecord, RuleLabel, load_rules, rule_labels_all
from ..sections import SectionDictEntry, SectionSpan, detect_sections, load_section_dictionary


@dataclass
class ProcessedCorpus:
    notes: list[Note]
    dictionary: list[SectionDictEntry]
    spans: dict[int, list[SectionSpan]]
    lexicon: list[LexiconEntry]
    annotations: dict[int, list[ConceptAnnotation]]
    rulesets: list[DiseaseRuleSet]
    labels: list[RuleLabel]
    records: list[RegexMatchRecord]

    @property
    def diseases(self) -> list[str]:
        return [rs.disease for rs in self.rulesets]

    def rule_map(self) -> dict[tuple[int, str], str]:
        return {(l.note_id, l.disease): l.label for l in self.labels}


def process_corpus(corpus: str | Path, sentinel: str = DEFAULT_SENTINEL, abbreviations: str | Path | None = None,
                   sections: str | Path | None = None, lexicon: str | Path | None = None,
                   rules: str | Path | None = None, log=None) -> ProcessedCorpus:
    """Ingest, sectionize, extract concepts and run the rule cascade; ``None`` paths use bundled data."""
    def stage(msg):
        if log:
            log(msg)

    notes = split_master(RawCorpus.read(corpus), sentinel, load_abbreviation_rules(abbreviations))
    stage(f"ingest: {len(notes)} notes")
    dictionary = load_section_dictionary(sections)
    spans = {n.note_id: detect_sections(n, dictionary) for n in notes}
    stage("sectionize")
    entries = load_lexicon(lexicon)
    matcher = LexiconMatcher(entries)
    annotations = {n.note_id: extract_concepts(n, matcher, spans[n.note_id]) for n in notes}
    stage(f"extract: {sum(map(len, annotations.values()))} concept annotations")
    rulesets = load_rules(rules)
    labels, records = rule_labels_all(notes, rulesets)
    stage(f"annotate: {len(records)} regex matches")
    return ProcessedCorpus(notes, dictionary, spans, entries, annotations, rulesets, labels, records)
