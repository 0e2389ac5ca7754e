"""Concept annotation: a pluggable extractor contract plus a longest-match lexicon tagger."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .ingest import Note
from .resources import data_path
from .sections import SectionIndex, SectionSpan

CUI_RE = re.compile(r"C\d{7}")

# Semantic types retained when features are restricted to clinically relevant concepts.
CLINICAL_SEMANTIC_TYPES = frozenset({
    "T017",  # Anatomical Structure
    "T022",  # Body System
    "T023",  # Body Part, Organ, or Organ Component
    "T033",  # Finding
    "T034",  # Laboratory or Test Result
    "T047",  # Disease or Syndrome
    "T048",  # Mental or Behavioral Dysfunction
    "T049",  # Cell or Molecular Dysfunction
    "T059",  # Laboratory Procedure
    "T060",  # Diagnostic Procedure
    "T061",  # Therapeutic or Preventive Procedure
    "T121",  # Pharmacologic Substance
    "T122",  # Biomedical or Dental Material
    "T123",  # Biologically Active Substance
    "T184",  # Sign or Symptom
})


@dataclass(frozen=True)
class LexiconEntry:
    surface: str
    cui: str
    semantic_type: str

    def __post_init__(self):
        if not self.surface or self.surface != self.surface.lower():
            raise ValueError(f"lexicon surface must be non-empty lowercase: {self.surface!r}")
        if not self.surface[0].isalnum():
            raise ValueError(f"lexicon surface must start with a letter or digit: {self.surface!r}")
        if not CUI_RE.fullmatch(self.cui):
            raise ValueError(f"malformed CUI {self.cui!r}")


@dataclass(frozen=True)
class ConceptAnnotation:
    note_id: int
    cui: str
    semantic_type: str
    lexical_variant: str
    start: int
    end: int  # exclusive
    section_concept_id: int


@dataclass(frozen=True)
class SemanticTypeFilter:
    allowed: frozenset[str]

    def __post_init__(self):
        if not self.allowed:
            raise ValueError("semantic type filter must allow at least one type")


class ConceptExtractor(Protocol):
    def __call__(self, note: Note, spans: Sequence[SectionSpan]) -> list[ConceptAnnotation]: ...


def _is_boundary(text: str, i: int) -> bool:
    if i <= 0 or i >= len(text):
        return True
    return text[i - 1].isalnum() != text[i].isalnum()


class LexiconMatcher:
    """Greedy leftmost-longest, case-insensitive, token-aligned phrase matcher."""

    def __init__(self, entries: Iterable[LexiconEntry]):
        self.entries: dict[str, LexiconEntry] = {}
        for e in entries:
            prev = self.entries.get(e.surface)
            if prev is not None and (prev.cui, prev.semantic_type) != (e.cui, e.semantic_type):
                raise ValueError(f"surface {e.surface!r} mapped to both {prev.cui} and {e.cui}")
            self.entries[e.surface] = e
        # bucket by first character, longest surface first
        self._buckets: dict[str, list[str]] = {}
        for surface in sorted(self.entries, key=lambda s: (-len(s), s)):
            self._buckets.setdefault(surface[0], []).append(surface)

    def match(self, text: str) -> list[tuple[int, int, LexiconEntry]]:
        hits = []
        i, n = 0, len(text)
        while i < n:
            if text[i].isalnum() and _is_boundary(text, i):
                for surface in self._buckets.get(text[i].lower(), ()):
                    j = i + len(surface)
                    if j <= n and text[i:j].lower() == surface and _is_boundary(text, j):
                        hits.append((i, j, self.entries[surface]))
                        i = j
                        break
                else:
                    i += 1
                continue
            i += 1
        return hits

    def __call__(self, note: Note, spans: Sequence[SectionSpan]) -> list[ConceptAnnotation]:
        return extract_concepts(note, self, spans)


def extract_concepts(note: Note, lexicon: LexiconMatcher | Iterable[LexiconEntry],
                     spans: Sequence[SectionSpan]) -> list[ConceptAnnotation]:
    matcher = lexicon if isinstance(lexicon, LexiconMatcher) else LexiconMatcher(lexicon)
    section = SectionIndex(spans)
    return [
        ConceptAnnotation(note.note_id, e.cui, e.semantic_type, note.text[s:t], s, t, section(s))
        for s, t, e in matcher.match(note.text)
    ]


def filter_by_semantic_types(anns: Sequence[ConceptAnnotation], f: SemanticTypeFilter) -> list[ConceptAnnotation]:
    return [a for a in anns if a.semantic_type in f.allowed]


def drop_section(anns: Sequence[ConceptAnnotation], section_concept_id: int) -> list[ConceptAnnotation]:
    return [a for a in anns if a.section_concept_id != section_concept_id]


def load_lexicon(path: str | Path | None = None) -> list[LexiconEntry]:
    """Read a ``surface,cui,semantic_type`` CSV."""
    path = Path(path) if path is not None else data_path("lexicon.csv")
    with open(path, encoding="utf-8", newline="") as fh:
        return [LexiconEntry(r["surface"].strip().lower(), r["cui"].strip(), r["semantic_type"].strip())
                for r in csv.DictReader(fh)]


ANNOTATION_FIELDS = ["note_id", "cui", "semantic_type", "lexical_variant", "start", "end", "section_concept_id"]


def write_annotations_csv(anns: Iterable[ConceptAnnotation], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")  # quotes any "\r" in note text
        w.writerow(ANNOTATION_FIELDS)
        for a in anns:
            w.writerow([a.note_id, a.cui, a.semantic_type, a.lexical_variant, a.start, a.end, a.section_concept_id])


def read_annotations_csv(path: str | Path) -> list[ConceptAnnotation]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [
            ConceptAnnotation(int(r["note_id"]), r["cui"], r["semantic_type"], r["lexical_variant"],
                              int(r["start"]), int(r["end"]), int(r["section_concept_id"]))
            for r in csv.DictReader(fh)
        ]
