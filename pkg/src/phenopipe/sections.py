"""Dictionary-driven section heading detection and boundary arithmetic."""

from __future__ import annotations

import bisect
import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import PhenopipeError
from .ingest import Note
from .resources import data_path

PREAMBLE_ID = 0


class DuplicateHeadingAtSameOffset(PhenopipeError):
    pass


class OffsetOutOfRange(PhenopipeError):
    pass


@dataclass(frozen=True)
class SectionDictEntry:
    heading: str
    section_concept_id: int

    def __post_init__(self):
        if self.section_concept_id <= PREAMBLE_ID:
            raise ValueError(f"section id {self.section_concept_id} is reserved or invalid")
        if not self.heading.strip():
            raise ValueError("empty section heading")


@dataclass(frozen=True)
class SectionSpan:
    """A section's extent; ``end`` is inclusive."""

    note_id: int
    section_concept_id: int
    start: int
    end: int


def validate_dictionary(entries: Sequence[SectionDictEntry]) -> None:
    if not entries:
        raise ValueError("section dictionary is empty")
    headings = [e.heading for e in entries]
    ids = [e.section_concept_id for e in entries]
    if len(set(headings)) != len(headings):
        raise ValueError("duplicate headings in section dictionary")
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate section ids in section dictionary")


def _is_word(ch: str) -> bool:
    return ch.isalnum()


def _find_headings(text: str, entries: Sequence[SectionDictEntry], case_sensitive: bool) -> list[tuple[int, int, int]]:
    flags = 0 if case_sensitive else re.IGNORECASE
    hits: dict[int, tuple[int, int]] = {}
    for entry in entries:
        for m in re.finditer(re.escape(entry.heading), text, flags):
            pos, end = m.span()
            left_ok = pos == 0 or not _is_word(text[pos - 1])
            right_ok = end == len(text) or not _is_word(text[end])
            if left_ok and right_ok:
                if pos in hits:
                    raise DuplicateHeadingAtSameOffset(
                        f"headings {hits[pos][1]} and {entry.section_concept_id} both match at offset {pos}")
                hits[pos] = (end, entry.section_concept_id)
    # a heading nested inside an earlier one ("MEDICATIONS" in "DISCHARGE MEDICATIONS") is not a heading
    kept = []
    covered_to = -1
    for start in sorted(hits):
        end, sid = hits[start]
        if start < covered_to:
            continue
        kept.append((start, end, sid))
        covered_to = end
    return kept


def detect_sections(note: Note, dictionary: Sequence[SectionDictEntry],
                    case_sensitive: bool = True) -> list[SectionSpan]:
    """Return contiguous spans covering ``note.text``.

    Each detected heading opens a section that runs to one character before the
    next heading; text ahead of the first heading is the preamble (id 0).
    """
    validate_dictionary(dictionary)
    text = note.text
    if not text:
        return []
    starts = [(s, sid) for s, _e, sid in _find_headings(text, dictionary, case_sensitive)]
    if not starts or starts[0][0] > 0:
        starts.insert(0, (0, PREAMBLE_ID))
    spans = []
    for i, (start, sid) in enumerate(starts):
        end = starts[i + 1][0] - 1 if i + 1 < len(starts) else len(text) - 1
        spans.append(SectionSpan(note.note_id, sid, start, end))
    return spans


def section_of(offset: int, spans: Sequence[SectionSpan]) -> int:
    if not spans or offset < 0 or offset > spans[-1].end:
        raise OffsetOutOfRange(f"offset {offset} outside note")
    starts = [s.start for s in spans]
    return spans[bisect.bisect_right(starts, offset) - 1].section_concept_id


class SectionIndex:
    """Repeated ``section_of`` lookups over one note's spans."""

    def __init__(self, spans: Sequence[SectionSpan]):
        self.spans = list(spans)
        self._starts = [s.start for s in self.spans]

    def __call__(self, offset: int) -> int:
        if not self.spans or offset < 0 or offset > self.spans[-1].end:
            raise OffsetOutOfRange(f"offset {offset} outside note")
        return self.spans[bisect.bisect_right(self._starts, offset) - 1].section_concept_id


def parse_section_dictionary(lines: Iterable[str]) -> list[SectionDictEntry]:
    entries = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            sid, heading = line.split("\t", 1)
            entries.append(SectionDictEntry(heading=heading.strip(), section_concept_id=int(sid)))
        except ValueError as exc:
            raise ValueError(f"section dictionary line {lineno}: {exc}") from exc
    validate_dictionary(entries)
    return entries


def load_section_dictionary(path: str | Path | None = None) -> list[SectionDictEntry]:
    path = Path(path) if path is not None else data_path("sections.tsv")
    with open(path, encoding="utf-8") as fh:
        return parse_section_dictionary(fh)


def heading_id(dictionary: Sequence[SectionDictEntry], heading: str) -> int:
    for e in dictionary:
        if e.heading.upper() == heading.upper():
            return e.section_concept_id
    raise KeyError(heading)


SPAN_FIELDS = ["note_id", "section_concept_id", "start", "end"]


def write_spans_csv(spans: Iterable[SectionSpan], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SPAN_FIELDS)
        for s in spans:
            w.writerow([s.note_id, s.section_concept_id, s.start, s.end])


def read_spans_csv(path: str | Path) -> dict[int, list[SectionSpan]]:
    by_note: dict[int, list[SectionSpan]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            span = SectionSpan(int(row["note_id"]), int(row["section_concept_id"]), int(row["start"]), int(row["end"]))
            by_note.setdefault(span.note_id, []).append(span)
    for spans in by_note.values():
        spans.sort(key=lambda s: s.start)
    return by_note
