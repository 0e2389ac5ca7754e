"""Corpus ingestion: master-file splitting, abbreviation expansion, XML export."""

from __future__ import annotations

import csv
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import PhenopipeError
from .resources import data_path

DEFAULT_SENTINEL = "[record_end]"

_SOURCE_ID_RE = re.compile(r"\A\s*RECORD\s*#\s*(\S+)")


class EmptyCorpus(PhenopipeError):
    pass


class InvalidEncoding(PhenopipeError):
    pass


@dataclass(frozen=True)
class RawCorpus:
    path: str
    text: str

    @classmethod
    def read(cls, path: str | Path) -> "RawCorpus":
        data = Path(path).read_bytes()
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidEncoding(f"{path}: not valid UTF-8 ({exc.reason} at byte {exc.start})") from exc
        return cls(path=str(path), text=text)


@dataclass(frozen=True)
class Note:
    note_id: int
    source_id: str
    original_text: str
    text: str
    char_count: int = field(default=-1)

    def __post_init__(self):
        if self.char_count == -1:
            object.__setattr__(self, "char_count", len(self.text))
        if self.char_count != len(self.text):
            raise ValueError(f"note {self.note_id}: char_count {self.char_count} != len(text) {len(self.text)}")
        if self.note_id < 1:
            raise ValueError(f"note_id must be positive, got {self.note_id}")


@dataclass(frozen=True)
class AbbreviationRule:
    pattern: str
    replacement: str
    rule_id: str

    def __post_init__(self):
        if not self.replacement:
            raise ValueError(f"abbreviation rule {self.rule_id}: empty replacement")
        # surfaces re.error for a bad pattern at construction time
        object.__setattr__(self, "_compiled", re.compile(self.pattern))

    @property
    def regex(self) -> re.Pattern:
        return self._compiled  # type: ignore[attr-defined]


def split_master(corpus: RawCorpus | str, sentinel: str = DEFAULT_SENTINEL,
                 rules: Sequence[AbbreviationRule] = ()) -> list[Note]:
    """Split a master corpus into notes, one per sentinel-terminated segment.

    Blank segments are skipped. ``original_text`` keeps the raw segment so that
    joining the originals with the sentinel gives back the corpus; ``text`` is the
    stripped segment after abbreviation expansion.
    """
    if not sentinel:
        raise ValueError("sentinel must be non-empty")
    text = corpus.text if isinstance(corpus, RawCorpus) else corpus
    notes = []
    for segment in text.split(sentinel):
        if not segment.strip():
            continue
        note_id = len(notes) + 1
        m = _SOURCE_ID_RE.match(segment)
        source_id = m.group(1) if m else str(note_id)
        canonical = deabbreviate(segment.strip(), rules)
        notes.append(Note(note_id=note_id, source_id=source_id, original_text=segment, text=canonical))
    if not notes:
        raise EmptyCorpus("corpus contains no non-blank record")
    return notes


def deabbreviate(text: str, rules: Sequence[AbbreviationRule]) -> str:
    for rule in rules:
        text = rule.regex.sub(lambda _m, r=rule.replacement: r, text)
    return text


def export_record_xml(note: Note) -> str:
    root = ET.Element("record", {"id": str(note.note_id), "source_id": note.source_id})
    root.text = note.text
    return ET.tostring(root, encoding="unicode")


def parse_record_xml(document: str) -> tuple[int, str]:
    root = ET.fromstring(document)
    return int(root.attrib["id"]), root.text or ""


def parse_abbreviation_rules(lines: Iterable[str]) -> list[AbbreviationRule]:
    """Parse ``pattern<TAB>replacement`` lines; ``#`` starts a comment line."""
    rules = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "\t" not in line:
            raise ValueError(f"abbreviation rule line {lineno}: expected pattern<TAB>replacement")
        pattern, replacement = line.split("\t", 1)
        rules.append(AbbreviationRule(pattern=pattern, replacement=replacement, rule_id=f"abbr{lineno}"))
    return rules


def load_abbreviation_rules(path: str | Path | None = None) -> list[AbbreviationRule]:
    path = Path(path) if path is not None else data_path("abbreviations.tsv")
    with open(path, encoding="utf-8") as fh:
        return parse_abbreviation_rules(fh)


# --- notes directory layout -------------------------------------------------

MANIFEST = "manifest.csv"


def write_notes_dir(notes: Sequence[Note], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for note in notes:
        with open(out / f"{note.note_id}.txt", "w", encoding="utf-8", newline="") as fh:
            fh.write(note.text)
    with open(out / MANIFEST, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["note_id", "source_id", "char_count"])
        for note in notes:
            writer.writerow([note.note_id, note.source_id, note.char_count])


def read_notes_dir(notes_dir: str | Path) -> list[Note]:
    """Read ``<note_id>.txt`` files (canonical text) plus the optional manifest."""
    d = Path(notes_dir)
    source_ids: dict[int, str] = {}
    if (d / MANIFEST).exists():
        with open(d / MANIFEST, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                source_ids[int(row["note_id"])] = row["source_id"]
    notes = []
    for p in d.glob("*.txt"):
        if not p.stem.isdigit():
            continue
        with open(p, encoding="utf-8", newline="") as fh:
            text = fh.read()
        note_id = int(p.stem)
        notes.append(Note(note_id=note_id, source_id=source_ids.get(note_id, str(note_id)),
                          original_text=text, text=text))
    notes.sort(key=lambda n: n.note_id)
    return notes
