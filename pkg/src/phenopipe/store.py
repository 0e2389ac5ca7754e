"""OMOP CDM shaped persistence for notes and NOTE_NLP annotations.

Backed by a single-file SQLite database. The portability surface is the CSV +
DDL export, which any SQL engine can load.
"""

from __future__ import annotations

import csv
import sqlite3
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

from .concepts import ConceptAnnotation
from .errors import PhenopipeError
from .ingest import Note
from .rules import RegexMatchRecord, sentence_containing, split_sentences
from .sections import SectionIndex, SectionSpan

NOTE_COLUMNS = ["note_id", "source_id", "note_text", "char_count"]
NOTE_NLP_COLUMNS = [
    "note_nlp_id", "note_id", "section_concept_id", "snippet", "offset",
    "lexical_variant", "note_nlp_concept_id", "nlp_system", "nlp_date_time",
]
SNIPPET_RADIUS = 40
# RFC 4180 line ending; with "\n" alone the csv module leaves a bare "\r" unquoted
CSV_EOL = "\r\n"

SCHEMA_SQL = """\
-- OMOP CDM subset for NLP annotations.
-- note_nlp_concept_id holds a UMLS CUI for concept extractions, or a
-- '<disease>:<category>' code for regex cascade matches, hence VARCHAR.
-- section_concept_id 0 denotes text preceding the first detected heading.
-- "offset" is a character offset into note.note_text.

CREATE TABLE note (
    note_id INTEGER NOT NULL PRIMARY KEY,
    source_id VARCHAR(50) NOT NULL,
    note_text TEXT NOT NULL,
    char_count INTEGER NOT NULL
);

CREATE TABLE note_nlp (
    note_nlp_id INTEGER NOT NULL PRIMARY KEY,
    note_id INTEGER NOT NULL REFERENCES note (note_id),
    section_concept_id INTEGER NOT NULL,
    snippet VARCHAR(250),
    "offset" INTEGER NOT NULL,
    lexical_variant VARCHAR(250) NOT NULL,
    note_nlp_concept_id VARCHAR(80) NOT NULL,
    nlp_system VARCHAR(250),
    nlp_date_time TIMESTAMP NOT NULL
);

CREATE INDEX idx_note_nlp_note_id ON note_nlp (note_id);
CREATE INDEX idx_note_nlp_concept_id ON note_nlp (note_nlp_concept_id);
"""


class StoreError(PhenopipeError):
    pass


class DuplicateNoteId(StoreError):
    pass


class MissingNote(StoreError):
    pass


class OffsetBeyondNote(StoreError):
    pass


class IoFailure(StoreError):
    pass


@dataclass(frozen=True)
class NoteRow:
    note_id: int
    source_id: str
    note_text: str
    char_count: int


@dataclass(frozen=True)
class NoteNlpRow:
    note_nlp_id: int
    note_id: int
    section_concept_id: int
    snippet: str
    offset: int
    lexical_variant: str
    note_nlp_concept_id: str
    nlp_system: str
    nlp_date_time: str


def _timestamp(now: datetime | str) -> str:
    return now if isinstance(now, str) else now.isoformat(timespec="seconds")


def window_snippet(text: str, start: int, end: int, radius: int = SNIPPET_RADIUS) -> str:
    return text[max(0, start - radius):min(len(text), end + radius)]


class NoteStore:
    """Single-writer annotation store. Use as a context manager or call ``close()``."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self.conn = sqlite3.connect(self.path)
        self.conn.execute("PRAGMA foreign_keys = ON")
        exists = self.conn.execute(
            "SELECT count(*) FROM sqlite_master WHERE type='table' AND name='note'").fetchone()[0]
        if not exists:
            self.conn.executescript(SCHEMA_SQL)
        self._text_cache: dict[int, str] = {}
        self._sentence_cache: dict[int, list[tuple[int, int]]] = {}

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self) -> None:
        self.conn.commit()
        self.conn.close()

    # --- writes ---------------------------------------------------------

    def persist_note(self, note: Note | NoteRow) -> int:
        text = note.text if isinstance(note, Note) else note.note_text
        if not text:
            raise StoreError(f"note {note.note_id} has empty text")
        try:
            self.conn.execute("INSERT INTO note VALUES (?, ?, ?, ?)",
                              (note.note_id, note.source_id, text, len(text)))
        except sqlite3.IntegrityError as exc:
            raise DuplicateNoteId(f"note_id {note.note_id} already stored") from exc
        self._text_cache[note.note_id] = text
        return note.note_id

    def _note_text(self, note_id: int) -> str:
        text = self._text_cache.get(note_id)
        if text is None:
            row = self.conn.execute("SELECT note_text FROM note WHERE note_id = ?", (note_id,)).fetchone()
            if row is None:
                raise MissingNote(f"note {note_id} is not persisted")
            text = self._text_cache[note_id] = row[0]
        return text

    def _sentences(self, note_id: int, text: str) -> list[tuple[int, int]]:
        if note_id not in self._sentence_cache:
            self._sentence_cache[note_id] = split_sentences(text)
        return self._sentence_cache[note_id]

    def _insert_nlp(self, note_id, section_id, snippet, offset, lexical_variant, concept, nlp_system, now) -> int:
        text = self._note_text(note_id)
        if not 0 <= offset < len(text) or offset + len(lexical_variant) > len(text):
            raise OffsetBeyondNote(f"offset {offset} outside note {note_id} ({len(text)} chars)")
        if text[offset:offset + len(lexical_variant)] != lexical_variant:
            raise StoreError(f"lexical_variant {lexical_variant!r} not found at offset {offset} of note {note_id}")
        cur = self.conn.execute(
            "INSERT INTO note_nlp (note_id, section_concept_id, snippet, \"offset\", lexical_variant, "
            "note_nlp_concept_id, nlp_system, nlp_date_time) VALUES (?, ?, ?, ?, ?, ?, ?, ?)",
            (note_id, section_id, snippet, offset, lexical_variant, concept, nlp_system, _timestamp(now)))
        return cur.lastrowid

    def persist_concept(self, ann: ConceptAnnotation, nlp_system: str, now: datetime | str) -> int:
        text = self._note_text(ann.note_id)
        if not 0 <= ann.start < len(text):
            raise OffsetBeyondNote(f"offset {ann.start} outside note {ann.note_id}")
        sen = sentence_containing(ann.start, self._sentences(ann.note_id, text))
        snippet = text[sen[0]:sen[1]] if sen else window_snippet(text, ann.start, ann.end)
        return self._insert_nlp(ann.note_id, ann.section_concept_id, snippet, ann.start,
                                ann.lexical_variant, ann.cui, nlp_system, now)

    def persist_regex_match(self, rec: RegexMatchRecord, nlp_system: str, now: datetime | str,
                            spans: Sequence[SectionSpan]) -> int:
        text = self._note_text(rec.note_id)
        start, end = rec.dis_pos
        if not 0 <= start < len(text):
            raise OffsetBeyondNote(f"offset {start} outside note {rec.note_id}")
        snippet = rec.sentence if rec.sentence is not None else window_snippet(text, start, end)
        section_id = SectionIndex(spans)(start)
        return self._insert_nlp(rec.note_id, section_id, snippet, start, rec.dis_alias,
                                f"{rec.disease}:{rec.category}", nlp_system, now)

    def insert_rows(self, notes: Iterable[NoteRow], nlp_rows: Iterable[NoteNlpRow]) -> None:
        """Bulk load previously exported rows, keeping their ids."""
        for n in notes:
            self.persist_note(n)
        self.conn.executemany(
            "INSERT INTO note_nlp VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
            [(r.note_nlp_id, r.note_id, r.section_concept_id, r.snippet, r.offset, r.lexical_variant,
              r.note_nlp_concept_id, r.nlp_system, r.nlp_date_time) for r in nlp_rows])

    def commit(self) -> None:
        self.conn.commit()

    # --- reads ----------------------------------------------------------

    def count_notes(self) -> int:
        return self.conn.execute("SELECT count(*) FROM note").fetchone()[0]

    def notes(self) -> list[NoteRow]:
        rows = self.conn.execute("SELECT note_id, source_id, note_text, char_count FROM note ORDER BY note_id")
        return [NoteRow(*r) for r in rows]

    def query_annotations(self, note_id: int | None = None, concept_id: str | None = None,
                          section_concept_id: int | None = None) -> list[NoteNlpRow]:
        clauses, args = [], []
        for col, val in (("note_id", note_id), ("note_nlp_concept_id", concept_id),
                         ("section_concept_id", section_concept_id)):
            if val is not None:
                clauses.append(f"{col} = ?")
                args.append(val)
        where = f" WHERE {' AND '.join(clauses)}" if clauses else ""
        cols = ", ".join(f'"{c}"' for c in NOTE_NLP_COLUMNS)
        rows = self.conn.execute(f"SELECT {cols} FROM note_nlp{where} ORDER BY note_nlp_id", args)
        return [NoteNlpRow(*r) for r in rows]

    # --- portability surface -------------------------------------------

    def export(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            paths = {"NOTE": out / "NOTE.csv", "NOTE_NLP": out / "NOTE_NLP.csv", "schema": out / "schema.sql"}
            with open(paths["NOTE"], "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator=CSV_EOL)
                w.writerow(NOTE_COLUMNS)
                for n in self.notes():
                    w.writerow([n.note_id, n.source_id, n.note_text, n.char_count])
            with open(paths["NOTE_NLP"], "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator=CSV_EOL)
                w.writerow(NOTE_NLP_COLUMNS)
                for r in self.query_annotations():
                    w.writerow([getattr(r, c) for c in NOTE_NLP_COLUMNS])
            paths["schema"].write_text(SCHEMA_SQL, encoding="utf-8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        return paths


def read_export(in_dir: str | Path) -> tuple[list[NoteRow], list[NoteNlpRow]]:
    d = Path(in_dir)
    try:
        with open(d / "NOTE.csv", encoding="utf-8", newline="") as fh:
            notes = [NoteRow(int(r["note_id"]), r["source_id"], r["note_text"], int(r["char_count"]))
                     for r in csv.DictReader(fh)]
        with open(d / "NOTE_NLP.csv", encoding="utf-8", newline="") as fh:
            rows = [NoteNlpRow(int(r["note_nlp_id"]), int(r["note_id"]), int(r["section_concept_id"]),
                               r["snippet"], int(r["offset"]), r["lexical_variant"], r["note_nlp_concept_id"],
                               r["nlp_system"], r["nlp_date_time"])
                    for r in csv.DictReader(fh)]
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return notes, rows


def import_export(in_dir: str | Path, db_path: str | Path = ":memory:") -> NoteStore:
    notes, rows = read_export(in_dir)
    store = NoteStore(db_path)
    store.insert_rows(notes, rows)
    store.commit()
    return store
