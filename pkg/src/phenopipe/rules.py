"""Cascaded Questionable -> Absent -> Present regex classification with offset-preserving blanking.

Each pass records its alias matches against the original text, then overwrites
them with spaces of equal length. Later passes never see consumed mentions, yet
every offset they report is still valid in the original document.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import PhenopipeError
from .ingest import Note
from .resources import data_path

QUESTIONABLE = "Questionable"
ABSENT = "Absent"
PRESENT = "Present"
UNMENTIONED = "Unmentioned"

TEXTUAL_LABELS = (ABSENT, PRESENT, QUESTIONABLE, UNMENTIONED)
INTUITIVE_LABELS = (ABSENT, PRESENT, QUESTIONABLE)


class SpanOutOfRange(PhenopipeError):
    pass


class RuleFileError(PhenopipeError):
    pass


@dataclass(frozen=True)
class DiseaseRuleSet:
    disease: str
    alias_patterns: tuple[re.Pattern, ...]
    questionable_context: tuple[re.Pattern, ...] = ()
    absent_context: tuple[re.Pattern, ...] = ()

    def __post_init__(self):
        if not self.alias_patterns:
            raise ValueError(f"{self.disease}: at least one alias pattern is required")

    @classmethod
    def from_strings(cls, disease: str, aliases: Iterable[str], questionable: Iterable[str] = (),
                     absent: Iterable[str] = (), flags: int = re.IGNORECASE) -> "DiseaseRuleSet":
        def comp(ps):
            return tuple(re.compile(p, flags) for p in ps)
        return cls(disease, comp(aliases), comp(questionable), comp(absent))


@dataclass(frozen=True)
class RegexMatchRecord:
    note_id: int
    disease: str
    category: str
    dis_alias: str
    dis_pos: tuple[int, int]
    sentence: str | None = None
    sen_pos: tuple[int, int] | None = None


@dataclass(frozen=True)
class RuleLabel:
    note_id: int
    disease: str
    label: str


def blank_span(text: str, span: tuple[int, int]) -> str:
    start, end = span
    if not 0 <= start <= end <= len(text):
        raise SpanOutOfRange(f"span {span} outside text of length {len(text)}")
    return text[:start] + " " * (end - start) + text[end:]


_SENTENCE_BREAK = re.compile(r"\n|[.!?;](?=\s|$)")


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Sentence spans ``(start, end)``, end exclusive, whitespace-trimmed.

    A newline always ends a sentence; ``. ! ? ;`` end one only when followed by
    whitespace or end of text, so "2.5 mg" and a leading "?obesity" stay whole.
    The terminator itself belongs to no sentence.
    """
    spans = []
    pos = 0
    for m in _SENTENCE_BREAK.finditer(text):
        spans.append((pos, m.start()))
        pos = m.end()
    spans.append((pos, len(text)))
    out = []
    for s, e in spans:
        while s < e and text[s].isspace():
            s += 1
        while e > s and text[e - 1].isspace():
            e -= 1
        if s < e:
            out.append((s, e))
    return out


def sentence_containing(offset: int, sentences: Sequence[tuple[int, int]]) -> tuple[int, int] | None:
    for s, e in sentences:
        if s <= offset < e:
            return (s, e)
        if s > offset:
            break
    return None


def _alias_matches(text: str, patterns: Sequence[re.Pattern], start: int = 0,
                   end: int | None = None) -> list[tuple[int, int]]:
    """Leftmost-longest non-overlapping alias spans within ``text[start:end]``."""
    region = text[start:end]
    candidates = []
    for k, pat in enumerate(patterns):
        for m in pat.finditer(region):
            if m.end() > m.start() and region[m.start():m.end()].strip():
                candidates.append((m.start(), -(m.end() - m.start()), k, m.end()))
    candidates.sort()
    chosen = []
    last_end = -1
    for s, _neg_len, _k, e in candidates:
        if s >= last_end:
            chosen.append((start + s, start + e))
            last_end = e
    return chosen


def cascade_match(note: Note, rules: DiseaseRuleSet) -> tuple[list[RegexMatchRecord], RuleLabel]:
    original = note.text
    work = original
    sentences = split_sentences(original)
    records: list[RegexMatchRecord] = []
    seen: set[str] = set()

    for category, contexts in ((QUESTIONABLE, rules.questionable_context), (ABSENT, rules.absent_context)):
        consumed = []
        for s, e in sentences:
            sentence_work = work[s:e]
            if not any(c.search(sentence_work) for c in contexts):
                continue
            for ms, me in _alias_matches(work, rules.alias_patterns, s, e):
                records.append(RegexMatchRecord(note.note_id, rules.disease, category, original[ms:me],
                                                (ms, me), original[s:e], (s, e)))
                consumed.append((ms, me))
                seen.add(category)
        for span in consumed:
            work = blank_span(work, span)

    for ms, me in _alias_matches(work, rules.alias_patterns):
        records.append(RegexMatchRecord(note.note_id, rules.disease, PRESENT, original[ms:me], (ms, me)))
        seen.add(PRESENT)

    for category in (QUESTIONABLE, ABSENT, PRESENT):
        if category in seen:
            break
    else:
        category = UNMENTIONED
    return records, RuleLabel(note.note_id, rules.disease, category)


def rule_labels_all(notes: Sequence[Note], rulesets: Sequence[DiseaseRuleSet]
                    ) -> tuple[list[RuleLabel], list[RegexMatchRecord]]:
    """Textual rule labels for every (note, disease), plus all match records."""
    labels, records = [], []
    for note in notes:
        for rs in rulesets:
            recs, label = cascade_match(note, rs)
            records.extend(recs)
            labels.append(label)
    return labels, records


def to_intuitive(label: str) -> str:
    """Map a textual label onto the intuitive label space (Unmentioned counts as Absent)."""
    return ABSENT if label == UNMENTIONED else label


# --- rule file DSL ----------------------------------------------------------

_DSL_KEYS = {"disease", "alias", "questionable", "absent"}


def parse_rules(lines: Iterable[str], source: str = "<rules>") -> list[DiseaseRuleSet]:
    """Parse ``key: value`` lines; a ``disease:`` line opens a new rule set."""
    blocks: list[dict] = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(":")
        key = key.strip().lower()
        if not sep or key not in _DSL_KEYS:
            raise RuleFileError(f"{source}:{lineno}: expected one of {sorted(_DSL_KEYS)} followed by ':'")
        value = value.strip()
        if key == "disease":
            blocks.append({"disease": value, "alias": [], "questionable": [], "absent": []})
            continue
        if not blocks:
            raise RuleFileError(f"{source}:{lineno}: '{key}' before any 'disease:' line")
        try:
            re.compile(value)
        except re.error as exc:
            raise RuleFileError(f"{source}:{lineno}: bad regex {value!r}: {exc}") from exc
        blocks[-1][key].append(value)
    try:
        return [DiseaseRuleSet.from_strings(b["disease"], b["alias"], b["questionable"], b["absent"])
                for b in blocks]
    except ValueError as exc:
        raise RuleFileError(f"{source}: {exc}") from exc


def load_rules(path: str | Path | None = None) -> list[DiseaseRuleSet]:
    """Load one ``.rules`` file, or every ``*.rules`` file in a directory (sorted by name)."""
    path = Path(path) if path is not None else data_path("rules")
    files = sorted(path.glob("*.rules")) if path.is_dir() else [path]
    rulesets = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            rulesets.extend(parse_rules(fh, source=str(f)))
    names = [r.disease for r in rulesets]
    if len(set(names)) != len(names):
        raise RuleFileError("duplicate disease names across rule files")
    return rulesets


MATCH_FIELDS = ["note_id", "disease", "category", "dis_alias", "dis_start", "dis_end",
                "sentence", "sen_start", "sen_end"]


def write_matches_csv(records: Iterable[RegexMatchRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")  # quotes any "\r" in note text
        w.writerow(MATCH_FIELDS)
        for r in records:
            sen = r.sen_pos or ("", "")
            w.writerow([r.note_id, r.disease, r.category, r.dis_alias, r.dis_pos[0], r.dis_pos[1],
                        r.sentence or "", sen[0], sen[1]])


def read_matches_csv(path: str | Path) -> list[RegexMatchRecord]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            has_sentence = r["sen_start"] != ""
            out.append(RegexMatchRecord(
                int(r["note_id"]), r["disease"], r["category"], r["dis_alias"],
                (int(r["dis_start"]), int(r["dis_end"])),
                r["sentence"] if has_sentence else None,
                (int(r["sen_start"]), int(r["sen_end"])) if has_sentence else None,
            ))
    return out


RULE_LABEL_FIELDS = ["note_id", "disease", "label"]


def write_rule_labels_csv(labels: Iterable[RuleLabel], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RULE_LABEL_FIELDS)
        for l in labels:
            w.writerow([l.note_id, l.disease, l.label])


def read_rule_labels_csv(path: str | Path) -> list[RuleLabel]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [RuleLabel(int(r["note_id"]), r["disease"], r["label"]) for r in csv.DictReader(fh)]
