"""Micro- and macro-averaged precision / recall / F over pooled judgments."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from ..errors import PhenopipeError
from ..rules import INTUITIVE_LABELS, TEXTUAL_LABELS

INTUITIVE = "intuitive"
TEXTUAL = "textual"
SOURCES = (INTUITIVE, TEXTUAL)
LABEL_SETS = {INTUITIVE: INTUITIVE_LABELS, TEXTUAL: TEXTUAL_LABELS}


class KeyMismatch(PhenopipeError):
    pass


@dataclass(frozen=True)
class Judgment:
    note_id: int
    disease: str
    source: str
    label: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown judgment source {self.source!r}")
        if self.label not in LABEL_SETS[self.source]:
            raise ValueError(f"label {self.label!r} not valid for {self.source} judgments")

    @property
    def key(self) -> tuple[int, str, str]:
        return (self.note_id, self.disease, self.source)


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f: float
    support: int
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class MetricsReport:
    p_micro: float
    p_macro: float
    r_micro: float
    r_macro: float
    f_micro: float
    f_macro: float
    per_class: dict[str, ClassScores] = field(default_factory=dict)

    def row(self) -> list[float]:
        return [self.p_micro, self.p_macro, self.r_micro, self.r_macro, self.f_micro, self.f_macro]


METRIC_NAMES = ["P-Micro", "P-Macro", "R-Micro", "R-Macro", "F-Micro", "F-Macro"]


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _f_counts(tp: int, fp: int, fn: int) -> float:
    # equals 2PR/(P+R) but avoids the rounding of the intermediate ratios
    return _ratio(2 * tp, 2 * tp + fp + fn)


def micro_macro_prf(gold: Sequence[Judgment], pred: Sequence[Judgment], label_set: Sequence[str]) -> MetricsReport:
    """Score ``pred`` against ``gold``; both must cover the same keys exactly once.

    Macro F is the mean of per-class F (not the F of macro P and macro R). Any
    0/0 ratio counts as 0, so a class absent from gold and predictions drags the
    macro means down.
    """
    gold_map = _index(gold, "gold")
    pred_map = _index(pred, "pred")
    if gold_map.keys() != pred_map.keys():
        missing = len(gold_map.keys() - pred_map.keys())
        extra = len(pred_map.keys() - gold_map.keys())
        raise KeyMismatch(f"{missing} gold keys without prediction, {extra} predictions without gold")
    labels = list(label_set)
    tp = dict.fromkeys(labels, 0)
    fp = dict.fromkeys(labels, 0)
    fn = dict.fromkeys(labels, 0)
    for key, g in gold_map.items():
        p = pred_map[key]
        if g == p:
            if g in tp:
                tp[g] += 1
        else:
            if p in fp:
                fp[p] += 1
            if g in fn:
                fn[g] += 1
    per_class = {}
    for c in labels:
        pc = _ratio(tp[c], tp[c] + fp[c])
        rc = _ratio(tp[c], tp[c] + fn[c])
        per_class[c] = ClassScores(pc, rc, _f_counts(tp[c], fp[c], fn[c]), tp[c] + fn[c], tp[c], fp[c], fn[c])
    TP, FP, FN = sum(tp.values()), sum(fp.values()), sum(fn.values())
    p_micro, r_micro = _ratio(TP, TP + FP), _ratio(TP, TP + FN)
    k = len(labels)
    return MetricsReport(
        p_micro=p_micro,
        p_macro=sum(s.precision for s in per_class.values()) / k if k else 0.0,
        r_micro=r_micro,
        r_macro=sum(s.recall for s in per_class.values()) / k if k else 0.0,
        f_micro=_f_counts(TP, FP, FN),
        f_macro=sum(s.f for s in per_class.values()) / k if k else 0.0,
        per_class=per_class,
    )


def _index(judgments: Iterable[Judgment], what: str) -> dict[tuple, str]:
    out: dict[tuple, str] = {}
    for j in judgments:
        if j.key in out:
            raise KeyMismatch(f"duplicate {what} judgment for {j.key}")
        out[j.key] = j.label
    return out


def write_judgments_csv(judgments: Iterable[Judgment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["note_id", "disease", "source", "label"])
        for j in judgments:
            w.writerow([j.note_id, j.disease, j.source, j.label])


def read_judgments_csv(path: str | Path) -> list[Judgment]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [Judgment(int(r["note_id"]), r["disease"], r["source"], r["label"]) for r in csv.DictReader(fh)]


def evaluate_by_source(gold: Sequence[Judgment], pred: Sequence[Judgment]) -> dict[str, MetricsReport]:
    """One pooled report per judgment source present in ``gold``."""
    reports = {}
    for source in SOURCES:
        g = [j for j in gold if j.source == source]
        if not g:
            continue
        p = [j for j in pred if j.source == source]
        reports[source] = micro_macro_prf(g, p, LABEL_SETS[source])
    return reports


def format_report_table(rows: Sequence[tuple[str, MetricsReport]], title: str = "") -> str:
    width = max([len(name) for name, _ in rows] + [4])
    lines = [title] if title else []
    lines.append(" " * width + "  " + "  ".join(f"{m:>7}" for m in METRIC_NAMES))
    for name, rep in rows:
        lines.append(f"{name:<{width}}  " + "  ".join(f"{v:>7.4f}" for v in rep.row()))
    return "\n".join(lines)
