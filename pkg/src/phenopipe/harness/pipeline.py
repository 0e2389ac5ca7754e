"""End-to-end run: ingest, sectionize, extract, annotate, load, train, evaluate.

Driven by a JSON config; relative paths in it resolve against the config
file's directory. Every stage writes its artifact into the output directory so
a run can be inspected or resumed stage by stage with the CLI.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from .. import NLP_SYSTEM
from ..concepts import CUI_RE, ConceptAnnotation, write_annotations_csv
from ..ingest import DEFAULT_SENTINEL, write_notes_dir
from ..ml import ParamGrid
from ..rules import write_matches_csv, write_rule_labels_csv
from ..sections import heading_id, write_spans_csv
from ..store import NoteStore
from .experiment import ExperimentConfig, ExperimentData, SplitSpec, resolve_split, run_cell
from .stages import process_corpus
from .metrics import METRIC_NAMES, Judgment, read_judgments_csv, write_judgments_csv
from .synth import SynthSpec, generate_synthetic_corpus, read_planted_csv


@dataclass
class PipelineConfig:
    out: Path
    corpus: Path | None = None
    gold: Path | None = None
    planted: Path | None = None
    synth: dict | None = None
    synth_seed: int = 42
    abbreviations: Path | None = None
    sections: Path | None = None
    lexicon: Path | None = None
    rules: Path | None = None
    sentinel: str = DEFAULT_SENTINEL
    drop_sections: list[str] = field(default_factory=lambda: ["FAMILY HISTORY"])
    iteration: str = "e"
    algorithm: str = "DT"
    grid: dict | None = None
    folds: int = 3
    seed: int = 42
    split: dict | None = None
    nlp_date_time: str | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")), path.parent)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base: Path = Path(".")) -> "PipelineConfig":
        d = dict(d)
        for key in ("out", "corpus", "gold", "planted", "abbreviations", "sections", "lexicon", "rules"):
            if d.get(key) is not None:
                d[key] = (base / d[key]).resolve()
        split = dict(d.get("split") or {})
        if split.get("split_file"):
            split["split_file"] = str((base / split["split_file"]).resolve())
        d["split"] = split
        if "out" not in d:
            raise ValueError("pipeline config needs an 'out' directory")
        if d.get("corpus") is None and d.get("synth") is None:
            raise ValueError("pipeline config needs either 'corpus' or 'synth'")
        return cls(**d)


@dataclass
class PipelineResult:
    rule_recovery: float | None
    recoverable: int
    reports: dict
    seconds: float
    paths: dict[str, Path]


def _stage(log, name, t0):
    if log:
        log(f"[{time.perf_counter() - t0:7.2f}s] {name}")


def annotations_from_store(store: NoteStore, semantic_types: Mapping[str, str]) -> dict[int, list[ConceptAnnotation]]:
    """Rebuild concept annotations from stored NOTE_NLP rows, skipping regex-cascade rows."""
    out: dict[int, list[ConceptAnnotation]] = {n.note_id: [] for n in store.notes()}
    for r in store.query_annotations():
        if CUI_RE.fullmatch(r.note_nlp_concept_id):
            out[r.note_id].append(ConceptAnnotation(
                r.note_id, r.note_nlp_concept_id, semantic_types.get(r.note_nlp_concept_id, ""),
                r.lexical_variant, r.offset, r.offset + len(r.lexical_variant), r.section_concept_id))
    return out


def run_pipeline(cfg: PipelineConfig, log=print) -> PipelineResult:
    t0 = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    corpus_path, gold_path, planted_path = cfg.corpus, cfg.gold, cfg.planted
    if corpus_path is None:
        spec = SynthSpec.from_dict({**cfg.synth, "sentinel": cfg.sentinel})
        written = generate_synthetic_corpus(spec, cfg.synth_seed).write(out / "corpus")
        corpus_path, gold_path, planted_path = written["master"], written["gold"], written["planted"]
        _stage(log, "synth", t0)
    if gold_path is None:
        raise ValueError("pipeline needs gold labels ('gold' or 'synth')")

    pc = process_corpus(corpus_path, cfg.sentinel, cfg.abbreviations, cfg.sections, cfg.lexicon, cfg.rules,
                        log=lambda m: _stage(log, m, t0))
    notes, spans, annotations, labels, records = pc.notes, pc.spans, pc.annotations, pc.labels, pc.records
    write_notes_dir(notes, out / "notes")
    write_spans_csv((s for n in notes for s in spans[n.note_id]), out / "spans.csv")
    write_annotations_csv((a for n in notes for a in annotations[n.note_id]), out / "annotations.csv")
    write_matches_csv(records, out / "matches.csv")
    write_rule_labels_csv(labels, out / "rule_labels.csv")
    for key, name in (("notes", "notes"), ("spans", "spans.csv"), ("annotations", "annotations.csv"),
                      ("matches", "matches.csv"), ("rule_labels", "rule_labels.csv")):
        paths[key] = out / name

    db = out / "note_nlp.sqlite"
    if db.exists():
        db.unlink()
    now = cfg.nlp_date_time or datetime.now(timezone.utc).isoformat(timespec="seconds")
    with NoteStore(db) as store:
        for n in notes:
            store.persist_note(n)
            for a in annotations[n.note_id]:
                store.persist_concept(a, NLP_SYSTEM, now)
        for rec in records:
            store.persist_regex_match(rec, NLP_SYSTEM, now, spans[rec.note_id])
        store.commit()
        store.export(out / "cdm")
        stored = annotations_from_store(store, {e.cui: e.semantic_type for e in pc.lexicon})
    paths["db"], paths["cdm"] = db, out / "cdm"
    _stage(log, "load", t0)

    gold = read_judgments_csv(gold_path)
    diseases = pc.diseases
    rule_map = pc.rule_map()
    train_ids, test_ids = resolve_split(SplitSpec.from_dict(cfg.split), [n.note_id for n in notes], gold, diseases)
    drop_ids = tuple(heading_id(pc.dictionary, h) for h in cfg.drop_sections)
    data = ExperimentData(stored, rule_map, gold, diseases, train_ids, test_ids, drop_ids)
    grid = ParamGrid(cfg.algorithm, cfg.grid) if cfg.grid else None
    config = ExperimentConfig(cfg.iteration, cfg.algorithm, grid, cfg.seed, cfg.folds)
    cells = [run_cell(config, data, source) for source in data.sources()]
    _stage(log, f"train+predict: {config.algorithm}, iteration {config.iteration}", t0)

    preds: list[Judgment] = [j for c in cells for j in c.predictions]
    write_judgments_csv(preds, out / "predictions.csv")
    paths["predictions"] = out / "predictions.csv"

    recovery, recoverable = None, 0
    if planted_path is not None and Path(planted_path).exists():
        planted = [p for p in read_planted_csv(planted_path) if p.recoverable]
        recoverable = len(planted)
        hits = sum(rule_map[(p.note_id, p.disease)] == p.label for p in planted)
        recovery = hits / recoverable if recoverable else 1.0

    reports = {c.source: {**dict(zip(METRIC_NAMES, c.report.row())),
                          "per_class": {k: vars(v) for k, v in c.report.per_class.items()},
                          "best_params": c.best_params} for c in cells}
    elapsed = time.perf_counter() - t0
    summary = {"notes": len(notes), "train_notes": len(train_ids), "test_notes": len(test_ids),
               "iteration": config.iteration, "algorithm": config.algorithm,
               "rule_recovery": recovery, "rule_recoverable_labels": recoverable,
               "reports": reports, "seconds": round(elapsed, 3)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["summary"] = out / "summary.json"
    _stage(log, "evaluate", t0)
    if log:
        if recovery is not None:
            log(f"rule recovery: {recovery:.4f} of {recoverable} rule-recoverable planted labels")
        for c in cells:
            kind = "hybrid" if config.class_scope == "major" else "ml"
            log(f"{c.source:>9} {kind}: " + "  ".join(f"{m}={v:.4f}" for m, v in zip(METRIC_NAMES, c.report.row())))
    return PipelineResult(recovery, recoverable, reports, elapsed, paths)
