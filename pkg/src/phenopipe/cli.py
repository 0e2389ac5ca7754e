"""Command-line entry point: one subcommand per pipeline stage plus the evaluation harness."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path

from . import NLP_SYSTEM, __version__
from .concepts import LexiconMatcher, extract_concepts, load_lexicon, read_annotations_csv, write_annotations_csv
from .errors import PhenopipeError
from .ingest import (DEFAULT_SENTINEL, RawCorpus, export_record_xml, load_abbreviation_rules, read_notes_dir,
                     split_master, write_notes_dir)
from .ml import (ParamGrid, build_feature_matrix, grid_search, load_model, predict, read_features_csv,
                 save_model, train, write_features_csv)
from .rules import load_rules, read_matches_csv, rule_labels_all, write_matches_csv, write_rule_labels_csv
from .sections import detect_sections, load_section_dictionary, read_spans_csv, write_spans_csv
from .store import NoteStore


def _now(value: str | None) -> str:
    return value or datetime.now(timezone.utc).isoformat(timespec="seconds")


def _spans_for(notes, spans_file):
    if spans_file:
        return read_spans_csv(spans_file)
    dictionary = load_section_dictionary()
    return {n.note_id: detect_sections(n, dictionary) for n in notes}


def cmd_ingest(args) -> int:
    rules = load_abbreviation_rules(args.abbrev)
    notes = split_master(RawCorpus.read(args.corpus), args.sentinel, rules)
    write_notes_dir(notes, args.out)
    if args.xml:
        xml_dir = Path(args.out) / "xml"
        xml_dir.mkdir(exist_ok=True)
        for n in notes:
            (xml_dir / f"{n.note_id}.xml").write_text(export_record_xml(n), encoding="utf-8")
    print(f"wrote {len(notes)} notes to {args.out}")
    return 0


def cmd_sectionize(args) -> int:
    dictionary = load_section_dictionary(args.sections)
    notes = read_notes_dir(args.notes)
    spans = [s for n in notes for s in detect_sections(n, dictionary, not args.ignore_case)]
    write_spans_csv(spans, args.out)
    print(f"wrote {len(spans)} section spans for {len(notes)} notes to {args.out}")
    return 0


def cmd_extract(args) -> int:
    notes = read_notes_dir(args.notes)
    spans = _spans_for(notes, args.sections)
    matcher = LexiconMatcher(load_lexicon(args.lexicon))
    anns = [a for n in notes for a in extract_concepts(n, matcher, spans.get(n.note_id, []))]
    write_annotations_csv(anns, args.out)
    print(f"wrote {len(anns)} concept annotations to {args.out}")
    return 0


def cmd_annotate(args) -> int:
    notes = read_notes_dir(args.notes)
    labels, records = rule_labels_all(notes, load_rules(args.rules))
    write_matches_csv(records, args.out)
    if args.labels:
        write_rule_labels_csv(labels, args.labels)
    print(f"wrote {len(records)} regex matches to {args.out}")
    return 0


def cmd_load(args) -> int:
    notes = read_notes_dir(args.notes)
    spans = _spans_for(notes, args.sections)
    now = _now(args.now)
    anns = read_annotations_csv(args.annotations)
    matches = read_matches_csv(args.matches)
    with NoteStore(args.db) as store:
        for n in notes:
            store.persist_note(n)
        for a in anns:
            store.persist_concept(a, NLP_SYSTEM, now)
        for m in matches:
            store.persist_regex_match(m, NLP_SYSTEM, now, spans[m.note_id])
        store.commit()
        print(f"loaded {store.count_notes()} notes, {len(anns)} concept rows, {len(matches)} match rows into {args.db}")
    return 0


def cmd_export(args) -> int:
    if not Path(args.db).exists():
        raise PhenopipeError(f"database {args.db} does not exist")
    with NoteStore(args.db) as store:
        paths = store.export(args.out)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return 0


def cmd_features(args) -> int:
    from .harness.experiment import filter_annotations
    by_note = defaultdict(list)
    for a in read_annotations_csv(args.annotations):
        by_note[a.note_id].append(a)
    if args.notes:
        for n in read_notes_dir(args.notes):
            by_note.setdefault(n.note_id, [])
    filtered = filter_annotations(by_note, args.filter, args.drop_section)
    vocabulary = read_features_csv(args.vocabulary).vocabulary if args.vocabulary else None
    fm = build_feature_matrix(filtered, vocabulary)
    write_features_csv(fm, args.out)
    print(f"wrote {fm.shape[0]} x {fm.shape[1]} feature matrix to {args.out}")
    return 0


def _read_labels(path, disease, source) -> dict[int, str]:
    """note_id -> label from either ``note_id,label`` or ``note_id,disease,source,label`` CSV."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and "disease" in rows[0]:
        if not disease:
            raise PhenopipeError("--disease is required with a multi-disease label file")
        rows = [r for r in rows if r["disease"] == disease and r.get("source", source) == source]
    return {int(r["note_id"]): r["label"] for r in rows}


def cmd_train(args) -> int:
    fm = read_features_csv(args.features)
    labels = _read_labels(args.labels, args.disease, args.source)
    ids = [n for n in fm.row_ids if n in labels and (not args.classes or labels[n] in args.classes)]
    X, y = fm.rows(ids), [labels[n] for n in ids]
    grid = None
    if args.grid:
        grid = ParamGrid(args.algo, json.loads(Path(args.grid).read_text(encoding="utf-8")))
    params, results = grid_search(args.algo, X, y, grid, args.folds, args.seed)
    model = train(args.algo, X, y, params, args.seed)
    save_model(model, args.out)
    for r in results:
        print(f"{json.dumps(r.params, sort_keys=True)}  mean accuracy {r.mean_score:.4f}")
    print(f"best {json.dumps(params, sort_keys=True)}; model written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    fm = read_features_csv(args.features)
    labels = predict(model, fm.reindex(model.vocabulary))
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if args.disease:
            w.writerow(["note_id", "disease", "source", "label"])
            w.writerows([n, args.disease, args.source, l] for n, l in zip(fm.row_ids, labels))
        else:
            w.writerow(["note_id", "label"])
            w.writerows(zip(fm.row_ids, labels))
    print(f"wrote {len(labels)} predictions to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    from .harness.metrics import evaluate_by_source, format_report_table, read_judgments_csv
    gold = [j for j in read_judgments_csv(args.gold)
            if (args.disease is None or j.disease == args.disease) and (args.source is None or j.source == args.source)]
    reports = evaluate_by_source(gold, read_judgments_csv(args.pred))
    print(format_report_table(list(reports.items())))
    if args.json:
        payload = {s: {"metrics": r.row(), "per_class": {k: vars(v) for k, v in r.per_class.items()}}
                   for s, r in reports.items()}
        Path(args.json).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_experiment(args) -> int:
    from .harness.experiment import load_experiment_config, run_experiment_config, write_results
    suite = load_experiment_config(args.config)
    results = run_experiment_config(suite, log=print)
    paths = write_results(results, args.out)
    print(paths["table"].read_text(encoding="utf-8"))
    print(f"{len(results)} reports written to {args.out}")
    return 0


def cmd_synth(args) -> int:
    from .harness.synth import SynthSpec, generate_synthetic_corpus, load_synth_spec
    spec = load_synth_spec(args.spec) if args.spec else SynthSpec()
    corpus = generate_synthetic_corpus(spec, args.seed)
    paths = corpus.write(args.out)
    print(f"wrote {spec.notes} notes and {len(corpus.gold)} gold judgments to {paths['master'].parent}")
    return 0


def cmd_pipeline(args) -> int:
    from .harness.pipeline import PipelineConfig, run_pipeline
    cfg = PipelineConfig.from_file(args.config)
    if args.out:
        cfg.out = Path(args.out).resolve()
    run_pipeline(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phenopipe", description="Clinical note phenotyping pipeline.")
    p.add_argument("--version", action="version", version=f"phenopipe {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="split a master corpus into per-note files")
    s.add_argument("--corpus", required=True)
    s.add_argument("--abbrev", help="abbreviation table (default: bundled)")
    s.add_argument("--sentinel", default=DEFAULT_SENTINEL)
    s.add_argument("--out", required=True)
    s.add_argument("--xml", action="store_true", help="also write one XML record per note")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("sectionize", help="detect section spans")
    s.add_argument("--notes", required=True)
    s.add_argument("--sections", help="heading dictionary TSV (default: bundled)")
    s.add_argument("--out", required=True)
    s.add_argument("--ignore-case", action="store_true")
    s.set_defaults(func=cmd_sectionize)

    s = sub.add_parser("extract", help="tag lexicon concepts")
    s.add_argument("--notes", required=True)
    s.add_argument("--lexicon", help="lexicon CSV (default: bundled)")
    s.add_argument("--sections", help="spans CSV from sectionize (default: recompute)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("annotate", help="run the questionable/absent/present regex cascade")
    s.add_argument("--notes", required=True)
    s.add_argument("--rules", help="rule file or directory (default: bundled)")
    s.add_argument("--out", required=True)
    s.add_argument("--labels", help="also write per-(note, disease) textual rule labels")
    s.set_defaults(func=cmd_annotate)

    s = sub.add_parser("load", help="persist notes and annotations into the NOTE / NOTE_NLP store")
    s.add_argument("--annotations", required=True)
    s.add_argument("--matches", required=True)
    s.add_argument("--notes", required=True)
    s.add_argument("--db", required=True)
    s.add_argument("--sections", help="spans CSV (default: recompute)")
    s.add_argument("--now", help="fixed nlp_date_time (ISO 8601)")
    s.set_defaults(func=cmd_load)

    s = sub.add_parser("export", help="export the store as CSV plus DDL")
    s.add_argument("--db", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("features", help="build a CUI count matrix")
    s.add_argument("--annotations", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--notes", help="notes dir, so notes without annotations get zero rows")
    s.add_argument("--filter", choices=["all", "no_family_history", "semantic_types"], default="all")
    s.add_argument("--drop-section", type=int, action="append", default=None,
                   help="section id to drop (repeatable; default 7)")
    s.add_argument("--vocabulary", help="reuse the columns of an existing feature CSV")
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", help="grid-search and fit one classifier")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True)
    s.add_argument("--algo", required=True, type=str.upper, choices=["LR", "SVM", "DT", "RF"])
    s.add_argument("--grid", help="JSON object of parameter lists (default: built-in grid)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--folds", type=int, default=3)
    s.add_argument("--disease")
    s.add_argument("--source", default="textual", choices=["textual", "intuitive"])
    s.add_argument("--classes", nargs="+", help="train only on rows with these labels")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="apply a saved model to a feature CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--features", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--disease", help="write judgments CSV for this disease")
    s.add_argument("--source", default="textual", choices=["textual", "intuitive"])
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("evaluate", help="micro/macro P/R/F of predictions against gold")
    s.add_argument("--gold", required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--json", help="also write the reports as JSON")
    s.add_argument("--disease", help="score only this disease's gold judgments")
    s.add_argument("--source", choices=["textual", "intuitive"], help="score only this judgment source")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("experiment", help="run the six-iteration protocol")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("synth", help="generate a synthetic corpus with gold labels")
    s.add_argument("--spec", help="JSON spec (default: 500 notes, all diseases, no noise)")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("pipeline", help="run every stage end to end from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="override the config's output directory")
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "drop_section", False) is None:
        args.drop_section = [7]
    try:
        return args.func(args)
    except (PhenopipeError, OSError, ValueError, KeyError) as exc:
        print(f"phenopipe {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
