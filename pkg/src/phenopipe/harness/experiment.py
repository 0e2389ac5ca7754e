"""Six-iteration experiment protocol: feature filters x class scopes x algorithms x judgment sources."""

from __future__ import annotations

import csv
import json
import random
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from ..concepts import CLINICAL_SEMANTIC_TYPES, ConceptAnnotation
from ..ml import ALGORITHMS, FeatureMatrix, ParamGrid, build_feature_matrix, grid_search, train
from ..ml.models import normalize_algorithm
from .hybrid import MAJOR_CLASSES, ConstantModel, hybrid_classify, model_predict
from .metrics import (LABEL_SETS, METRIC_NAMES, SOURCES, TEXTUAL, Judgment, MetricsReport,
                      format_report_table, micro_macro_prf)

INDEX_DISEASE = "Obesity"
FEATURE_FILTERS = ("all", "no_family_history", "semantic_types")
CLASS_SCOPES = ("all", "major")
ITERATIONS: dict[str, tuple[str, str]] = {
    "a": ("all", "all"),
    "b": ("no_family_history", "all"),
    "c": ("semantic_types", "all"),
    "d": ("all", "major"),
    "e": ("no_family_history", "major"),
    "f": ("semantic_types", "major"),
}


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.3
    seed: int = 0
    stratify_disease: str | None = None  # None: the index disease, else the first one
    split_file: str | None = None        # CSV note_id,split with split in {train,test}

    @classmethod
    def from_dict(cls, d: Mapping | None) -> "SplitSpec":
        return cls(**dict(d or {}))


@dataclass
class ExperimentConfig:
    iteration: str
    algorithm: str
    grid: ParamGrid | None = None
    seed: int = 0
    folds: int = 3
    split: SplitSpec = field(default_factory=SplitSpec)

    def __post_init__(self):
        if self.iteration not in ITERATIONS:
            raise ValueError(f"unknown iteration {self.iteration!r}; expected one of {sorted(ITERATIONS)}")
        self.algorithm = normalize_algorithm(self.algorithm)

    @property
    def feature_filter(self) -> str:
        return ITERATIONS[self.iteration][0]

    @property
    def class_scope(self) -> str:
        return ITERATIONS[self.iteration][1]


@dataclass
class ExperimentData:
    """Everything a cell needs: per-note annotations, textual rule labels, gold, and the split."""

    annotations: dict[int, list[ConceptAnnotation]]
    rule_labels: dict[tuple[int, str], str]
    gold: list[Judgment]
    diseases: list[str]
    train_ids: list[int]
    test_ids: list[int]
    drop_section_ids: tuple[int, ...] = (7,)

    def __post_init__(self):
        self._gold = {j.key: j.label for j in self.gold}

    def gold_label(self, note_id: int, disease: str, source: str) -> str:
        return self._gold[(note_id, disease, source)]

    def sources(self) -> list[str]:
        return [s for s in SOURCES if any(j.source == s for j in self.gold)]


def filter_annotations(annotations: Mapping[int, Sequence[ConceptAnnotation]], feature_filter: str,
                       drop_section_ids: Sequence[int] = (7,),
                       semantic_types: frozenset[str] = CLINICAL_SEMANTIC_TYPES) -> dict[int, list[ConceptAnnotation]]:
    if feature_filter not in FEATURE_FILTERS:
        raise ValueError(f"unknown feature filter {feature_filter!r}")
    drop = set(drop_section_ids) if feature_filter != "all" else set()
    keep_types = semantic_types if feature_filter == "semantic_types" else None
    return {nid: [a for a in anns if a.section_concept_id not in drop
                  and (keep_types is None or a.semantic_type in keep_types)]
            for nid, anns in annotations.items()}


def train_test_split(note_ids: Sequence[int], strata: Mapping[int, str], test_fraction: float,
                     seed: int) -> tuple[list[int], list[int]]:
    """Seeded split that keeps each stratum's share of test notes at ``test_fraction``."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = random.Random(seed)
    by_stratum: dict[str, list[int]] = defaultdict(list)
    for nid in sorted(note_ids):
        by_stratum[strata.get(nid, "")].append(nid)
    test: list[int] = []
    for key in sorted(by_stratum):
        members = by_stratum[key]
        rng.shuffle(members)
        test.extend(members[:round(len(members) * test_fraction)])
    test_set = set(test)
    return [n for n in sorted(note_ids) if n not in test_set], sorted(test_set)


def read_split_file(path: str | Path) -> tuple[list[int], list[int]]:
    train_ids, test_ids = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        for r in csv.DictReader(fh):
            split = r["split"].strip().lower()
            if split not in ("train", "test"):
                raise ValueError(f"split must be train or test, got {r['split']!r}")
            (train_ids if split == "train" else test_ids).append(int(r["note_id"]))
    return sorted(train_ids), sorted(test_ids)


def resolve_split(spec: SplitSpec, note_ids: Sequence[int], gold: Sequence[Judgment],
                  diseases: Sequence[str]) -> tuple[list[int], list[int]]:
    if spec.split_file:
        return read_split_file(spec.split_file)
    disease = spec.stratify_disease or (INDEX_DISEASE if INDEX_DISEASE in diseases else diseases[0])
    strata = {j.note_id: j.label for j in gold if j.disease == disease and j.source == TEXTUAL}
    return train_test_split(note_ids, strata, spec.test_fraction, spec.seed)


@dataclass
class CellResult:
    iteration: str
    algorithm: str
    source: str
    report: MetricsReport
    predictions: list[Judgment]
    best_params: dict[str, dict]


def _fit_disease(config: ExperimentConfig, X: FeatureMatrix, y: list[str], seed: int, fallback: str):
    if len(set(y)) < 2:
        return ConstantModel.most_common(y, fallback), {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # fold reduction on tiny classes is expected
        params, _ = grid_search(config.algorithm, X, y, config.grid, config.folds, seed)
        return train(config.algorithm, X, y, params, seed), params


def run_cell(config: ExperimentConfig, data: ExperimentData, source: str,
             features: tuple[FeatureMatrix, FeatureMatrix] | None = None) -> CellResult:
    """Train one model per disease on the training notes and score the pooled test predictions."""
    if features is None:
        filtered = filter_annotations(data.annotations, config.feature_filter, data.drop_section_ids)
        X_train = build_feature_matrix(filtered, row_ids=data.train_ids)
        X_test = build_feature_matrix(filtered, X_train.vocabulary, data.test_ids)
    else:
        X_train, X_test = features
    major = MAJOR_CLASSES[source]
    preds: list[Judgment] = []
    best: dict[str, dict] = {}
    for k, disease in enumerate(data.diseases):
        labels = [data.gold_label(n, disease, source) for n in data.train_ids]
        if config.class_scope == "major":
            keep = [i for i, l in enumerate(labels) if l in major]
        else:
            keep = list(range(len(labels)))
        ids = [data.train_ids[i] for i in keep]
        y = [labels[i] for i in keep]
        model, params = _fit_disease(config, X_train.rows(ids), y, config.seed + k, major[0])
        best[disease] = params
        if config.class_scope == "major":
            preds.extend(hybrid_classify(data.test_ids, disease, source, data.rule_labels, model, X_test, major))
        else:
            out = model_predict(model, X_test)
            preds.extend(Judgment(n, disease, source, l) for n, l in zip(data.test_ids, out))
    test_set = set(data.test_ids)
    gold = [j for j in data.gold if j.source == source and j.note_id in test_set]
    report = micro_macro_prf(gold, preds, LABEL_SETS[source])
    return CellResult(config.iteration, config.algorithm, source, report, preds, best)


def _cell_job(args):
    config, data, source, features = args
    return run_cell(config, data, source, features)


def run_iterations(data: ExperimentData, iterations: Sequence[str] = tuple(ITERATIONS),
                   algorithms: Sequence[str] = ALGORITHMS, grids: Mapping[str, ParamGrid] | None = None,
                   seed: int = 0, folds: int = 3, workers: int = 1) -> list[CellResult]:
    """Run every (iteration, algorithm, source) cell; results come back in that nested order."""
    grids = dict(grids or {})
    cache: dict[str, tuple[FeatureMatrix, FeatureMatrix]] = {}
    jobs = []
    for it in iterations:
        ff = ITERATIONS[it][0]
        if ff not in cache:
            filtered = filter_annotations(data.annotations, ff, data.drop_section_ids)
            X_train = build_feature_matrix(filtered, row_ids=data.train_ids)
            cache[ff] = (X_train, build_feature_matrix(filtered, X_train.vocabulary, data.test_ids))
        for algo in algorithms:
            algo = normalize_algorithm(algo)
            config = ExperimentConfig(it, algo, grids.get(algo), seed, folds)
            for source in data.sources():
                jobs.append((config, data, source, cache[ff]))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cell_job, jobs))
    return [_cell_job(j) for j in jobs]


def write_results(results: Sequence[CellResult], out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "results.csv", "table": out / "results.txt", "params": out / "best_params.json"}
    with open(paths["csv"], "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "algorithm", "source", *METRIC_NAMES])
        for r in results:
            w.writerow([r.iteration, r.algorithm, r.source, *(f"{v:.6f}" for v in r.report.row())])
    paths["table"].write_text(format_results_table(results) + "\n", encoding="utf-8")
    params = {f"{r.iteration}/{r.algorithm}/{r.source}": r.best_params for r in results}
    paths["params"].write_text(json.dumps(params, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths


def format_results_table(results: Sequence[CellResult]) -> str:
    blocks = []
    for it in dict.fromkeys(r.iteration for r in results):
        feature_filter, scope = ITERATIONS[it]
        for source in dict.fromkeys(r.source for r in results if r.iteration == it):
            rows = [(r.algorithm, r.report) for r in results if r.iteration == it and r.source == source]
            title = f"iteration {it} ({feature_filter}, {scope} classes), {source}"
            blocks.append(format_report_table(rows, title))
    return "\n\n".join(blocks)


# --- JSON-configured suites ------------------------------------------------

@dataclass
class ExperimentSuite:
    """A full protocol run: data sources plus the cells to evaluate.

    Data comes either from a raw ``corpus`` (processed with the bundled or
    configured resources) or from pre-computed ``annotations`` and
    ``rule_labels`` CSVs; ``gold`` is always required.
    """

    gold: Path
    corpus: Path | None = None
    annotations: Path | None = None
    rule_labels: Path | None = None
    sentinel: str | None = None
    abbreviations: Path | None = None
    sections: Path | None = None
    lexicon: Path | None = None
    rules: Path | None = None
    iterations: list[str] = field(default_factory=lambda: list(ITERATIONS))
    algorithms: list[str] = field(default_factory=lambda: list(ALGORITHMS))
    grids: dict[str, dict] = field(default_factory=dict)
    seed: int = 0
    folds: int = 3
    split: dict = field(default_factory=dict)
    drop_sections: list[str] = field(default_factory=lambda: ["FAMILY HISTORY"])
    workers: int = 1

    def __post_init__(self):
        if self.corpus is None and (self.annotations is None or self.rule_labels is None):
            raise ValueError("experiment config needs 'corpus' or both 'annotations' and 'rule_labels'")
        unknown = [i for i in self.iterations if i not in ITERATIONS]
        if unknown:
            raise ValueError(f"unknown iterations {unknown}")


_PATH_KEYS = ("gold", "corpus", "annotations", "rule_labels", "abbreviations", "sections", "lexicon", "rules")


def load_experiment_config(path: str | Path) -> ExperimentSuite:
    path = Path(path)
    d = json.loads(path.read_text(encoding="utf-8"))
    for key in _PATH_KEYS:
        if d.get(key) is not None:
            d[key] = (path.parent / d[key]).resolve()
    split = dict(d.get("split") or {})
    if split.get("split_file"):
        split["split_file"] = str((path.parent / split["split_file"]).resolve())
    d["split"] = split
    return ExperimentSuite(**d)


def build_experiment_data(suite: ExperimentSuite, log=None) -> ExperimentData:
    from ..concepts import read_annotations_csv
    from ..ingest import DEFAULT_SENTINEL
    from ..rules import read_rule_labels_csv
    from ..sections import heading_id, load_section_dictionary
    from .metrics import read_judgments_csv
    from .stages import process_corpus

    gold = read_judgments_csv(suite.gold)
    dictionary = load_section_dictionary(suite.sections)
    if suite.corpus is not None:
        pc = process_corpus(suite.corpus, suite.sentinel or DEFAULT_SENTINEL, suite.abbreviations,
                            suite.sections, suite.lexicon, suite.rules, log)
        annotations, rule_map, diseases = pc.annotations, pc.rule_map(), pc.diseases
        note_ids = [n.note_id for n in pc.notes]
    else:
        labels = read_rule_labels_csv(suite.rule_labels)
        rule_map = {(l.note_id, l.disease): l.label for l in labels}
        diseases = list(dict.fromkeys(l.disease for l in labels))
        note_ids = sorted({l.note_id for l in labels})
        annotations = {n: [] for n in note_ids}
        for a in read_annotations_csv(suite.annotations):
            annotations.setdefault(a.note_id, []).append(a)
    train_ids, test_ids = resolve_split(SplitSpec.from_dict(suite.split), note_ids, gold, diseases)
    drop_ids = tuple(heading_id(dictionary, h) for h in suite.drop_sections)
    return ExperimentData(annotations, rule_map, gold, diseases, train_ids, test_ids, drop_ids)


def run_experiment_config(suite: ExperimentSuite, log=None) -> list[CellResult]:
    data = build_experiment_data(suite, log)
    grids = {normalize_algorithm(a): ParamGrid(a, g) for a, g in suite.grids.items()}
    if log:
        log(f"{len(data.train_ids)} training notes, {len(data.test_ids)} test notes, {len(data.diseases)} diseases")
    return run_iterations(data, suite.iterations, suite.algorithms, grids, suite.seed, suite.folds, suite.workers)
