"""CUI-frequency feature matrices."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..concepts import ConceptAnnotation


@dataclass
class FeatureMatrix:
    row_ids: list[int]
    vocabulary: list[str]
    counts: np.ndarray  # (len(row_ids), len(vocabulary)), int64

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(len(self.row_ids), len(self.vocabulary))
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("vocabulary entries must be unique")
        if (self.counts < 0).any():
            raise ValueError("feature counts must be non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape

    def rows(self, note_ids: Sequence[int]) -> "FeatureMatrix":
        index = {nid: i for i, nid in enumerate(self.row_ids)}
        idx = [index[n] for n in note_ids]
        return FeatureMatrix(list(note_ids), list(self.vocabulary), self.counts[idx])

    def reindex(self, vocabulary: Sequence[str]) -> "FeatureMatrix":
        """Same rows over ``vocabulary``: unknown columns are dropped, missing ones are zero."""
        col = {c: j for j, c in enumerate(self.vocabulary)}
        counts = np.zeros((len(self.row_ids), len(vocabulary)), dtype=np.int64)
        for j, c in enumerate(vocabulary):
            if c in col:
                counts[:, j] = self.counts[:, col[c]]
        return FeatureMatrix(list(self.row_ids), list(vocabulary), counts)


def build_feature_matrix(annotations: Mapping[int, Sequence[ConceptAnnotation | str]],
                         vocabulary: Sequence[str] | None = None,
                         row_ids: Sequence[int] | None = None) -> FeatureMatrix:
    """Count CUIs per note.

    ``annotations`` maps note id to its annotations (or bare CUI strings). Without
    a fixed ``vocabulary`` the columns are the sorted observed CUIs; with one,
    unseen CUIs are dropped and absent ones stay zero.
    """
    ids = list(row_ids) if row_ids is not None else sorted(annotations)
    per_note = [Counter(a if isinstance(a, str) else a.cui for a in annotations.get(nid, ())) for nid in ids]
    if vocabulary is None:
        vocab = sorted(set().union(*per_note)) if per_note else []
    else:
        vocab = list(vocabulary)
    col = {c: j for j, c in enumerate(vocab)}
    counts = np.zeros((len(ids), len(vocab)), dtype=np.int64)
    for i, counter in enumerate(per_note):
        for cui, n in counter.items():
            j = col.get(cui)
            if j is not None:
                counts[i, j] = n
    return FeatureMatrix(ids, vocab, counts)


def write_features_csv(fm: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["note_id", *fm.vocabulary])
        for nid, row in zip(fm.row_ids, fm.counts):
            w.writerow([nid, *row.tolist()])


def read_features_csv(path: str | Path) -> FeatureMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ids, rows = [], []
        for r in reader:
            ids.append(int(r[0]))
            rows.append([int(v) for v in r[1:]])
    return FeatureMatrix(ids, header[1:], np.array(rows, dtype=np.int64).reshape(len(ids), len(header) - 1))
