"""Hybrid labelling: rare classes come from the rule cascade, common ones from a trained model."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..errors import PhenopipeError
from ..ml import FeatureMatrix, Model, predict
from ..rules import ABSENT, PRESENT, QUESTIONABLE, UNMENTIONED, to_intuitive
from .metrics import INTUITIVE, LABEL_SETS, TEXTUAL, Judgment

MAJOR_CLASSES = {INTUITIVE: (ABSENT, PRESENT), TEXTUAL: (PRESENT, UNMENTIONED)}
MINOR_CLASSES = {INTUITIVE: (QUESTIONABLE,), TEXTUAL: (ABSENT, QUESTIONABLE)}


class MissingRuleLabel(PhenopipeError):
    pass


@dataclass(frozen=True)
class ConstantModel:
    """Stand-in used when the training labels for a disease contain one class only."""

    label: str

    def predict_matrix(self, X: np.ndarray) -> list[str]:
        return [self.label] * len(X)

    @classmethod
    def most_common(cls, labels: Sequence[str], fallback: str) -> "ConstantModel":
        if not labels:
            return cls(fallback)
        counts = Counter(labels)
        top = max(counts.values())
        return cls(min(l for l, c in counts.items() if c == top))


def model_predict(model: Model | ConstantModel, X: FeatureMatrix) -> list[str]:
    if isinstance(model, ConstantModel):
        return model.predict_matrix(X.counts)
    return predict(model, X)


def rule_label_for(source: str, textual_label: str) -> str:
    return to_intuitive(textual_label) if source == INTUITIVE else textual_label


def hybrid_classify(note_ids: Sequence[int], disease: str, source: str,
                    rule_labels: Mapping[tuple[int, str], str], model: Model | ConstantModel,
                    features: FeatureMatrix, major_classes: Sequence[str] | None = None) -> list[Judgment]:
    """Label each note for one disease and judgment source.

    ``rule_labels`` holds textual cascade labels keyed by ``(note_id, disease)``.
    A rule label outside ``major_classes`` is emitted as is; otherwise the
    model's prediction for the note's feature row is used.
    """
    major = set(major_classes if major_classes is not None else MAJOR_CLASSES[source])
    unknown = major - set(LABEL_SETS[source])
    if unknown:
        raise ValueError(f"major classes {sorted(unknown)} are not {source} labels")
    missing = [n for n in note_ids if (n, disease) not in rule_labels]
    if missing:
        raise MissingRuleLabel(f"no rule label for {disease!r} in notes {missing[:5]}")
    rows = features.rows(note_ids)
    ml = model_predict(model, rows)
    out = []
    for n, m in zip(note_ids, ml):
        r = rule_label_for(source, rule_labels[(n, disease)])
        out.append(Judgment(n, disease, source, m if r in major else r))
    return out
