import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import (
    HAND_GOLD,
    HAND_LABELS,
    HAND_MACRO_F,
    HAND_MACRO_P,
    HAND_MACRO_R,
    HAND_MICRO,
    HAND_PRED,
    confusion_prf,
)
from phenopipe.harness.metrics import (
    INTUITIVE,
    LABEL_SETS,
    TEXTUAL,
    Judgment,
    KeyMismatch,
    evaluate_by_source,
    format_report_table,
    micro_macro_prf,
    read_judgments_csv,
    write_judgments_csv,
)


def judgments(labels, source=TEXTUAL, disease="Obesity"):
    return [Judgment(i, disease, source, l) for i, l in enumerate(labels, 1)]


def test_hand_example():
    r = micro_macro_prf(judgments(HAND_GOLD), judgments(HAND_PRED), HAND_LABELS)
    assert r.p_micro == r.r_micro == r.f_micro == float(HAND_MICRO)
    assert r.p_macro == float(HAND_MACRO_P)
    assert r.r_macro == float(HAND_MACRO_R)
    assert r.f_macro == float(HAND_MACRO_F)


def test_perfect_prediction():
    labels = ["Present", "Absent", "Questionable", "Unmentioned"]
    r = micro_macro_prf(judgments(labels), judgments(labels), LABEL_SETS[TEXTUAL])
    assert r.row() == [1.0] * 6


def test_empty_class_pulls_macro_down():
    r = micro_macro_prf(judgments(["Present", "Absent"]), judgments(["Present", "Absent"]), LABEL_SETS[TEXTUAL])
    assert r.f_micro == 1.0
    assert r.per_class["Questionable"].f == 0.0
    assert r.f_macro == 0.5


def test_key_mismatch():
    with pytest.raises(KeyMismatch):
        micro_macro_prf(judgments(["Present"]), judgments(["Present", "Absent"]), HAND_LABELS)
    dup = judgments(["Present"]) * 2
    with pytest.raises(KeyMismatch):
        micro_macro_prf(dup, dup, HAND_LABELS)


def test_invalid_label_rejected():
    with pytest.raises(ValueError):
        Judgment(1, "Obesity", INTUITIVE, "Unmentioned")
    with pytest.raises(ValueError):
        Judgment(1, "Obesity", "clinical", "Present")


LABELS = list(LABEL_SETS[TEXTUAL])


@given(st.lists(st.tuples(st.sampled_from(LABELS), st.sampled_from(LABELS)), min_size=1, max_size=60),
       st.sets(st.sampled_from(LABELS), min_size=1))
def test_matches_confusion_oracle(pairs, label_subset):
    gold = [g for g, _ in pairs]
    pred = [p for _, p in pairs]
    labels = [l for l in LABELS if l in label_subset]
    r = micro_macro_prf(judgments(gold), judgments(pred), labels)
    o = confusion_prf(gold, pred, labels)
    for name in ("p_micro", "r_micro", "f_micro", "p_macro", "r_macro", "f_macro"):
        assert abs(getattr(r, name) - o[name]) <= 1e-12
        assert 0.0 <= getattr(r, name) <= 1.0
    assert r.f_macro <= max(s.f for s in r.per_class.values()) + 1e-15


@given(st.lists(st.tuples(st.sampled_from(LABELS), st.sampled_from(LABELS)), min_size=1, max_size=60))
def test_micro_is_accuracy(pairs):
    gold = [g for g, _ in pairs]
    pred = [p for _, p in pairs]
    r = micro_macro_prf(judgments(gold), judgments(pred), LABELS)
    acc = sum(g == p for g, p in pairs) / len(pairs)
    assert r.p_micro == r.r_micro == r.f_micro
    assert r.f_micro == pytest.approx(acc, abs=1e-12)


def test_pooled_across_diseases_and_split_by_source(tmp_path):
    rng = random.Random(0)
    gold, pred = [], []
    for n in range(1, 21):
        for d in ("Obesity", "CAD"):
            t = rng.choice(LABELS)
            gold += [Judgment(n, d, TEXTUAL, t), Judgment(n, d, INTUITIVE, "Absent" if t == "Unmentioned" else t)]
            pred += [Judgment(n, d, TEXTUAL, rng.choice(LABELS)), Judgment(n, d, INTUITIVE, "Present")]
    write_judgments_csv(gold, tmp_path / "g.csv")
    assert read_judgments_csv(tmp_path / "g.csv") == gold
    reports = evaluate_by_source(gold, pred)
    assert set(reports) == {TEXTUAL, INTUITIVE}
    tg = [j for j in gold if j.source == TEXTUAL]
    tp = [j for j in pred if j.source == TEXTUAL]
    assert reports[TEXTUAL] == micro_macro_prf(tg, tp, LABEL_SETS[TEXTUAL])
    table = format_report_table(list(reports.items()))
    assert "F-Micro" in table and TEXTUAL in table
