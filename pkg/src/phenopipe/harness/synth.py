"""Synthetic discharge-summary corpora with planted disease statuses and exact gold labels.

Stands in for the license-restricted challenge corpus. Every planted mention
uses one sentence, one disease, and cue words from exactly one cascade
category, so at noise rate 0 the default rule set recovers every label. With
noise > 0 a fraction of (note, disease) pairs is planted in a form the default
rules get wrong (family-history mentions, unlisted cue phrases); those pairs
are flagged as not rule-recoverable.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..ingest import DEFAULT_SENTINEL
from ..rules import ABSENT, PRESENT, QUESTIONABLE, UNMENTIONED, to_intuitive
from .metrics import INTUITIVE, TEXTUAL, Judgment, write_judgments_csv

# Surface forms used for planting; each is matched by the default rule aliases
# (after abbreviation expansion) and present in the bundled lexicon.
DISEASE_SURFACES: dict[str, list[str]] = {
    "Obesity": ["obesity", "morbid obesity"],
    "Asthma": ["asthma"],
    "CAD": ["coronary artery disease", "CAD"],
    "CHF": ["congestive heart failure", "CHF", "heart failure"],
    "Depression": ["depression", "major depression"],
    "Diabetes": ["diabetes mellitus", "DM", "type 2 diabetes", "diabetes"],
    "GERD": ["gastroesophageal reflux disease", "GERD"],
    "Gallstones": ["gallstones", "cholelithiasis"],
    "Gout": ["gout"],
    "Hypercholesterolemia": ["hypercholesterolemia", "high cholesterol"],
    "Hypertension": ["hypertension", "HTN", "high blood pressure"],
    "Hypertriglyceridemia": ["hypertriglyceridemia"],
    "OA": ["osteoarthritis", "OA", "degenerative joint disease"],
    "OSA": ["obstructive sleep apnea", "OSA", "sleep apnea"],
    "PVD": ["peripheral vascular disease", "PVD"],
    "Venous Insufficiency": ["venous insufficiency"],
}

# Treatments that co-occur with a present disease, giving the CUI features signal.
DISEASE_DRUGS: dict[str, list[str]] = {
    "Obesity": [],
    "Asthma": ["Albuterol 2 puffs as needed"],
    "CAD": ["Aspirin 81 mg daily", "Metoprolol 25 mg b.i.d."],
    "CHF": ["Furosemide 40 mg daily"],
    "Depression": [],
    "Diabetes": ["Metformin 500 mg b.i.d.", "Insulin 10 units at bedtime"],
    "GERD": ["Omeprazole 20 mg daily"],
    "Gallstones": [],
    "Gout": ["Allopurinol 100 mg daily"],
    "Hypercholesterolemia": ["Atorvastatin 40 mg daily"],
    "Hypertension": ["Lisinopril 10 mg daily"],
    "Hypertriglyceridemia": [],
    "OA": [],
    "OSA": [],
    "PVD": [],
    "Venous Insufficiency": [],
}

TEMPLATES = {
    PRESENT: [
        "History of {d}.", "Patient has {d}.", "Known {d}, stable on current regimen.",
        "{D} diagnosed several years ago.", "Followed by primary care for {d}.", "Longstanding {d}.",
    ],
    ABSENT: [
        "No evidence of {d}.", "Denies {d}.", "Negative for {d}.", "{D} was ruled out.",
        "Patient does not have {d}.", "Free of {d} per prior workup.",
    ],
    QUESTIONABLE: [
        "Possible {d}.", "Questionable {d}.", "Suspected {d}.", "{D} cannot be excluded.",
        "Rule out {d}.", "?{d}.",
    ],
}

# Phrasings the default rule set misclassifies: gold label -> template.
NOISE_TEMPLATES = {
    UNMENTIONED: "Mother with {d}.",           # family history, read as Present
    PRESENT: "No doubt about {d}.",            # read as Absent
    ABSENT: "{D} was excluded.",               # read as Present
    QUESTIONABLE: "{D} is being considered.",  # read as Present
}

SECTION_FOR = {
    PRESENT: ["PAST MEDICAL HISTORY", "DISCHARGE DIAGNOSIS", "HOSPITAL COURSE"],
    ABSENT: ["REVIEW OF SYSTEMS", "PAST MEDICAL HISTORY", "HOSPITAL COURSE"],
    QUESTIONABLE: ["HOSPITAL COURSE", "ASSESSMENT AND PLAN"],
}

NOTE_SECTIONS = [
    "CHIEF COMPLAINT", "HISTORY OF PRESENT ILLNESS", "PAST MEDICAL HISTORY", "MEDICATIONS", "ALLERGIES",
    "SOCIAL HISTORY", "FAMILY HISTORY", "REVIEW OF SYSTEMS", "PHYSICAL EXAMINATION", "LABORATORY DATA",
    "HOSPITAL COURSE", "ASSESSMENT AND PLAN", "DISCHARGE DIAGNOSIS", "DISCHARGE MEDICATIONS",
]

SYMPTOMS = ["chest pain", "SOB", "fever", "nausea", "cough", "headache", "fatigue", "dizziness",
            "back pain", "wheezing", "syncope", "vomiting"]
FAMILY_CONDITIONS = ["stroke", "MI", "alzheimer disease", "atrial fibrillation", "anemia",
                     "chronic kidney disease", "deep vein thrombosis"]
RELATIVES = ["Mother", "Father", "Brother", "Sister", "Grandmother"]
HPI_FILLER = [
    "The pt presented to the hospital with {s}.",
    "Symptoms began two days prior to admission.",
    "The pt c/o {s} for one week.",
    "Initial electrocardiogram showed sinus rhythm.",
    "Chest x-ray was obtained in the emergency department.",
    "The pt was admitted for further management.",
]
EXAM_FILLER = [
    "BP 132/84, heart rate 88.", "Heart regular rate and rhythm.", "Lungs clear bilaterally.",
    "Abdomen soft and nontender.", "Extremities warm.", "Tachycardia noted on arrival.",
]
LAB_FILLER = [
    "Complete blood count within normal limits.", "Hemoglobin A1c 7.4.", "Creatinine 1.1.",
    "Echocardiogram showed preserved function.", "EKG unchanged from prior.",
]
COURSE_FILLER = [
    "The pt was treated with heparin for prophylaxis.", "Physical therapy was consulted.",
    "Pain was controlled with oral medication.", "The pt tolerated a regular diet.",
    "Cardiac catheterization was deferred.", "Warfarin was held during admission.",
]
OTHER_DRUGS = ["Prednisone 10 mg daily", "Simvastatin 20 mg daily", "Aspirin 325 mg daily",
               "Omeprazole 20 mg daily", "Lisinopril 5 mg daily"]
SOCIAL = ["Former smoking, quit ten years ago.", "Drinks alcohol socially.", "Lives with spouse.",
          "Retired teacher."]


@dataclass
class SynthSpec:
    diseases: list[str] = field(default_factory=lambda: list(DISEASE_SURFACES))
    notes: int = 500
    noise_rate: float = 0.0
    label_probs: dict[str, float] = field(default_factory=lambda: {
        PRESENT: 0.35, UNMENTIONED: 0.45, ABSENT: 0.12, QUESTIONABLE: 0.08})
    abbreviation_rate: float = 0.3
    sentinel: str = DEFAULT_SENTINEL

    def __post_init__(self):
        unknown = [d for d in self.diseases if d not in DISEASE_SURFACES]
        if unknown:
            raise ValueError(f"no synthetic surfaces for diseases {unknown}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        if self.notes < 1:
            raise ValueError("notes must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        known = {"diseases", "notes", "noise_rate", "label_probs", "abbreviation_rate", "sentinel"}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class PlantedLabel:
    note_id: int
    disease: str
    label: str
    recoverable: bool


@dataclass
class SyntheticCorpus:
    master: str
    gold: list[Judgment]
    planted: list[PlantedLabel]

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"master": out / "master.txt", "gold": out / "gold.csv", "planted": out / "planted.csv"}
        with open(paths["master"], "w", encoding="utf-8", newline="") as fh:
            fh.write(self.master)
        write_judgments_csv(self.gold, paths["gold"])
        with open(paths["planted"], "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["note_id", "disease", "label", "recoverable"])
            for p in self.planted:
                w.writerow([p.note_id, p.disease, p.label, int(p.recoverable)])
        return paths


def read_planted_csv(path: str | Path) -> list[PlantedLabel]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [PlantedLabel(int(r["note_id"]), r["disease"], r["label"], r["recoverable"] == "1")
                for r in csv.DictReader(fh)]


def _cap(s: str) -> str:
    return s[:1].upper() + s[1:]


def _render(template: str, surface: str) -> str:
    return template.format(d=surface, D=_cap(surface))


def _pick_surface(rng: random.Random, disease: str, abbreviation_rate: float) -> str:
    surfaces = DISEASE_SURFACES[disease]
    abbrevs = [s for s in surfaces if s.isupper()]
    if abbrevs and rng.random() < abbreviation_rate:
        return rng.choice(abbrevs)
    full = [s for s in surfaces if not s.isupper()]
    return rng.choice(full)


def _draw_label(rng: random.Random, probs: dict[str, float]) -> str:
    labels = [PRESENT, UNMENTIONED, ABSENT, QUESTIONABLE]
    weights = [probs.get(l, 0.0) for l in labels]
    return rng.choices(labels, weights=weights)[0]


def _note_text(rng: random.Random, record_no: int, plants: dict[str, tuple[str, bool]],
               spec: SynthSpec) -> str:
    body: dict[str, list[str]] = {s: [] for s in NOTE_SECTIONS}
    sym = rng.sample(SYMPTOMS, 3)
    body["CHIEF COMPLAINT"].append(f"{_cap(sym[0])}.")
    for t in rng.sample(HPI_FILLER, 3):
        body["HISTORY OF PRESENT ILLNESS"].append(t.format(s=rng.choice(sym)))
    body["ALLERGIES"].append("NKDA.")
    body["SOCIAL HISTORY"].append(rng.choice(SOCIAL))
    for cond in rng.sample(FAMILY_CONDITIONS, rng.randint(1, 2)):
        body["FAMILY HISTORY"].append(f"{rng.choice(RELATIVES)} with {cond}.")
    body["REVIEW OF SYSTEMS"].append(f"Positive for {sym[1]}.")
    body["PHYSICAL EXAMINATION"].extend(rng.sample(EXAM_FILLER, 3))
    body["LABORATORY DATA"].extend(rng.sample(LAB_FILLER, 2))
    body["HOSPITAL COURSE"].extend(rng.sample(COURSE_FILLER, 2))

    drugs = set()
    for disease, (label, recoverable) in plants.items():
        surface = _pick_surface(rng, disease, spec.abbreviation_rate)
        if not recoverable:
            section = "FAMILY HISTORY" if label == UNMENTIONED else rng.choice(SECTION_FOR[label])
            body[section].append(_render(NOISE_TEMPLATES[label], surface))
        elif label != UNMENTIONED:
            for _ in range(rng.choice([1, 1, 2])):
                body[rng.choice(SECTION_FOR[label])].append(_render(rng.choice(TEMPLATES[label]), surface))
                surface = _pick_surface(rng, disease, spec.abbreviation_rate)
            if label == QUESTIONABLE and rng.random() < 0.3:
                # a later plain mention does not change the label: the cascade ranks Questionable first
                body["DISCHARGE DIAGNOSIS"].append(_render(rng.choice(TEMPLATES[PRESENT]), surface))
        if label == PRESENT and DISEASE_DRUGS[disease] and rng.random() < 0.8:
            drugs.add(rng.choice(DISEASE_DRUGS[disease]))
    if rng.random() < 0.5:
        drugs.add(rng.choice(OTHER_DRUGS))
    for d in sorted(drugs):
        body["MEDICATIONS"].append(f"{d}.")
        body["DISCHARGE MEDICATIONS"].append(f"{d}.")

    lines = [f"RECORD #{record_no}", "DISCHARGE SUMMARY"]
    for section in NOTE_SECTIONS:
        sentences = body[section]
        if not sentences and section in ("ASSESSMENT AND PLAN", "DISCHARGE DIAGNOSIS"):
            sentences = ["Stable for discharge."]
        if not sentences:
            continue
        rng.shuffle(sentences)
        lines.append(f"{section}:")
        lines.extend(sentences)
    return "\n".join(lines) + "\n"


def generate_synthetic_corpus(spec: SynthSpec, seed: int) -> SyntheticCorpus:
    rng = random.Random(seed)
    parts, gold, planted = [], [], []
    for note_id in range(1, spec.notes + 1):
        plants = {}
        for disease in spec.diseases:
            label = _draw_label(rng, spec.label_probs)
            recoverable = not (spec.noise_rate > 0 and rng.random() < spec.noise_rate)
            plants[disease] = (label, recoverable)
            planted.append(PlantedLabel(note_id, disease, label, recoverable))
            gold.append(Judgment(note_id, disease, TEXTUAL, label))
            gold.append(Judgment(note_id, disease, INTUITIVE, to_intuitive(label)))
        parts.append(_note_text(rng, 1000 + note_id, plants, spec))
        parts.append(spec.sentinel + "\n")
    return SyntheticCorpus("".join(parts), gold, planted)


def load_synth_spec(path: str | Path) -> SynthSpec:
    return SynthSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
