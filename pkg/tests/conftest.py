from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def bundled_corpus() -> Path:
    return DATA / "synthetic" / "master.txt"


@pytest.fixture(scope="session")
def processed(bundled_corpus):
    """The bundled 500-note corpus run through ingest, sections, concepts and rules."""
    from phenopipe.harness.stages import process_corpus
    return process_corpus(bundled_corpus)


@pytest.fixture(scope="session")
def small_synth():
    from phenopipe.harness.synth import SynthSpec, generate_synthetic_corpus
    return generate_synthetic_corpus(SynthSpec(notes=40), seed=7)


ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
