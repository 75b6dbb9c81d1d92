from pathlib import Path

import pytest

from termlog.syntax import parse_program

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"

# acceptance results, filled by tests/test_acceptance.py
ACCEPTANCE = {}


def load(name: str):
    return parse_program((CORPUS / name).read_text())


@pytest.fixture
def corpus():
    return load


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
