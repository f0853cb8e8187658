from __future__ import annotations

import functools
from pathlib import Path

import pytest

from atomis.pipeline import atomis_analysis
from atomis.solver import OPTIMAL

CORPUS = Path(__file__).resolve().parent.parent / "corpus"
CORPUS_FILES = sorted(CORPUS.glob("*.aool"))
NEGATIVE_FILES = sorted((CORPUS / "negative").glob("*.aool"))


def corpus_source(name: str) -> str:
    return (CORPUS / name).read_text()


@functools.lru_cache(maxsize=None)
def analysis(name: str, mode: str = OPTIMAL, incremental: bool = False):
    path = CORPUS / name
    return atomis_analysis(path.read_text(), str(path.relative_to(CORPUS.parent)), mode=mode, incremental=incremental)


@pytest.fixture(scope="session")
def baselist():
    return analysis("baselist.aool")


def mutate(program, old: str, new: str, after: tuple[str, ...] = ()):
    """Re-parse `program` with the first `old` after the markers in `after` replaced by `new`."""
    from atomis.frontend import parse_program
    from atomis.syntax import pretty_print

    text = pretty_print(program)
    at = 0
    for marker in after:
        at = text.index(marker, at)
    at = text.index(old, at)
    return parse_program(text[:at] + new + text[at + len(old):])


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    ACCEPTANCE[criterion] = (ok, detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
