from __future__ import annotations

import json
import re
from pathlib import Path

import pytest

from aspectchain.datasets import DatasetManifest, aspect_spec, load_dataset
from aspectchain.llm import JudgeClient, ResponseCache, ScriptedBackend

FIXTURES = Path(__file__).parent / "fixtures"
TOY_MANIFEST = FIXTURES / "toy" / "toy.manifest.json"
TOY_SCRIPT = FIXTURES / "toy" / "toy.script.json"
CASES_MANIFEST = FIXTURES / "cases" / "cases.manifest.json"
CASES_SCRIPT = FIXTURES / "cases" / "cases.script.json"
REPORT_DIR = FIXTURES / "report"

_SCORE_LINE = re.compile(r"^Score: (\d+(?:\.\d+)?)$", re.M)


def script_rules(path: Path) -> list[tuple[str, str]]:
    return [(r["match"], r["response"]) for r in json.loads(path.read_text())["rules"]]


def scripted_client(script: Path = TOY_SCRIPT, *, cache_dir=None, workers: int = 1, **kw) -> JudgeClient:
    backend = ScriptedBackend(script_rules(script))
    cache = ResponseCache(cache_dir) if cache_dir is not None else None
    return JudgeClient(backend, "scripted", cache=cache, max_concurrency=workers, **kw)


def knowledge_sensitive_client(**kw) -> JudgeClient:
    """Toy client whose stage-3 answer is the mean of the "Score:" lines in the prompt.

    Lets tests see the effect of the knowledge a variant injects.
    """

    def stage3(request):
        values = [float(v) for v in _SCORE_LINE.findall(request.prompt)]
        return f"{sum(values) / len(values):.2f}" if values else "3.0"

    rules = [("coa_score:*", stage3)] + script_rules(TOY_SCRIPT)
    return JudgeClient(ScriptedBackend(rules), "scripted", **kw)


@pytest.fixture(scope="session")
def toy_dataset():
    return load_dataset(DatasetManifest.from_file(TOY_MANIFEST))


@pytest.fixture(scope="session")
def cases_dataset():
    return load_dataset(DatasetManifest.from_file(CASES_MANIFEST))


@pytest.fixture(scope="session")
def overall(toy_dataset):
    return aspect_spec("dialog", "overall", toy_dataset.manifest.aspect("overall"))


ACCEPTANCE: dict[int, tuple[bool | None, str]] = {}


class _Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is pytest.skip.Exception:
            ACCEPTANCE[self.number] = (None, f"{self.title} (skipped: {exc})")
        else:
            ACCEPTANCE[self.number] = (exc_type is None, self.title)
        return False


@pytest.fixture
def criterion():
    """``with criterion(3, "title"):`` records a pass/fail line for the summary."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title = ACCEPTANCE[number]
        label = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {label}  {title}")
