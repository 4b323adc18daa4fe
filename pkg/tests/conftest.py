from collections import defaultdict

import pytest

from morphprobe.fixture import build_fixture
from morphprobe.ingest import (
    load_annotated_treebank,
    load_frequency_list,
    load_syllabified_lexicon,
    load_unimorph,
)
from morphprobe.schema import LanguageConfig


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory):
    return build_fixture(tmp_path_factory.mktemp("fixture"), seed=0)


@pytest.fixture(scope="session")
def entries(fixture_paths):
    ents, _ = load_unimorph(fixture_paths["unimorph"])
    return ents


@pytest.fixture(scope="session")
def readings(entries):
    out = defaultdict(list)
    for e in entries:
        out[e.form].append(e)
    return out


@pytest.fixture(scope="session")
def freq(fixture_paths):
    return load_frequency_list(fixture_paths["freq"])


@pytest.fixture(scope="session")
def lexicon(fixture_paths):
    return load_syllabified_lexicon(fixture_paths["lexicon"])


@pytest.fixture(scope="session")
def tokens(fixture_paths):
    return load_annotated_treebank(fixture_paths["treebank"])


def small_config(seed=1, **kw):
    kw.setdefault("min_samples", 1000)
    kw.setdefault("split_sizes", (700, 200, 100))
    return LanguageConfig("syn", seed=seed, **kw)


@pytest.fixture
def cfg():
    return small_config()


ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, text):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {text}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
