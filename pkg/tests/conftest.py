import pytest

from termrel.synthetic import synthetic_corpus
from termrel.textproc import SuffixLemmatizer, lemmatize_sentence

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def lem():
    return SuffixLemmatizer.default()


@pytest.fixture(scope="session")
def synth_train(lem):
    return synthetic_corpus(n_docs=40, seed=0).map_sentences(lambda s: lemmatize_sentence(s, lem))


@pytest.fixture(scope="session")
def synth_test(lem):
    return synthetic_corpus(n_docs=20, seed=1).map_sentences(lambda s: lemmatize_sentence(s, lem))


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""
    def record(name: str, ok: bool, detail: str = ""):
        _ACCEPTANCE.append((name, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
