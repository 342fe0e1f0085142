import pytest

from affectbench.pipeline import extract_feature_tables, ingest
from affectbench.synth import SynthSpec, generate_corpus, multi_dataset_specs, write_corpus

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    entry = _CRITERIA.setdefault(n, [title, []])
    if rep.when == "call" or (rep.when == "setup" and (rep.failed or rep.skipped)):
        entry[1].append("skip" if rep.skipped else ("pass" if rep.passed else "fail"))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, outcomes = _CRITERIA[n]
        if "fail" in outcomes:
            status = "FAIL"
        elif outcomes and all(o == "skip" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}")


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(SynthSpec())


@pytest.fixture(scope="session")
def default_dir(tmp_path_factory, default_corpus):
    return write_corpus(default_corpus, tmp_path_factory.mktemp("synth") / "SYNTH")


@pytest.fixture(scope="session")
def default_segments(default_dir):
    return ingest([default_dir])[0]


@pytest.fixture(scope="session")
def default_tables(default_segments):
    return extract_feature_tables(default_segments, workers=4).tables


@pytest.fixture(scope="session")
def multi_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("multi")
    return [write_corpus(generate_corpus(s), root / s.dataset_id) for s in multi_dataset_specs()]


@pytest.fixture(scope="session")
def multi_loaded(multi_dirs):
    segments, loaded = ingest(multi_dirs)
    return segments, loaded


@pytest.fixture(scope="session")
def multi_tables(multi_loaded):
    return extract_feature_tables(multi_loaded[0], workers=4).tables
