import json

import pytest

from physiocue.fixtures import write_synthetic_dataset


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    """Four 45 s synthetic recordings (train, train, val, test) plus truth."""
    root = tmp_path_factory.mktemp("ds")
    manifest = write_synthetic_dataset(root, seed=0, n_subjects=4, duration_s=45.0)
    return manifest, json.loads((root / "truth.json").read_text())


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(line)
