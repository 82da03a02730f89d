import pytest

from celltype_ot.config import settings


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the long Monte Carlo checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo acceptance checks (enable with --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _isolated_project_root(tmp_path, monkeypatch):
    # Logs and default outputs land in the test's temp directory
    monkeypatch.setattr(settings, "PROJECT_ROOT", tmp_path)
