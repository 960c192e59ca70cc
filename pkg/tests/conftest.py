import os

import pytest

# keep the package logger out of the working tree while testing
os.environ.setdefault("ECKHAUS_KDV_LOG_DIR", os.path.join(os.path.dirname(__file__), ".logs"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the eps-sweeps and long integrations")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: eps-sweep or long integration, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
