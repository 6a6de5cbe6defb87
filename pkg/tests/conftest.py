import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--extended",
        action="store_true",
        default=False,
        help="run the long calibration studies (tens of minutes to ~1 hour)",
    )


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "extended: long-running calibration test, needs --extended"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--extended"):
        return
    skip = pytest.mark.skip(reason="needs --extended")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)
