import json
from importlib import resources

import pytest

from closedforms.geomech import load_system


def data_file(*parts):
    return str(resources.files("closedforms").joinpath("data", *parts))


def bundled_system(name):
    return load_system(data_file("systems", f"{name}.json"), name)


def catalog():
    with open(data_file("expressions.json")) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def expression_catalog():
    return catalog()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
